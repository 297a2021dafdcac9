//! Pure states and branch ensembles on the `2^N`-dimensional chain space.
//!
//! Mixed states produced by the protocols are always finite convex
//! combinations of pure branches (`ρ = Σ_k w_k |ψ_k⟩⟨ψ_k|`). They are kept in
//! that form; a dense density matrix is only built on request for small
//! chains.

use crate::linalg::symmetric_eigenvalues;
use crate::operator::{ChainOperator, Mat2};
use crate::prelude::*;
use crate::{Error, Result};

/// Tolerance on `‖ψ‖ = 1` and `Tr ρ = 1`.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Threshold above which an expectation's imaginary part is reported as a bug.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;
/// Dense density matrices are only materialised up to this many sites.
pub const DENSE_DENSITY_MAX_SITES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    sites: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(sites: usize, amps: Vec<C64>) -> Result<Self> {
        let s = Self::from_amplitudes_unchecked(sites, amps);
        if s.amps.len() != 1usize << sites {
            return Err(Error::DimensionMismatch {
                expected: 1 << sites,
                found: s.amps.len(),
            });
        }
        let norm = s.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidState(format!("norm {norm} is not 1")));
        }
        Ok(s)
    }

    pub(crate) fn from_amplitudes_unchecked(sites: usize, amps: Vec<C64>) -> Self {
        StateVector { sites, amps }
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(sites: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << sites];
        amps[index] = C64::new(1.0, 0.0);
        StateVector { sites, amps }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit norm and returns the squared norm before scaling.
    /// Returns `None` for the zero vector.
    pub fn normalize(&mut self) -> Option<f64> {
        let n2 = self.norm_sqr();
        if n2 <= 0.0 {
            return None;
        }
        let inv = 1.0 / n2.sqrt();
        self.amps.iter_mut().for_each(|a| *a *= inv);
        Some(n2)
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Applies a 2×2 block to one site in place.
    pub fn apply_site_matrix(&mut self, site: usize, m: &Mat2) {
        let bit = 1usize << site;
        let [[a, b], [c, d]] = m.0;
        for i in 0..self.amps.len() {
            if i & bit != 0 {
                continue;
            }
            let j = i | bit;
            let (u, v) = (self.amps[i], self.amps[j]);
            self.amps[i] = a * u + b * v;
            self.amps[j] = c * u + d * v;
        }
    }

    pub fn apply(&self, op: &ChainOperator) -> Result<StateVector> {
        op.apply(self)
    }

    /// Reduced 2×2 density matrix of one site.
    pub fn site_density(&self, site: usize) -> Mat2 {
        let bit = 1usize << site;
        let mut rho = Mat2::zero();
        for i in 0..self.amps.len() {
            if i & bit != 0 {
                continue;
            }
            let j = i | bit;
            let (u, v) = (self.amps[i], self.amps[j]);
            rho.0[0][0] += u * u.conj();
            rho.0[0][1] += u * v.conj();
            rho.0[1][0] += v * u.conj();
            rho.0[1][1] += v * v.conj();
        }
        rho
    }

    /// Multiplies by a global phase so the largest-magnitude amplitude (first
    /// one on ties) is real and positive.
    pub fn fix_global_phase(&mut self) {
        let mut best = 0;
        let mut best_mag = -1.0;
        for (k, a) in self.amps.iter().enumerate() {
            let m = a.norm_sqr();
            if m > best_mag {
                best_mag = m;
                best = k;
            }
        }
        let a = self.amps[best];
        if a.norm() == 0.0 {
            return;
        }
        let phase = a.conj() / a.norm();
        self.amps.iter_mut().for_each(|x| *x *= phase);
        self.amps[best] = C64::new(self.amps[best].norm(), 0.0);
    }
}

/// One weighted branch `w |ψ⟩⟨ψ|` of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub weight: f64,
    pub state: StateVector,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(StateVector),
    Mixed { sites: usize, branches: Vec<Branch> },
}

impl QuantumState {
    /// Builds a mixed state from weighted, normalised branches.
    pub fn mixed(sites: usize, branches: Vec<Branch>) -> Result<Self> {
        for b in &branches {
            if b.state.sites() != sites {
                return Err(Error::DimensionMismatch {
                    expected: 1 << sites,
                    found: b.state.dim(),
                });
            }
            if !(b.weight >= 0.0) {
                return Err(Error::InvalidState(format!("negative weight {}", b.weight)));
            }
            if (b.state.norm() - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::InvalidState("branch state not normalised".into()));
            }
        }
        let s = QuantumState::Mixed { sites, branches };
        let tr = s.trace();
        if (tr - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        Ok(s)
    }

    pub fn sites(&self) -> usize {
        match self {
            QuantumState::Pure(v) => v.sites(),
            QuantumState::Mixed { sites, .. } => *sites,
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, QuantumState::Pure(_))
    }

    pub fn trace(&self) -> f64 {
        match self {
            QuantumState::Pure(v) => v.norm_sqr(),
            QuantumState::Mixed { branches, .. } => branches
                .iter()
                .map(|b| b.weight * b.state.norm_sqr())
                .sum(),
        }
    }

    pub fn branches(&self) -> Vec<(f64, &StateVector)> {
        match self {
            QuantumState::Pure(v) => vec![(1.0, v)],
            QuantumState::Mixed { branches, .. } => {
                branches.iter().map(|b| (b.weight, &b.state)).collect()
            }
        }
    }

    /// `Tr[ρ O]` as a complex number, without the hermiticity check.
    pub fn expectation_complex(&self, op: &ChainOperator) -> Result<C64> {
        op.expect_sites(self.sites())?;
        Ok(self
            .branches()
            .into_iter()
            .map(|(w, v)| op.sandwich(v.amplitudes()) * w)
            .sum())
    }

    /// `Tr[ρ O]` for Hermitian `O`.
    pub fn expectation(&self, op: &ChainOperator) -> Result<f64> {
        let value = self.expectation_complex(op)?;
        if value.im.abs() > IMAGINARY_TOLERANCE {
            return Err(Error::ImaginaryResidue {
                residue: value.im.abs(),
            });
        }
        Ok(value.re)
    }

    /// Reduced density matrix of one site.
    pub fn site_density(&self, site: usize) -> Mat2 {
        self.branches()
            .into_iter()
            .fold(Mat2::zero(), |acc, (w, v)| {
                acc.add(&v.site_density(site).scale(C64::new(w, 0.0)))
            })
    }

    /// Dense row-major density matrix `ρ_{ij}`.
    pub fn density_matrix(&self) -> Result<Vec<C64>> {
        let sites = self.sites();
        if sites > DENSE_DENSITY_MAX_SITES {
            return Err(Error::Capacity {
                requested: sites,
                capacity: DENSE_DENSITY_MAX_SITES,
            });
        }
        let dim = 1usize << sites;
        let mut rho = vec![C64::new(0.0, 0.0); dim * dim];
        for (w, v) in self.branches() {
            let a = v.amplitudes();
            for i in 0..dim {
                for j in 0..dim {
                    rho[i * dim + j] += a[i] * a[j].conj() * w;
                }
            }
        }
        Ok(rho)
    }

    /// Checks the density-operator invariants on the dense matrix: Hermitian,
    /// unit trace and eigenvalues `≥ −1e-10`. Returns the smallest eigenvalue.
    pub fn check_density_invariants(&self) -> Result<f64> {
        check_density_matrix(&self.density_matrix()?, self.sites())
    }
}

/// Invariant check for a dense row-major density matrix on `sites` qubits:
/// Hermitian, unit trace and eigenvalues `≥ −1e-10`. Returns the smallest
/// eigenvalue.
pub fn check_density_matrix(rho: &[C64], sites: usize) -> Result<f64> {
    if sites > DENSE_DENSITY_MAX_SITES {
        return Err(Error::Capacity {
            requested: sites,
            capacity: DENSE_DENSITY_MAX_SITES,
        });
    }
    let dim = 1usize << sites;
    if rho.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            found: rho.len(),
        });
    }
    let mut herm: f64 = 0.0;
    let mut tr = C64::new(0.0, 0.0);
    for i in 0..dim {
        tr += rho[i * dim + i];
        for j in 0..dim {
            herm = herm.max((rho[i * dim + j] - rho[j * dim + i].conj()).norm());
        }
    }
    if herm > NORM_TOLERANCE {
        return Err(Error::InvalidState(format!("not Hermitian ({herm:e})")));
    }
    if (tr.re - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::InvalidState(format!("trace {}", tr.re)));
    }
    // Hermitian ρ = A + iB embeds as the real symmetric [[A, −B], [B, A]],
    // whose spectrum is that of ρ with every eigenvalue doubled.
    let n2 = 2 * dim;
    let mut real = vec![0.0; n2 * n2];
    for i in 0..dim {
        for j in 0..dim {
            let z = rho[i * dim + j];
            real[i * n2 + j] = z.re;
            real[(i + dim) * n2 + (j + dim)] = z.re;
            real[i * n2 + (j + dim)] = -z.im;
            real[(i + dim) * n2 + j] = z.im;
        }
    }
    let evals = symmetric_eigenvalues(&real, n2)?;
    let min = evals.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-10 {
        return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
    }
    Ok(min)
}

impl From<StateVector> for QuantumState {
    fn from(v: StateVector) -> Self {
        QuantumState::Pure(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Pauli;

    #[test]
    fn basis_state_expectations() {
        let s = QuantumState::Pure(StateVector::basis(3, 0b010));
        let z1 = ChainOperator::pauli(3, 1, Pauli::Z);
        let z0 = ChainOperator::pauli(3, 0, Pauli::Z);
        assert_eq!(s.expectation(&z1).unwrap(), -1.0);
        assert_eq!(s.expectation(&z0).unwrap(), 1.0);
    }

    #[test]
    fn non_hermitian_operator_is_flagged() {
        let s = QuantumState::Pure(StateVector::basis(1, 0));
        let op = ChainOperator::pauli(1, 0, Pauli::Z).scale(C64::new(0.0, 1.0));
        assert!(matches!(
            s.expectation(&op),
            Err(Error::ImaginaryResidue { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = QuantumState::Pure(StateVector::basis(2, 0));
        let op = ChainOperator::pauli(3, 0, Pauli::Z);
        assert!(matches!(
            s.expectation(&op),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn site_matrix_application_matches_operator() {
        let mut v = StateVector::basis(3, 0);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let m = Mat2([
            [C64::new(h, 0.0), C64::new(0.0, -h)],
            [C64::new(h, 0.0), C64::new(0.0, h)],
        ]);
        let via_op = ChainOperator::site_matrix(3, 1, &m).apply(&v).unwrap();
        v.apply_site_matrix(1, &m);
        for (a, b) in v.amplitudes().iter().zip(via_op.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn mixed_state_invariants() {
        let a = StateVector::basis(2, 0);
        let mut b = StateVector::basis(2, 3);
        b.apply_site_matrix(0, &Mat2([
            [C64::new(0.6, 0.0), C64::new(0.0, 0.8)],
            [C64::new(0.0, 0.8), C64::new(0.6, 0.0)],
        ]));
        let rho = QuantumState::mixed(
            2,
            vec![
                Branch { weight: 0.25, state: a },
                Branch { weight: 0.75, state: b },
            ],
        )
        .unwrap();
        let min = rho.check_density_invariants().unwrap();
        assert!(min > -1e-12);
        assert!((rho.trace() - 1.0).abs() < 1e-14);
        assert!(QuantumState::mixed(2, vec![Branch { weight: 0.5, state: StateVector::basis(2, 1) }]).is_err());
    }

    #[test]
    fn phase_convention() {
        let mut v = StateVector::from_amplitudes_unchecked(
            1,
            vec![C64::new(0.0, 0.6), C64::new(0.0, -0.8)],
        );
        v.fix_global_phase();
        assert!((v.amplitudes()[1] - C64::new(0.8, 0.0)).norm() < 1e-15);
        assert!((v.amplitudes()[0] - C64::new(-0.6, 0.0)).norm() < 1e-15);
    }
}
