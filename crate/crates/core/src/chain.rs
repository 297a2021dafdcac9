//! Finite transverse-field Ising chains.
//!
//! The unshifted Hamiltonian is `H₀ = −h Σ σ^z_n − J Σ σ^x_n σ^x_{n+1}`. It is
//! split into energy densities
//!
//! ```text
//! T_n = −h σ^z_n − (J/2) σ^x_n (σ^x_{n+1} + σ^x_{n−1}) − ε_n
//! ```
//!
//! where `ε_n = ⟨g|T_n + ε_n|g⟩` is calibrated site by site on the finite
//! chain, so that `⟨g|T_n|g⟩ = 0` for every `n` and `H = Σ T_n = H₀ − E_g`
//! annihilates the ground state. Open chains drop the missing neighbour
//! terms; a single site has no coupling at all.

use serde::{Deserialize, Serialize};

use crate::linalg::{lowest_eigenpair, symmetric_eigen, LanczosConfig, RealOperator};
use crate::operator::ChainOperator;
use crate::pauli::{Pauli, PauliString, UnitVector};
use crate::prelude::*;
use crate::state::{QuantumState, StateVector};
use crate::{Error, Result, DEFAULT_MAX_SITES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    Open,
}

/// Ground-state solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Largest chain accepted at all.
    pub max_sites: usize,
    /// Chains up to this size are diagonalised densely.
    pub dense_max_sites: usize,
    pub lanczos: LanczosConfig,
    /// Smallest accepted gap above the ground state.
    pub min_gap: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_sites: DEFAULT_MAX_SITES,
            dense_max_sites: 8,
            lanczos: LanczosConfig::default(),
            min_gap: 1e-8,
        }
    }
}

/// Ground state of `H₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    /// Lowest eigenvalue of the unshifted Hamiltonian, `E_g`.
    pub energy: f64,
    pub vector: StateVector,
    /// `‖(H₀ − E_g)|g⟩‖`.
    pub residual: f64,
    /// Distance to the next eigenvalue.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    sites: usize,
    h: f64,
    j: f64,
    boundary: Boundary,
    eps: Vec<f64>,
    ground: GroundState,
}

impl ChainModel {
    pub fn build(sites: usize, h: f64, j: f64, boundary: Boundary) -> Result<Self> {
        Self::build_with(sites, h, j, boundary, &SolverConfig::default())
    }

    /// Validates the parameters, solves for the ground state and calibrates
    /// `ε_n` and `E_g`.
    pub fn build_with(
        sites: usize,
        h: f64,
        j: f64,
        boundary: Boundary,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        if sites == 0 {
            return Err(Error::InvalidModel("chain needs at least one site".into()));
        }
        let capacity = cfg.max_sites.min(63);
        if sites > capacity {
            return Err(Error::Capacity {
                requested: sites,
                capacity,
            });
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidModel(format!("h = {h} must be positive")));
        }
        if !(j.is_finite() && j >= 0.0) {
            return Err(Error::InvalidModel(format!("J = {j} must be non-negative")));
        }
        if j > h {
            return Err(Error::InvalidModel(format!(
                "J = {j} exceeds h = {h}; only 0 <= J/h <= 1 is supported"
            )));
        }
        let raw: Vec<ChainOperator> = (0..sites)
            .map(|n| raw_density(sites, h, j, boundary, n))
            .collect();
        let h0 = raw
            .iter()
            .fold(ChainOperator::zero(sites), |acc, t| acc.add(t));
        let ground = solve_ground_state(&h0, cfg)?;
        let amps = ground.vector.amplitudes();
        let eps = raw.iter().map(|t| t.sandwich(amps).re).collect();
        Ok(ChainModel {
            sites,
            h,
            j,
            boundary,
            eps,
            ground,
        })
    }

    /// Builds from `h` and `λ = J/h`.
    pub fn with_lambda(sites: usize, h: f64, lambda: f64, boundary: Boundary) -> Result<Self> {
        Self::build(sites, h, lambda * h, boundary)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn j(&self) -> f64 {
        self.j
    }

    pub fn lambda(&self) -> f64 {
        self.j / self.h
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// `E_g`, the ground energy of the unshifted Hamiltonian.
    pub fn eg_shift(&self) -> f64 {
        self.ground.energy
    }

    /// Per-site calibration constants `ε_n`.
    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn ground(&self) -> &GroundState {
        &self.ground
    }

    pub fn ground_state(&self) -> QuantumState {
        QuantumState::Pure(self.ground.vector.clone())
    }

    /// Maps a signed site index onto the chain (modulo `N` when periodic).
    pub fn resolve_site(&self, site: i64) -> Result<usize> {
        let n = self.sites as i64;
        match self.boundary {
            Boundary::Periodic => Ok(site.rem_euclid(n) as usize),
            Boundary::Open if (0..n).contains(&site) => Ok(site as usize),
            Boundary::Open => Err(Error::SiteOutOfRange {
                site,
                sites: self.sites,
            }),
        }
    }

    /// Chain distance between two sites (circular when periodic).
    pub fn distance(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        match self.boundary {
            Boundary::Periodic => d.min(self.sites - d),
            Boundary::Open => d,
        }
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.sites {
            return Err(Error::SiteOutOfRange {
                site: site as i64,
                sites: self.sites,
            });
        }
        Ok(())
    }

    /// Calibrated energy density `T_n`.
    pub fn energy_density(&self, n: usize) -> Result<ChainOperator> {
        self.check_site(n)?;
        let raw = raw_density(self.sites, self.h, self.j, self.boundary, n);
        Ok(raw.sub(&ChainOperator::scalar(self.sites, C64::new(self.eps[n], 0.0))))
    }

    /// Shifted Hamiltonian `H = Σ_n T_n`.
    pub fn hamiltonian(&self) -> ChainOperator {
        (0..self.sites).fold(ChainOperator::zero(self.sites), |acc, n| {
            acc.add(&self.energy_density(n).expect("site in range"))
        })
    }

    /// `Σ T_k` over sites within `radius` of `center`, each counted once.
    pub fn local_hamiltonian(&self, center: usize, radius: usize) -> Result<ChainOperator> {
        self.check_site(center)?;
        let mut sites: Vec<usize> = Vec::new();
        let n = self.sites as i64;
        for off in -(radius as i64)..=(radius as i64) {
            let s = center as i64 + off;
            let s = match self.boundary {
                Boundary::Periodic => s.rem_euclid(n) as usize,
                Boundary::Open if (0..n).contains(&s) => s as usize,
                Boundary::Open => continue,
            };
            if !sites.contains(&s) {
                sites.push(s);
            }
        }
        sites.iter().try_fold(ChainOperator::zero(self.sites), |acc, &s| {
            Ok(acc.add(&self.energy_density(s)?))
        })
    }

    /// `n · σ` at `site`.
    pub fn local_pauli(&self, site: usize, axis: &UnitVector) -> Result<ChainOperator> {
        self.check_site(site)?;
        Ok(ChainOperator::axis(self.sites, site, axis))
    }

    /// Ground-state expectation `⟨g|O|g⟩` of a Hermitian operator.
    pub fn expectation(&self, op: &ChainOperator) -> Result<f64> {
        self.ground_state().expectation(op)
    }
}

/// `T_n + ε_n`, the uncalibrated energy density.
fn raw_density(sites: usize, h: f64, j: f64, boundary: Boundary, n: usize) -> ChainOperator {
    let mut terms = vec![(PauliString::single(n, Pauli::Z), C64::new(-h, 0.0))];
    if sites > 1 && j != 0.0 {
        let neighbours: Vec<usize> = match boundary {
            Boundary::Periodic => vec![(n + 1) % sites, (n + sites - 1) % sites],
            Boundary::Open => {
                let mut v = Vec::new();
                if n + 1 < sites {
                    v.push(n + 1);
                }
                if n > 0 {
                    v.push(n - 1);
                }
                v
            }
        };
        for m in neighbours {
            let xx = PauliString::from_ops([(n, Pauli::X), (m, Pauli::X)]);
            terms.push((xx, C64::new(-0.5 * j, 0.0)));
        }
    }
    ChainOperator::from_terms(sites, terms)
}

/// Real matrix-free view of a Pauli sum whose matrix is real: a diagonal
/// part plus signed bit-flip terms.
pub(crate) struct RealPauliSum {
    dim: usize,
    diag: Vec<f64>,
    flips: Vec<(u64, u64, f64)>,
}

impl RealPauliSum {
    pub(crate) fn new(op: &ChainOperator) -> Result<Self> {
        if !op.is_real() {
            return Err(Error::OperatorProperty {
                property: "real",
                deviation: op.hermiticity_defect(),
            });
        }
        let dim = op.dim();
        let mut diag = vec![0.0; dim];
        let mut flips = Vec::new();
        for (p, c) in op.terms() {
            // i^{|x∧z|} is real here, so c·i^y is the real prefactor
            let c = (*c * crate::pauli::I_POWERS[(p.y_count() & 3) as usize]).re;
            if p.x == 0 {
                for (b, d) in diag.iter_mut().enumerate() {
                    let odd = (p.z & b as u64).count_ones() & 1 == 1;
                    *d += if odd { -c } else { c };
                }
            } else {
                flips.push((p.x, p.z, c));
            }
        }
        Ok(RealPauliSum { dim, diag, flips })
    }

    fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut a = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            for i in 0..n {
                a[i * n + j] = col[i];
            }
            e[j] = 0.0;
        }
        a
    }
}

impl RealOperator for RealPauliSum {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for ((o, d), x) in out.iter_mut().zip(&self.diag).zip(v) {
            *o = d * x;
        }
        for &(x, z, c) in &self.flips {
            for (b, vb) in v.iter().enumerate() {
                let odd = (z & b as u64).count_ones() & 1 == 1;
                out[b ^ x as usize] += if odd { -c * vb } else { c * vb };
            }
        }
    }
}

/// Lowest eigenpair of a real Hermitian Pauli sum, with gap check and the
/// global phase fixed.
pub fn solve_ground_state(h0: &ChainOperator, cfg: &SolverConfig) -> Result<GroundState> {
    let sites = h0.sites();
    let op = RealPauliSum::new(h0)?;
    let dim = op.dim();
    let (energy, vector, gap) = if sites <= cfg.dense_max_sites || dim <= 2 {
        let (vals, vecs) = symmetric_eigen(&op.to_dense(), dim)?;
        let v: Vec<f64> = (0..dim).map(|i| vecs[i * dim]).collect();
        let gap = if dim > 1 { vals[1] - vals[0] } else { f64::INFINITY };
        (vals[0], v, gap)
    } else {
        let start = start_vector(dim);
        let low = lowest_eigenpair(&op, &start, &[], &cfg.lanczos)?;
        // the gap only needs a few digits
        let loose = LanczosConfig {
            tolerance: 1e-6,
            ..cfg.lanczos
        };
        let next = lowest_eigenpair(&op, &start, &[&low.vector], &loose)?;
        (low.value, low.vector, next.value - low.value)
    };
    if gap < cfg.min_gap {
        return Err(Error::DegenerateGroundState { gap });
    }
    let mut hv = vec![0.0; dim];
    op.apply(&vector, &mut hv);
    let residual = hv
        .iter()
        .zip(&vector)
        .map(|(a, x)| (a - energy * x) * (a - energy * x))
        .sum::<f64>()
        .sqrt();
    let amps = vector.into_iter().map(|x| C64::new(x, 0.0)).collect();
    let mut state = StateVector::from_amplitudes_unchecked(sites, amps);
    state.normalize();
    state.fix_global_phase();
    Ok(GroundState {
        energy,
        vector: state,
        residual,
        gap,
    })
}

/// Deterministic start vector with weight on every basis state.
fn start_vector(dim: usize) -> Vec<f64> {
    let mut s = 0x9e37_79b9_7f4a_7c15u64;
    (0..dim)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            1.0 + ((s >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        })
        .collect()
}
