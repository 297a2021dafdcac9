//! Outcome-conditioned local cooling of the supplier site.
//!
//! After measuring `P(μ)` the supplier applies a local operation set
//! `{M(α, μ)}` with `Σ_α M†M = I` and is left with
//!
//! ```text
//! ρ_c = Σ_{μ,α} M(α,μ) P(μ)|g⟩⟨g|P(μ) M†(α,μ)
//! ```
//!
//! The residual energy `E_r` is the minimum of `Tr[ρ_c H_S]` over the
//! operation family, with `H_S = T_{s−1} + T_s + T_{s+1}`.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::chain::ChainModel;
use crate::operator::{ChainOperator, Mat2};
use crate::optimize::{nelder_mead, NelderMeadConfig};
use crate::pauli::{Pauli, PauliString};
use crate::prelude::*;
use crate::protocol::{measure_supplier, OutcomeEnsemble, PartyConfig, PROBABILITY_FLOOR};
use crate::state::{Branch, QuantumState};
use crate::{Error, Result};

/// Tolerance on `Σ_α M†M = I`.
pub const COMPLETENESS_TOLERANCE: f64 = 1e-12;

/// Operation elements `M(α, μ)` for `μ = 0, 1`, acting on the supplier site.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOperationSet {
    ops: [Vec<Mat2>; 2],
}

impl LocalOperationSet {
    pub fn new(ops: [Vec<Mat2>; 2]) -> Result<Self> {
        let set = LocalOperationSet { ops };
        let deviation = set.completeness_defect();
        if !(deviation <= COMPLETENESS_TOLERANCE) {
            return Err(Error::IncompleteOperations { deviation });
        }
        Ok(set)
    }

    pub fn identity() -> Self {
        LocalOperationSet {
            ops: [vec![Mat2::identity()], vec![Mat2::identity()]],
        }
    }

    pub fn unitaries(u0: Mat2, u1: Mat2) -> Result<Self> {
        Self::new([vec![u0], vec![u1]])
    }

    pub fn elements(&self, mu: u8) -> &[Mat2] {
        &self.ops[mu as usize]
    }

    /// Largest entry of `Σ_α M†M − I` over both outcomes.
    pub fn completeness_defect(&self) -> f64 {
        self.ops
            .iter()
            .map(|set| {
                set.iter()
                    .fold(Mat2::zero(), |acc, m| acc.add(&m.adjoint().mul(m)))
                    .distance(&Mat2::identity())
            })
            .fold(0.0, f64::max)
    }
}

/// The optimal pair for `U_S = σ^y`: each element rotates the measured
/// `σ^y` eigenstate back to spin up.
pub fn closed_form_optimal_ops() -> LocalOperationSet {
    let r = FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| C64::new(re * r, im * r);
    LocalOperationSet {
        ops: [
            vec![Mat2([[c(1.0, 0.0), c(0.0, -1.0)], [c(1.0, 0.0), c(0.0, 1.0)]])],
            vec![Mat2([[c(1.0, 0.0), c(0.0, 1.0)], [c(1.0, 0.0), c(0.0, -1.0)]])],
        ],
    }
}

/// Applies `M(α, μ)` at `site` to every branch of an outcome ensemble.
pub fn apply_local_operations(
    ensemble: &OutcomeEnsemble,
    site: usize,
    ops: &LocalOperationSet,
) -> Result<QuantumState> {
    let deviation = ops.completeness_defect();
    if !(deviation <= COMPLETENESS_TOLERANCE) {
        return Err(Error::IncompleteOperations { deviation });
    }
    let sites = ensemble.branches[0].state.sites();
    let mut branches = Vec::new();
    for b in &ensemble.branches {
        for m in ops.elements(b.mu) {
            let mut psi = b.state.clone();
            psi.apply_site_matrix(site, m);
            let w = b.probability * psi.norm_sqr();
            if w < PROBABILITY_FLOOR {
                continue;
            }
            psi.normalize();
            branches.push(Branch {
                weight: w,
                state: psi,
            });
        }
    }
    QuantumState::mixed(sites, branches)
}

/// `ρ_c` for the given operation set.
pub fn cooling_state(
    model: &ChainModel,
    supplier: &PartyConfig,
    ops: &LocalOperationSet,
) -> Result<QuantumState> {
    let (ensemble, _) = measure_supplier(model, supplier)?;
    apply_local_operations(&ensemble, model.resolve_site(supplier.site)?, ops)
}

/// `Tr[ρ H_S]` for the supplier at `site`.
pub fn supplier_energy(model: &ChainModel, site: usize, rho: &QuantumState) -> Result<f64> {
    rho.expectation(&model.local_hamiltonian(site, 1)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperationFamily {
    /// One single-qubit unitary per outcome (three Euler angles each).
    #[default]
    Unitary,
    /// Two operation elements per outcome from a 4×2 isometry.
    TwoElement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingConfig {
    pub family: OperationFamily,
    /// Grid points per Euler angle for seeding.
    pub grid: usize,
    /// Objective tolerance of the local refinement.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CoolingConfig {
    fn default() -> Self {
        CoolingConfig {
            family: OperationFamily::Unitary,
            grid: 6,
            tolerance: 1e-8,
            max_iterations: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoolingResult {
    /// Minimised `Tr[ρ_c H_S]` from the optimizer's objective.
    pub e_r: f64,
    /// `Tr[ρ_c H_S]` recomputed on the full chain state for `best_ops`.
    pub rho_c_energy: f64,
    pub best_ops: LocalOperationSet,
    /// Euler angles per outcome for the unitary family.
    pub angles: Option<[[f64; 3]; 2]>,
    /// Best objective value after seeding and after every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Serializable summary of a cooling run with its bound check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingReport {
    pub e_r: f64,
    pub rho_c_energy: f64,
    pub e_c_reference: f64,
    pub bound_satisfied: bool,
    pub angles: Option<[[f64; 3]; 2]>,
    pub trace: Vec<f64>,
    pub converged: bool,
}

impl CoolingResult {
    /// Checks `E_r ≥ E_C − 1e-9` against a reference consumer total.
    pub fn report(&self, e_c_reference: f64) -> CoolingReport {
        let worst = self.trace.iter().copied().fold(self.e_r, f64::min);
        CoolingReport {
            e_r: self.e_r,
            rho_c_energy: self.rho_c_energy,
            e_c_reference,
            bound_satisfied: worst >= e_c_reference - 1e-9,
            angles: self.angles,
            trace: self.trace.clone(),
            converged: self.converged,
        }
    }
}

/// `Rz(a) Ry(b) Rz(c)`.
pub fn euler_unitary(a: f64, b: f64, c: f64) -> Mat2 {
    let rz = |t: f64| {
        let (s, co) = (0.5 * t).sin_cos();
        Mat2([
            [C64::new(co, -s), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(co, s)],
        ])
    };
    let (s, co) = (0.5 * b).sin_cos();
    let ry = Mat2([
        [C64::new(co, 0.0), C64::new(-s, 0.0)],
        [C64::new(s, 0.0), C64::new(co, 0.0)],
    ]);
    rz(a).mul(&ry).mul(&rz(c))
}

/// Two elements from 16 reals: the columns of a 4×2 matrix made orthonormal
/// by Gram–Schmidt, split into the upper and lower 2×2 blocks.
pub fn isometry_pair(p: &[f64]) -> [Mat2; 2] {
    let col = |k: usize| -> [C64; 4] {
        core::array::from_fn(|i| C64::new(p[8 * k + 2 * i], p[8 * k + 2 * i + 1]))
    };
    let inner = |a: &[C64; 4], b: &[C64; 4]| -> C64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    let normalize = |v: &mut [C64; 4]| {
        let n = inner(v, v).re.sqrt();
        let n = if n > 1e-300 { n } else { 1.0 };
        v.iter_mut().for_each(|x| *x /= n);
    };
    let mut u = col(0);
    if inner(&u, &u).re < 1e-300 {
        u = [C64::new(1.0, 0.0), C64::default(), C64::default(), C64::default()];
    }
    normalize(&mut u);
    let mut v = col(1);
    let c = inner(&u, &v);
    v.iter_mut().zip(&u).for_each(|(x, y)| *x -= c * y);
    if inner(&v, &v).re < 1e-24 {
        // pick any direction orthogonal to u
        v = [-u[1].conj(), u[0].conj(), C64::default(), C64::default()];
        if inner(&v, &v).re < 1e-24 {
            v = [C64::default(), C64::default(), -u[3].conj(), u[2].conj()];
        }
    }
    normalize(&mut v);
    [
        Mat2([[u[0], v[0]], [u[1], v[1]]]),
        Mat2([[u[2], v[2]], [u[3], v[3]]]),
    ]
}

fn isometry_params(m: &Mat2) -> Vec<f64> {
    let mut p = vec![0.0; 16];
    for k in 0..2 {
        for i in 0..2 {
            p[8 * k + 2 * i] = m.0[i][k].re;
            p[8 * k + 2 * i + 1] = m.0[i][k].im;
        }
    }
    p
}

/// `Tr[M ρ_μ M† H_S]` as a function of the 2×2 element `M`, reduced to four
/// 2×2 moments `Q_a` with `H_S = Σ_a σ_a ⊗ B_a`.
struct BranchObjective {
    moments: [Mat2; 4],
}

impl BranchObjective {
    fn new(h_s: &ChainOperator, site: usize, psi_unnormalized: &[C64]) -> Self {
        let sites = h_s.sites();
        let bit = 1u64 << site;
        let mut rest: [ChainOperator; 4] = core::array::from_fn(|_| ChainOperator::zero(sites));
        for (p, c) in h_s.terms() {
            let a = match p.at(site) {
                Pauli::I => 0,
                Pauli::X => 1,
                Pauli::Y => 2,
                Pauli::Z => 3,
            };
            let outer = PauliString {
                x: p.x & !bit,
                z: p.z & !bit,
            };
            rest[a] = rest[a].add(&ChainOperator::from_terms(sites, [(outer, *c)]));
        }
        let moments = core::array::from_fn(|a| {
            let mut q = Mat2::zero();
            for j in 0..2 {
                for k in 0..2 {
                    // Q[j][k] = Tr[ρ (|k⟩⟨j| ⊗ B_a)]
                    let mut e = Mat2::zero();
                    e.0[k][j] = C64::new(1.0, 0.0);
                    let op = ChainOperator::site_matrix(sites, site, &e).mul(&rest[a]);
                    q.0[j][k] = op.sandwich(psi_unnormalized);
                }
            }
            q
        });
        BranchObjective { moments }
    }

    fn value(&self, elements: &[Mat2]) -> f64 {
        let paulis = [
            Mat2::identity(),
            Mat2([[C64::new(0.0, 0.0), C64::new(1.0, 0.0)], [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]]),
            Mat2([[C64::new(0.0, 0.0), C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), C64::new(0.0, 0.0)]]),
            Mat2([[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(-1.0, 0.0)]]),
        ];
        let mut total = 0.0;
        for m in elements {
            let md = m.adjoint();
            for (q, s) in self.moments.iter().zip(&paulis) {
                let t = m.mul(q).mul(&md).mul(s);
                total += (t.0[0][0] + t.0[1][1]).re;
            }
        }
        total
    }
}

/// Minimises `Tr[ρ_c H_S]` over the chosen operation family.
///
/// The objective separates over `μ`, so each outcome is seeded from its own
/// Euler-angle grid and refined by Nelder–Mead. The reported trace is the
/// sum over outcomes of the per-outcome best values.
pub fn minimize_residual(
    model: &ChainModel,
    supplier: &PartyConfig,
    cfg: &CoolingConfig,
) -> Result<CoolingResult> {
    let site = model.resolve_site(supplier.site)?;
    let (ensemble, _) = measure_supplier(model, supplier)?;
    let h_s = model.local_hamiltonian(site, 1)?;
    let mut objectives: [Option<BranchObjective>; 2] = [None, None];
    for b in &ensemble.branches {
        let amps: Vec<C64> = b
            .state
            .amplitudes()
            .iter()
            .map(|a| a * b.probability.sqrt())
            .collect();
        objectives[b.mu as usize] = Some(BranchObjective::new(&h_s, site, &amps));
    }

    let nm = NelderMeadConfig {
        step: 0.3,
        f_tolerance: cfg.tolerance,
        x_tolerance: 1e-7,
        max_iterations: cfg.max_iterations,
    };
    let grid = cfg.grid.max(2);
    let mut traces: Vec<Vec<f64>> = Vec::new();
    let mut chosen: [Vec<Mat2>; 2] = [vec![Mat2::identity()], vec![Mat2::identity()]];
    let mut angles = [[0.0; 3]; 2];
    let mut iterations = 0;
    let mut evaluations = 0;
    let mut converged = true;
    for mu in 0..2 {
        let Some(obj) = &objectives[mu] else {
            continue;
        };
        let f = |x: &[f64]| obj.value(&[euler_unitary(x[0], x[1], x[2])]);
        let mut seed = [0.0; 3];
        let mut seed_value = f64::INFINITY;
        for ia in 0..grid {
            for ib in 0..grid {
                for ic in 0..grid {
                    let x = [
                        2.0 * PI * ia as f64 / grid as f64,
                        PI * ib as f64 / (grid - 1) as f64,
                        2.0 * PI * ic as f64 / grid as f64,
                    ];
                    let v = f(&x);
                    evaluations += 1;
                    if v < seed_value {
                        seed_value = v;
                        seed = x;
                    }
                }
            }
        }
        let min = nelder_mead(f, &seed, &nm);
        evaluations += min.evaluations;
        iterations += min.trace.len();
        converged &= min.converged;
        let mut trace = vec![seed_value];
        trace.extend(min.trace.iter().map(|&v| v.min(seed_value)));
        angles[mu] = [min.x[0], min.x[1], min.x[2]];
        chosen[mu] = vec![euler_unitary(min.x[0], min.x[1], min.x[2])];

        if cfg.family == OperationFamily::TwoElement {
            let g = |p: &[f64]| obj.value(&isometry_pair(p));
            let start = isometry_params(&chosen[mu][0]);
            let base = g(&start);
            let min2 = nelder_mead(g, &start, &NelderMeadConfig { step: 0.1, ..nm });
            evaluations += min2.evaluations;
            iterations += min2.trace.len();
            converged &= min2.converged;
            let floor = trace.last().copied().unwrap_or(base).min(base);
            trace.extend(min2.trace.iter().map(|&v| v.min(floor)));
            if min2.value < floor {
                chosen[mu] = isometry_pair(&min2.x).to_vec();
            }
        }
        traces.push(trace);
    }

    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    let trace: Vec<f64> = (0..len)
        .map(|i| traces.iter().map(|t| t[i.min(t.len() - 1)]).sum())
        .collect();
    let [c0, c1] = chosen;
    let best_ops = LocalOperationSet::new([c0, c1])?;
    let e_r = objectives
        .iter()
        .enumerate()
        .filter_map(|(mu, o)| o.as_ref().map(|o| o.value(best_ops.elements(mu as u8))))
        .sum();
    let rho_c = apply_local_operations(&ensemble, site, &best_ops)?;
    let rho_c_energy = rho_c.expectation(&h_s)?;
    Ok(CoolingResult {
        e_r,
        rho_c_energy,
        best_ops,
        angles: (cfg.family == OperationFamily::Unitary).then_some(angles),
        trace,
        iterations,
        evaluations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Boundary;
    use crate::pauli::UnitVector;

    #[test]
    fn euler_and_isometry_are_complete() {
        for (a, b, c) in [(0.1, 0.2, 0.3), (4.0, -1.0, 2.5)] {
            let u = euler_unitary(a, b, c);
            assert!(u.adjoint().mul(&u).distance(&Mat2::identity()) < 1e-14);
        }
        let p: Vec<f64> = (0..16).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let [m0, m1] = isometry_pair(&p);
        let s = m0.adjoint().mul(&m0).add(&m1.adjoint().mul(&m1));
        assert!(s.distance(&Mat2::identity()) < 1e-14);
    }

    #[test]
    fn incomplete_sets_are_rejected() {
        let half = Mat2::identity().scale(C64::new(0.5, 0.0));
        assert!(matches!(
            LocalOperationSet::new([vec![half], vec![Mat2::identity()]]),
            Err(Error::IncompleteOperations { .. })
        ));
        assert!(closed_form_optimal_ops().completeness_defect() < 1e-15);
    }

    #[test]
    fn reduced_objective_matches_full_state() {
        let m = ChainModel::build(6, 1.0, 0.8, Boundary::Periodic).unwrap();
        let s = PartyConfig::supplier(2, UnitVector::from_angles(1.1, 0.4));
        let (ens, _) = measure_supplier(&m, &s).unwrap();
        let h_s = m.local_hamiltonian(2, 1).unwrap();
        let u = euler_unitary(0.3, 1.2, -0.7);
        let mut reduced = 0.0;
        for b in &ens.branches {
            let amps: Vec<C64> = b.state.amplitudes().iter().map(|a| a * b.probability.sqrt()).collect();
            reduced += BranchObjective::new(&h_s, 2, &amps).value(&[u]);
        }
        let ops = LocalOperationSet::unitaries(u, u).unwrap();
        let full = supplier_energy(&m, 2, &cooling_state(&m, &s, &ops).unwrap()).unwrap();
        assert!((reduced - full).abs() < 1e-12);
    }
}
