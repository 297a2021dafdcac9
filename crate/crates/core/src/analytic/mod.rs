//! Infinite transverse-field Ising chain at `λ = J/h ∈ [0, 1]`.
//!
//! The basic correlator is
//!
//! ```text
//! G(n) = (1/π) ∫₀^π [cos kn + λ cos k(n+1)] / √(1 + λ² + 2λ cos k) dk
//! ```
//!
//! from which `⟨σ^z⟩ = G(0)`, `⟨σ^x_n σ^x_{n±1}⟩ = G(−1)` and the `y-y`
//! correlator `Δ(n) = det[G(i − j + 1)]_{i,j<n}` follow. At `λ = 1` the
//! integrand reduces to `cos((2n+1)k/2)`, giving `G(n) = (2/π)(−1)^n/(2n+1)`,
//! and `Δ(n)` has a closed product form decaying as `n^{−9/4}`.

pub mod quadrature;

use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::linalg::log_determinant;
use crate::prelude::*;
use crate::{Error, Result};
use quadrature::{integrate, QuadratureConfig};

/// Constant of the large-`n` asymptotics of `Δ(n)`, known to three figures.
pub const CRITICAL_C: f64 = 1.28;

/// Largest determinant order evaluated by default.
pub const DEFAULT_MAX_ORDER: usize = 200;

/// Default consumer spacing in the distributed-energy sum.
pub const DEFAULT_SPACING: usize = 5;

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidInput(format!(
            "lambda = {lambda} outside the allowed range [0, 1]"
        )));
    }
    Ok(())
}

/// `1 + λ² + 2λ cos k`, written to avoid cancellation near `λ = 1, k = π`.
fn denominator_sq(lambda: f64, k: f64) -> f64 {
    let c = (0.5 * k).cos();
    (1.0 - lambda) * (1.0 - lambda) + 4.0 * lambda * c * c
}

/// `G(n)` with the default quadrature tolerance.
pub fn g_fn(n: i64, lambda: f64) -> Result<f64> {
    g_fn_with(n, lambda, &QuadratureConfig::default())
}

pub fn g_fn_with(n: i64, lambda: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let nf = n as f64;
    let r = if lambda == 1.0 {
        let w = nf + 0.5;
        integrate(|k: f64| (w * k).cos(), 0.0, PI, cfg)?
    } else {
        integrate(
            |k: f64| ((k * nf).cos() + lambda * (k * (nf + 1.0)).cos()) / denominator_sq(lambda, k).sqrt(),
            0.0,
            PI,
            cfg,
        )?
    };
    Ok(r.value / PI)
}

/// `L(n) = (1/π) ∫₀^π cos kn / √(1 + λ² + 2λ cos k) dk`, so that
/// `G(n) = L(n) + λ L(n+1)`. Diverges at `λ = 1`, where it is refused.
pub fn l_fn(n: i64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda == 1.0 {
        return Err(Error::InvalidInput("L(n) diverges at lambda = 1".into()));
    }
    let nf = n as f64;
    let r = integrate(
        |k: f64| (k * nf).cos() / denominator_sq(lambda, k).sqrt(),
        0.0,
        PI,
        &QuadratureConfig::default(),
    )?;
    Ok(r.value / PI)
}

/// `(2/π)(−1)^n/(2n+1)`.
pub fn g_critical(n: i64) -> f64 {
    let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    2.0 / PI * sign / (2 * n + 1) as f64
}

/// `G(n)` for `lo ≤ n ≤ hi`, evaluated once and reused across determinants.
#[derive(Debug, Clone, PartialEq)]
pub struct GTable {
    lambda: f64,
    lo: i64,
    values: Vec<f64>,
}

impl GTable {
    pub fn new(lambda: f64, lo: i64, hi: i64) -> Result<Self> {
        check_lambda(lambda)?;
        let values = (lo..=hi).map(|n| g_fn(n, lambda)).collect::<Result<_>>()?;
        Ok(GTable { lambda, lo, values })
    }

    /// Table covering every entry of `Δ(n)` for `n ≤ max_order`.
    pub fn for_order(lambda: f64, max_order: usize) -> Result<Self> {
        let m = max_order.max(1) as i64;
        Self::new(lambda, 2 - m, m)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn get(&self, n: i64) -> Option<f64> {
        let i = n - self.lo;
        (i >= 0).then(|| self.values.get(i as usize).copied()).flatten()
    }

    /// `Δ(n)` from the tabulated entries.
    pub fn delta(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidInput("Delta(n) needs n >= 1".into()));
        }
        let (lo, hi) = (2 - n as i64, n as i64);
        let (Some(_), Some(_)) = (self.get(lo), self.get(hi)) else {
            return Err(Error::InvalidInput(format!(
                "G table does not cover order {n}"
            )));
        };
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = self.get(i as i64 - j as i64 + 1).expect("covered");
            }
        }
        Ok(log_determinant(&a, n)?.value())
    }
}

/// `Δ(n) = ⟨σ^y_m σ^y_{m+n}⟩` as the `n×n` Toeplitz determinant of
/// `G(i − j + 1)`, for `1 ≤ n ≤ max_order`.
pub fn delta_fn(n: usize, lambda: f64, max_order: usize) -> Result<f64> {
    if n == 0 || n > max_order {
        return Err(Error::InvalidInput(format!(
            "determinant order {n} outside 1..={max_order}"
        )));
    }
    GTable::new(lambda, 2 - n as i64, n as i64)?.delta(n)
}

/// `ln h(n)` with `h(n) = Π_{k=1}^{n−1} k^{n−k}`.
pub fn log_h(n: usize) -> f64 {
    (1..n).map(|k| (n - k) as f64 * (k as f64).ln()).sum()
}

/// `Δ(n) = −(2/π)^n 2^{2n(n−1)} h(n)⁴ / ((4n² − 1) h(2n))` at `λ = 1`.
pub fn delta_critical_closed(n: usize) -> f64 {
    let nf = n as f64;
    let log = nf * (2.0 / PI).ln() + 2.0 * nf * (nf - 1.0) * core::f64::consts::LN_2
        + 4.0 * log_h(n)
        - log_h(2 * n)
        - (4.0 * nf * nf - 1.0).ln();
    -log.exp()
}

/// `−¼ e^{1/4} 2^{1/12} c⁻³ n^{−9/4}`.
pub fn delta_asymptotic(n: usize, c: f64) -> f64 {
    -0.25 * 0.25f64.exp() * 2f64.powf(1.0 / 12.0) * c.powi(-3) * (n as f64).powf(-2.25)
}

/// `½(√(ξ² + η²) − ξ)`, evaluated without cancellation.
pub fn teleported_energy(xi: f64, eta: f64) -> f64 {
    let r = xi.hypot(eta);
    if r == 0.0 {
        return 0.0;
    }
    if xi >= 0.0 {
        0.5 * eta * eta / (r + xi)
    } else {
        0.5 * (r - xi)
    }
}

/// `h (π/64) √e 2^{1/6} c⁻⁶ d^{−9/2}`, the large-distance form of `E_B(d)`
/// at `λ = 1`.
pub fn e_b_asymptotic(h: f64, d: usize, c: f64) -> f64 {
    h * PI / 64.0 * 0.5f64.exp() * 2f64.powf(1.0 / 6.0) * c.powi(-6) * (d as f64).powf(-4.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Quadrature,
    CriticalClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorRow {
    pub n: i64,
    pub g: f64,
    /// `Δ(n)` for `n ≥ 1`.
    pub delta: Option<f64>,
    /// Closed form, only at `λ = 1`.
    pub delta_closed: Option<f64>,
    /// Asymptotic form, only at `λ = 1`.
    pub delta_asym: Option<f64>,
}

/// `G(n)` and `Δ(n)` for `0 ≤ n ≤ nmax` plus the calibration constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorTable {
    pub lambda: f64,
    /// `ε/h = −G(0) − λ G(−1)`.
    pub eps_over_h: f64,
    pub provenance: Provenance,
    pub rows: Vec<CorrelatorRow>,
}

impl CorrelatorTable {
    pub fn build(lambda: f64, nmax: usize, provenance: Provenance) -> Result<Self> {
        check_lambda(lambda)?;
        if nmax > DEFAULT_MAX_ORDER {
            return Err(Error::InvalidInput(format!(
                "nmax = {nmax} exceeds {DEFAULT_MAX_ORDER}"
            )));
        }
        let critical = lambda == 1.0;
        let table = match provenance {
            Provenance::Quadrature => GTable::for_order(lambda, nmax.max(1))?,
            Provenance::CriticalClosedForm if critical => {
                let m = nmax.max(1) as i64;
                GTable {
                    lambda,
                    lo: 2 - m,
                    values: (2 - m..=m).map(g_critical).collect(),
                }
            }
            Provenance::CriticalClosedForm => {
                return Err(Error::InvalidInput(
                    "closed-form correlators exist only at lambda = 1".into(),
                ))
            }
        };
        let g = |n: i64| table.get(n).expect("covered");
        let rows = (0..=nmax)
            .map(|n| {
                let delta = if n == 0 { None } else { Some(table.delta(n)?) };
                let crit = critical && n > 0;
                Ok(CorrelatorRow {
                    n: n as i64,
                    g: g(n as i64),
                    delta,
                    delta_closed: crit.then(|| delta_critical_closed(n)),
                    delta_asym: crit.then(|| delta_asymptotic(n, CRITICAL_C)),
                })
            })
            .collect::<Result<_>>()?;
        Ok(CorrelatorTable {
            lambda,
            eps_over_h: -g(0) - lambda * g(-1),
            provenance,
            rows,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub d: usize,
    pub xi: f64,
    pub eta: f64,
    pub theta: f64,
    pub e_b: f64,
    /// Large-distance form, only at `λ = 1`.
    pub e_b_asym: Option<f64>,
}

/// Sum `E_C = Σ_{m≠0} E_B(spacing·|m|)` with its truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributedEnergy {
    pub e_c: f64,
    pub spacing: usize,
    /// Last `m` included on each side.
    pub truncation_index: usize,
    pub tail_estimate: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticEnergies {
    pub h: f64,
    pub lambda: f64,
    pub g0: f64,
    pub g_minus1: f64,
    /// `ε = −hG(0) − JG(−1)`.
    pub eps: f64,
    /// `E_A = hG(0) + 2JG(−1)`.
    pub e_a: f64,
    /// `ξ = 2hG(0)`.
    pub xi: f64,
    /// `E_r = h(G(0) − 1) + 2JG(−1)`.
    pub e_r: f64,
    pub distributed: DistributedEnergy,
    pub rows: Vec<EnergyRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConfig {
    pub spacing: usize,
    /// Largest determinant order; beyond it `λ = 1` switches to the closed form.
    pub max_order: usize,
    /// Stop the `E_C` sum once the tail estimate is below `tail_tolerance · h`.
    pub tail_tolerance: f64,
    /// Hard cap on `m` in the `E_C` sum.
    pub max_terms: usize,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            spacing: DEFAULT_SPACING,
            max_order: DEFAULT_MAX_ORDER,
            tail_tolerance: 1e-12,
            max_terms: 100_000,
        }
    }
}

/// Infinite-chain energies for `h`, `λ` and the requested distances.
pub fn analytic_energies(h: f64, lambda: f64, distances: &[usize]) -> Result<AnalyticEnergies> {
    analytic_energies_with(h, lambda, distances, &EnergyConfig::default())
}

pub fn analytic_energies_with(
    h: f64,
    lambda: f64,
    distances: &[usize],
    cfg: &EnergyConfig,
) -> Result<AnalyticEnergies> {
    check_lambda(lambda)?;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidInput(format!("h = {h} must be positive")));
    }
    if distances.contains(&0) {
        return Err(Error::InvalidInput("distances must be >= 1".into()));
    }
    let j = lambda * h;
    let critical = lambda == 1.0;
    let order = cfg.max_order.max(distances.iter().copied().max().unwrap_or(1));
    let order = if critical { order.min(cfg.max_order) } else { order };
    let table = GTable::for_order(lambda, order.max(1))?;
    let g0 = table.get(0).expect("covered");
    let gm1 = table.get(-1).expect("covered");
    let xi = 2.0 * h * g0;

    let delta = |d: usize| -> Result<f64> {
        if d <= order {
            table.delta(d)
        } else if critical {
            Ok(delta_critical_closed(d))
        } else {
            Err(Error::InvalidInput(format!(
                "distance {d} beyond determinant order {order}"
            )))
        }
    };

    let rows = distances
        .iter()
        .map(|&d| {
            let eta = 2.0 * h * delta(d)?;
            Ok(EnergyRow {
                d,
                xi,
                eta,
                theta: if xi == 0.0 && eta == 0.0 { 0.0 } else { 0.5 * (-eta).atan2(xi) },
                e_b: teleported_energy(xi, eta),
                e_b_asym: critical.then(|| e_b_asymptotic(h, d, CRITICAL_C)),
            })
        })
        .collect::<Result<_>>()?;

    // E_B(d) falls off at least as d^{-9/2}, so the remaining terms past m sum
    // to at most about term(m)·m/3.5 on each side.
    let spacing = cfg.spacing.max(1);
    let mut e_c = 0.0;
    let mut m = 0;
    let mut tail = f64::INFINITY;
    let mut converged = false;
    while m < cfg.max_terms {
        let d = spacing * (m + 1);
        if !critical && d > order {
            break;
        }
        m += 1;
        let term = 2.0 * teleported_energy(xi, 2.0 * h * delta(d)?);
        e_c += term;
        tail = term * m as f64 / 3.5;
        if tail < cfg.tail_tolerance * h {
            converged = true;
            break;
        }
    }

    Ok(AnalyticEnergies {
        h,
        lambda,
        g0,
        g_minus1: gm1,
        eps: -h * g0 - j * gm1,
        e_a: h * g0 + 2.0 * j * gm1,
        xi,
        e_r: h * (g0 - 1.0) + 2.0 * j * gm1,
        distributed: DistributedEnergy {
            e_c,
            spacing,
            truncation_index: m,
            tail_estimate: tail,
            converged,
        },
        rows,
    })
}

/// Least-squares slope of `ln|y|` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy, sxx, sxy) = points.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, &(x, y)| {
        let (lx, ly) = (x.ln(), y.abs().ln());
        (acc.0 + lx, acc.1 + ly, acc.2 + lx * lx, acc.3 + lx * ly)
    });
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
