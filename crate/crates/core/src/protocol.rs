//! Measurement/feedback energy protocols on exact chain states.
//!
//! The supplier measures `U_S = n_S · σ` at its site with projectors
//! `P(μ) = (I + (−1)^μ U_S)/2`. Each consumer `m` then applies
//!
//! ```text
//! V_m(μ) = I cos θ_m + i (−1)^μ U_m sin θ_m,   θ_m = ½ atan2(−η_m, ξ_m)
//! ```
//!
//! with `ξ_m = ⟨g|U_m H U_m|g⟩` and `η_m = ⟨g|U_S U̇_m|g⟩`, `U̇_m = i[H, U_m]`.
//! On the exact chain the branch-averaged gain equals `½(√(ξ²+η²) − ξ)` as
//! long as the parties' local regions do not interact, which is what
//! [`PlacementRules`] enforces.

use serde::{Deserialize, Serialize};

use crate::chain::ChainModel;
use crate::operator::{ChainOperator, Mat2};
use crate::pauli::UnitVector;
use crate::prelude::*;
use crate::state::{Branch, QuantumState, StateVector};
use crate::{Error, Result};

/// Branches with smaller probability are dropped.
pub const PROBABILITY_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Supplier,
    Consumer,
    Adversary,
}

/// A party's site and local axis. Sites are signed; periodic chains reduce
/// them modulo `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartyConfig {
    pub site: i64,
    pub axis: UnitVector,
    pub role: Role,
}

impl PartyConfig {
    pub fn supplier(site: i64, axis: UnitVector) -> Self {
        PartyConfig {
            site,
            axis,
            role: Role::Supplier,
        }
    }

    pub fn consumer(site: i64, axis: UnitVector) -> Self {
        PartyConfig {
            site,
            axis,
            role: Role::Consumer,
        }
    }

    pub fn adversary(site: i64, axis: UnitVector) -> Self {
        PartyConfig {
            site,
            axis,
            role: Role::Adversary,
        }
    }

    /// `n · σ` at the party's site.
    pub fn operator(&self, model: &ChainModel) -> Result<ChainOperator> {
        model.local_pauli(model.resolve_site(self.site)?, &self.axis)
    }
}

/// Minimum separations between parties.
///
/// Supplier/consumer and adversary/anyone distances are chain distances.
/// Consumers are compared by their signed offsets from the supplier, so
/// consumers at `−5` and `+5` count as 10 apart, and in addition must keep a
/// chain distance of at least `exactness_floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementRules {
    pub min_separation: usize,
    pub exactness_floor: usize,
}

impl Default for PlacementRules {
    fn default() -> Self {
        PlacementRules {
            min_separation: 5,
            exactness_floor: 3,
        }
    }
}

impl PlacementRules {
    pub fn check(
        &self,
        model: &ChainModel,
        supplier: &PartyConfig,
        consumers: &[PartyConfig],
        adversary: Option<&PartyConfig>,
    ) -> Result<()> {
        let role = |p: &PartyConfig, r: Role| {
            if p.role == r {
                Ok(())
            } else {
                Err(Error::Placement(format!(
                    "party at {} has role {:?}, expected {:?}",
                    p.site, p.role, r
                )))
            }
        };
        role(supplier, Role::Supplier)?;
        let s = model.resolve_site(supplier.site)?;
        let mut sites = Vec::with_capacity(consumers.len());
        for c in consumers {
            role(c, Role::Consumer)?;
            let cs = model.resolve_site(c.site)?;
            let d = model.distance(s, cs);
            if d < self.min_separation {
                return Err(Error::Placement(format!(
                    "consumer at {} is {d} sites from the supplier (minimum {})",
                    c.site, self.min_separation
                )));
            }
            sites.push(cs);
        }
        for a in 0..consumers.len() {
            for b in (a + 1)..consumers.len() {
                let offset = (consumers[a].site - consumers[b].site).unsigned_abs() as usize;
                let d = model.distance(sites[a], sites[b]);
                if offset < self.min_separation || d < self.exactness_floor {
                    return Err(Error::Placement(format!(
                        "consumers at {} and {} are too close (offset {offset}, distance {d})",
                        consumers[a].site, consumers[b].site
                    )));
                }
            }
        }
        if let Some(adv) = adversary {
            role(adv, Role::Adversary)?;
            let ds = model.resolve_site(adv.site)?;
            for (who, site) in core::iter::once(("supplier", s))
                .chain(sites.iter().map(|&c| ("consumer", c)))
            {
                let d = model.distance(ds, site);
                if d < self.min_separation {
                    return Err(Error::Placement(format!(
                        "adversary at {} is {d} sites from a {who} (minimum {})",
                        adv.site, self.min_separation
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Outcome `μ` of the supplier measurement with its post-measurement state.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeBranch {
    pub mu: u8,
    pub probability: f64,
    pub state: StateVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeEnsemble {
    pub branches: Vec<OutcomeBranch>,
}

impl OutcomeEnsemble {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    pub fn to_state(&self) -> Result<QuantumState> {
        let sites = self.branches[0].state.sites();
        QuantumState::mixed(
            sites,
            self.branches
                .iter()
                .map(|b| Branch {
                    weight: b.probability,
                    state: b.state.clone(),
                })
                .collect(),
        )
    }
}

/// Per-consumer entry of a [`ProtocolReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsumerReport {
    pub site: i64,
    pub xi: f64,
    pub eta: f64,
    pub theta: f64,
    pub e_m_pred: f64,
    pub e_m_meas: f64,
}

/// Energy bookkeeping of one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub e_s: f64,
    pub consumers: Vec<ConsumerReport>,
    pub e_c: f64,
    pub residual_total: f64,
    pub adversary_deposit: Option<f64>,
}

impl ProtocolReport {
    /// `|Tr[ρ⁽⁶⁾H] − (E_S − E_C)|`.
    pub fn bookkeeping_defect(&self) -> f64 {
        (self.residual_total - (self.e_s - self.e_c)).abs()
    }
}

/// Result of [`run_qed`]: the report and the final ensemble `ρ⁽⁶⁾`.
#[derive(Debug, Clone, PartialEq)]
pub struct QedRun {
    pub report: ProtocolReport,
    pub final_state: OutcomeEnsemble,
}

/// `n · σ` as a 2×2 block.
pub fn axis_matrix(axis: &UnitVector) -> Mat2 {
    let [x, y, z] = axis.components();
    Mat2([
        [C64::new(z, 0.0), C64::new(x, -y)],
        [C64::new(x, y), C64::new(-z, 0.0)],
    ])
}

/// `P(μ) = (I + (−1)^μ n·σ)/2` as a 2×2 block.
pub fn projector_matrix(axis: &UnitVector, mu: u8) -> Mat2 {
    let sign = if mu == 0 { 0.5 } else { -0.5 };
    Mat2::identity()
        .scale(C64::new(0.5, 0.0))
        .add(&axis_matrix(axis).scale(C64::new(sign, 0.0)))
}

/// `V(μ) = I cos θ + i(−1)^μ (n·σ) sin θ` as a 2×2 block.
pub fn feedback_matrix(axis: &UnitVector, theta: f64, mu: u8) -> Mat2 {
    let (s, c) = theta.sin_cos();
    let s = if mu == 0 { s } else { -s };
    Mat2::identity()
        .scale(C64::new(c, 0.0))
        .add(&axis_matrix(axis).scale(C64::new(0.0, s)))
}

fn check_involution(u: &ChainOperator) -> Result<()> {
    let herm = u.hermiticity_defect();
    if herm > 1e-12 {
        return Err(Error::OperatorProperty {
            property: "Hermitian",
            deviation: herm,
        });
    }
    let inv = u.involution_defect();
    if inv > 1e-12 {
        return Err(Error::OperatorProperty {
            property: "an involution",
            deviation: inv,
        });
    }
    Ok(())
}

/// `(P(0), P(1))` for a Hermitian involution `U`.
pub fn projectors(u: &ChainOperator) -> Result<(ChainOperator, ChainOperator)> {
    check_involution(u)?;
    let half = ChainOperator::identity(u.sites()).scale_real(0.5);
    Ok((half.add(&u.scale_real(0.5)), half.sub(&u.scale_real(0.5))))
}

/// `I cos θ + i(−1)^μ U sin θ`.
pub fn feedback_unitary(u: &ChainOperator, theta: f64, mu: u8) -> Result<ChainOperator> {
    check_involution(u)?;
    let (s, c) = theta.sin_cos();
    let s = if mu == 0 { s } else { -s };
    Ok(ChainOperator::identity(u.sites())
        .scale_real(c)
        .add(&u.scale(C64::new(0.0, s))))
}

/// `θ = ½ atan2(−η, ξ)`, so that `cos 2θ = ξ/R` and `sin 2θ = −η/R`.
pub fn feedback_angle(xi: f64, eta: f64) -> Result<f64> {
    if xi == 0.0 && eta == 0.0 {
        return Err(Error::Degenerate("xi and eta are both zero".into()));
    }
    Ok(0.5 * (-eta).atan2(xi))
}

/// `½(√(ξ² + η²) − ξ)`.
pub fn predicted_gain(xi: f64, eta: f64) -> f64 {
    0.5 * (xi.hypot(eta) - xi)
}

/// Supplier measurement on the ground state: outcome ensemble and the
/// deposited energy `E_S = Σ_μ ⟨g|P(μ) H P(μ)|g⟩`.
pub fn measure_supplier(
    model: &ChainModel,
    supplier: &PartyConfig,
) -> Result<(OutcomeEnsemble, f64)> {
    let site = model.resolve_site(supplier.site)?;
    let h = model.hamiltonian();
    let mut branches = Vec::with_capacity(2);
    let mut e_s = 0.0;
    for mu in 0..2u8 {
        let mut psi = model.ground().vector.clone();
        psi.apply_site_matrix(site, &projector_matrix(&supplier.axis, mu));
        let p = psi.norm_sqr();
        if p < PROBABILITY_FLOOR {
            continue;
        }
        psi.normalize();
        e_s += p * expect_real(&h, &psi)?;
        branches.push(OutcomeBranch {
            mu,
            probability: p,
            state: psi,
        });
    }
    Ok((OutcomeEnsemble { branches }, e_s))
}

/// `(ξ, η)` for a supplier/consumer pair on the ground state.
pub fn xi_eta(model: &ChainModel, supplier: &PartyConfig, consumer: &PartyConfig) -> Result<(f64, f64)> {
    let h = model.hamiltonian();
    let u_s = supplier.operator(model)?;
    let u_m = consumer.operator(model)?;
    let xi = model.expectation(&u_m.mul(&h).mul(&u_m))?;
    let u_dot = h.commutator(&u_m).scale(C64::new(0.0, 1.0));
    let eta = model.expectation(&u_s.mul(&u_dot))?;
    Ok((xi, eta))
}

fn expect_real(op: &ChainOperator, psi: &StateVector) -> Result<f64> {
    let v = op.sandwich(psi.amplitudes());
    if v.im.abs() > crate::state::IMAGINARY_TOLERANCE {
        return Err(Error::ImaginaryResidue {
            residue: v.im.abs(),
        });
    }
    Ok(v.re)
}

/// Single-consumer protocol.
pub fn run_qet(
    model: &ChainModel,
    supplier: &PartyConfig,
    consumer: &PartyConfig,
    rules: &PlacementRules,
) -> Result<QedRun> {
    run_qed(model, supplier, core::slice::from_ref(consumer), rules)
}

/// Multi-consumer protocol: measurement, outcome distribution and feedback
/// at every consumer, with measured and predicted gains.
pub fn run_qed(
    model: &ChainModel,
    supplier: &PartyConfig,
    consumers: &[PartyConfig],
    rules: &PlacementRules,
) -> Result<QedRun> {
    rules.check(model, supplier, consumers, None)?;
    let (mut ensemble, e_s) = measure_supplier(model, supplier)?;
    let h = model.hamiltonian();

    let mut reports = Vec::with_capacity(consumers.len());
    let mut locals = Vec::with_capacity(consumers.len());
    for c in consumers {
        let (xi, eta) = xi_eta(model, supplier, c)?;
        let theta = feedback_angle(xi, eta)?;
        reports.push(ConsumerReport {
            site: c.site,
            xi,
            eta,
            theta,
            e_m_pred: predicted_gain(xi, eta),
            e_m_meas: 0.0,
        });
        let site = model.resolve_site(c.site)?;
        locals.push((site, model.local_hamiltonian(site, 1)?));
    }

    let mut residual_total = 0.0;
    for branch in &mut ensemble.branches {
        for ((c, r), (site, h_local)) in consumers.iter().zip(&mut reports).zip(&locals) {
            let before = expect_real(h_local, &branch.state)?;
            branch
                .state
                .apply_site_matrix(*site, &feedback_matrix(&c.axis, r.theta, branch.mu));
            let after = expect_real(h_local, &branch.state)?;
            r.e_m_meas += branch.probability * (before - after);
        }
        residual_total += branch.probability * expect_real(&h, &branch.state)?;
    }
    let e_c = reports.iter().map(|r| r.e_m_meas).sum();
    Ok(QedRun {
        report: ProtocolReport {
            e_s,
            consumers: reports,
            e_c,
            residual_total,
            adversary_deposit: None,
        },
        final_state: ensemble,
    })
}

/// Energy change caused by applying `V(μ′)` at `site` to `state`, for each
/// guess `μ′ ∈ {0, 1}` made without knowledge of the supplier outcome.
pub fn blind_feedback_energy(
    model: &ChainModel,
    state: &OutcomeEnsemble,
    site: usize,
    axis: &UnitVector,
    theta: f64,
) -> Result<[f64; 2]> {
    let h = model.local_hamiltonian(site, 1)?;
    let mut out = [0.0; 2];
    for (guess, slot) in out.iter_mut().enumerate() {
        let v = feedback_matrix(axis, theta, guess as u8);
        for branch in &state.branches {
            let before = expect_real(&h, &branch.state)?;
            let mut psi = branch.state.clone();
            psi.apply_site_matrix(site, &v);
            *slot += branch.probability * (expect_real(&h, &psi)? - before);
        }
    }
    Ok(out)
}

/// Impersonation outcome: energy deposited by each blind guess and the
/// average over a uniform guess.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryOutcome {
    pub theta: f64,
    pub per_guess: [f64; 2],
    pub deposit: f64,
}

/// Runs the protocol, then lets an unkeyed party apply `V_D(μ′)` with a
/// uniformly guessed `μ′`. `theta_d` defaults to the angle of the consumer
/// nearest to the adversary.
pub fn adversary_energy(
    model: &ChainModel,
    supplier: &PartyConfig,
    consumers: &[PartyConfig],
    adversary: &PartyConfig,
    theta_d: Option<f64>,
    rules: &PlacementRules,
) -> Result<(QedRun, AdversaryOutcome)> {
    rules.check(model, supplier, consumers, Some(adversary))?;
    let mut run = run_qed(model, supplier, consumers, rules)?;
    let site = model.resolve_site(adversary.site)?;
    let theta = match theta_d {
        Some(t) => t,
        None => nearest_consumer_theta(model, site, &run.report)?,
    };
    let per_guess = blind_feedback_energy(model, &run.final_state, site, &adversary.axis, theta)?;
    let deposit = 0.5 * (per_guess[0] + per_guess[1]);
    run.report.adversary_deposit = Some(deposit);
    Ok((
        run,
        AdversaryOutcome {
            theta,
            per_guess,
            deposit,
        },
    ))
}

fn nearest_consumer_theta(model: &ChainModel, site: usize, report: &ProtocolReport) -> Result<f64> {
    let mut best: Option<(usize, f64)> = None;
    for c in &report.consumers {
        let d = model.distance(site, model.resolve_site(c.site)?);
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, c.theta));
        }
    }
    best.map(|(_, t)| t)
        .ok_or_else(|| Error::Degenerate("no consumer to imitate; pass theta_d".into()))
}

/// `½ Σ_{μ′} ⟨g|V_D†(μ′) H V_D(μ′)|g⟩`, the closed-form adversary deposit.
pub fn adversary_ground_deposit(model: &ChainModel, adversary: &PartyConfig, theta: f64) -> Result<f64> {
    let u = adversary.operator(model)?;
    let h = model.hamiltonian();
    let mut total = 0.0;
    for mu in 0..2u8 {
        let v = feedback_unitary(&u, theta, mu)?;
        total += 0.5 * model.expectation(&v.adjoint().mul(&h).mul(&v))?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Boundary;

    #[test]
    fn angle_relations() {
        assert_eq!(feedback_angle(1.0, 0.0).unwrap(), 0.0);
        let t = feedback_angle(1.0, 1.0).unwrap();
        assert!((2.0 * t + core::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!(feedback_angle(0.0, 0.0).is_err());
        for (xi, eta) in [(1.0, -0.3), (0.2, 5.0), (2.0, -7.0)] {
            let t = feedback_angle(xi, eta).unwrap();
            let r = f64::hypot(xi, eta);
            assert!(((2.0 * t).cos() - xi / r).abs() < 1e-14);
            assert!(((2.0 * t).sin() + eta / r).abs() < 1e-14);
        }
    }

    #[test]
    fn projector_algebra() {
        let u = ChainOperator::axis(3, 1, &UnitVector::Y);
        let (p0, p1) = projectors(&u).unwrap();
        let id = ChainOperator::identity(3);
        assert!(p0.add(&p1).distance(&id) < 1e-12);
        assert!(p0.mul(&p0).distance(&p0) < 1e-12);
        assert!(p0.mul(&p1).distance(&ChainOperator::zero(3)) < 1e-12);
        let not_involution = u.scale_real(2.0);
        assert!(projectors(&not_involution).is_err());
    }

    #[test]
    fn feedback_special_angles() {
        let u = ChainOperator::axis(2, 0, &UnitVector::X);
        let v = feedback_unitary(&u, 0.0, 1).unwrap();
        assert!(v.distance(&ChainOperator::identity(2)) < 1e-15);
        let v = feedback_unitary(&u, core::f64::consts::FRAC_PI_2, 0).unwrap();
        assert!(v.distance(&u.scale(C64::new(0.0, 1.0))) < 1e-15);
        let v0 = feedback_unitary(&u, 0.3, 0).unwrap();
        let v1 = feedback_unitary(&u, 0.3, 1).unwrap();
        assert!(v0.adjoint().distance(&v1) < 1e-15);
    }

    #[test]
    fn block_forms_match_operators() {
        let axis = UnitVector::from_angles(0.7, 1.9);
        let u = ChainOperator::axis(1, 0, &axis);
        let direct = ChainOperator::site_matrix(1, 0, &feedback_matrix(&axis, 0.4, 1));
        assert!(direct.distance(&feedback_unitary(&u, 0.4, 1).unwrap()) < 1e-15);
        let (_, p1) = projectors(&u).unwrap();
        assert!(ChainOperator::site_matrix(1, 0, &projector_matrix(&axis, 1)).distance(&p1) < 1e-15);
    }

    #[test]
    fn placement_rules() {
        let m = ChainModel::build(14, 1.0, 1.0, Boundary::Periodic).unwrap();
        let rules = PlacementRules::default();
        let s = PartyConfig::supplier(0, UnitVector::Y);
        let c = |site| PartyConfig::consumer(site, UnitVector::X);
        assert!(rules.check(&m, &s, &[c(-5), c(5)], None).is_ok());
        assert!(rules.check(&m, &s, &[c(4)], None).is_err());
        assert!(rules.check(&m, &s, &[c(5), c(9)], None).is_err());
        assert!(rules
            .check(&m, &s, &[c(5)], Some(&PartyConfig::consumer(10, UnitVector::X)))
            .is_err());
    }

    #[test]
    fn product_state_has_no_teleportation() {
        let m = ChainModel::build(12, 1.0, 0.0, Boundary::Periodic).unwrap();
        let s = PartyConfig::supplier(0, UnitVector::Y);
        let run = run_qet(&m, &s, &PartyConfig::consumer(5, UnitVector::X), &Default::default()).unwrap();
        let r = &run.report;
        assert!((r.e_s - 1.0).abs() < 1e-12);
        assert!(r.consumers[0].eta.abs() < 1e-12);
        assert!(r.consumers[0].e_m_meas.abs() < 1e-12);
        assert!(r.bookkeeping_defect() < 1e-12);
    }
}
