use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;
use qetlab_core::cooling::*;
use qetlab_core::pauli::Pauli;
use qetlab_core::protocol::*;
use qetlab_core::*;

fn critical14() -> &'static ChainModel {
    static M: OnceLock<ChainModel> = OnceLock::new();
    M.get_or_init(|| ChainModel::build(14, 1.0, 1.0, Boundary::Periodic).unwrap())
}

fn critical10() -> &'static ChainModel {
    static M: OnceLock<ChainModel> = OnceLock::new();
    M.get_or_init(|| ChainModel::build(10, 1.0, 1.0, Boundary::Periodic).unwrap())
}

fn supplier() -> PartyConfig {
    PartyConfig::supplier(0, UnitVector::Y)
}

fn sigma_z(rho: &QuantumState, site: usize) -> f64 {
    let d = rho.site_density(site);
    d.0[0][0].re - d.0[1][1].re
}

fn unitary_ops(a: [f64; 3], b: [f64; 3]) -> LocalOperationSet {
    LocalOperationSet::unitaries(euler_unitary(a[0], a[1], a[2]), euler_unitary(b[0], b[1], b[2])).unwrap()
}

fn isometry_ops(p: &[f64]) -> LocalOperationSet {
    let [m0, m1] = isometry_pair(&p[..16]);
    let [n0, n1] = isometry_pair(&p[16..]);
    LocalOperationSet::new([vec![m0, m1], vec![n0, n1]]).unwrap()
}

#[test]
fn identity_ops_leave_supplier_deposit() {
    let m = critical14();
    let (_, e_s) = measure_supplier(m, &supplier()).unwrap();
    let rho = cooling_state(m, &supplier(), &LocalOperationSet::identity()).unwrap();
    let e = supplier_energy(m, 0, &rho).unwrap();
    assert!((e - e_s).abs() < 1e-12);
    assert!((e / (6.0 / PI) - 1.0).abs() < 0.02);
}

#[test]
fn optimal_ops_restore_spin_up() {
    let m = critical14();
    let ops = closed_form_optimal_ops();
    assert!(ops.completeness_defect() < 1e-12);
    let rho = cooling_state(m, &supplier(), &ops).unwrap();
    assert!((sigma_z(&rho, 0) - 1.0).abs() < 1e-12);
    let e = supplier_energy(m, 0, &rho).unwrap();
    assert!((e / (6.0 / PI - 1.0) - 1.0).abs() < 0.05, "E_r = {e}");
}

#[test]
fn outer_supplier_terms_keep_ground_value() {
    // the parts of H_S that do not touch the supplier site
    let m = critical14();
    let (h, j) = (m.h(), m.j());
    let p = |site, q| ChainOperator::pauli(14, site, q);
    let outer = p(1, Pauli::Z)
        .add(&p(13, Pauli::Z))
        .scale_real(-h)
        .add(&p(1, Pauli::X).mul(&p(2, Pauli::X)).add(&p(12, Pauli::X).mul(&p(13, Pauli::X))).scale_real(-0.5 * j));
    let ground = m.expectation(&outer).unwrap();
    for ops in [closed_form_optimal_ops(), unitary_ops([0.3, 1.1, -0.4], [2.0, 0.2, 0.9])] {
        let rho = cooling_state(m, &supplier(), &ops).unwrap();
        assert!((rho.expectation(&outer).unwrap() - ground).abs() < 1e-10);
    }
}

#[test]
fn incomplete_sets_are_rejected() {
    let half = euler_unitary(0.0, 0.0, 0.0).scale(C64::new(0.5, 0.0));
    assert!(matches!(
        LocalOperationSet::new([vec![half], vec![Mat2::identity()]]),
        Err(Error::IncompleteOperations { .. })
    ));
}

#[test]
fn critical_residual_within_one_percent() {
    let r = minimize_residual(critical14(), &supplier(), &CoolingConfig::default()).unwrap();
    let target = 6.0 / PI - 1.0;
    assert!((r.e_r / target - 1.0).abs() < 0.01, "E_r = {}", r.e_r);
    assert!(r.converged);
    assert!(r.best_ops.completeness_defect() < 1e-12);
    let paper = supplier_energy(critical14(), 0, &cooling_state(critical14(), &supplier(), &closed_form_optimal_ops()).unwrap()).unwrap();
    assert!((r.e_r - paper).abs() < 1e-7);
}

#[test]
fn product_limit_cools_to_zero() {
    let m = ChainModel::build(4, 1.0, 0.0, Boundary::Periodic).unwrap();
    let r = minimize_residual(&m, &supplier(), &CoolingConfig::default()).unwrap();
    assert!(r.e_r.abs() < 1e-10, "E_r = {}", r.e_r);
    let rho = cooling_state(&m, &supplier(), &closed_form_optimal_ops()).unwrap();
    assert!(supplier_energy(&m, 0, &rho).unwrap().abs() < 1e-12);
}

#[test]
fn trace_is_monotone_and_above_distributed_energy() {
    let m = critical14();
    let s = supplier();
    let consumers = [PartyConfig::consumer(-5, UnitVector::X), PartyConfig::consumer(5, UnitVector::X)];
    let e_c = run_qed(m, &s, &consumers, &PlacementRules::default()).unwrap().report.e_c;
    let r = minimize_residual(m, &s, &CoolingConfig::default()).unwrap();
    assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    assert!(r.trace.iter().all(|v| *v - e_c >= -1e-9));
    assert!(r.e_r >= e_c);
    assert!(r.report(e_c).bound_satisfied);
}

#[test]
fn two_element_family_does_not_beat_unitaries() {
    let m = critical10();
    let u = minimize_residual(m, &supplier(), &CoolingConfig::default()).unwrap();
    let cfg = CoolingConfig {
        family: OperationFamily::TwoElement,
        ..CoolingConfig::default()
    };
    let t = minimize_residual(m, &supplier(), &cfg).unwrap();
    assert!(t.e_r >= u.e_r - 1e-7, "{} vs {}", t.e_r, u.e_r);
    assert!(t.angles.is_none());
}

#[test]
fn consumer_feedback_commutes_with_cooling() {
    let m = critical14();
    let s = supplier();
    let consumers = [PartyConfig::consumer(-5, UnitVector::X), PartyConfig::consumer(5, UnitVector::X)];
    let run = run_qed(m, &s, &consumers, &PlacementRules::default()).unwrap();
    for ops in [closed_form_optimal_ops(), unitary_ops([0.7, -0.2, 1.3], [0.1, 2.4, -1.0])] {
        let after_qed = apply_local_operations(&run.final_state, 0, &ops).unwrap();
        let direct = cooling_state(m, &s, &ops).unwrap();
        let a = supplier_energy(m, 0, &after_qed).unwrap();
        let b = supplier_energy(m, 0, &direct).unwrap();
        assert!((a - b).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cooled_state_is_normalised(p in prop::collection::vec(-PI..PI, 32)) {
        let m = critical10();
        for ops in [unitary_ops([p[0], p[1], p[2]], [p[3], p[4], p[5]]), isometry_ops(&p)] {
            prop_assert!(ops.completeness_defect() < 1e-12);
            let rho = cooling_state(m, &supplier(), &ops).unwrap();
            prop_assert!((rho.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_is_deposit_minus_field_term(p in prop::collection::vec(-PI..PI, 32)) {
        // the σ^x couplings at the supplier average out after a σ^y measurement
        let m = critical10();
        let (_, e_s) = measure_supplier(m, &supplier()).unwrap();
        for ops in [unitary_ops([p[0], p[1], p[2]], [p[3], p[4], p[5]]), isometry_ops(&p)] {
            let rho = cooling_state(m, &supplier(), &ops).unwrap();
            let e = supplier_energy(m, 0, &rho).unwrap();
            prop_assert!((e - (e_s - m.h() * sigma_z(&rho, 0))).abs() < 1e-10);
        }
    }

    #[test]
    fn every_operation_set_respects_the_bound(p in prop::collection::vec(-PI..PI, 32)) {
        let m = critical14();
        let s = supplier();
        let consumers = [PartyConfig::consumer(-5, UnitVector::X), PartyConfig::consumer(5, UnitVector::X)];
        let run = run_qed(m, &s, &consumers, &PlacementRules::default()).unwrap();
        for ops in [unitary_ops([p[0], p[1], p[2]], [p[3], p[4], p[5]]), isometry_ops(&p)] {
            let rho = apply_local_operations(&run.final_state, 0, &ops).unwrap();
            let e = supplier_energy(m, 0, &rho).unwrap();
            prop_assert!(e - run.report.e_c >= -1e-9);
        }
    }
}
