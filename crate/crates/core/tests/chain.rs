use std::f64::consts::PI;

use proptest::prelude::*;
use qetlab_core::linalg::symmetric_eigenvalues;
use qetlab_core::pauli::Pauli;
use qetlab_core::*;

fn critical(n: usize) -> ChainModel {
    ChainModel::build(n, 1.0, 1.0, Boundary::Periodic).unwrap()
}

fn real_dense(op: &ChainOperator) -> Vec<f64> {
    op.to_dense().iter().map(|c| c.re).collect()
}

#[test]
fn product_limit_ground_state() {
    let m = ChainModel::build(4, 1.0, 0.0, Boundary::Periodic).unwrap();
    assert!((m.eg_shift() + 4.0).abs() < 1e-12);
    assert!(m.eps().iter().all(|e| (e + 1.0).abs() < 1e-12));
    assert!((m.ground().vector.amplitudes()[0].re - 1.0).abs() < 1e-12);
    for n in 0..4 {
        let z = m.expectation(&ChainOperator::pauli(4, n, Pauli::Z)).unwrap();
        assert!((z - 1.0).abs() < 1e-12);
    }
}

#[test]
fn product_limit_hamiltonian_is_field_only() {
    let m = ChainModel::build(5, 2.0, 0.0, Boundary::Open).unwrap();
    let mut expected = ChainOperator::zero(5);
    for n in 0..5 {
        expected = expected.add(
            &ChainOperator::identity(5)
                .sub(&ChainOperator::pauli(5, n, Pauli::Z))
                .scale_real(2.0),
        );
    }
    assert!(m.hamiltonian().distance(&expected) < 1e-12);
}

#[test]
fn single_site_spectrum_is_zero_and_two_h() {
    let m = ChainModel::build(1, 1.5, 0.0, Boundary::Periodic).unwrap();
    let vals = symmetric_eigenvalues(&real_dense(&m.hamiltonian()), 2).unwrap();
    assert!(vals[0].abs() < 1e-14);
    assert!((vals[1] - 3.0).abs() < 1e-14);
}

#[test]
fn rejects_out_of_regime_parameters() {
    assert!(matches!(
        ChainModel::build(4, 1.0, 1.5, Boundary::Periodic),
        Err(Error::InvalidModel(_))
    ));
    assert!(ChainModel::build(4, 0.0, 0.0, Boundary::Periodic).is_err());
    assert!(ChainModel::build(0, 1.0, 0.5, Boundary::Periodic).is_err());
    assert!(matches!(
        ChainModel::build(21, 1.0, 0.5, Boundary::Periodic),
        Err(Error::Capacity { .. })
    ));
}

#[test]
fn shifted_spectrum_is_nonnegative_with_zero_minimum() {
    for (n, lambda, b) in [
        (6, 1.0, Boundary::Periodic),
        (7, 0.5, Boundary::Open),
        (8, 1.0, Boundary::Open),
    ] {
        let m = ChainModel::with_lambda(n, 1.0, lambda, b).unwrap();
        let vals = symmetric_eigenvalues(&real_dense(&m.hamiltonian()), 1 << n).unwrap();
        assert!(vals[0].abs() < 1e-10, "N={n}: min eigenvalue {}", vals[0]);
        assert!(vals.iter().all(|v| *v >= -1e-10));
    }
}

#[test]
fn ground_state_annihilated_on_large_chain() {
    let m = critical(12);
    let g = &m.ground().vector;
    let hg = m.hamiltonian().apply(g).unwrap();
    assert!(hg.norm() < 1e-9, "‖H g‖ = {:e}", hg.norm());
    assert!(m.ground().residual < 1e-9);
    assert!(m.expectation(&m.hamiltonian()).unwrap().abs() < 1e-10);
}

#[test]
fn calibration_holds_site_by_site() {
    for b in [Boundary::Periodic, Boundary::Open] {
        let m = ChainModel::build(10, 1.0, 0.7, b).unwrap();
        let mut sum = ChainOperator::zero(10);
        for n in 0..10 {
            let t = m.energy_density(n).unwrap();
            assert!(t.hermiticity_defect() < 1e-12);
            assert!(m.expectation(&t).unwrap().abs() < 1e-10);
            sum = sum.add(&t);
        }
        assert!(sum.distance(&m.hamiltonian()) < 1e-12);
    }
}

#[test]
fn energy_density_support_is_three_sites() {
    let m = critical(10);
    assert_eq!(m.energy_density(4).unwrap().support_sites(), vec![3, 4, 5]);
    assert_eq!(m.energy_density(0).unwrap().support_sites(), vec![0, 1, 9]);
    let open = ChainModel::build(10, 1.0, 1.0, Boundary::Open).unwrap();
    assert_eq!(open.energy_density(0).unwrap().support_sites(), vec![0, 1]);
    assert!(matches!(m.energy_density(10), Err(Error::SiteOutOfRange { .. })));
}

#[test]
fn critical_eps_near_infinite_chain_value() {
    let m = critical(12);
    let target = -4.0 / PI;
    for e in m.eps() {
        assert!(((e - target) / target).abs() < 0.02, "eps {e}");
    }
}

#[test]
fn critical_correlators_within_two_percent() {
    let m = critical(12);
    let z = m.expectation(&ChainOperator::pauli(12, 0, Pauli::Z)).unwrap();
    assert!((z / (2.0 / PI) - 1.0).abs() < 0.02, "<σz> = {z}");
    let xx = ChainOperator::pauli(12, 0, Pauli::X).mul(
        &ChainOperator::pauli(12, 1, Pauli::X).add(&ChainOperator::pauli(12, 11, Pauli::X)),
    );
    let v = m.expectation(&xx).unwrap();
    assert!((v / (4.0 / PI) - 1.0).abs() < 0.02, "<σxσx> = {v}");
}

#[test]
fn odd_correlators_vanish() {
    let m = critical(12);
    for n in [0, 3, 7] {
        for p in [Pauli::X, Pauli::Y] {
            let v = m.expectation(&ChainOperator::pauli(12, n, p)).unwrap();
            assert!(v.abs() < 1e-8);
        }
    }
    let yx = ChainOperator::pauli(12, 0, Pauli::Y).mul(
        &ChainOperator::pauli(12, 1, Pauli::X).add(&ChainOperator::pauli(12, 11, Pauli::X)),
    );
    assert!(m.expectation(&yx).unwrap().abs() < 1e-8);
}

#[test]
fn sigma_z_converges_monotonically_with_size() {
    let errs: Vec<f64> = [8, 10, 12, 14]
        .iter()
        .map(|&n| {
            let m = critical(n);
            let z = m.expectation(&ChainOperator::pauli(n, 0, Pauli::Z)).unwrap();
            (z - 2.0 / PI).abs()
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn ground_state_is_bit_for_bit_deterministic() {
    for n in [8, 12] {
        let a = critical(n);
        let b = critical(n);
        let (va, vb) = (a.ground().vector.amplitudes(), b.ground().vector.amplitudes());
        assert!(va.iter().zip(vb).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
    }
}

#[test]
fn ground_state_phase_convention() {
    let m = critical(10);
    let amps = m.ground().vector.amplitudes();
    let big = amps.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
    assert!(big.re > 0.0 && big.im == 0.0);
    assert!((m.ground().vector.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn local_pauli_spectrum() {
    let m = ChainModel::build(4, 1.0, 0.5, Boundary::Periodic).unwrap();
    let u = m.local_pauli(2, &UnitVector::Z).unwrap();
    assert!(u.distance(&ChainOperator::pauli(4, 2, Pauli::Z)) < 1e-15);
    let u = m
        .local_pauli(1, &UnitVector::normalized([0.3, -0.4, 0.5]).unwrap())
        .unwrap();
    assert!(u.involution_defect() < 1e-12);
    assert!(u.unitarity_defect() < 1e-12);
    assert_eq!(u.support_sites(), vec![1]);
    // n·σ is Hermitian, so its spectrum comes from the real embedding [[A, −B], [B, A]]
    let d = u.to_dense();
    let dim = 16;
    let mut emb = vec![0.0; 4 * dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let c = d[i * dim + j];
            emb[i * 2 * dim + j] = c.re;
            emb[i * 2 * dim + j + dim] = -c.im;
            emb[(i + dim) * 2 * dim + j] = c.im;
            emb[(i + dim) * 2 * dim + j + dim] = c.re;
        }
    }
    let vals = symmetric_eigenvalues(&emb, 2 * dim).unwrap();
    assert_eq!(vals.iter().filter(|v| (**v + 1.0).abs() < 1e-12).count(), 2 * 8);
    assert_eq!(vals.iter().filter(|v| (**v - 1.0).abs() < 1e-12).count(), 2 * 8);
    assert!(matches!(
        UnitVector::new([1.0, 1.0, 0.0]),
        Err(Error::NotUnitVector { .. })
    ));
}

#[test]
fn dimension_mismatch_is_reported() {
    let m = ChainModel::build(4, 1.0, 0.5, Boundary::Periodic).unwrap();
    assert!(matches!(
        m.expectation(&ChainOperator::pauli(5, 0, Pauli::Z)),
        Err(Error::DimensionMismatch { .. })
    ));
}

fn site_local(sites: usize, site: usize, c: [f64; 4]) -> ChainOperator {
    ChainOperator::identity(sites)
        .scale_real(c[0])
        .add(&ChainOperator::pauli(sites, site, Pauli::X).scale_real(c[1]))
        .add(&ChainOperator::pauli(sites, site, Pauli::Y).scale_real(c[2]))
        .add(&ChainOperator::pauli(sites, site, Pauli::Z).scale_real(c[3]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_density_commutes_with_distant_local_ops(
        n in 0usize..10,
        m in 0usize..10,
        lambda in 0.0f64..=1.0,
        c in prop::array::uniform4(-1.0f64..1.0),
    ) {
        let model = ChainModel::with_lambda(10, 1.0, lambda, Boundary::Periodic).unwrap();
        prop_assume!(model.distance(n, m) >= 2);
        let t = model.energy_density(n).unwrap();
        let o = site_local(10, m, c);
        prop_assert!(t.commutator(&o).distance(&ChainOperator::zero(10)) < 1e-12);
    }

    #[test]
    fn local_pauli_is_hermitian_unitary_involution(theta in 0.0f64..PI, phi in 0.0f64..2.0 * PI, site in 0usize..6) {
        let model = ChainModel::build(6, 1.0, 0.0, Boundary::Open).unwrap();
        let u = model.local_pauli(site, &UnitVector::from_angles(theta, phi)).unwrap();
        prop_assert!(u.hermiticity_defect() < 1e-12);
        prop_assert!(u.unitarity_defect() < 1e-12);
        prop_assert!(u.involution_defect() < 1e-12);
    }
}
