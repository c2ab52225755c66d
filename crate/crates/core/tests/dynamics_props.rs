mod common;

use chainsense_core::dynamics::{diagonalize, evolve};
use chainsense_core::spin::{build_hamiltonian, magnetization, ChainSpec, HermitianOperator, PureState, C64};
use common::{expm_taylor, jacobi_eigenvalues, pauli_sum_hamiltonian};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[test]
fn spectrum_matches_jacobi_oracle() {
    let spec = ChainSpec::new(3, 1.0, 0.1).unwrap();
    let d = diagonalize(&build_hamiltonian(&spec)).unwrap();
    let oracle = jacobi_eigenvalues(&pauli_sum_hamiltonian(3, 1.0, 0.1));
    for (e, o) in d.energies().iter().zip(&oracle) {
        assert!((e - o).abs() < 1e-10, "{e} vs {o}");
    }
}

#[test]
fn evolution_matches_taylor_propagator() {
    let spec = ChainSpec::new(4, 1.0, 0.17).unwrap();
    let d = diagonalize(&build_hamiltonian(&spec)).unwrap();
    let u = expm_taylor(&pauli_sum_hamiltonian(4, 1.0, 0.17), 7.5);
    let psi = PureState::ferromagnetic(4);
    let ours = evolve(&psi, &d, 7.5).unwrap();
    let oracle = u * psi.amplitudes();
    assert!((ours.amplitudes() - oracle).norm() < 1e-11);
}

#[test]
fn zero_field_ferromagnet_is_stationary() {
    let spec = ChainSpec::new(5, 1.0, 0.0).unwrap();
    let d = diagonalize(&build_hamiltonian(&spec)).unwrap();
    let psi = PureState::ferromagnetic(5);
    for t in [1.0, 10.0, 100.0, 0.3, 42.0] {
        let out = evolve(&psi, &d, t).unwrap();
        assert!((psi.inner(&out).norm() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn last_site_lags_first_site() {
    let spec = ChainSpec::new(10, 1.0, 0.1).unwrap();
    let d = diagonalize(&build_hamiltonian(&spec)).unwrap();
    let psi = PureState::ferromagnetic(10);
    let departure = |site: usize| {
        (1..=400)
            .map(|k| 0.25 * k as f64)
            .find(|&t| magnetization(&evolve(&psi, &d, t).unwrap(), site).unwrap() > -0.95)
    };
    let first = departure(1).expect("site 1 departs");
    let last = departure(10).expect("site N departs within Jt = 100");
    assert!(first < last, "first {first}, last {last}");
}

fn random_hermitian(seed: &[f64]) -> DMatrix<C64> {
    let n = 8;
    let a = DMatrix::from_fn(n, n, |r, c| {
        let k = (r * n + c) * 2;
        C64::new(seed[k % seed.len()], seed[(k + 1) % seed.len()])
    });
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_hermitian_reconstructs(seed in prop::collection::vec(-1.0f64..1.0, 128)) {
        let h = HermitianOperator::from_matrix(random_hermitian(&seed)).unwrap();
        let d = diagonalize(&h).unwrap();
        prop_assert!((d.reconstruct() - h.matrix()).norm() < 1e-9);
        let v = d.vectors();
        prop_assert!((v.adjoint() * v - DMatrix::identity(8, 8)).iter().all(|z| z.norm() < 1e-10));
        prop_assert!(d.energies().as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn evolution_is_unitary_composable_and_conserves_energy(
        n in 1usize..=4,
        field in -0.3f64..0.3,
        t1 in 0.0f64..50.0,
        t2 in 0.0f64..50.0,
        phases in prop::collection::vec(-3.0f64..3.0, 16),
    ) {
        let spec = ChainSpec::new(n, 1.0, field).unwrap();
        let h = build_hamiltonian(&spec);
        let d = diagonalize(&h).unwrap();
        let dim = 1 << n;
        let raw = DVector::from_fn(dim, |i, _| C64::from_polar(1.0 + phases[i].abs(), phases[(i + 3) % 16]));
        let psi = PureState::normalized(n, raw).unwrap();
        let a = evolve(&psi, &d, t1).unwrap();
        prop_assert!((a.norm() - 1.0).abs() < 1e-10);
        let ab = evolve(&a, &d, t2).unwrap();
        let direct = evolve(&psi, &d, t1 + t2).unwrap();
        prop_assert!((ab.amplitudes() - direct.amplitudes()).norm() < 1e-9);
        let e0 = h.expectation(&psi).unwrap();
        prop_assert!((h.expectation(&ab).unwrap() - e0).abs() < 1e-9);
    }

    #[test]
    fn up_and_down_probabilities_sum_to_one(n in 1usize..=4, field in -0.3f64..0.3, t in 0.0f64..30.0) {
        let spec = ChainSpec::new(n, 1.0, field).unwrap();
        let d = diagonalize(&build_hamiltonian(&spec)).unwrap();
        let psi = evolve(&PureState::ferromagnetic(n), &d, t).unwrap();
        for site in 1..=n {
            let up = psi.up_probability(site).unwrap();
            let m = magnetization(&psi, site).unwrap();
            let down = (1.0 - m) / 2.0;
            prop_assert!((up + down - 1.0).abs() < 1e-12);
        }
    }
}
