use std::f64::consts::SQRT_2;

use btc_core::fluctuations::{self, CovarianceState};
use btc_core::linalg::{self, CMat};
use btc_core::meanfield::{self, MeanFieldState};
use btc_core::{dicke, fit, thermo, Axis, DensityMatrix, LindbladGenerator, SystemParams};
use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(n: usize, omega: f64, n_beta: f64) -> SystemParams {
    SystemParams::new(n, omega, 1.0, 1.0, n_beta).unwrap()
}

fn random_matrix(d: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMat::from_shape_fn((d, d), |_| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Random full-rank density matrix `A A† / Tr`.
fn random_state(d: usize, seed: u64) -> DensityMatrix {
    let a = random_matrix(d, seed);
    let rho = a.dot(&linalg::dagger(&a));
    let tr = linalg::trace(&rho);
    DensityMatrix::new(linalg::hermitian_part(&rho.mapv(|z| z / tr))).unwrap()
}

fn unit_vector(theta: f64, phi: f64, r: f64) -> MeanFieldState {
    MeanFieldState::new(
        r * theta.sin() * phi.cos(),
        r * theta.sin() * phi.sin(),
        r * theta.cos(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn collective_algebra_closes(n in 1usize..24) {
        let p = params(n, 1.0, 0.0);
        let x = dicke::collective_op(&p, Axis::X);
        let y = dicke::collective_op(&p, Axis::Y);
        let z = dicke::collective_op(&p, Axis::Z);
        let comm = linalg::commutator(x.matrix(), y.matrix());
        let target = z.matrix().mapv(|v| v * C64::new(0.0, SQRT_2));
        prop_assert!(linalg::max_abs_diff(&comm, &target) < 1e-10);
        prop_assert!(dicke::casimir_check(&p) < 1e-9 * (1.0 + dicke::casimir_value(&p)));
    }

    #[test]
    fn coherent_states_point_along_their_angles(
        n in 1usize..20,
        theta in 0.0..std::f64::consts::PI,
        phi in -3.2..3.2f64,
    ) {
        let p = params(n, 1.0, 0.0);
        let m = dicke::magnetization(&p, &dicke::coherent_state(&p, theta, phi));
        let e = MeanFieldState::from_angles(theta, phi);
        for (a, v) in m.iter().enumerate() {
            prop_assert!((v - e.m[a]).abs() < 1e-10);
        }
    }

    #[test]
    fn generator_preserves_trace_and_hermiticity(
        n in 1usize..7,
        omega in 0.0..3.0f64,
        n_beta in 0.0..3.0f64,
        seed in any::<u64>(),
    ) {
        let gen = LindbladGenerator::new(&params(n, omega, n_beta)).unwrap();
        let x = random_matrix(n + 1, seed);
        let lx = gen.apply(&x);
        prop_assert!(linalg::trace(&lx).norm() < 1e-10);
        let l_dag = gen.apply(&linalg::dagger(&x));
        prop_assert!(linalg::max_abs_diff(&linalg::dagger(&lx), &l_dag) < 1e-10);
        // the banded and dense applications agree
        prop_assert!(linalg::max_abs_diff(&lx, &gen.apply_dense(&x)) < 1e-10);
    }

    #[test]
    fn adjoint_generator_is_the_dual(
        n in 1usize..6,
        omega in 0.0..3.0f64,
        n_beta in 0.0..2.0f64,
        seed in any::<u64>(),
    ) {
        let gen = LindbladGenerator::new(&params(n, omega, n_beta)).unwrap();
        let a = random_matrix(n + 1, seed);
        let x = random_matrix(n + 1, seed.wrapping_add(1));
        let lhs = linalg::trace_product(&a, &gen.apply(&x));
        let rhs = linalg::trace_product(&gen.apply_adjoint(&a), &x);
        prop_assert!((lhs - rhs).norm() < 1e-9);
    }

    #[test]
    fn first_law_holds_pointwise(
        n in 1usize..8,
        omega in 0.0..3.0f64,
        n_beta in 0.0..2.0f64,
        seed in any::<u64>(),
    ) {
        // U̇ = Tr(H L[ρ]) for any state; the identity is exact, not asymptotic
        let p = params(n, omega, n_beta);
        let gen = LindbladGenerator::new(&p).unwrap();
        let rho = random_state(n + 1, seed);
        let direct = linalg::trace_product(gen.hamiltonian().matrix(), &gen.apply(rho.matrix())).re;
        let obs = thermo::Observables::new(&p);
        prop_assert!((obs.internal_energy_rate(&rho) - direct).abs() < 1e-9 * (1.0 + direct.abs()));
        let w = obs.work_power(&rho);
        prop_assert!((w - (obs.internal_energy_rate(&rho) - obs.heat_current(&rho))).abs() < 1e-12);
    }

    #[test]
    fn spohn_bound_never_exceeds_entropy_rate(
        n in 1usize..6,
        omega in 0.0..3.0f64,
        n_beta in 0.2..2.0f64,
        seed in any::<u64>(),
    ) {
        let gen = LindbladGenerator::new(&params(n, omega, n_beta)).unwrap();
        let pi = btc_core::liouville::steady_state(&gen).unwrap();
        let rho = random_state(n + 1, seed);
        let s_dot = thermo::entropy_rate_exact(&gen, &rho).unwrap();
        let b_dot = thermo::spohn_bound(&gen, &rho, &pi).unwrap();
        prop_assert!(s_dot - b_dot >= -1e-9, "Ṡ = {s_dot}, Ḃ = {b_dot}");
    }

    #[test]
    fn mean_field_flow_is_tangent_to_spheres(
        theta in 0.0..std::f64::consts::PI,
        phi in -3.2..3.2f64,
        r in 0.1..1.0f64,
        omega in 0.0..3.0f64,
        n_beta in 0.0..5.0f64,
    ) {
        let p = params(10, omega, n_beta);
        let m = unit_vector(theta, phi, r);
        prop_assert!(m.m.dot(&meanfield::mf_rhs(&p, &m)).abs() < 1e-12);
    }

    #[test]
    fn drift_matrix_is_the_flow_jacobian(
        theta in 0.1..3.0f64,
        phi in -3.0..3.0f64,
        omega in 0.1..3.0f64,
        n_beta in 0.0..3.0f64,
    ) {
        let p = params(10, omega, n_beta);
        let m = MeanFieldState::from_angles(theta, phi);
        let w = fluctuations::drift_matrix(&p, &m);
        let h = 1e-6;
        for b in 0..3 {
            let mut plus = m;
            let mut minus = m;
            plus.m[b] += h;
            minus.m[b] -= h;
            let col = (meanfield::mf_rhs(&p, &plus) - meanfield::mf_rhs(&p, &minus)) / (2.0 * h);
            for a in 0..3 {
                prop_assert!((w[(a, b)] - col[a]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn covariance_rhs_stays_symmetric(
        theta in 0.1..3.0f64,
        phi in -3.0..3.0f64,
        omega in 0.0..3.0f64,
        n_beta in 0.0..3.0f64,
        entries in prop::array::uniform6(-1.0..1.0f64),
    ) {
        let p = params(10, omega, n_beta);
        let e = entries;
        let g = Matrix3::new(e[0], e[1], e[2], e[1], e[3], e[4], e[2], e[4], e[5]);
        let rhs = fluctuations::covariance_rhs(&p, &CovarianceState::new(g, MeanFieldState::from_angles(theta, phi)));
        prop_assert!((rhs - rhs.transpose()).abs().max() < 1e-14);
    }

    #[test]
    fn coherent_covariance_is_pure(theta in 0.0..3.1f64, phi in -3.2..3.2f64) {
        let state = CovarianceState::coherent(MeanFieldState::from_angles(theta, phi));
        let lambda = state.lambda().unwrap();
        prop_assert!((lambda - 0.5).abs() < 1e-7);
        prop_assert!(state.entropy().unwrap().abs() < 1e-6);
    }

    #[test]
    fn gaussian_entropy_is_increasing(a in 0.5..20.0f64, b in 0.5..20.0f64) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(fluctuations::entropy_from_lambda(lo).unwrap() < fluctuations::entropy_from_lambda(hi).unwrap());
    }

    #[test]
    fn thermal_entropy_is_the_lambda_formula(n_beta in 0.0..50.0f64) {
        let s = fluctuations::entropy_from_lambda(n_beta + 0.5).unwrap();
        prop_assert!((s - fluctuations::thermal_entropy(n_beta)).abs() < 1e-10 * (1.0 + s));
    }

    #[test]
    fn linear_fit_recovers_exact_lines(
        slope in -5.0..5.0f64,
        intercept in -5.0..5.0f64,
        n in 3usize..40,
    ) {
        let x: Vec<f64> = (0..n).map(|k| k as f64 * 0.37 - 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| slope * v + intercept).collect();
        let f = fit::linear_fit(&x, &y).unwrap();
        prop_assert!((f.slope - slope).abs() < 1e-9);
        prop_assert!((f.intercept - intercept).abs() < 1e-9);
        prop_assert!(f.max_residual < 1e-9);
    }

    #[test]
    fn relative_entropy_is_non_negative(d in 2usize..6, seed in any::<u64>()) {
        let a = random_state(d, seed);
        let b = random_state(d, seed ^ 0x9e37_79b9);
        prop_assert!(thermo::relative_entropy(&a, &b).unwrap() >= -1e-10);
        prop_assert!(thermo::relative_entropy(&a, &a).unwrap().abs() < 1e-9);
    }
}

#[test]
fn steady_state_heat_vanishes_without_drive() {
    for n in [2, 5, 9] {
        for nb in [0.3, 1.0, 4.0] {
            let p = params(n, 0.0, nb);
            let gen = LindbladGenerator::new(&p).unwrap();
            let pi = btc_core::liouville::steady_state(&gen).unwrap();
            assert!(
                thermo::heat_current(&p, &pi).abs() < 1e-10,
                "N={n} n_β={nb}"
            );
        }
    }
}

#[test]
fn long_time_evolution_matches_null_space() {
    let gen = LindbladGenerator::new(&params(6, 0.8, 1.0)).unwrap();
    let a = btc_core::liouville::steady_state_null_space(&gen).unwrap();
    let b = btc_core::liouville::steady_state_by_evolution(&gen, 1e-12, 1e5).unwrap();
    assert!(a.trace_distance(&b).unwrap() < 1e-7);
}
