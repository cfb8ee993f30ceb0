//! Gaussian dynamics of the quantum fluctuation operators
//! `F_α = (V_α − ⟨V_α⟩)/√N` in the thermodynamic limit.
//!
//! The fluctuations are characterised by the covariance matrix
//! `G_{αβ} = ½⟨{F_α, F_β}⟩` and the symplectic matrix
//! `s_{αβ} = √2 ε_{αβγ} m_γ`, which obey
//!
//! ```text
//! Ġ = W G + G Wᵀ − s A s,     W = D + D̄ + s B
//! ```
//!
//! with `D_{μη} = −Ω ε_{xμη}` and `D̄_{μν} = −√2 Σ B_{ηζ} m_ζ ε_{ημν}`. With
//! this normalisation `W` is exactly the Jacobian of the mean-field flow.
//! The non-symmetrised second moments are never stored: their dynamics
//! closes on `G` and `s`, which are all downstream quantities need.
//!
//! The entropy follows from the positive eigenvalue `λ` of `M = i s G`
//! (spectrum `{0, ±λ}`) as `(λ+½)ln(λ+½) − (λ−½)ln(λ−½)`. No rotation to
//! canonical coordinates is built since the spectrum of `M` is
//! frame-independent.

use std::f64::consts::SQRT_2;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::dicke::SystemParams;
use crate::error::{Error, Result};
use crate::meanfield::{self, MeanFieldState, Shifted};
use crate::ode::{rk4_step, step_count, Rk4State};

/// Tolerance below ½ within which `λ` is clamped to ½.
pub const LAMBDA_CLAMP: f64 = 1e-8;
/// Violation of `λ ≥ ½` that aborts a co-integration.
pub const LAMBDA_ABORT: f64 = 1e-6;

/// Levi-Civita symbol on indices 0, 1, 2.
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Dissipative coefficients of the adjoint generator acting on linear
/// functions of the spin operators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseMatrices {
    /// `Γ(2n_β+1) diag(1, 1, 0)`
    pub a: Matrix3<f64>,
    /// `B_xy = −Γ`, `B_yx = Γ`
    pub b: Matrix3<f64>,
}

impl NoiseMatrices {
    pub fn new(params: &SystemParams) -> Self {
        let g = params.gamma;
        let diffusion = g * (2.0 * params.n_beta + 1.0);
        let a = Matrix3::from_diagonal(&Vector3::new(diffusion, diffusion, 0.0));
        let mut b = Matrix3::zeros();
        b[(0, 1)] = -g;
        b[(1, 0)] = g;
        Self { a, b }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceState {
    pub g: Matrix3<f64>,
    pub m: MeanFieldState,
}

impl CovarianceState {
    pub fn new(g: Matrix3<f64>, m: MeanFieldState) -> Self {
        Self { g, m }
    }

    /// Covariance of the spin-coherent state along `m`.
    pub fn coherent(m: MeanFieldState) -> Self {
        Self::new(coherent_covariance(&m), m)
    }

    pub fn symplectic(&self) -> Matrix3<f64> {
        symplectic(&self.m)
    }

    pub fn lambda(&self) -> Result<f64> {
        symplectic_eigenvalue(self)
    }

    pub fn entropy(&self) -> Result<f64> {
        gaussian_entropy(self)
    }
}

/// `½(1 − m̂m̂ᵀ)`: unit-variance-½ fluctuations transverse to `m`.
pub fn coherent_covariance(m: &MeanFieldState) -> Matrix3<f64> {
    let norm = m.m.norm();
    let mut g = Matrix3::identity() * 0.5;
    if norm > 0.0 {
        let u = m.m / norm;
        g -= u * u.transpose() * 0.5;
    }
    g
}

pub fn symplectic(m: &MeanFieldState) -> Matrix3<f64> {
    Matrix3::from_fn(|a, b| SQRT_2 * (0..3).map(|c| levi_civita(a, b, c) * m.m[c]).sum::<f64>())
}

/// `W = D + D̄ + sB`.
pub fn drift_matrix(params: &SystemParams, m: &MeanFieldState) -> Matrix3<f64> {
    let noise = NoiseMatrices::new(params);
    let d = Matrix3::from_fn(|mu, eta| -params.omega_rabi * levi_civita(0, mu, eta));
    let bm = noise.b * m.m;
    let d_bar = Matrix3::from_fn(|mu, nu| {
        -SQRT_2
            * (0..3)
                .map(|eta| bm[eta] * levi_civita(eta, mu, nu))
                .sum::<f64>()
    });
    d + d_bar + symplectic(m) * noise.b
}

fn symmetrize(g: Matrix3<f64>) -> Matrix3<f64> {
    (g + g.transpose()) * 0.5
}

pub fn covariance_rhs(params: &SystemParams, state: &CovarianceState) -> Matrix3<f64> {
    let w = drift_matrix(params, &state.m);
    let s = symplectic(&state.m);
    let a = NoiseMatrices::new(params).a;
    symmetrize(w * state.g + state.g * w.transpose() - s * a * s)
}

/// `λ² = Σ` principal 2×2 minors of `sG`: `sG` is traceless with zero
/// determinant, so its characteristic polynomial is `μ(μ² + λ²)`.
fn lambda_squared(s: &Matrix3<f64>, g: &Matrix3<f64>) -> f64 {
    let p = s * g;
    let minor = |i: usize, j: usize| p[(i, i)] * p[(j, j)] - p[(i, j)] * p[(j, i)];
    minor(0, 1) + minor(0, 2) + minor(1, 2)
}

/// The positive eigenvalue `λ` of `isG`.
pub fn symplectic_eigenvalue(state: &CovarianceState) -> Result<f64> {
    let l2 = lambda_squared(&state.symplectic(), &state.g);
    if l2 < 0.0 {
        return Err(Error::Unphysical(-(-l2).sqrt()));
    }
    Ok(l2.sqrt())
}

/// Von Neumann entropy (nats) of the Gaussian state.
pub fn gaussian_entropy(state: &CovarianceState) -> Result<f64> {
    let lambda = symplectic_eigenvalue(state)?;
    entropy_from_lambda(lambda)
}

pub fn entropy_from_lambda(lambda: f64) -> Result<f64> {
    if !(lambda >= 0.5 - LAMBDA_CLAMP) {
        return Err(Error::Unphysical(lambda));
    }
    let lambda = lambda.max(0.5);
    let plus = lambda + 0.5;
    let minus = lambda - 0.5;
    let minus_term = if minus > 0.0 { minus * minus.ln() } else { 0.0 };
    Ok(plus * plus.ln() - minus_term)
}

/// Entropy `(n+1)ln(n+1) − n ln n` of a thermal mode with occupation `n`.
pub fn thermal_entropy(n_beta: f64) -> f64 {
    let hot = if n_beta > 0.0 {
        n_beta * n_beta.ln()
    } else {
        0.0
    };
    (n_beta + 1.0) * (n_beta + 1.0).ln() - hot
}

/// Thermodynamic-limit estimate of `⟨V_μ V_ν⟩/N` at reference size `N`.
pub fn product_expectation(
    m: &MeanFieldState,
    g: &Matrix3<f64>,
    mu: usize,
    nu: usize,
    n_spins: usize,
) -> Complex64 {
    let s = symplectic(m);
    Complex64::new(
        n_spins as f64 * m.m[mu] * m.m[nu] + g[(mu, nu)],
        0.5 * s[(mu, nu)],
    )
}

#[derive(Clone, Copy, Debug)]
struct Joint {
    m: Shifted,
    g: Matrix3<f64>,
}

impl Rk4State for Joint {
    fn add_scaled(&self, rate: &Self, h: f64) -> Self {
        Self {
            m: self.m.add_scaled(&rate.m, h),
            g: self.g + rate.g * h,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FluctuationTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<CovarianceState>,
    pub lambdas: Vec<f64>,
    pub entropies: Vec<f64>,
}

impl FluctuationTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn mz(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.m.z()).collect()
    }
}

pub fn joint_integrate(
    params: &SystemParams,
    m0: &MeanFieldState,
    g0: &Matrix3<f64>,
    t_max: f64,
    dt: f64,
) -> Result<FluctuationTrajectory> {
    joint_integrate_sampled(params, m0, g0, t_max, dt, 1)
}

/// Co-integrates the mean-field flow and the covariance ODE with one RK4
/// stepper, storing every `save_every`-th step. The physicality of `G` is
/// checked at every step.
pub fn joint_integrate_sampled(
    params: &SystemParams,
    m0: &MeanFieldState,
    g0: &Matrix3<f64>,
    t_max: f64,
    dt: f64,
    save_every: usize,
) -> Result<FluctuationTrajectory> {
    if !(dt > 0.0) || !(t_max > 0.0) {
        return Err(Error::InvalidParams(format!(
            "need dt > 0 and t_max > 0, got dt = {dt}, t_max = {t_max}"
        )));
    }
    let save_every = save_every.max(1);
    let pivot = meanfield::pivot(params)?;
    let steps = step_count(t_max, dt);
    let h = t_max / steps as f64;

    let rate = |y: &Joint| {
        let m = y.m.to_state(pivot);
        Joint {
            m: y.m.rate(params, pivot),
            g: covariance_rhs(params, &CovarianceState::new(y.g, m)),
        }
    };

    let capacity = steps / save_every + 2;
    let mut traj = FluctuationTrajectory {
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        lambdas: Vec::with_capacity(capacity),
        entropies: Vec::with_capacity(capacity),
    };
    let initial = CovarianceState::new(symmetrize(*g0), *m0);
    let lambda0 = symplectic_eigenvalue(&initial)?;
    traj.times.push(0.0);
    traj.states.push(initial);
    traj.lambdas.push(lambda0);
    traj.entropies.push(entropy_from_lambda(lambda0)?);

    let mut y = Joint {
        m: Shifted::from_state(m0, pivot),
        g: initial.g,
    };
    for step in 1..=steps {
        y = rk4_step(&y, h, rate);
        y.g = symmetrize(y.g);
        let t = step as f64 * h;
        let state = CovarianceState::new(y.g, y.m.to_state(pivot));
        let l2 = lambda_squared(&state.symplectic(), &state.g);
        let lambda = l2.max(0.0).sqrt();
        if !(l2 >= 0.0) || lambda < 0.5 - LAMBDA_ABORT {
            return Err(Error::IntegratorAbort {
                t,
                reason: format!("symplectic eigenvalue² {l2:e} violates λ ≥ 1/2"),
            });
        }
        if step % save_every != 0 && step != steps {
            continue;
        }
        traj.times.push(t);
        traj.states.push(state);
        traj.lambdas.push(lambda);
        traj.entropies.push(entropy_from_lambda(lambda)?);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(omega: f64, n_beta: f64) -> SystemParams {
        SystemParams::new(10, omega, 1.0, 1.0, n_beta).unwrap()
    }

    #[test]
    fn symplectic_examples() {
        let s = symplectic(&MeanFieldState::ground_state_vz());
        assert_abs_diff_eq!(s[(0, 1)], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[(1, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[(2, 2)] + s[(0, 2)] + s[(1, 2)], 0.0, epsilon = 1e-15);
        let s = symplectic(&MeanFieldState::ground_state_h());
        assert_abs_diff_eq!(s[(1, 2)], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[(2, 1)], 1.0, epsilon = 1e-15);
        assert_eq!(
            symplectic(&MeanFieldState::new(0.0, 0.0, 0.0)),
            Matrix3::zeros()
        );
    }

    #[test]
    fn drift_is_jacobian_of_mean_field_flow() {
        let p = params(1.3, 0.7);
        let m = MeanFieldState::new(0.31, -0.22, 0.45);
        let w = drift_matrix(&p, &m);
        let h = 1e-6;
        for j in 0..3 {
            let mut plus = m;
            let mut minus = m;
            plus.m[j] += h;
            minus.m[j] -= h;
            let col = (meanfield::mf_rhs(&p, &plus) - meanfield::mf_rhs(&p, &minus)) / (2.0 * h);
            for i in 0..3 {
                assert_abs_diff_eq!(w[(i, j)], col[i], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn drift_zero_without_field_or_magnetisation() {
        let w = drift_matrix(&params(0.0, 1.0), &MeanFieldState::new(0.0, 0.0, 0.0));
        assert_eq!(w, Matrix3::zeros());
    }

    #[test]
    fn drift_terms_at_south_pole() {
        let p = params(1.7, 1.0);
        let m = MeanFieldState::ground_state_vz();
        let d = Matrix3::from_fn(|mu, eta| -p.omega_rabi * levi_civita(0, mu, eta));
        assert_eq!(d[(1, 2)], -1.7);
        assert_eq!(d[(2, 1)], 1.7);
        assert_eq!(d.iter().filter(|v| **v != 0.0).count(), 2);
        let sb = symplectic(&m) * NoiseMatrices::new(&p).b;
        assert!(sb.row(2).iter().all(|v| *v == 0.0));
        assert_abs_diff_eq!(sb[(0, 0)], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sb[(1, 1)], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn drift_stable_at_stationary_fixed_point() {
        let p = params(0.5, 1.0);
        let fp = meanfield::stationary_fixed_point(&p).unwrap();
        let eig = drift_matrix(&p, &fp).complex_eigenvalues();
        assert!(eig.iter().all(|e| e.re <= 1e-12), "{eig:?}");
    }

    #[test]
    fn rhs_examples() {
        for n in [0.0, 1.0, 3.0] {
            let p = params(0.0, n);
            let m = MeanFieldState::ground_state_vz();
            let g = Matrix3::from_diagonal(&Vector3::new(n + 0.5, n + 0.5, 0.0));
            let rhs = covariance_rhs(&p, &CovarianceState::new(g, m));
            assert!(rhs.amax() < 1e-12);

            let p = params(1.4, n);
            let rhs = covariance_rhs(&p, &CovarianceState::new(Matrix3::zeros(), m));
            let expected = NoiseMatrices::new(&p).a;
            assert!((rhs - expected).amax() < 1e-14);
        }
    }

    #[test]
    fn entropy_examples() {
        let pure = CovarianceState::coherent(MeanFieldState::ground_state_h());
        assert!((pure.g - Matrix3::from_diagonal(&Vector3::new(0.0, 0.5, 0.5))).amax() < 1e-15);
        assert_abs_diff_eq!(pure.lambda().unwrap(), 0.5, epsilon = 1e-14);
        assert_eq!(pure.entropy().unwrap(), 0.0);

        let thermal = CovarianceState::new(
            Matrix3::from_diagonal(&Vector3::new(1.5, 1.5, 0.0)),
            MeanFieldState::ground_state_vz(),
        );
        assert_abs_diff_eq!(thermal.entropy().unwrap(), 2.0 * 2f64.ln(), epsilon = 1e-14);

        let mut bumped = thermal;
        bumped.g[(2, 2)] += 7.0;
        assert_abs_diff_eq!(
            bumped.entropy().unwrap(),
            thermal.entropy().unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn lambda_matches_eigenvalues_of_sg() {
        let m = MeanFieldState::new(0.2, -0.4, 0.5);
        let g = Matrix3::new(0.9, 0.1, -0.2, 0.1, 1.3, 0.05, -0.2, 0.05, 0.7);
        let state = CovarianceState::new(g, m);
        let eig = (state.symplectic() * g).complex_eigenvalues();
        let lambda = symplectic_eigenvalue(&state).unwrap();
        let mut mags: Vec<f64> = eig.iter().map(|e| e.norm()).collect();
        mags.sort_by(f64::total_cmp);
        assert!(mags[0] < 1e-10);
        assert_abs_diff_eq!(mags[2], lambda, epsilon = 1e-12);
        assert!(eig.iter().all(|e| e.re.abs() < 1e-10));
        assert!(eig.iter().map(|e| e.im).sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn unphysical_state_rejected() {
        let state = CovarianceState::new(
            Matrix3::from_diagonal(&Vector3::new(0.1, 0.1, 0.0)),
            MeanFieldState::ground_state_vz(),
        );
        assert!(matches!(state.entropy(), Err(Error::Unphysical(_))));
    }

    #[test]
    fn product_expectation_examples() {
        let m = MeanFieldState::new(0.3, 0.1, -0.5);
        let g = Matrix3::new(0.9, 0.1, -0.2, 0.1, 1.3, 0.05, -0.2, 0.05, 0.7);
        for mu in 0..3 {
            assert_eq!(product_expectation(&m, &g, mu, mu, 40).im, 0.0);
        }
        let zero = MeanFieldState::new(0.0, 0.0, 0.0);
        assert_eq!(
            product_expectation(&zero, &Matrix3::zeros(), 0, 1, 40),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn stationary_entropy_is_thermal() {
        for n in [0.5, 1.0, 2.0] {
            let p = params(0.5, n);
            let m0 = MeanFieldState::ground_state_h();
            let traj =
                joint_integrate_sampled(&p, &m0, &coherent_covariance(&m0), 80.0, 1e-3, 1000)
                    .unwrap();
            let s = *traj.entropies.last().unwrap();
            assert_abs_diff_eq!(s, thermal_entropy(n), epsilon = 1e-6);
        }
        assert_abs_diff_eq!(thermal_entropy(1.0), 2.0 * 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn covariance_depends_on_temperature_but_magnetisation_does_not() {
        let m0 = MeanFieldState::ground_state_h();
        let g0 = coherent_covariance(&m0);
        let cold = joint_integrate(&params(2.0, 0.0), &m0, &g0, 1.0, 1e-3).unwrap();
        let warm = joint_integrate(&params(2.0, 1.0), &m0, &g0, 1.0, 1e-3).unwrap();
        let (a, b) = (cold.states.last().unwrap(), warm.states.last().unwrap());
        assert_eq!(a.m, b.m);
        assert!((a.g - b.g).amax() > 0.0);
    }

    #[test]
    fn spectrum_and_positivity_along_flow() {
        let p = params(2.0, 1.0);
        let m0 = MeanFieldState::ground_state_h();
        let traj =
            joint_integrate_sampled(&p, &m0, &coherent_covariance(&m0), 30.0, 1e-3, 100).unwrap();
        for st in &traj.states {
            assert!((st.g - st.g.transpose()).amax() < 1e-12);
            let min = st.g.symmetric_eigenvalues().min();
            assert!(min >= -1e-8, "{min}");
        }
        assert!(traj.lambdas.iter().all(|l| *l >= 0.5 - 1e-8));
    }
}
