//! Finite-N Lindblad dynamics of the collective spin:
//!
//! `L[ρ] = −i[H, ρ] + Γ(n_β+1)/N D[V_−]ρ + Γn_β/N D[V_+]ρ`,
//! with `D[X]ρ = XρX† − ½{ρ, X†X}`.
//!
//! `H`, `V_+` and `V_−` are at most tridiagonal in the Dicke basis, so the
//! generator is applied in `O(d²)` work without forming matrix products.

use ndarray_linalg::SVD;
use num_complex::Complex64 as C64;

use crate::dicke::{self, Axis, DenseOperator, DensityMatrix, SystemParams};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, I};
use crate::ode::{rk4_step, step_count};

/// Default largest `N` for which the steady state is found from the dense
/// superoperator null space.
pub const DEFAULT_NULL_SPACE_CAP: usize = 60;

const TRACE_RENORM_TOL: f64 = 1e-8;
const POSITIVITY_ABORT: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct LindbladGenerator {
    params: SystemParams,
    hamiltonian: DenseOperator,
    jump_down: DenseOperator,
    jump_up: DenseOperator,
    rate_down: f64,
    rate_up: f64,
    ladder: Vec<f64>,
    hop: Vec<f64>,
}

impl LindbladGenerator {
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let n = params.n_spins as f64;
        let ladder = dicke::ladder_coefficients(params.n_spins);
        let hop = ladder
            .iter()
            .map(|a| params.omega_rabi * a / (2.0 * std::f64::consts::SQRT_2))
            .collect();
        Ok(Self {
            params: *params,
            hamiltonian: dicke::hamiltonian(params),
            jump_down: dicke::collective_op(params, Axis::Minus),
            jump_up: dicke::collective_op(params, Axis::Plus),
            rate_down: params.gamma * (params.n_beta + 1.0) / n,
            rate_up: params.gamma * params.n_beta / n,
            ladder,
            hop,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn hamiltonian(&self) -> &DenseOperator {
        &self.hamiltonian
    }

    /// `(V_−, Γ(n_β+1)/N)`
    pub fn jump_down(&self) -> (&DenseOperator, f64) {
        (&self.jump_down, self.rate_down)
    }

    /// `(V_+, Γn_β/N)`
    pub fn jump_up(&self) -> (&DenseOperator, f64) {
        (&self.jump_up, self.rate_up)
    }

    /// `L[x]` for any square matrix of the right size.
    pub fn apply(&self, x: &CMat) -> CMat {
        let d = self.dim();
        let a = &self.ladder;
        let h = &self.hop;
        // diag(V_+V_−)_p = a_{p+1}², diag(V_−V_+)_p = a_p²
        let dn = |p: usize| if p + 1 < d { a[p + 1] * a[p + 1] } else { 0.0 };
        let up = |p: usize| a[p] * a[p];
        let mut out = CMat::zeros((d, d));
        for p in 0..d {
            for q in 0..d {
                let mut hx = C64::new(0.0, 0.0);
                if p + 1 < d {
                    hx += h[p + 1] * x[[p + 1, q]];
                }
                if p >= 1 {
                    hx += h[p] * x[[p - 1, q]];
                }
                if q + 1 < d {
                    hx -= h[q + 1] * x[[p, q + 1]];
                }
                if q >= 1 {
                    hx -= h[q] * x[[p, q - 1]];
                }
                let mut v = -I * hx;

                let xpq = x[[p, q]];
                let mut down = -0.5 * (dn(p) + dn(q)) * xpq;
                if p >= 1 && q >= 1 {
                    down += a[p] * a[q] * x[[p - 1, q - 1]];
                }
                let mut upw = -0.5 * (up(p) + up(q)) * xpq;
                if p + 1 < d && q + 1 < d {
                    upw += a[p + 1] * a[q + 1] * x[[p + 1, q + 1]];
                }
                v += self.rate_down * down + self.rate_up * upw;
                out[[p, q]] = v;
            }
        }
        out
    }

    /// `L[x]` evaluated with dense matrix products; reference path for tests.
    pub fn apply_dense(&self, x: &CMat) -> CMat {
        let h = self.hamiltonian.matrix();
        let mut out = linalg::commutator(h, x).mapv(|z| -I * z);
        for (jump, rate) in [
            (self.jump_down.matrix(), self.rate_down),
            (self.jump_up.matrix(), self.rate_up),
        ] {
            let jd = linalg::dagger(jump);
            let jdj = jd.dot(jump);
            let term = jump.dot(x).dot(&jd) - (x.dot(&jdj) + jdj.dot(x)).mapv(|z| 0.5 * z);
            out.scaled_add(C64::new(rate, 0.0), &term);
        }
        out
    }

    /// Heisenberg-picture generator `L*[X] = i[H,X] + Σ γ (J†XJ − ½{J†J, X})`.
    pub fn apply_adjoint(&self, x: &CMat) -> CMat {
        let h = self.hamiltonian.matrix();
        let mut out = linalg::commutator(h, x).mapv(|z| I * z);
        for (jump, rate) in [
            (self.jump_down.matrix(), self.rate_down),
            (self.jump_up.matrix(), self.rate_up),
        ] {
            let jd = linalg::dagger(jump);
            let jdj = jd.dot(jump);
            let term = jd.dot(x).dot(jump) - (x.dot(&jdj) + jdj.dot(x)).mapv(|z| 0.5 * z);
            out.scaled_add(C64::new(rate, 0.0), &term);
        }
        out
    }

    /// Dense `d² × d²` matrix of `L` acting on row-major vectorised
    /// operators, assembled column by column from matrix units.
    pub fn superoperator(&self) -> CMat {
        let d = self.dim();
        let d2 = d * d;
        let mut sup = CMat::zeros((d2, d2));
        let mut unit = CMat::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                unit[[i, j]] = C64::new(1.0, 0.0);
                let col = self.apply(&unit);
                unit[[i, j]] = C64::new(0.0, 0.0);
                for k in 0..d {
                    for l in 0..d {
                        sup[[k * d + l, i * d + j]] = col[[k, l]];
                    }
                }
            }
        }
        sup
    }

    /// Crude upper bound on the spectral radius of `L`, used to pick
    /// stable step sizes.
    pub fn rate_bound(&self) -> f64 {
        let amax = self.ladder.iter().fold(0.0f64, |m, &a| m.max(a * a));
        let hmax = self.hop.iter().fold(0.0f64, |m, &h| m.max(h.abs()));
        2.0 * (self.rate_down + self.rate_up) * amax + 4.0 * hmax
    }
}

/// `L[ρ]` with a dimension check.
pub fn apply_generator(gen: &LindbladGenerator, rho: &DensityMatrix) -> Result<DenseOperator> {
    if rho.dim() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            found: rho.dim(),
        });
    }
    Ok(DenseOperator::from_square(gen.apply(rho.matrix())))
}

/// Density matrices sampled along an integration, with the per-spin
/// magnetisation `(⟨V_x⟩, ⟨V_y⟩, ⟨V_z⟩)/N` cached for each sample.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub magnetization: Vec<[f64; 3]>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&DensityMatrix> {
        self.states.last()
    }

    /// Spacing between stored samples.
    pub fn sample_spacing(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvolveOptions {
    pub t_max: f64,
    pub dt: f64,
    /// Store every `save_every`-th step (the initial state is always stored).
    pub save_every: usize,
    /// Diagonalise stored states and abort on negative eigenvalues.
    pub check_positivity: bool,
}

impl EvolveOptions {
    pub fn new(t_max: f64, dt: f64) -> Self {
        Self {
            t_max,
            dt,
            save_every: 1,
            check_positivity: true,
        }
    }

    pub fn save_every(mut self, stride: usize) -> Self {
        self.save_every = stride.max(1);
        self
    }

    pub fn check_positivity(mut self, on: bool) -> Self {
        self.check_positivity = on;
        self
    }
}

/// RK4 integration of `ρ̇ = L[ρ]`, storing every step.
pub fn evolve(
    gen: &LindbladGenerator,
    rho0: &DensityMatrix,
    t_max: f64,
    dt: f64,
) -> Result<Trajectory> {
    evolve_with(gen, rho0, &EvolveOptions::new(t_max, dt))
}

pub fn evolve_with(
    gen: &LindbladGenerator,
    rho0: &DensityMatrix,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if !(opts.dt > 0.0) || !(opts.t_max >= opts.dt) {
        return Err(Error::InvalidParams(format!(
            "need dt > 0 and t_max >= dt, got dt = {}, t_max = {}",
            opts.dt, opts.t_max
        )));
    }
    if rho0.dim() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            found: rho0.dim(),
        });
    }
    let steps = step_count(opts.t_max, opts.dt);
    let h = opts.t_max / steps as f64;
    let params = *gen.params();

    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![rho0.clone()],
        magnetization: vec![dicke::magnetization(&params, rho0)],
    };
    let mut rho = rho0.matrix().clone();
    for step in 1..=steps {
        rho = rk4_step(&rho, h, |x| gen.apply(x));
        if step % opts.save_every != 0 && step != steps {
            continue;
        }
        let t = step as f64 * h;
        let tr = linalg::trace(&rho);
        let drift = (tr - C64::new(1.0, 0.0)).norm();
        if drift > TRACE_RENORM_TOL {
            return Err(Error::IntegratorAbort {
                t,
                reason: format!("trace drift {drift:e}; reduce dt"),
            });
        }
        rho.mapv_inplace(|z| z / tr);
        if opts.check_positivity {
            let min = linalg::eigvalsh(&rho)?[0];
            if min < -POSITIVITY_ABORT {
                return Err(Error::IntegratorAbort {
                    t,
                    reason: format!("negative eigenvalue {min:e}; reduce dt"),
                });
            }
        }
        let state = DensityMatrix::new_unchecked(rho.clone());
        traj.magnetization
            .push(dicke::magnetization(&params, &state));
        traj.times.push(t);
        traj.states.push(state);
    }
    Ok(traj)
}

#[derive(Clone, Copy, Debug)]
pub struct SteadyStateOptions {
    /// Largest `N` routed through the SVD null space.
    pub null_space_cap: usize,
    /// Stopping criterion `‖L[ρ]‖_max` for the long-time fallback.
    pub fallback_tol: f64,
    /// Give up the fallback after this much evolution time.
    pub max_time: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            null_space_cap: DEFAULT_NULL_SPACE_CAP,
            fallback_tol: 1e-8,
            max_time: 1e5,
        }
    }
}

/// Stationary state `π` with `L[π] = 0`.
pub fn steady_state(gen: &LindbladGenerator) -> Result<DensityMatrix> {
    steady_state_with(gen, &SteadyStateOptions::default())
}

pub fn steady_state_with(
    gen: &LindbladGenerator,
    opts: &SteadyStateOptions,
) -> Result<DensityMatrix> {
    if gen.params().n_spins <= opts.null_space_cap {
        steady_state_null_space(gen)
    } else {
        steady_state_by_evolution(gen, opts.fallback_tol, opts.max_time)
    }
}

/// Null vector of the dense superoperator from its SVD.
pub fn steady_state_null_space(gen: &LindbladGenerator) -> Result<DensityMatrix> {
    let d = gen.dim();
    let sup = gen.superoperator();
    let (_, sing, vt) = sup.svd(false, true)?;
    let vt = vt.expect("right singular vectors requested");
    let smax = sing[0];
    let null_dim = sing.iter().filter(|&&s| s < 1e-12 * smax).count();
    if null_dim > 1 {
        return Err(Error::DegenerateNullSpace(null_dim));
    }
    let last = sing.len() - 1;
    let v = vt.row(last);
    let mut rho = CMat::from_shape_fn((d, d), |(i, j)| v[i * d + j].conj());
    let tr = linalg::trace(&rho);
    rho.mapv_inplace(|z| z / tr);
    let rho = linalg::hermitian_part(&rho);
    DensityMatrix::new(rho)
}

/// Long-time RK4 evolution from the maximally mixed state until
/// `‖L[ρ]‖_max < tol`.
pub fn steady_state_by_evolution(
    gen: &LindbladGenerator,
    tol: f64,
    max_time: f64,
) -> Result<DensityMatrix> {
    let dt = (1.0 / gen.rate_bound().max(1e-12)).min(0.05);
    let mut rho = DensityMatrix::maximally_mixed(gen.dim()).into_matrix();
    let mut t = 0.0;
    let check_every = 50;
    loop {
        for _ in 0..check_every {
            rho = rk4_step(&rho, dt, |x| gen.apply(x));
        }
        t += check_every as f64 * dt;
        let tr = linalg::trace(&rho);
        rho.mapv_inplace(|z| z / tr);
        let residual = linalg::max_norm(&gen.apply(&rho));
        if residual < tol {
            return DensityMatrix::new(linalg::hermitian_part(&rho));
        }
        if t > max_time {
            return Err(Error::IntegratorAbort {
                t,
                reason: format!("steady state not reached, residual {residual:e}"),
            });
        }
    }
}
