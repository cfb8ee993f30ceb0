//! Repeated-interaction model of the environment: a stream of fresh thermal
//! oscillators, each coupled to the spins for a window `δt` through
//!
//! `H_tot = H ⊗ 1 + 1 ⊗ ω a†a + √(Γ/(Nδt)) (V_− ⊗ a† + V_+ ⊗ a)`.
//!
//! Joint operators are ordered system ⊗ ancilla. Each collision applies
//! `U = exp(−i H_tot δt)` to `ρ ⊗ ρ_E` and traces out the ancilla; as
//! `δt → 0` the reduced dynamics approaches the Lindblad generator with an
//! `O(δt)` error. Heat is minus the energy absorbed by the ancilla.

use num_complex::Complex64 as C64;

use crate::dicke::{self, Axis, DenseOperator, DensityMatrix, SystemParams};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, I};
use crate::liouville::{self, EvolveOptions, LindbladGenerator, Trajectory};
use crate::thermo;

/// Target bound on the thermal population beyond the truncation level.
pub const THERMAL_TAIL_TOL: f64 = 1e-8;
/// Largest tolerated population gained by the top ancilla level in one
/// collision.
pub const LEAKAGE_TOL: f64 = 1e-6;
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

/// Smallest truncation whose discarded thermal tail `(n_β/(n_β+1))^{n_max+1}`
/// is below `1e-8`; at least 2 so that emission into the vacuum is resolved.
pub fn default_n_max(n_beta: f64) -> usize {
    if n_beta <= 0.0 {
        return 2;
    }
    let ratio = n_beta / (n_beta + 1.0);
    let n = (THERMAL_TAIL_TOL.ln() / ratio.ln()).ceil() as usize;
    n.max(2)
}

/// Thermal harmonic oscillator truncated to levels `0..=n_max`.
#[derive(Clone, Debug)]
pub struct OscillatorAncilla {
    pub n_max: usize,
    pub omega_bath: f64,
    pub n_beta: f64,
    pub state: DensityMatrix,
    populations: Vec<f64>,
}

impl OscillatorAncilla {
    /// Thermal state `p_n ∝ (n_β/(n_β+1))^n` renormalised on the truncated
    /// space.
    pub fn new(params: &SystemParams, n_max: usize) -> Self {
        let ratio = params.n_beta / (params.n_beta + 1.0);
        let raw: Vec<f64> = (0..=n_max).map(|n| ratio.powi(n as i32)).collect();
        let z: f64 = raw.iter().sum();
        let populations: Vec<f64> = raw.iter().map(|p| p / z).collect();
        let state = DensityMatrix::diagonal(&populations)
            .expect("normalised thermal populations form a valid state");
        Self {
            n_max,
            omega_bath: params.omega_bath,
            n_beta: params.n_beta,
            state,
            populations,
        }
    }

    pub fn thermal(params: &SystemParams) -> Self {
        Self::new(params, default_n_max(params.n_beta))
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    /// Thermal weight discarded by the truncation.
    pub fn thermal_tail(&self) -> f64 {
        (self.n_beta / (self.n_beta + 1.0)).powi(self.n_max as i32 + 1)
    }

    pub fn check_truncation(&self) -> Result<()> {
        let tail = self.thermal_tail();
        if tail >= THERMAL_TAIL_TOL {
            return Err(Error::TruncationLeakage {
                population: tail,
                n_max: self.n_max,
            });
        }
        Ok(())
    }

    /// `⟨a†a⟩` of the truncated thermal state.
    pub fn mean_occupation(&self) -> f64 {
        self.populations
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    pub fn annihilation(&self) -> CMat {
        let d = self.dim();
        let mut a = linalg::zeros(d);
        for n in 1..d {
            a[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
        }
        a
    }

    pub fn number(&self) -> CMat {
        let d = self.dim();
        let mut num = linalg::zeros(d);
        for n in 0..d {
            num[[n, n]] = C64::new(n as f64, 0.0);
        }
        num
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionConfig {
    pub delta_t: f64,
    pub n_collisions: usize,
}

impl CollisionConfig {
    pub fn new(delta_t: f64, n_collisions: usize) -> Result<Self> {
        if !(delta_t > 0.0) {
            return Err(Error::InvalidParams(format!(
                "collision duration must be positive, got {delta_t}"
            )));
        }
        Ok(Self {
            delta_t,
            n_collisions,
        })
    }

    /// Configuration covering `t_max` with steps as close to `delta_t` as
    /// possible.
    pub fn covering(t_max: f64, delta_t: f64) -> Result<Self> {
        let n = crate::ode::step_count(t_max, delta_t);
        Self::new(t_max / n as f64, n)
    }

    /// `√(Γ/(Nδt))`
    pub fn coupling(&self, params: &SystemParams) -> f64 {
        (params.gamma / (params.n_spins as f64 * self.delta_t)).sqrt()
    }
}

/// Interaction part `√(Γ/(Nδt)) (V_− ⊗ a† + V_+ ⊗ a)`.
pub fn interaction_hamiltonian(
    params: &SystemParams,
    config: &CollisionConfig,
    ancilla: &OscillatorAncilla,
) -> CMat {
    let a = ancilla.annihilation();
    let ad = linalg::dagger(&a);
    let vm = dicke::collective_op(params, Axis::Minus).into_matrix();
    let vp = dicke::collective_op(params, Axis::Plus).into_matrix();
    let g = config.coupling(params);
    (linalg::kron(&vm, &ad) + linalg::kron(&vp, &a)).mapv(|z| z * g)
}

pub fn joint_hamiltonian(
    params: &SystemParams,
    config: &CollisionConfig,
    ancilla: &OscillatorAncilla,
) -> DenseOperator {
    let h = dicke::hamiltonian(params).into_matrix();
    let free = linalg::kron(&h, &linalg::identity(ancilla.dim()))
        + linalg::kron(
            &linalg::identity(params.dim()),
            &ancilla.number().mapv(|z| z * ancilla.omega_bath),
        );
    DenseOperator::new(free + interaction_hamiltonian(params, config, ancilla))
        .expect("joint Hamiltonian is square")
}

/// Result of a single collision evaluated on the joint space.
#[derive(Clone, Debug)]
pub struct CollisionStep {
    pub rho_next: DensityMatrix,
    /// `−ω Δ⟨a†a⟩`
    pub heat: f64,
    /// Switching work `−⟨H_int⟩` after the collision.
    pub work: f64,
    pub joint_post: DensityMatrix,
}

#[derive(Clone, Debug)]
pub struct CollisionModel {
    params: SystemParams,
    config: CollisionConfig,
    ancilla: OscillatorAncilla,
    unitary: CMat,
    interaction: CMat,
    /// `kraus[n' (n_max+1) + n] = √p_n ⟨n'|U|n⟩`
    kraus: Vec<CMat>,
    hamiltonian: CMat,
    leakage_tol: Option<f64>,
}

impl CollisionModel {
    pub fn new(
        params: &SystemParams,
        config: &CollisionConfig,
        ancilla: OscillatorAncilla,
    ) -> Result<Self> {
        Self::with_cap(params, config, ancilla, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(
        params: &SystemParams,
        config: &CollisionConfig,
        ancilla: OscillatorAncilla,
        dimension_cap: usize,
    ) -> Result<Self> {
        params.validate()?;
        let ds = params.dim();
        let da = ancilla.dim();
        if ds * da > dimension_cap {
            return Err(Error::SizeCap(format!(
                "joint dimension {} exceeds the cap {dimension_cap}",
                ds * da
            )));
        }
        let h_tot = joint_hamiltonian(params, config, &ancilla);
        let unitary = linalg::expm(&h_tot.matrix().mapv(|z| -I * z * config.delta_t))?;
        let mut kraus = Vec::with_capacity(da * da);
        for out in 0..da {
            for inp in 0..da {
                let w = ancilla.populations()[inp].sqrt();
                kraus.push(CMat::from_shape_fn((ds, ds), |(s1, s0)| {
                    unitary[[s1 * da + out, s0 * da + inp]] * w
                }));
            }
        }
        Ok(Self {
            params: *params,
            config: *config,
            interaction: interaction_hamiltonian(params, config, &ancilla),
            ancilla,
            unitary,
            kraus,
            hamiltonian: dicke::hamiltonian(params).into_matrix(),
            leakage_tol: Some(LEAKAGE_TOL),
        })
    }

    /// Disables the truncation-leakage check, for deliberately coarse
    /// ancillas.
    pub fn without_leakage_check(mut self) -> Self {
        self.leakage_tol = None;
        self
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn config(&self) -> &CollisionConfig {
        &self.config
    }

    pub fn ancilla(&self) -> &OscillatorAncilla {
        &self.ancilla
    }

    pub fn unitary(&self) -> &CMat {
        &self.unitary
    }

    fn check_leakage(&self, top_population: f64) -> Result<()> {
        let gained = top_population - self.ancilla.populations()[self.ancilla.n_max];
        match self.leakage_tol {
            Some(tol) if gained > tol => Err(Error::TruncationLeakage {
                population: gained,
                n_max: self.ancilla.n_max,
            }),
            _ => Ok(()),
        }
    }

    /// One collision on the joint space, returning the post-collision joint
    /// state alongside the reduced state, heat and switching work.
    pub fn collide_once(&self, rho: &DensityMatrix) -> Result<CollisionStep> {
        let ds = self.params.dim();
        let da = self.ancilla.dim();
        if rho.dim() != ds {
            return Err(Error::DimensionMismatch {
                expected: ds,
                found: rho.dim(),
            });
        }
        let joint = linalg::kron(rho.matrix(), self.ancilla.state.matrix());
        let post = self.unitary.dot(&joint).dot(&linalg::dagger(&self.unitary));
        let post = linalg::hermitian_part(&post);
        let env = linalg::partial_trace_first(&post, ds, da);
        self.check_leakage(env[[da - 1, da - 1]].re)?;
        let number = self.ancilla.number();
        let occupation = linalg::trace_product(&env, &number).re;
        let heat = -self.ancilla.omega_bath * (occupation - self.ancilla.mean_occupation());
        let work = -linalg::trace_product(&post, &self.interaction).re;
        let sys = linalg::partial_trace_second(&post, ds, da);
        let tr = linalg::trace(&sys);
        Ok(CollisionStep {
            rho_next: DensityMatrix::new_unchecked(sys.mapv(|z| z / tr)),
            heat,
            work,
            joint_post: DensityMatrix::new_unchecked(post),
        })
    }

    /// One collision through the Kraus blocks: `(ρ', heat, work)` with the
    /// work fixed by energy balance `ΔU + ΔE_anc`.
    pub fn step(&self, rho: &CMat) -> Result<(CMat, f64, f64)> {
        let ds = self.params.dim();
        let da = self.ancilla.dim();
        let mut next = linalg::zeros(ds);
        let mut occupation = 0.0;
        let mut top = 0.0;
        for out in 0..da {
            let mut block = linalg::zeros(ds);
            for inp in 0..da {
                let k = &self.kraus[out * da + inp];
                block = block + k.dot(rho).dot(&linalg::dagger(k));
            }
            let pop = linalg::trace(&block).re;
            occupation += out as f64 * pop;
            if out == da - 1 {
                top = pop;
            }
            next = next + block;
        }
        self.check_leakage(top)?;
        let next = linalg::hermitian_part(&next);
        let tr = linalg::trace(&next);
        let next = next.mapv(|z| z / tr);
        let heat = -self.ancilla.omega_bath * (occupation - self.ancilla.mean_occupation());
        let du = linalg::trace_product(&self.hamiltonian, &next).re
            - linalg::trace_product(&self.hamiltonian, rho).re;
        Ok((next, heat, du - heat))
    }
}

#[derive(Clone, Debug)]
pub struct CollisionTrajectory {
    pub trajectory: Trajectory,
    /// Heat absorbed by the spins up to each stored time.
    pub heat_cumulative: Vec<f64>,
    pub work_cumulative: Vec<f64>,
    /// Ancilla truncation actually used (after any doubling).
    pub n_max: usize,
}

/// Repeated collisions from `rho0` until `t_max`, storing every
/// `save_every`-th state. If an ancilla leaks beyond its truncation the run
/// restarts with `n_max` doubled.
pub fn collision_trajectory(
    rho0: &DensityMatrix,
    params: &SystemParams,
    config: &CollisionConfig,
    save_every: usize,
) -> Result<CollisionTrajectory> {
    let mut n_max = default_n_max(params.n_beta);
    loop {
        let model = CollisionModel::new(params, config, OscillatorAncilla::new(params, n_max))?;
        match run_collisions(&model, rho0, save_every) {
            Err(Error::TruncationLeakage { .. })
                if (2 * n_max + 1) * params.dim() <= DEFAULT_DIMENSION_CAP =>
            {
                n_max *= 2;
            }
            other => return other,
        }
    }
}

pub fn run_collisions(
    model: &CollisionModel,
    rho0: &DensityMatrix,
    save_every: usize,
) -> Result<CollisionTrajectory> {
    let params = *model.params();
    let save_every = save_every.max(1);
    let n = model.config().n_collisions;
    let dt = model.config().delta_t;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![rho0.clone()],
        magnetization: vec![dicke::magnetization(&params, rho0)],
    };
    let mut heat_cumulative = vec![0.0];
    let mut work_cumulative = vec![0.0];
    let (mut heat, mut work) = (0.0, 0.0);
    let mut rho = rho0.matrix().clone();
    for k in 1..=n {
        let (next, dq, dw) = model.step(&rho)?;
        rho = next;
        heat += dq;
        work += dw;
        if k % save_every == 0 || k == n {
            let state = DensityMatrix::new_unchecked(rho.clone());
            traj.magnetization
                .push(dicke::magnetization(&params, &state));
            traj.times.push(k as f64 * dt);
            traj.states.push(state);
            heat_cumulative.push(heat);
            work_cumulative.push(work);
        }
    }
    Ok(CollisionTrajectory {
        trajectory: traj,
        heat_cumulative,
        work_cumulative,
        n_max: model.ancilla().n_max,
    })
}

/// One row of a `δt` convergence study at fixed final time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub delta_t: f64,
    pub trace_distance: f64,
    pub heat_collision: f64,
    pub heat_lindblad: f64,
}

impl ConvergenceRow {
    pub fn heat_relative_error(&self) -> f64 {
        (self.heat_collision - self.heat_lindblad).abs() / self.heat_lindblad.abs()
    }
}

/// Lindblad reference at `t_max`: final state and `∫Q̇ dt` (trapezoidal).
pub fn lindblad_reference(
    rho0: &DensityMatrix,
    params: &SystemParams,
    t_max: f64,
    dt: f64,
) -> Result<(DensityMatrix, f64)> {
    let gen = LindbladGenerator::new(params)?;
    let traj = liouville::evolve_with(
        &gen,
        rho0,
        &EvolveOptions::new(t_max, dt).check_positivity(false),
    )?;
    let obs = thermo::Observables::new(params);
    let q: Vec<f64> = traj.states.iter().map(|r| obs.heat_current(r)).collect();
    let avg = thermo::time_avg_power(&traj.times, &q);
    let heat = avg.last().copied().unwrap_or(0.0) * t_max;
    Ok((
        traj.states.last().cloned().unwrap_or_else(|| rho0.clone()),
        heat,
    ))
}

pub fn convergence_study(
    rho0: &DensityMatrix,
    params: &SystemParams,
    t_max: f64,
    deltas: &[f64],
    reference_dt: f64,
) -> Result<Vec<ConvergenceRow>> {
    let (reference, heat_lindblad) = lindblad_reference(rho0, params, t_max, reference_dt)?;
    deltas
        .iter()
        .map(|&dt| {
            let config = CollisionConfig::covering(t_max, dt)?;
            let run = collision_trajectory(rho0, params, &config, config.n_collisions)?;
            let last = run.trajectory.last().expect("non-empty trajectory");
            Ok(ConvergenceRow {
                delta_t: config.delta_t,
                trace_distance: last.trace_distance(&reference)?,
                heat_collision: *run.heat_cumulative.last().unwrap(),
                heat_lindblad,
            })
        })
        .collect()
}
