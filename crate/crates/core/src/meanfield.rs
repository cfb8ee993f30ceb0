//! Thermodynamic-limit dynamics of the average magnetisation
//! `m_α = lim ⟨V_α⟩/N`:
//!
//! ```text
//! ṁ_x = √2Γ m_z m_x
//! ṁ_y = m_z (√2Γ m_y − Ω)
//! ṁ_z = Ω m_y − √2Γ (m_x² + m_y²)
//! ```
//!
//! The flow conserves `|m|²` and the ratio `c = m_x / (m_y − Ω/(√2Γ))`. It
//! does not depend on the bath temperature.
//!
//! The integrator advances `(m_x, m_y − Ω/(√2Γ), m_z)` instead of `m`
//! itself: both `m_x` and the shifted `m_y` obey `u̇ = √2Γ m_z u`, so their
//! ratio `c` survives even when both decay far below the resolution of
//! `m_y` near the stationary fixed point.

use std::f64::consts::SQRT_2;

use nalgebra::Vector3;

use crate::dicke::SystemParams;
use crate::error::{Error, Result};
use crate::ode::{rk4_step, step_count, Rk4State};

const CONSERVATION_ABORT: f64 = 1e-6;

/// Average magnetisation per spin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFieldState {
    pub m: Vector3<f64>,
}

impl MeanFieldState {
    pub fn new(mx: f64, my: f64, mz: f64) -> Self {
        Self {
            m: Vector3::new(mx, my, mz),
        }
    }

    /// Direction `(sin θ cos φ, sin θ sin φ, cos θ)` at `|m|² = 1/2`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let r = 1.0 / SQRT_2;
        Self::new(
            r * theta.sin() * phi.cos(),
            r * theta.sin() * phi.sin(),
            r * theta.cos(),
        )
    }

    /// Image of the ground state of `H` (all spins along −x).
    pub fn ground_state_h() -> Self {
        Self::new(-1.0 / SQRT_2, 0.0, 0.0)
    }

    /// Image of the lowest `V_z` state.
    pub fn ground_state_vz() -> Self {
        Self::new(0.0, 0.0, -1.0 / SQRT_2)
    }

    pub fn x(&self) -> f64 {
        self.m.x
    }

    pub fn y(&self) -> f64 {
        self.m.y
    }

    pub fn z(&self) -> f64 {
        self.m.z
    }

    pub fn norm_sq(&self) -> f64 {
        self.m.norm_squared()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Stationary,
    Critical,
    TimeCrystal,
}

/// Classification by the sign of `Ω − Γ`.
pub fn phase(params: &SystemParams) -> Phase {
    let diff = params.omega_rabi.abs() - params.gamma;
    if diff.abs() <= 1e-12 * params.gamma.max(1e-300) {
        Phase::Critical
    } else if diff < 0.0 {
        Phase::Stationary
    } else {
        Phase::TimeCrystal
    }
}

pub fn mf_rhs(params: &SystemParams, m: &MeanFieldState) -> Vector3<f64> {
    let g = SQRT_2 * params.gamma;
    let om = params.omega_rabi;
    let (x, y, z) = (m.m.x, m.m.y, m.m.z);
    Vector3::new(g * z * x, z * (g * y - om), om * y - g * (x * x + y * y))
}

/// `Ω/(√2Γ)`, the `m_y` coordinate of the line about which orbits rotate.
pub fn pivot(params: &SystemParams) -> Result<f64> {
    if !(params.gamma > 0.0) {
        return Err(Error::InvalidParams(
            "mean-field dynamics needs gamma > 0".into(),
        ));
    }
    Ok(params.omega_rabi / (SQRT_2 * params.gamma))
}

/// `c = m_x / (m_y − Ω/(√2Γ))`.
pub fn conserved_c(params: &SystemParams, m: &MeanFieldState) -> Result<f64> {
    let denom = m.m.y - pivot(params)?;
    if denom.abs() <= 1e-12 {
        return Err(Error::Singular(format!(
            "m_y − Ω/(√2Γ) = {denom:e} on the singular manifold of c"
        )));
    }
    Ok(m.m.x / denom)
}

/// Stationary fixed point `(0, Ω/(√2Γ), −√(Γ²−Ω²)/(√2Γ))` for `Ω ≤ Γ`.
pub fn stationary_fixed_point(params: &SystemParams) -> Option<MeanFieldState> {
    let (om, g) = (params.omega_rabi, params.gamma);
    if !(g > 0.0) || om.abs() > g {
        return None;
    }
    Some(MeanFieldState::new(
        0.0,
        om / (SQRT_2 * g),
        -(g * g - om * om).max(0.0).sqrt() / (SQRT_2 * g),
    ))
}

/// Integration coordinates `(m_x, m_y − Ω/(√2Γ), m_z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Shifted {
    pub x: f64,
    pub u: f64,
    pub z: f64,
}

impl Shifted {
    pub(crate) fn from_state(m: &MeanFieldState, pivot: f64) -> Self {
        Self {
            x: m.m.x,
            u: m.m.y - pivot,
            z: m.m.z,
        }
    }

    pub(crate) fn to_state(self, pivot: f64) -> MeanFieldState {
        MeanFieldState::new(self.x, self.u + pivot, self.z)
    }

    pub(crate) fn rate(&self, params: &SystemParams, pivot: f64) -> Self {
        let g = SQRT_2 * params.gamma;
        let y = self.u + pivot;
        Self {
            x: g * self.z * self.x,
            u: g * self.z * self.u,
            z: params.omega_rabi * y - g * (self.x * self.x + y * y),
        }
    }

    pub(crate) fn c(&self) -> Option<f64> {
        (self.u != 0.0).then(|| self.x / self.u)
    }
}

impl Rk4State for Shifted {
    fn add_scaled(&self, rate: &Self, h: f64) -> Self {
        Self {
            x: self.x + h * rate.x,
            u: self.u + h * rate.u,
            z: self.z + h * rate.z,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeanFieldTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
    /// `c` at each sample; `None` exactly on the singular manifold.
    pub c_values: Vec<Option<f64>>,
}

impl MeanFieldTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn mz(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.m.z).collect()
    }
}

pub fn mf_integrate(
    params: &SystemParams,
    m0: &MeanFieldState,
    t_max: f64,
    dt: f64,
) -> Result<MeanFieldTrajectory> {
    mf_integrate_sampled(params, m0, t_max, dt, 1)
}

/// RK4 integration storing every `save_every`-th step.
pub fn mf_integrate_sampled(
    params: &SystemParams,
    m0: &MeanFieldState,
    t_max: f64,
    dt: f64,
    save_every: usize,
) -> Result<MeanFieldTrajectory> {
    if !(dt > 0.0) || !(t_max > 0.0) {
        return Err(Error::InvalidParams(format!(
            "need dt > 0 and t_max > 0, got dt = {dt}, t_max = {t_max}"
        )));
    }
    let save_every = save_every.max(1);
    let pivot = pivot(params)?;
    let steps = step_count(t_max, dt);
    let h = t_max / steps as f64;

    let mut y = Shifted::from_state(m0, pivot);
    let norm0 = m0.norm_sq();
    let c0 = y.c();
    let capacity = steps / save_every + 2;
    let mut traj = MeanFieldTrajectory {
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        c_values: Vec::with_capacity(capacity),
    };
    traj.times.push(0.0);
    traj.states.push(*m0);
    traj.c_values.push(c0);

    for step in 1..=steps {
        y = rk4_step(&y, h, |s| s.rate(params, pivot));
        if step % save_every != 0 && step != steps {
            continue;
        }
        let t = step as f64 * h;
        let state = y.to_state(pivot);
        let drift = (state.norm_sq() - norm0).abs();
        if !(drift <= CONSERVATION_ABORT) {
            return Err(Error::IntegratorAbort {
                t,
                reason: format!("|m|² drifted by {drift:e}"),
            });
        }
        let c = y.c();
        if let (Some(c), Some(c0)) = (c, c0) {
            let rel = (c - c0).abs() / c0.abs().max(1.0);
            if !(rel <= CONSERVATION_ABORT) {
                return Err(Error::IntegratorAbort {
                    t,
                    reason: format!("c drifted by {rel:e}"),
                });
            }
        }
        traj.times.push(t);
        traj.states.push(state);
        traj.c_values.push(c);
    }
    Ok(traj)
}

/// Upward zero crossings of `m_z`, linearly interpolated.
pub fn upward_crossings(times: &[f64], mz: &[f64]) -> Vec<f64> {
    times
        .windows(2)
        .zip(mz.windows(2))
        .filter(|(_, z)| z[0] < 0.0 && z[1] >= 0.0)
        .map(|(t, z)| t[0] - z[0] * (t[1] - t[0]) / (z[1] - z[0]))
        .collect()
}

/// Limit-cycle period in the time-crystal phase.
pub fn mf_period(params: &SystemParams, m0: &MeanFieldState) -> Result<f64> {
    let (om, g) = (params.omega_rabi, params.gamma);
    if phase(params) != Phase::TimeCrystal {
        return Err(Error::NoPeriod(format!(
            "Ω = {om} does not exceed Γ = {g}; no limit cycle"
        )));
    }
    let guess = 2.0 * std::f64::consts::PI / (om * om - g * g).sqrt();
    mf_period_with(params, m0, 12.0 * guess + 10.0 / g, 1e-3 / g)
}

/// Period from successive upward zero crossings of `m_z`, discarding the
/// first third of the run as transient. Consecutive periods must agree to
/// a relative `1e-4`.
pub fn mf_period_with(
    params: &SystemParams,
    m0: &MeanFieldState,
    t_max: f64,
    dt: f64,
) -> Result<f64> {
    let traj = mf_integrate(params, m0, t_max, dt)?;
    let mz = traj.mz();
    let crossings: Vec<f64> = upward_crossings(&traj.times, &mz)
        .into_iter()
        .filter(|&t| t > t_max / 3.0)
        .collect();
    if crossings.len() < 3 {
        return Err(Error::NoPeriod(format!(
            "only {} crossings of m_z after the transient within t_max = {t_max}",
            crossings.len()
        )));
    }
    let periods: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    for w in periods.windows(2) {
        let jitter = (w[1] - w[0]).abs() / w[0];
        if jitter > 1e-4 {
            return Err(Error::NoPeriod(format!(
                "consecutive periods {} and {} differ by {jitter:e}",
                w[0], w[1]
            )));
        }
    }
    Ok(periods.iter().sum::<f64>() / periods.len() as f64)
}
