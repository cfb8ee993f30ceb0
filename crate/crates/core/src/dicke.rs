//! Collective spin operators and states in the maximal-spin (Dicke) sector.
//!
//! Basis states are ordered by descending `V_z` eigenvalue: index `k`
//! carries the angular-momentum label `m = N/2 − k`. Collective operators
//! are normalised as `V_α = Σ_k σ_α^{(k)}/√2`, so `V_α = √2 J_α` and
//! `[V_α, V_β] = i√2 ε_{αβγ} V_γ`. Ladder matrix elements follow the
//! Condon–Shortley convention (real, non-negative).

use std::f64::consts::SQRT_2;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, I};
pub use crate::operator::{DenseOperator, DensityMatrix};

/// Largest ensemble accepted by [`SystemParams::validate`].
pub const DEFAULT_MAX_SPINS: usize = 512;

/// Physical constants shared by every module (ħ = 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    /// Number of spins `N`.
    pub n_spins: usize,
    /// Transverse field `Ω`.
    pub omega_rabi: f64,
    /// Collective decay rate `Γ`.
    pub gamma: f64,
    /// Energy of a bath oscillator `ω`.
    pub omega_bath: f64,
    /// Thermal occupation `n_β = (e^{βω} − 1)^{-1}`.
    pub n_beta: f64,
}

impl SystemParams {
    pub fn new(
        n_spins: usize,
        omega_rabi: f64,
        gamma: f64,
        omega_bath: f64,
        n_beta: f64,
    ) -> Result<Self> {
        let p = Self {
            n_spins,
            omega_rabi,
            gamma,
            omega_bath,
            n_beta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from an inverse temperature instead of `n_β`.
    pub fn from_beta(
        n_spins: usize,
        omega_rabi: f64,
        gamma: f64,
        omega_bath: f64,
        beta: f64,
    ) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParams(format!(
                "beta must be > 0, got {beta}"
            )));
        }
        let n_beta = if beta.is_infinite() {
            0.0
        } else {
            1.0 / (beta * omega_bath).exp_m1()
        };
        Self::new(n_spins, omega_rabi, gamma, omega_bath, n_beta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_spins < 1 || self.n_spins > DEFAULT_MAX_SPINS {
            return Err(Error::InvalidParams(format!(
                "n_spins must be in 1..={DEFAULT_MAX_SPINS}, got {}",
                self.n_spins
            )));
        }
        if !self.omega_rabi.is_finite() {
            return Err(Error::InvalidParams("omega must be finite".into()));
        }
        // Γ = 0 is admitted for closed-dynamics checks.
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.omega_bath > 0.0 && self.omega_bath.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "omega_bath must be > 0, got {}",
                self.omega_bath
            )));
        }
        if !(self.n_beta >= 0.0 && self.n_beta.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "n_beta must be >= 0, got {}",
                self.n_beta
            )));
        }
        Ok(())
    }

    /// Inverse temperature; infinite at `n_β = 0`.
    pub fn beta(&self) -> f64 {
        if self.n_beta == 0.0 {
            f64::INFINITY
        } else {
            (1.0 / self.n_beta).ln_1p() / self.omega_bath
        }
    }

    /// Hilbert-space dimension `N + 1` of the Dicke sector.
    pub fn dim(&self) -> usize {
        self.n_spins + 1
    }

    pub fn with_omega(mut self, omega_rabi: f64) -> Self {
        self.omega_rabi = omega_rabi;
        self
    }

    pub fn with_n_spins(mut self, n_spins: usize) -> Self {
        self.n_spins = n_spins;
        self
    }

    pub fn with_n_beta(mut self, n_beta: f64) -> Self {
        self.n_beta = n_beta;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            n_spins: 10,
            omega_rabi: 2.0,
            gamma: 1.0,
            omega_bath: 1.0,
            n_beta: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

/// Matrix elements of `V_+` on the super-diagonal: entry `k` (for `k ≥ 1`)
/// is `⟨k−1|V_+|k⟩ = √(2 k (N − k + 1))`; entry 0 is zero.
pub fn ladder_coefficients(n_spins: usize) -> Vec<f64> {
    let n = n_spins as f64;
    (0..=n_spins)
        .map(|k| {
            let k = k as f64;
            (2.0 * k * (n - k + 1.0)).sqrt()
        })
        .collect()
}

/// `√2 m` for each basis index.
pub fn vz_diagonal(n_spins: usize) -> Vec<f64> {
    let j = n_spins as f64 / 2.0;
    (0..=n_spins).map(|k| SQRT_2 * (j - k as f64)).collect()
}

pub fn collective_op(params: &SystemParams, axis: Axis) -> DenseOperator {
    let n = params.n_spins;
    let d = n + 1;
    let a = ladder_coefficients(n);
    let mut plus = linalg::zeros(d);
    for k in 1..d {
        plus[[k - 1, k]] = C64::new(a[k], 0.0);
    }
    let mat = match axis {
        Axis::Plus => plus,
        Axis::Minus => linalg::dagger(&plus),
        Axis::X => (&plus + &linalg::dagger(&plus)).mapv(|z| z * 0.5),
        Axis::Y => (&plus - &linalg::dagger(&plus)).mapv(|z| z / (2.0 * I)),
        Axis::Z => {
            let mut z = linalg::zeros(d);
            for (k, v) in vz_diagonal(n).into_iter().enumerate() {
                z[[k, k]] = C64::new(v, 0.0);
            }
            z
        }
    };
    DenseOperator::from_square(mat)
}

/// `H = (Ω/√2) V_x`.
pub fn hamiltonian(params: &SystemParams) -> DenseOperator {
    let vx = collective_op(params, Axis::X);
    DenseOperator::from_square(vx.matrix().mapv(|z| z * (params.omega_rabi / SQRT_2)))
}

/// Amplitudes of the spin-coherent state pointing along
/// `(sin θ cos φ, sin θ sin φ, cos θ)`.
pub fn coherent_amplitudes(n_spins: usize, theta: f64, phi: f64) -> Vec<C64> {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mut binom = 1.0f64;
    (0..=n_spins)
        .map(|k| {
            if k > 0 {
                binom *= (n_spins - k + 1) as f64 / k as f64;
            }
            let mag = binom.sqrt() * c.powi((n_spins - k) as i32) * s.powi(k as i32);
            C64::from_polar(mag, k as f64 * phi)
        })
        .collect()
}

pub fn coherent_state(params: &SystemParams, theta: f64, phi: f64) -> DensityMatrix {
    let psi = coherent_amplitudes(params.n_spins, theta, phi);
    let d = psi.len();
    DensityMatrix::new_unchecked(CMat::from_shape_fn((d, d), |(i, j)| psi[i] * psi[j].conj()))
}

/// All spins along −x: the ground state of `H` for `Ω > 0`.
pub fn ground_state_h(params: &SystemParams) -> DensityMatrix {
    coherent_state(params, std::f64::consts::FRAC_PI_2, std::f64::consts::PI)
}

/// All spins down: the lowest `V_z` state.
pub fn ground_state_vz(params: &SystemParams) -> DensityMatrix {
    coherent_state(params, std::f64::consts::PI, 0.0)
}

/// Diagonal state with `p_{m+1}/p_m = n_β/(n_β+1)` along the `V_z` ladder.
pub fn thermal_ladder_state(params: &SystemParams) -> DensityMatrix {
    let n = params.n_spins;
    let ratio = params.n_beta / (params.n_beta + 1.0);
    let weights: Vec<f64> = (0..=n).map(|k| ratio.powi((n - k) as i32)).collect();
    let z: f64 = weights.iter().sum();
    let d = n + 1;
    let mut mat = linalg::zeros(d);
    for (k, w) in weights.iter().enumerate() {
        mat[[k, k]] = C64::new(w / z, 0.0);
    }
    DensityMatrix::new_unchecked(mat)
}

/// `N (N/2 + 1)`, the eigenvalue of `V_x² + V_y² + V_z²` in the sector.
pub fn casimir_value(params: &SystemParams) -> f64 {
    let n = params.n_spins as f64;
    n * (n / 2.0 + 1.0)
}

/// Max-norm of `V_x² + V_y² + V_z² − N(N/2+1)·1`.
pub fn casimir_check(params: &SystemParams) -> f64 {
    let total: CMat = [Axis::X, Axis::Y, Axis::Z]
        .iter()
        .map(|&a| {
            let v = collective_op(params, a);
            v.dot(v.matrix())
        })
        .fold(linalg::zeros(params.dim()), |acc, m| acc + m);
    let target = linalg::identity(params.dim()).mapv(|z| z * casimir_value(params));
    linalg::max_abs_diff(&total, &target)
}

/// `(⟨V_x⟩, ⟨V_y⟩, ⟨V_z⟩)/N`.
pub fn magnetization(params: &SystemParams, rho: &DensityMatrix) -> [f64; 3] {
    let n = params.n_spins;
    let a = ladder_coefficients(n);
    let vz = vz_diagonal(n);
    let mut plus = C64::new(0.0, 0.0);
    let mut z = 0.0;
    for k in 0..=n {
        z += vz[k] * rho[[k, k]].re;
        if k >= 1 {
            // ⟨V_+⟩ = Σ_k a_k ρ_{k, k−1}
            plus += a[k] * rho[[k, k - 1]];
        }
    }
    let nf = n as f64;
    [plus.re / nf, plus.im / nf, z / nf]
}
