//! Fixed-step classical Runge–Kutta stepping.

/// A state that RK4 can combine linearly.
pub trait Rk4State: Sized {
    /// `self + h · rate`
    fn add_scaled(&self, rate: &Self, h: f64) -> Self;
}

/// One RK4 step of `y' = f(y)`.
pub fn rk4_step<S, F>(y: &S, dt: f64, mut f: F) -> S
where
    S: Rk4State,
    F: FnMut(&S) -> S,
{
    let k1 = f(y);
    let k2 = f(&y.add_scaled(&k1, 0.5 * dt));
    let k3 = f(&y.add_scaled(&k2, 0.5 * dt));
    let k4 = f(&y.add_scaled(&k3, dt));
    y.add_scaled(&k1, dt / 6.0)
        .add_scaled(&k2, dt / 3.0)
        .add_scaled(&k3, dt / 3.0)
        .add_scaled(&k4, dt / 6.0)
}

impl Rk4State for ndarray::Array2<num_complex::Complex64> {
    fn add_scaled(&self, rate: &Self, h: f64) -> Self {
        let mut out = self.clone();
        out.scaled_add(num_complex::Complex64::new(h, 0.0), rate);
        out
    }
}

/// Number of steps of size close to `dt` that exactly cover `t_max`.
pub fn step_count(t_max: f64, dt: f64) -> usize {
    ((t_max / dt) - 1e-9).ceil().max(1.0) as usize
}
