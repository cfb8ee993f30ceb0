//! Least-squares line fits and stroboscopic sampling used by the
//! trajectory analyses.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
    /// `max(y) − min(y)` over the fitted points.
    pub range: f64,
}

/// Ordinary least squares `y ≈ intercept + slope·x`. Needs at least two
/// distinct abscissae.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let (x, y) = (&x[..n], &y[..n]);
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut max_residual: f64 = 0.0;
    for (a, b) in x.iter().zip(y) {
        let r = b - intercept - slope * a;
        ss_res += r * r;
        max_residual = max_residual.max(r.abs());
    }
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
        max_residual,
        range: hi - lo,
    })
}

/// Fit of `y = a + b ln t` over samples with `t` in `[t_lo, t_hi]`.
pub fn log_time_fit(t: &[f64], y: &[f64], t_lo: f64, t_hi: f64) -> Option<LinearFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(y)
        .filter(|(t, _)| **t >= t_lo && **t <= t_hi && **t > 0.0)
        .map(|(t, y)| (t.ln(), *y))
        .unzip();
    linear_fit(&lx, &ly)
}

/// Values of `values` linearly interpolated at the upward zero crossings of
/// `signal`, returned as `(t, value)` pairs.
pub fn sample_at_upward_crossings(
    times: &[f64],
    signal: &[f64],
    values: &[f64],
) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for k in 1..times.len().min(signal.len()).min(values.len()) {
        let (z0, z1) = (signal[k - 1], signal[k]);
        if z0 < 0.0 && z1 >= 0.0 {
            let f = -z0 / (z1 - z0);
            let t = times[k - 1] + f * (times[k] - times[k - 1]);
            let v = values[k - 1] + f * (values[k] - values[k - 1]);
            out.push((t, v));
        }
    }
    out
}
