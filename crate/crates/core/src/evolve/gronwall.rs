use serde::{Deserialize, Serialize};

use super::MonitorRecord;

pub const GRONWALL_MIN_SAMPLES: usize = 10;
/// Largest admissible relative gap between the fitted envelope and the series
/// at their closest approach.
pub const GRONWALL_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallFit {
    /// Smallest `C ≥ 0` with `E(t) ≤ (E(0)+1)e^{Ct} − 1` on every sample.
    pub c_star: f64,
    /// `min_t (env(t) − E(t)) / (env(t) + 1)` for `t > 0`: zero when the
    /// envelope touches the series, positive only when `C` is clipped at 0.
    pub slack: f64,
    /// Least-squares slope of `ln((E+1)/(E(0)+1))` through the origin.
    pub c_ls: f64,
    /// `(c_star − c_ls)·T`: how far the series is from a pure exponential.
    /// Informational.
    pub exp_gap: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Fits the Gronwall envelope to `(t, E)` samples.
pub fn gronwall_check(series: &[(f64, f64)]) -> GronwallFit {
    let samples = series.len();
    let fail = GronwallFit { c_star: f64::NAN, slack: f64::NAN, c_ls: f64::NAN, exp_gap: f64::NAN, samples, pass: false };
    if samples < GRONWALL_MIN_SAMPLES || series.iter().any(|(t, e)| !t.is_finite() || !e.is_finite() || *e < 0.0) {
        return fail;
    }
    let (t0, e0) = series[0];
    let mut c_star: f64 = 0.0;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    let mut t_end: f64 = 0.0;
    for &(t, e) in &series[1..] {
        let dt = t - t0;
        if dt <= 0.0 {
            return fail;
        }
        let y = ((e + 1.0) / (e0 + 1.0)).ln();
        c_star = c_star.max(y / dt);
        sxy += dt * y;
        sxx += dt * dt;
        t_end = t_end.max(dt);
    }
    let slack = series[1..]
        .iter()
        .map(|&(t, e)| {
            let env1 = (e0 + 1.0) * (c_star * (t - t0)).exp();
            ((env1 - 1.0 - e) / env1).max(0.0)
        })
        .fold(f64::INFINITY, f64::min);
    let c_ls = sxy / sxx;
    let exp_gap = (c_star - c_ls) * t_end;
    GronwallFit { c_star, slack, c_ls, exp_gap, samples, pass: c_star.is_finite() && slack < GRONWALL_SLACK }
}

/// `(t, energy_x²)` pairs of a monitor series.
pub fn energy_series(records: &[MonitorRecord]) -> Vec<(f64, f64)> {
    records.iter().map(|r| (r.t, r.energy_x * r.energy_x)).collect()
}
