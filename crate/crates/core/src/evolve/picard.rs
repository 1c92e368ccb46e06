use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rk::{axpy, check_finite};
use super::transport::{transport_epsilon, TransportField};
use super::EvolutionConfig;
use crate::error::{Error, Result};
use crate::fluid::EquationOfState;
use crate::reduction::{gradient_at, h_slot, linear_rhs, metric_of, solve_a0, state_gradient, velocity_of, Frozen, SystemState, H0, NCOMP, NLOWER, W};
use crate::wsobolev::{y_delta_norm, EnergyWeights};

/// States and transported densities at the uniformly spaced step times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
    pub eps: Vec<Vec<f64>>,
    pub dt: f64,
}

/// Lagrange weights (value, derivative) of the nodes `xs` at `x`.
fn lagrange(xs: &[f64], x: f64) -> Vec<(f64, f64)> {
    let m = xs.len();
    (0..m)
        .map(|i| {
            let mut w = 1.0;
            let mut denom = 1.0;
            for j in 0..m {
                if j != i {
                    w *= x - xs[j];
                    denom *= xs[i] - xs[j];
                }
            }
            let mut dw = 0.0;
            for k in 0..m {
                if k == i {
                    continue;
                }
                let mut prod = 1.0;
                for j in 0..m {
                    if j != i && j != k {
                        prod *= x - xs[j];
                    }
                }
                dw += prod;
            }
            (w / denom, dw / denom)
        })
        .collect()
}

impl Trajectory {
    /// `n + 1` copies of `u0`: the zeroth iterate.
    pub fn constant(u0: &SystemState, eos: &EquationOfState, n: usize, dt: f64) -> Self {
        let eps0: Vec<f64> = (0..u0.grid.len()).map(|p| eos.density_of(u0.point(p)[W])).collect();
        Trajectory { times: (0..=n).map(|k| k as f64 * dt).collect(), states: vec![u0.clone(); n + 1], eps: vec![eps0; n + 1], dt }
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Up to four nodes around `t` with their (value, derivative) weights.
    pub(crate) fn time_weights(&self, t: f64) -> Vec<(usize, f64, f64)> {
        let m = self.times.len();
        let k = m.min(4);
        let i = ((t / self.dt).floor() as isize - 1).clamp(0, (m - k) as isize) as usize;
        let xs: Vec<f64> = self.times[i..i + k].to_vec();
        lagrange(&xs, t).into_iter().enumerate().map(|(j, (w, d))| (i + j, w, d)).collect()
    }

    pub fn state_at(&self, t: f64) -> SystemState {
        let wts = self.time_weights(t);
        let mut data = vec![0.0; self.states[0].data.len()];
        for (i, w, _) in wts {
            for (d, x) in data.iter_mut().zip(&self.states[i].data) {
                *d += w * x;
            }
        }
        SystemState { grid: self.states[0].grid.clone(), data }
    }

    pub fn eps_at(&self, t: f64) -> Vec<f64> {
        let wts = self.time_weights(t);
        let mut out = vec![0.0; self.eps[0].len()];
        for (i, w, _) in wts {
            for (d, x) in out.iter_mut().zip(&self.eps[i]) {
                *d += w * x;
            }
        }
        out
    }

    /// `sup_t ‖U(t) − V(t)‖_{Y_δ}` with the `A⁰` weights of `reference`.
    pub fn distance(&self, other: &Trajectory, reference: &SystemState, eos: &EquationOfState, delta: f64) -> Result<f64> {
        let wts = EnergyWeights::from_state(reference, eos)?;
        let mut worst: f64 = 0.0;
        for (a, b) in self.states.iter().zip(&other.states) {
            let diff = SystemState { grid: a.grid.clone(), data: a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect() };
            worst = worst.max(y_delta_norm(&diff, &wts, delta)?);
        }
        Ok(worst)
    }
}

/// Characteristic coefficients of the density transport built from an iterate:
/// per node and point `[u¹/u⁰, u²/u⁰, u³/u⁰, ∂ₐuᵃ + ½g^{αβ}∂_μ g_{αβ} u^μ, u⁰]`.
struct IterateTransport<'a> {
    traj: &'a Trajectory,
    coef: Vec<Vec<f64>>,
    eos: EquationOfState,
}

impl<'a> IterateTransport<'a> {
    fn new(traj: &'a Trajectory, eos: &EquationOfState, cfg: &EvolutionConfig) -> Result<Self> {
        let coef: Result<Vec<Vec<f64>>> = traj.states.iter().enumerate().map(|(k, s)| node_coefficients(s, traj.times[k], cfg)).collect();
        Ok(IterateTransport { traj, coef: coef?, eos: *eos })
    }

    fn sample(&self, t: f64, x: [f64; 3]) -> ([f64; 5], f64) {
        let grid = &self.traj.states[0].grid;
        let mut val = [0.0; 5];
        let mut du0 = 0.0;
        let mut tmp = [0.0; 5];
        for (i, w, d) in self.traj.time_weights(t) {
            grid.interpolate(&self.coef[i], 5, x, None, &mut tmp);
            for c in 0..5 {
                val[c] += w * tmp[c];
            }
            du0 += d * tmp[4];
        }
        (val, du0)
    }
}

fn node_coefficients(s: &SystemState, t: f64, cfg: &EvolutionConfig) -> Result<Vec<f64>> {
    let n = s.grid.len();
    let vel: Vec<f64> = (0..n).flat_map(|p| velocity_of(s.point(p)).iter().copied().collect::<Vec<_>>()).collect();
    let mut div = vec![0.0; n];
    for a in s.grid.active_axes() {
        let d = s.grid.diff(&vel, 4, a, cfg.order);
        for p in 0..n {
            div[p] += d[p * 4 + a + 1];
        }
    }
    let mut out = vec![0.0; n * 5];
    for p in 0..n {
        let u = s.point(p);
        let v = velocity_of(u);
        if !(v[0] >= cfg.u0_min) {
            return Err(Error::LapseCollapse { point: p, u0: v[0], min: cfg.u0_min });
        }
        let ginv = crate::geometry::inverse(&metric_of(u)).map_err(|e| e.at(p))?;
        let mut conn = 0.0;
        for mu in 0..4 {
            let base = if mu == 0 { H0 } else { h_slot(mu) };
            let mut tr = 0.0;
            for (k, &(a, b)) in crate::tensor::SYM4_PAIRS.iter().enumerate() {
                let m = if a == b { 1.0 } else { 2.0 };
                tr += m * ginv[(a, b)] * u[base + k];
            }
            conn += 0.5 * tr * v[mu];
        }
        out[p * 5..(p + 1) * 5].copy_from_slice(&[v[1] / v[0], v[2] / v[0], v[3] / v[0], div[p] + conn, v[0]]);
        if out[p * 5..(p + 1) * 5].iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { t, point: p, component: W });
        }
    }
    Ok(out)
}

impl TransportField for IterateTransport<'_> {
    fn velocity(&self, t: f64, x: [f64; 3]) -> [f64; 3] {
        let (v, _) = self.sample(t, x);
        [v[0], v[1], v[2]]
    }

    fn rate(&self, t: f64, x: [f64; 3], eps: f64) -> f64 {
        let (v, du0) = self.sample(t, x);
        let e = eps.max(0.0);
        -(e + self.eos.pressure(e)) * (du0 + v[3]) / v[4]
    }
}

fn frozen_at(traj: &Trajectory, t: f64, eos: &EquationOfState) -> Result<Vec<Frozen>> {
    let s = traj.state_at(t);
    let eps = traj.eps_at(t);
    (0..s.grid.len()).into_par_iter().map(|p| Frozen::new(s.point(p), eps[p].max(0.0), eos).map_err(|e| e.at(p))).collect()
}

fn linear_derivative(fr: &[Frozen], unk: &SystemState, cfg: &EvolutionConfig, t: f64) -> Result<Vec<f64>> {
    let grad = state_gradient(unk, cfg.order);
    let width = cfg.order.half_width();
    let rows: Result<Vec<[f64; NCOMP]>> = (0..unk.grid.len())
        .into_par_iter()
        .map(|p| {
            if unk.grid.in_boundary_layer(p, width) {
                return Ok([0.0; NCOMP]);
            }
            let mut d = solve_a0(&fr[p], &linear_rhs(&fr[p], unk.point(p), &gradient_at(&grad, p))).map_err(|e| match e.at(p) {
                Error::IndefiniteA0 { point, min_eig, .. } => Error::IndefiniteA0 { t, point, min_eig },
                other => other,
            })?;
            if cfg.freeze_metric {
                d[..NLOWER].iter_mut().for_each(|x| *x = 0.0);
            }
            Ok(d)
        })
        .collect();
    Ok(rows?.concat())
}

/// Next iterate: the density is transported along the characteristics of
/// `prev`, then the system linear in the unknown with coefficients frozen at
/// `prev` is integrated from `u0` with RK4 on the same time nodes.
pub fn picard_iterate(prev: &Trajectory, u0: &SystemState, eos: &EquationOfState, cfg: &EvolutionConfig) -> Result<Trajectory> {
    let n = prev.steps();
    let dt = prev.dt;
    let field = IterateTransport::new(prev, eos, cfg)?;
    let mut eps = vec![prev.eps[0].clone()];
    for k in 0..n {
        let next = transport_epsilon(&u0.grid, &eps[k], prev.times[k], dt, &field)?;
        eps.push(next);
    }
    // the new densities drive the sources; the coefficients still come from prev
    let coeff = Trajectory { times: prev.times.clone(), states: prev.states.clone(), eps: eps.clone(), dt };
    let mut states = vec![u0.clone()];
    let mut f0 = frozen_at(&coeff, 0.0, eos)?;
    for k in 0..n {
        let t = prev.times[k];
        let fm = frozen_at(&coeff, t + 0.5 * dt, eos)?;
        let f1 = frozen_at(&coeff, prev.times[k + 1], eos)?;
        let s = &states[k];
        let k1 = linear_derivative(&f0, s, cfg, t)?;
        let k2 = linear_derivative(&fm, &axpy(s, &k1, 0.5 * dt), cfg, t)?;
        let k3 = linear_derivative(&fm, &axpy(s, &k2, 0.5 * dt), cfg, t)?;
        let k4 = linear_derivative(&f1, &axpy(s, &k3, dt), cfg, t)?;
        let data = (0..s.data.len()).map(|i| s.data[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        let out = SystemState { grid: s.grid.clone(), data };
        check_finite(&out, t + dt)?;
        states.push(out);
        f0 = f1;
    }
    Ok(Trajectory { times: prev.times.clone(), states, eps, dt })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionReport {
    /// Final time of the accepted (or last tried) horizon.
    pub t: f64,
    pub halvings: usize,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub contracted: bool,
    #[serde(skip)]
    pub limit: Option<Trajectory>,
}

/// Number of consecutive ratios below 1 required for contraction.
pub const CONTRACTION_RUN: usize = 3;
/// Largest number of horizon halvings tried.
pub const MAX_HALVINGS: usize = 8;

/// Iterates on `[0, T]`, halving `T` (at most 8 times) until the `Y_δ`
/// distances of successive iterates shrink with ratio below 1 three times in a row.
pub fn picard_contraction_search(u0: &SystemState, eos: &EquationOfState, cfg: &EvolutionConfig, t_max: f64) -> Result<ContractionReport> {
    let mut last = None;
    for h in 0..=MAX_HALVINGS {
        let t = t_max / 2f64.powi(h as i32);
        let c = EvolutionConfig { t_end: t, ..cfg.clone() };
        let (n, dt) = c.steps();
        let mut prev = Trajectory::constant(u0, eos, n, dt);
        let mut distances = vec![];
        for _ in 0..cfg.picard_iters {
            let next = picard_iterate(&prev, u0, eos, &c)?;
            let d = next.distance(&prev, u0, eos, cfg.norm.delta)?;
            prev = next;
            distances.push(d);
            if d < cfg.picard_tol {
                break;
            }
        }
        let ratios: Vec<f64> = distances.windows(2).filter(|w| w[0] >= cfg.picard_tol).map(|w| w[1] / w[0]).collect();
        let contracted = ratios.windows(CONTRACTION_RUN).any(|w| w.iter().all(|&r| r < 1.0));
        let report = ContractionReport { t, halvings: h, distances, ratios, contracted, limit: Some(prev) };
        if contracted {
            return Ok(report);
        }
        last = Some(report);
    }
    Ok(last.expect("at least one horizon"))
}
