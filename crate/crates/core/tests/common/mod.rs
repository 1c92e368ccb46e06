#![allow(dead_code)]

use std::f64::consts::PI;

use einstein_euler::evolve::*;
use einstein_euler::fluid::EquationOfState;
use einstein_euler::grid::{Boundary, FdOrder, GridSpec};
use einstein_euler::initial_data::*;
use einstein_euler::reduction::{SystemState, V, W};

pub fn eos() -> EquationOfState {
    EquationOfState::new(1.0, 5.0 / 3.0).unwrap()
}

pub fn periodic(n: usize) -> GridSpec {
    GridSpec::line(2.0 * PI, n, Boundary::Periodic).unwrap()
}

/// Phase of the first Fourier mode of a periodic sample.
pub fn first_mode_phase(data: &[f64]) -> f64 {
    let n = data.len();
    let (mut re, mut im) = (0.0, 0.0);
    for (i, d) in data.iter().enumerate() {
        let th = 2.0 * PI * i as f64 / n as f64;
        re += d * th.cos();
        im -= d * th.sin();
    }
    im.atan2(re)
}

/// Phase speed of component `c` over `[0, t]`, unwrapped into `(−π, π]`.
fn phase_speed(s0: &SystemState, s1: &SystemState, c: usize, offset: f64, t: f64) -> f64 {
    let n = s0.grid.len();
    let a: Vec<f64> = (0..n).map(|p| s0.point(p)[c] - offset).collect();
    let b: Vec<f64> = (0..n).map(|p| s1.point(p)[c] - offset).collect();
    let mut d = first_mode_phase(&a) - first_mode_phase(&b);
    while d <= -PI {
        d += 2.0 * PI;
    }
    while d > PI {
        d -= 2.0 * PI;
    }
    d / t
}

/// Measured speed of a small `k = 1` gauge wave.
pub fn gauge_wave_speed(n: usize) -> f64 {
    let g = periodic(n);
    let s0 = gauge_wave(&g, 1e-6, 1.0, WavePolarization::Gauge, 0.0);
    let cfg = EvolutionConfig { dt: 0.25 * 2.0 * PI / n as f64, t_end: 1.0, ..Default::default() };
    let out = run(&cfg, &s0, &eos()).unwrap();
    phase_speed(&s0, &out.final_state, V, 0.0, 1.0)
}

/// Measured speed of a small sound wave on a frozen flat background, with the
/// expected sound speed.
pub fn sound_wave_speed(n: usize, w0: f64) -> (f64, f64) {
    let e = eos();
    let g = periodic(n);
    let s0 = sound_wave(&g, &e, w0, 1e-6, 1.0).unwrap();
    let cfg = EvolutionConfig { dt: 0.25 * 2.0 * PI / n as f64, t_end: 1.0, freeze_metric: true, ..Default::default() };
    let out = run(&cfg, &s0, &e).unwrap();
    (phase_speed(&s0, &out.final_state, W, w0, 1.0), einstein_euler::fluid::sound_speed(w0, &e))
}

/// Sup over the run of the normalization drift relative to its initial value,
/// and of the harmonic residual.
pub fn drifts(out: &RunOutput) -> (f64, f64) {
    let m0 = out.monitors[0];
    let nd = out.monitors.iter().map(|m| (m.norm_drift - m0.norm_drift).abs()).fold(0.0, f64::max);
    let hr = out.monitors.iter().map(|m| m.harmonic_residual).fold(0.0, f64::max);
    (nd, hr)
}

pub const BALL_EXTENT: f64 = 12.0;

/// Fluid ball with the smooth `exponent = 4` profile on `n` intervals, run to `t = 0.5` at `dt = h/4`.
pub fn fluid_ball_run(n: usize) -> RunOutput {
    let e = eos();
    let g = GridSpec::line(BALL_EXTENT, n + 1, Boundary::FrozenExterior).unwrap();
    let prm = FluidBallParams { exponent: 4, ..Default::default() };
    let (s0, _, _) = fluid_ball(&g, &e, &prm, FdOrder::Fourth, DensityReading::NormalProjection).unwrap();
    let cfg = EvolutionConfig { dt: 0.25 * BALL_EXTENT / n as f64, t_end: 0.5, monitor_every: (n / 64).max(1), ..Default::default() };
    run(&cfg, &s0, &e).unwrap()
}

/// Finite-amplitude gauge wave on `n` points, run to `t = 1` at `dt = h/4`.
pub fn gauge_wave_run(n: usize, amp: f64) -> RunOutput {
    let s0 = gauge_wave(&periodic(n), amp, 1.0, WavePolarization::Gauge, 0.0);
    let cfg = EvolutionConfig { dt: 0.25 * 2.0 * PI / n as f64, t_end: 1.0, monitor_every: (n / 32).max(1), ..Default::default() };
    run(&cfg, &s0, &eos()).unwrap()
}

/// Observed orders between successive refinements by a factor of two.
pub fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

pub fn picard_config(n: usize, t_end: f64) -> EvolutionConfig {
    EvolutionConfig { dt: 0.25 * 2.0 * PI / n as f64, t_end, mode: Mode::Picard, picard_iters: 20, ..Default::default() }
}

pub fn y_distance(a: &SystemState, b: &SystemState, reference: &SystemState) -> f64 {
    let w = einstein_euler::wsobolev::EnergyWeights::from_state(reference, &eos()).unwrap();
    let d = SystemState { grid: a.grid.clone(), data: a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect() };
    einstein_euler::wsobolev::y_delta_norm(&d, &w, 0.0).unwrap()
}

/// Contraction search on the `amp = 0.05` gauge wave at 64 points, then the
/// distance of the Picard limit to direct mode and the direct-mode integrator
/// difference between `dt` and `dt/2`.
pub fn picard_agreement() -> (ContractionReport, f64, f64) {
    let e = eos();
    let n = 64;
    let s0 = gauge_wave(&periodic(n), 0.05, 1.0, WavePolarization::Gauge, 0.0);
    let cfg = picard_config(n, 1.0);
    let rep = picard_contraction_search(&s0, &e, &cfg, 1.0).unwrap();
    let lim = rep.limit.clone().expect("contraction search converged");
    let dcfg = EvolutionConfig { mode: Mode::Direct, t_end: rep.t, ..cfg.clone() };
    let d1 = run(&dcfg, &s0, &e).unwrap().final_state;
    let d2 = run(&EvolutionConfig { dt: cfg.dt / 2.0, ..dcfg }, &s0, &e).unwrap().final_state;
    let pl = lim.states.last().unwrap();
    (rep, y_distance(pl, &d1, &s0), y_distance(&d1, &d2, &s0))
}
