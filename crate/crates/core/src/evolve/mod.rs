//! Time integration of the coupled system: the direct quasi-linear mode, the
//! linearized iteration with characteristic transport of the density, monitors
//! and the Gronwall fit of the energy series.

mod gronwall;
mod monitor;
mod picard;
mod rk;
mod transport;

pub use gronwall::{energy_series, gronwall_check, GronwallFit, GRONWALL_MIN_SAMPLES, GRONWALL_SLACK};
pub use monitor::{interior_mask, monitor_record, MonitorRecord, MONITOR_COLUMNS};
pub use picard::{picard_contraction_search, picard_iterate, ContractionReport, Trajectory};
pub use rk::{check_cfl, max_characteristic_speed, step_direct, time_derivative};
pub use transport::{transport_epsilon, ConstantTransport, TransportField};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid::EquationOfState;
use crate::grid::FdOrder;
use crate::reduction::SystemState;
use crate::wsobolev::NormSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Direct,
    Picard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Safety factor in `dt ≤ cfl · h / v_max`.
    pub cfl: f64,
    pub mode: Mode,
    /// Upper bound on iterations in Picard mode.
    pub picard_iters: usize,
    /// Iteration stops once the sup-in-time distance of two iterates drops below this.
    pub picard_tol: f64,
    /// Monitors are recorded every this many steps (and at the final time).
    pub monitor_every: usize,
    pub order: FdOrder,
    /// Evolve only the fluid on a fixed background metric.
    pub freeze_metric: bool,
    pub norm: NormSpec,
    /// Smallest admissible `u⁰` for the density transport.
    pub u0_min: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            dt: 0.01,
            t_end: 1.0,
            cfl: 0.5,
            mode: Mode::Direct,
            picard_iters: 12,
            picard_tol: 1e-12,
            monitor_every: 10,
            order: FdOrder::Fourth,
            freeze_metric: false,
            norm: NormSpec { s: 2.0, delta: 0.0, gamma_psi: 2.0 },
            u0_min: 0.5,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be nonnegative", self.t_end));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl = {} must lie in (0, 1]", self.cfl));
        }
        if self.monitor_every == 0 {
            return bad("monitor_every must be positive".into());
        }
        if !(self.u0_min > 0.0) {
            return bad(format!("u0_min = {} must be positive", self.u0_min));
        }
        self.norm.validate()
    }

    /// Number of steps and the step actually used so that `t_end` is hit exactly.
    pub fn steps(&self) -> (usize, f64) {
        let n = (self.t_end / self.dt).ceil().max(if self.t_end > 0.0 { 1.0 } else { 0.0 }) as usize;
        if n == 0 {
            (0, self.dt)
        } else {
            (n, self.t_end / n as f64)
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: SystemState,
    pub monitors: Vec<MonitorRecord>,
    /// Transported density at the final time (Picard mode only).
    pub final_eps: Option<Vec<f64>>,
    /// Contraction ratios of successive iterates (Picard mode only).
    pub picard_ratios: Vec<f64>,
}

/// Runs the configured evolution from `initial`.
pub fn run(cfg: &EvolutionConfig, initial: &SystemState, eos: &EquationOfState) -> Result<RunOutput> {
    cfg.validate()?;
    crate::initial_data::validate_fluid(initial, eos)?;
    let (n, dt) = cfg.steps();
    check_cfl(initial, eos, dt, cfg.cfl)?;
    match cfg.mode {
        Mode::Direct => {
            let mut s = initial.clone();
            let mut monitors = vec![monitor_record(&s, None, 0.0, initial, cfg, eos)?];
            for k in 1..=n {
                let t = k as f64 * dt;
                s = step_direct(&s, eos, dt, cfg, t - dt)?;
                if k % cfg.monitor_every == 0 || k == n {
                    check_cfl(&s, eos, dt, cfg.cfl)?;
                    monitors.push(monitor_record(&s, None, t, initial, cfg, eos)?);
                }
            }
            Ok(RunOutput { final_state: s, monitors, final_eps: None, picard_ratios: vec![] })
        }
        Mode::Picard => {
            let mut prev = Trajectory::constant(initial, eos, n, dt);
            let mut dists: Vec<f64> = vec![];
            for _ in 0..cfg.picard_iters {
                let next = picard_iterate(&prev, initial, eos, cfg)?;
                let d = next.distance(&prev, initial, eos, cfg.norm.delta)?;
                prev = next;
                dists.push(d);
                if d < cfg.picard_tol {
                    break;
                }
            }
            let ratios = dists.windows(2).map(|w| w[1] / w[0]).collect();
            let mut monitors = vec![];
            for (k, s) in prev.states.iter().enumerate() {
                if k % cfg.monitor_every == 0 || k == n {
                    monitors.push(monitor_record(s, Some(&prev.eps[k]), prev.times[k], initial, cfg, eos)?);
                }
            }
            Ok(RunOutput {
                final_state: prev.states.last().cloned().expect("nonempty trajectory"),
                final_eps: prev.eps.last().cloned(),
                monitors,
                picard_ratios: ratios,
            })
        }
    }
}
