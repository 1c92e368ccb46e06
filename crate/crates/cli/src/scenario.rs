//! Scenario files: TOML with `[grid]`, `[eos]`, `[initial]`, `[norm]`,
//! `[evolution]` and `[checks]` sections.

use std::path::{Path, PathBuf};

use einstein_euler::evolve::EvolutionConfig;
use einstein_euler::fluid::EquationOfState;
use einstein_euler::grid::{Boundary, GridSpec};
use einstein_euler::initial_data::{self, DensityReading, FluidBallParams, WavePolarization};
use einstein_euler::reduction::SystemState;
use einstein_euler::wsobolev::NormSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub grid: GridSpec,
    pub eos: EosSection,
    pub initial: Recipe,
    #[serde(default = "default_norm")]
    pub norm: NormSpec,
    #[serde(default)]
    pub evolution: EvolutionSection,
    #[serde(default)]
    pub checks: Checks,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EosSection {
    pub k: f64,
    pub gamma: f64,
    /// Accept `γ > 3`.
    #[serde(default)]
    pub allow_any_gamma: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Recipe {
    MinkowskiVacuum {},
    GaugeWave {
        amplitude: f64,
        #[serde(default = "unit")]
        k: f64,
        #[serde(default = "gauge_tensor")]
        tensor: WavePolarization,
    },
    SoundWave {
        w0: f64,
        amplitude: f64,
        #[serde(default = "unit")]
        k: f64,
    },
    FluidBall(FluidBallSection),
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidBallSection {
    pub amplitude: f64,
    pub exponent: u32,
    pub radius: f64,
    pub rho: f64,
    pub cutoff: f64,
    pub mollifier_width: f64,
    pub curvature: f64,
    pub ubar: [f64; 3],
    pub reading: DensityReading,
}

impl Default for FluidBallSection {
    fn default() -> Self {
        let p = FluidBallParams::default();
        FluidBallSection {
            amplitude: p.amplitude,
            exponent: p.exponent,
            radius: p.radius,
            rho: p.rho,
            cutoff: p.cutoff,
            mollifier_width: p.mollifier_width,
            curvature: p.curvature,
            ubar: p.ubar,
            reading: DensityReading::default(),
        }
    }
}

impl FluidBallSection {
    pub fn params(&self) -> FluidBallParams {
        FluidBallParams {
            amplitude: self.amplitude,
            exponent: self.exponent,
            radius: self.radius,
            rho: self.rho,
            cutoff: self.cutoff,
            mollifier_width: self.mollifier_width,
            curvature: self.curvature,
            ubar: self.ubar,
        }
    }
}

/// Evolution settings; the norm spec lives in its own section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionSection {
    pub dt: f64,
    pub t_end: f64,
    pub cfl: f64,
    pub mode: einstein_euler::evolve::Mode,
    pub picard_iters: usize,
    pub picard_tol: f64,
    pub monitor_every: usize,
    pub order: einstein_euler::grid::FdOrder,
    pub freeze_metric: bool,
    pub u0_min: f64,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        let c = EvolutionConfig::default();
        EvolutionSection {
            dt: c.dt,
            t_end: c.t_end,
            cfl: c.cfl,
            mode: c.mode,
            picard_iters: c.picard_iters,
            picard_tol: c.picard_tol,
            monitor_every: c.monitor_every,
            order: c.order,
            freeze_metric: c.freeze_metric,
            u0_min: c.u0_min,
        }
    }
}

/// Checks evaluated at the end of a run. Bounds left out are not checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    pub gronwall: bool,
    pub max_norm_drift: Option<f64>,
    pub max_harmonic_residual: Option<f64>,
    pub max_eps_consistency: Option<f64>,
    /// `A⁰` must stay at least this positive.
    pub min_a0_eig: Option<f64>,
}

impl Default for Checks {
    fn default() -> Self {
        Checks { gronwall: true, max_norm_drift: None, max_harmonic_residual: None, max_eps_consistency: None, min_a0_eig: Some(0.0) }
    }
}

fn unit() -> f64 {
    1.0
}

fn gauge_tensor() -> WavePolarization {
    WavePolarization::Gauge
}

fn default_norm() -> NormSpec {
    EvolutionConfig::default().norm
}

impl Scenario {
    pub fn eos(&self) -> EquationOfState {
        EquationOfState { k: self.eos.k, gamma: self.eos.gamma }
    }

    pub fn config(&self) -> EvolutionConfig {
        let e = &self.evolution;
        EvolutionConfig {
            dt: e.dt,
            t_end: e.t_end,
            cfl: e.cfl,
            mode: e.mode,
            picard_iters: e.picard_iters,
            picard_tol: e.picard_tol,
            monitor_every: e.monitor_every,
            order: e.order,
            freeze_metric: e.freeze_metric,
            norm: self.norm,
            u0_min: e.u0_min,
        }
    }

    /// Regularity window `(3/2, 2/(γ−1) + 1/2)` of the local existence theory.
    pub fn window(&self) -> (f64, f64) {
        (1.5, 2.0 / (self.eos.gamma - 1.0) + 0.5)
    }

    /// `Some(message)` when `s` lies outside the window.
    pub fn window_warning(&self) -> Option<String> {
        let (lo, hi) = self.window();
        let s = self.norm.s;
        (!(s > lo && s < hi)).then(|| {
            format!("s = {s} lies outside the local well-posedness window 3/2 < s < 2/(gamma-1) + 1/2 = ({lo}, {hi}) for gamma = {}", self.eos.gamma)
        })
    }

    /// Field checks that do not need the initial state.
    pub fn validate(&self) -> Result<(), CliError> {
        EquationOfState::new(self.eos.k, self.eos.gamma).map_err(|e| CliError::invalid("eos", e))?;
        if self.eos.gamma > 3.0 && !self.eos.allow_any_gamma {
            return Err(CliError::invalid("eos.gamma", format!("{} exceeds 3 (set allow_any_gamma to override)", self.eos.gamma)));
        }
        if !(self.norm.s > 0.0) {
            return Err(CliError::invalid("norm.s", format!("{} must be positive", self.norm.s)));
        }
        self.norm.validate().map_err(|e| CliError::invalid("norm", e))?;
        self.grid.validate().map_err(|e| CliError::invalid("grid", e))?;
        self.grid.supports(self.evolution.order).map_err(|e| CliError::invalid("grid", e))?;
        self.config().validate().map_err(|e| CliError::invalid("evolution", e))?;
        if let Recipe::GaugeWave { k, .. } | Recipe::SoundWave { k, .. } = &self.initial {
            if self.grid.boundary == Boundary::Periodic {
                let cycles = k * self.grid.extent[0] / (2.0 * std::f64::consts::PI);
                if (cycles - cycles.round()).abs() > 1e-9 {
                    return Err(CliError::invalid("initial.k", format!("k = {k} is not periodic on the box (k·L/2π = {cycles})")));
                }
            }
        }
        Ok(())
    }

    /// Initial state; relative file paths are resolved against `base`.
    pub fn initial_state(&self, base: &Path) -> Result<SystemState, CliError> {
        let eos = self.eos();
        let g = &self.grid;
        let s = match &self.initial {
            Recipe::MinkowskiVacuum {} => initial_data::minkowski_vacuum(g),
            Recipe::GaugeWave { amplitude, k, tensor } => initial_data::gauge_wave(g, *amplitude, *k, *tensor, 0.0),
            Recipe::SoundWave { w0, amplitude, k } => {
                initial_data::sound_wave(g, &eos, *w0, *amplitude, *k).map_err(|e| CliError::invalid("initial", e))?
            }
            Recipe::FluidBall(fb) => {
                initial_data::fluid_ball(g, &eos, &fb.params(), self.evolution.order, fb.reading).map_err(|e| CliError::invalid("initial", e))?.0
            }
            Recipe::File { path } => {
                let p = if path.is_absolute() { path.clone() } else { base.join(path) };
                einstein_euler::io::load_state(&p, g).map_err(|e| match e {
                    einstein_euler::Error::Io(m) => CliError::Io(format!("{}: {m}", p.display())),
                    other => CliError::invalid("initial.path", other),
                })?
            }
        };
        initial_data::validate_fluid(&s, &eos).map_err(|e| CliError::invalid("initial", e))?;
        Ok(s)
    }
}

/// Parses and validates a scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let sc: Scenario = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |sp| text[..sp.start.min(text.len())].matches('\n').count() + 1);
        CliError::Parse { line, message: e.message().to_string() }
    })?;
    sc.validate()?;
    Ok(sc)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}
