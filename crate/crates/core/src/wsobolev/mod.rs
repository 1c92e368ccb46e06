//! Weighted fractional Sobolev norms `H_{s,δ}`, weighted `L²` norms, the
//! `A⁰`-weighted energy of the first-order system and empirical checks of the
//! standard inequalities between these norms.
//!
//! A field is split into dyadic shells `ψ_j u`, each shell is rescaled by `2^j`
//! onto a fixed reference box and measured there in `H^s` through the discrete
//! Fourier transform:
//!
//! `‖u‖²_{H_{s,δ}} = Σ_j 2^{(d/2+δ)2j} ‖(ψ_j u)(2^j ·)‖²_{H^s}`.

mod dyadic;
mod energy;
mod fourier;
pub mod inequalities;

pub use dyadic::{norm_hs_delta, norm_l2_delta, shell_field, shell_terms, shell_weight, DyadicFamily};
pub use energy::{energy_x_norm, x_norm, y_delta_norm, EnergyWeights};
pub use fourier::{bessel_potential, hs_norm_sq};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, GridSpec};

/// Largest regularity index accepted by the engine.
pub const S_MAX: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub s: f64,
    pub delta: f64,
    /// Power applied to the cutoffs, `ψ_j^γ`.
    #[serde(default = "one")]
    pub gamma_psi: f64,
}

fn one() -> f64 {
    1.0
}

impl NormSpec {
    pub fn new(s: f64, delta: f64) -> Result<Self> {
        let spec = NormSpec { s, delta, gamma_psi: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_gamma(mut self, gamma_psi: f64) -> Result<Self> {
        self.gamma_psi = gamma_psi;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=S_MAX).contains(&self.s) || !self.delta.is_finite() || !(self.gamma_psi > 0.0 && self.gamma_psi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "norm spec s = {}, delta = {}, gamma_psi = {} (need 0 <= s <= {S_MAX}, finite delta, gamma_psi > 0)",
                self.s, self.delta, self.gamma_psi
            )));
        }
        Ok(())
    }

    pub(crate) fn shifted(&self, ds: f64, dd: f64) -> NormSpec {
        NormSpec { s: self.s + ds, delta: self.delta + dd, gamma_psi: self.gamma_psi }
    }
}

/// A real function that can be evaluated anywhere in `ℝ^d`.
pub trait ScalarField: Sync {
    /// Number of leading coordinates the field depends on.
    fn dim(&self) -> usize;
    fn eval(&self, x: [f64; 3]) -> f64;
}

/// Closure-backed field.
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn([f64; 3]) -> f64 + Sync> ScalarField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: [f64; 3]) -> f64 {
        (self.f)(x)
    }
}

/// One component of a grid field, extended by zero outside the grid box.
pub struct GridField<'a> {
    pub grid: &'a GridSpec,
    pub data: &'a [f64],
    pub ncomp: usize,
    pub comp: usize,
}

impl ScalarField for GridField<'_> {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn eval(&self, x: [f64; 3]) -> f64 {
        let mut y = [0.0; 3];
        for (k, a) in self.grid.active_axes().enumerate() {
            let half = 0.5 * self.grid.extent[a];
            let lim = match self.grid.boundary {
                Boundary::Periodic => half - self.grid.spacing()[a],
                Boundary::FrozenExterior => half,
            };
            if x[k].abs() > lim {
                return 0.0;
            }
            y[a] = x[k];
        }
        let mut out = vec![0.0; self.ncomp];
        self.grid.interpolate(self.data, self.ncomp, y, Some(0.0), &mut out);
        out[self.comp]
    }
}
