use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fourier::hs_norm_sq;
use super::{NormSpec, ScalarField};
use crate::error::{Error, GridError, Result};
use crate::grid::{Boundary, GridSpec};
use crate::smooth::smoothstep;

/// Half-width of the reference box every shell is rescaled onto.
pub const REFERENCE_HALF_WIDTH: f64 = 4.0;

/// Radial cutoffs `ψ_j`: `ψ₀ = 1` on `r ≤ 1`, supported in `r ≤ 2`; for `j ≥ 1`,
/// `ψ_j = 1` on `2^{j−1} ≤ r ≤ 2^j`, supported in `2^{j−2} ≤ r ≤ 2^{j+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadicFamily {
    pub j_max: usize,
    /// Reference-box points per active axis.
    pub resolution: usize,
    /// Largest admissible share of the last shell in the total.
    pub tail_threshold: f64,
}

impl Default for DyadicFamily {
    fn default() -> Self {
        DyadicFamily { j_max: 8, resolution: 256, tail_threshold: 1e-10 }
    }
}

impl DyadicFamily {
    /// Default resolution scaled down with the dimension to keep boxes small.
    pub fn for_dim(dim: usize) -> Self {
        let resolution = match dim {
            0 | 1 => 256,
            2 => 64,
            _ => 32,
        };
        DyadicFamily { resolution, ..Default::default() }
    }

    pub fn psi(&self, j: usize, r: f64) -> f64 {
        if j == 0 {
            return 1.0 - smoothstep(r - 1.0);
        }
        let lo = 2f64.powi(j as i32 - 2);
        let hi = 2f64.powi(j as i32);
        smoothstep((r - lo) / lo) * (1.0 - smoothstep((r - hi) / hi))
    }

    /// `ψ_j(2^j r)`: the cutoff seen on the reference box.
    fn psi_scaled(&self, j: usize, r: f64) -> f64 {
        self.psi(j, 2f64.powi(j as i32) * r)
    }

    pub fn reference_grid(&self, dim: usize) -> GridSpec {
        let mut extent = [1.0; 3];
        let mut points = [1; 3];
        for a in 0..dim.min(3) {
            extent[a] = 2.0 * REFERENCE_HALF_WIDTH;
            points[a] = self.resolution;
        }
        GridSpec::new(extent, points, Boundary::Periodic).expect("reference grid")
    }
}

/// `2^{(d/2+δ)2j}`.
pub fn shell_weight(dim: usize, delta: f64, j: usize) -> f64 {
    2f64.powf((0.5 * dim as f64 + delta) * 2.0 * j as f64)
}

/// `(ψ_j^γ u)(2^j y)` sampled on the reference box.
pub fn shell_field(u: &dyn ScalarField, j: usize, gamma_psi: f64, fam: &DyadicFamily) -> (GridSpec, Vec<f64>) {
    let grid = fam.reference_grid(u.dim());
    let scale = 2f64.powi(j as i32);
    let data = (0..grid.len())
        .map(|p| {
            let y = grid.coords(p);
            let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
            let c = fam.psi_scaled(j, r);
            if c == 0.0 {
                return 0.0;
            }
            c.powf(gamma_psi) * u.eval([scale * y[0], scale * y[1], scale * y[2]])
        })
        .collect();
    (grid, data)
}

/// Shell terms `2^{(d/2+δ)2j} ‖(ψ_j u)_{(2^j)}‖²_{H^s}` for `j = 0..=j_max`.
pub fn shell_terms(u: &dyn ScalarField, spec: &NormSpec, fam: &DyadicFamily) -> Result<Vec<f64>> {
    spec.validate()?;
    (0..=fam.j_max)
        .into_par_iter()
        .map(|j| {
            let (grid, f) = shell_field(u, j, spec.gamma_psi, fam);
            Ok(shell_weight(u.dim(), spec.delta, j) * hs_norm_sq(&grid, &f, spec.s)?)
        })
        .collect()
}

/// Checks that the last shell is negligible and returns the total.
pub(crate) fn sum_with_tail(terms: &[f64], fam: &DyadicFamily) -> Result<f64> {
    // fixed-order sum keeps results independent of the thread count
    let total: f64 = terms.iter().sum();
    let last = *terms.last().unwrap_or(&0.0);
    if total > 0.0 && last > fam.tail_threshold * total {
        return Err(Error::TailNotConverged { j_max: fam.j_max, fraction: last / total });
    }
    Ok(total)
}

pub fn norm_hs_delta(u: &dyn ScalarField, spec: &NormSpec, fam: &DyadicFamily) -> Result<f64> {
    Ok(sum_with_tail(&shell_terms(u, spec, fam)?, fam)?.sqrt())
}

/// `(∫ (1 + |x|)^{2δ} |u|² dx)^{1/2}` by the grid quadrature, summed over components.
pub fn norm_l2_delta(grid: &GridSpec, u: &[f64], ncomp: usize, delta: f64) -> Result<f64> {
    if u.len() != grid.len() * ncomp {
        return Err(GridError::LengthMismatch { expected: grid.len() * ncomp, got: u.len() }.into());
    }
    let dv = grid.cell_volume();
    let s: f64 = (0..grid.len())
        .map(|p| {
            let x = grid.coords(p);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let wgt = (1.0 + r).powf(2.0 * delta) * trapezoid_weight(grid, p);
            wgt * u[p * ncomp..(p + 1) * ncomp].iter().map(|v| v * v).sum::<f64>()
        })
        .sum();
    Ok((s * dv).sqrt())
}

/// Halved weights on the faces of non-periodic grids.
pub(crate) fn trapezoid_weight(grid: &GridSpec, p: usize) -> f64 {
    if grid.boundary == Boundary::Periodic {
        return 1.0;
    }
    let m = grid.multi_index(p);
    grid.active_axes().map(|a| if m[a] == 0 || m[a] + 1 == grid.points[a] { 0.5 } else { 1.0 }).product()
}
