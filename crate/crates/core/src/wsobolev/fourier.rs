//! Discrete Fourier multipliers on uniform periodic boxes.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Boundary, GridSpec};

/// In-place multi-dimensional FFT over the active axes (unnormalized both ways).
pub(crate) fn fft_nd(grid: &GridSpec, data: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::new();
    for axis in grid.active_axes() {
        let n = grid.points[axis];
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let stride = match axis {
            0 => grid.points[1] * grid.points[2],
            1 => grid.points[2],
            _ => 1,
        };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for start in 0..grid.len() {
            if grid.multi_index(start)[axis] != 0 {
                continue;
            }
            for (i, l) in line.iter_mut().enumerate() {
                *l = data[start + i * stride];
            }
            fft.process(&mut line);
            for (i, l) in line.iter().enumerate() {
                data[start + i * stride] = *l;
            }
        }
    }
}

/// Angular frequency of FFT bin `k` on an axis of `n` points and length `len`.
fn frequency(k: usize, n: usize, len: f64) -> f64 {
    let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    2.0 * PI * k / len
}

/// `1 + |ξ|²` at every FFT bin.
pub(crate) fn symbol(grid: &GridSpec) -> Vec<f64> {
    (0..grid.len())
        .map(|p| {
            let m = grid.multi_index(p);
            1.0 + grid.active_axes().map(|a| frequency(m[a], grid.points[a], grid.extent[a]).powi(2)).sum::<f64>()
        })
        .collect()
}

fn require_periodic(grid: &GridSpec) -> Result<()> {
    if grid.boundary != Boundary::Periodic {
        return Err(Error::NonUniformGrid);
    }
    Ok(())
}

/// `Λ^s u` with symbol `(1 + |ξ|²)^{s/2}`.
pub fn bessel_potential(grid: &GridSpec, u: &[f64], s: f64) -> Result<Vec<f64>> {
    require_periodic(grid)?;
    if u.len() != grid.len() {
        return Err(crate::error::GridError::LengthMismatch { expected: grid.len(), got: u.len() }.into());
    }
    if s == 0.0 {
        return Ok(u.to_vec());
    }
    let mut c: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_nd(grid, &mut c, false);
    let norm = 1.0 / grid.len() as f64;
    for (ci, m) in c.iter_mut().zip(symbol(grid)) {
        *ci *= m.powf(0.5 * s) * norm;
    }
    fft_nd(grid, &mut c, true);
    Ok(c.iter().map(|z| z.re).collect())
}

/// `‖u‖²_{H^s}` on the box: `L^d Σ_k (1 + |ξ_k|²)^s |û_k|²` with `û_k` the
/// normalized Fourier coefficients.
pub fn hs_norm_sq(grid: &GridSpec, u: &[f64], s: f64) -> Result<f64> {
    require_periodic(grid)?;
    let mut c: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_nd(grid, &mut c, false);
    let n = grid.len() as f64;
    let vol: f64 = grid.active_axes().map(|a| grid.extent[a]).product();
    let sum: f64 = c.iter().zip(symbol(grid)).map(|(z, m)| m.powf(s) * z.norm_sqr()).sum();
    Ok(vol * sum / (n * n))
}
