use nalgebra::{Matrix3, Matrix5};
use rayon::prelude::*;

use super::dyadic::{shell_field, shell_weight, sum_with_tail, trapezoid_weight};
use super::fourier::bessel_potential;
use super::{DyadicFamily, GridField, NormSpec};
use crate::error::{Error, Result};
use crate::fluid::EquationOfState;
use crate::grid::{Boundary, GridSpec};
use crate::reduction::{a0_blocks, h_slot, SystemState, H0, NCOMP, V, W};

/// Pointwise weights of the `∂ₓv` and `W` terms, with the factor `w_scale`
/// applied to the Makino component of `W` before weighting.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyWeights {
    pub grid: GridSpec,
    /// 3×3 per point, row-major.
    pub spatial: Vec<f64>,
    /// 5×5 per point, row-major.
    pub fluid: Vec<f64>,
    pub w_scale: f64,
}

impl EnergyWeights {
    pub fn identity(grid: &GridSpec) -> Self {
        Self::constant(grid, &Matrix3::identity(), &Matrix5::identity(), 1.0).expect("identity weights")
    }

    pub fn constant(grid: &GridSpec, spatial: &Matrix3<f64>, fluid: &Matrix5<f64>, w_scale: f64) -> Result<Self> {
        let n = grid.len();
        let wts = EnergyWeights {
            grid: grid.clone(),
            spatial: (0..n).flat_map(|_| spatial.transpose().iter().copied().collect::<Vec<_>>()).collect(),
            fluid: (0..n).flat_map(|_| fluid.transpose().iter().copied().collect::<Vec<_>>()).collect(),
            w_scale,
        };
        wts.validate()?;
        Ok(wts)
    }

    /// The diagonal blocks of `A⁰` at every point of `s`.
    pub fn from_state(s: &SystemState, eos: &EquationOfState) -> Result<Self> {
        let blocks: Result<Vec<(Matrix3<f64>, Matrix5<f64>)>> =
            (0..s.grid.len()).into_par_iter().map(|p| a0_blocks(s.point(p), eos).map_err(|e| e.at(p))).collect();
        let blocks = blocks?;
        let wts = EnergyWeights {
            grid: s.grid.clone(),
            spatial: blocks.iter().flat_map(|b| b.0.transpose().iter().copied().collect::<Vec<_>>()).collect(),
            fluid: blocks.iter().flat_map(|b| b.1.transpose().iter().copied().collect::<Vec<_>>()).collect(),
            w_scale: eos.kappa0(),
        };
        wts.validate()?;
        Ok(wts)
    }

    fn validate(&self) -> Result<()> {
        for p in 0..self.grid.len() {
            let (a, b) = (self.spatial_at(p), self.fluid_at(p));
            let sym = (a - a.transpose()).abs().max() <= 1e-12 * a.abs().max().max(1.0) && (b - b.transpose()).abs().max() <= 1e-12 * b.abs().max().max(1.0);
            if !sym || a.cholesky().is_none() || b.cholesky().is_none() {
                return Err(Error::IndefiniteWeight { point: p });
            }
        }
        Ok(())
    }

    pub fn spatial_at(&self, p: usize) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.spatial[p * 9..(p + 1) * 9])
    }

    pub fn fluid_at(&self, p: usize) -> Matrix5<f64> {
        Matrix5::from_row_slice(&self.fluid[p * 25..(p + 1) * 25])
    }

    /// Weights at an arbitrary point, clamped to the grid box.
    fn at_point(&self, x: [f64; 3]) -> (Matrix3<f64>, Matrix5<f64>) {
        let mut a = [0.0; 9];
        let mut b = [0.0; 25];
        self.grid.interpolate(&self.spatial, 9, x, None, &mut a);
        self.grid.interpolate(&self.fluid, 25, x, None, &mut b);
        (Matrix3::from_row_slice(&a), Matrix5::from_row_slice(&b))
    }

    /// Eigenvalue bounds `[λ_min, λ_max]` over both blocks and all points.
    pub fn eigen_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in 0..self.grid.len() {
            for e in self.spatial_at(p).symmetric_eigenvalues().iter().chain(self.fluid_at(p).symmetric_eigenvalues().iter()) {
                lo = lo.min(*e);
                hi = hi.max(*e);
            }
        }
        (lo, hi)
    }
}

/// Per-point scaled copy of the state used by all energy norms: `W₀` multiplied by `w_scale`.
fn scaled_state(s: &SystemState, w_scale: f64) -> Vec<f64> {
    let mut d = s.data.clone();
    for p in 0..s.grid.len() {
        d[p * NCOMP + W] *= w_scale;
    }
    d
}

/// Four-term quadratic form at one point given the transformed components.
/// `c` holds the 55 (transformed) components; returns `[v, ∂ₜv, ∂ₓv, W]` terms.
fn point_terms(c: &[f64], a: &Matrix3<f64>, b: &Matrix5<f64>, blocks: [bool; 4]) -> [f64; 4] {
    let mut t = [0.0; 4];
    if blocks[0] {
        t[0] = c[V..V + 10].iter().map(|x| x * x).sum();
    }
    if blocks[1] {
        t[1] = c[H0..H0 + 10].iter().map(|x| x * x).sum();
    }
    if blocks[2] {
        for k in 0..10 {
            for i in 0..3 {
                for j in 0..3 {
                    t[2] += a[(i, j)] * c[h_slot(i + 1) + k] * c[h_slot(j + 1) + k];
                }
            }
        }
    }
    if blocks[3] {
        for i in 0..5 {
            for j in 0..5 {
                t[3] += b[(i, j)] * c[W + i] * c[W + j];
            }
        }
    }
    t
}

/// `(s, δ)` offsets of the four terms.
fn term_specs(spec: &NormSpec) -> [NormSpec; 4] {
    [spec.shifted(0.0, 0.0), spec.shifted(0.0, 1.0), spec.shifted(0.0, 1.0), spec.shifted(1.0, 1.0)]
}

fn block_of(comp: usize) -> usize {
    match comp {
        c if c < H0 => 0,
        c if c < h_slot(1) => 1,
        c if c < W => 2,
        _ => 3,
    }
}

/// `⟨U, U⟩` of the energy space: `‖v‖²_{s,δ} + ‖∂ₜv‖²_{s,δ+1} + ⟨∂ₓv, ∂ₓv⟩_{s,δ+1,a}
/// + ⟨W, W⟩_{s+1,δ+1,b}`, returned as its square root.
///
/// Periodic grids use the torus analogue `Σ_x (1+|x|)^{2δ} (Λ^s U)ᵀ A (Λ^s U) dV`;
/// other grids use the dyadic shells with the weights evaluated at the
/// rescaled points `2^j y`.
pub fn energy_x_norm(s: &SystemState, spec: &NormSpec, weights: &EnergyWeights, fam: &DyadicFamily) -> Result<f64> {
    Ok(energy_x_terms(s, spec, weights, fam)?.iter().sum::<f64>().sqrt())
}

/// The four squared terms of [`energy_x_norm`].
pub fn energy_x_terms(s: &SystemState, spec: &NormSpec, weights: &EnergyWeights, fam: &DyadicFamily) -> Result<[f64; 4]> {
    spec.validate()?;
    term_specs(spec)[3].validate()?;
    if weights.grid != s.grid {
        return Err(crate::error::GridError::LengthMismatch { expected: s.grid.len(), got: weights.grid.len() }.into());
    }
    let data = scaled_state(s, weights.w_scale);
    match s.grid.boundary {
        Boundary::Periodic => torus_terms(&s.grid, &data, spec, weights),
        Boundary::FrozenExterior => dyadic_terms(&s.grid, &data, spec, weights, fam),
    }
}

fn torus_terms(grid: &GridSpec, data: &[f64], spec: &NormSpec, weights: &EnergyWeights) -> Result<[f64; 4]> {
    let specs = term_specs(spec);
    let n = grid.len();
    let transformed: Result<Vec<Vec<f64>>> = (0..NCOMP)
        .into_par_iter()
        .map(|c| {
            let f: Vec<f64> = (0..n).map(|p| data[p * NCOMP + c]).collect();
            bessel_potential(grid, &f, specs[block_of(c)].s)
        })
        .collect();
    let transformed = transformed?;
    let dv = grid.cell_volume();
    let mut terms = [0.0; 4];
    let mut c = [0.0; NCOMP];
    for p in 0..n {
        for (k, t) in transformed.iter().enumerate() {
            c[k] = t[p];
        }
        let x = grid.coords(p);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let t = point_terms(&c, &weights.spatial_at(p), &weights.fluid_at(p), [true; 4]);
        for b in 0..4 {
            terms[b] += (1.0 + r).powf(2.0 * specs[b].delta) * t[b] * dv;
        }
    }
    Ok(terms)
}

fn dyadic_terms(grid: &GridSpec, data: &[f64], spec: &NormSpec, weights: &EnergyWeights, fam: &DyadicFamily) -> Result<[f64; 4]> {
    let specs = term_specs(spec);
    let dim = grid.dim();
    let axes: Vec<usize> = grid.active_axes().collect();
    let shells: Result<Vec<[f64; 4]>> = (0..=fam.j_max)
        .into_par_iter()
        .map(|j| {
            let mut fields = Vec::with_capacity(NCOMP);
            let mut rgrid = None;
            for c in 0..NCOMP {
                let f = GridField { grid, data, ncomp: NCOMP, comp: c };
                let (rg, sf) = shell_field(&f, j, spec.gamma_psi, fam);
                fields.push(bessel_potential(&rg, &sf, specs[block_of(c)].s)?);
                rgrid = Some(rg);
            }
            let rg = rgrid.expect("at least one component");
            let scale = 2f64.powi(j as i32);
            let mut t = [0.0; 4];
            let mut c = [0.0; NCOMP];
            for p in 0..rg.len() {
                for (k, f) in fields.iter().enumerate() {
                    c[k] = f[p];
                }
                let y = rg.coords(p);
                let mut x = [0.0; 3];
                for (k, &a) in axes.iter().enumerate() {
                    x[a] = scale * y[k];
                }
                let (a, b) = weights.at_point(x);
                let pt = point_terms(&c, &a, &b, [true; 4]);
                for k in 0..4 {
                    t[k] += pt[k];
                }
            }
            let dv = rg.cell_volume();
            Ok([0, 1, 2, 3].map(|k| t[k] * dv * shell_weight(dim, specs[k].delta, j)))
        })
        .collect();
    let shells = shells?;
    let mut terms = [0.0; 4];
    for k in 0..4 {
        let col: Vec<f64> = shells.iter().map(|s| s[k]).collect();
        terms[k] = sum_with_tail(&col, fam)?;
    }
    Ok(terms)
}

/// Unweighted energy-space norm (identity weights, `W₀` scaled by `w_scale`).
pub fn x_norm(s: &SystemState, spec: &NormSpec, w_scale: f64, fam: &DyadicFamily) -> Result<f64> {
    let mut id = EnergyWeights::identity(&s.grid);
    id.w_scale = w_scale;
    energy_x_norm(s, spec, &id, fam)
}

/// `A⁰`-weighted `L²_δ` norm `(∫ (1+|x|)^{2δ} Uᵀ A⁰ U dx)^{1/2}`.
pub fn y_delta_norm(s: &SystemState, weights: &EnergyWeights, delta: f64) -> Result<f64> {
    if weights.grid != s.grid {
        return Err(crate::error::GridError::LengthMismatch { expected: s.grid.len(), got: weights.grid.len() }.into());
    }
    let data = scaled_state(s, weights.w_scale);
    let grid = &s.grid;
    let total: f64 = (0..grid.len())
        .map(|p| {
            let x = grid.coords(p);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let t = point_terms(&data[p * NCOMP..(p + 1) * NCOMP], &weights.spatial_at(p), &weights.fluid_at(p), [true; 4]);
            (1.0 + r).powf(2.0 * delta) * trapezoid_weight(grid, p) * t.iter().sum::<f64>()
        })
        .sum();
    Ok((total * grid.cell_volume()).sqrt())
}
