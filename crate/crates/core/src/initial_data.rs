//! Initial data on the `t = 0` slice: harmonic-gauge completion of `(h, K)`,
//! constraint residuals, the fluid/matter compatibility map, mollified density
//! profiles and ready-made scenario states.

use nalgebra::{Matrix3, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, GridError, Result};
use crate::fluid::{kappa_factor, EquationOfState};
use crate::geometry::SpacetimeMetric;
use crate::grid::{FdOrder, GridSpec};
use crate::reduction::{h_slot, SystemState, H0, NCOMP, V, W};
use crate::smooth::{bump, chi};
use crate::tensor::{mat_to_sym4, sym3, sym3_to_mat, sym4, MINKOWSKI, SYM3_PAIRS};

/// Spatial metric and extrinsic curvature, 6 packed components per point each.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricData {
    pub grid: GridSpec,
    pub h: Vec<f64>,
    pub k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatterData {
    /// Energy density.
    pub z: Vec<f64>,
    /// Momentum density, 3 per point.
    pub j: Vec<f64>,
}

impl GeometricData {
    pub fn new(grid: GridSpec, h: Vec<f64>, k: Vec<f64>) -> Result<Self> {
        let expected = grid.len() * 6;
        for len in [h.len(), k.len()] {
            if len != expected {
                return Err(GridError::LengthMismatch { expected, got: len }.into());
            }
        }
        let geo = GeometricData { grid, h, k };
        for p in 0..geo.grid.len() {
            if geo.h_at(p).cholesky().is_none() {
                return Err(Error::NotPositiveDefinite { point: p });
            }
        }
        Ok(geo)
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> ([f64; 6], [f64; 6])) -> Result<Self> {
        let mut h = Vec::with_capacity(grid.len() * 6);
        let mut k = Vec::with_capacity(grid.len() * 6);
        for p in 0..grid.len() {
            let (hp, kp) = f(grid.coords(p));
            h.extend_from_slice(&hp);
            k.extend_from_slice(&kp);
        }
        Self::new(grid, h, k)
    }

    pub fn h_at(&self, p: usize) -> Matrix3<f64> {
        sym3_to_mat(&self.h[p * 6..(p + 1) * 6])
    }

    pub fn k_at(&self, p: usize) -> Matrix3<f64> {
        sym3_to_mat(&self.k[p * 6..(p + 1) * 6])
    }
}

/// Which formula sets `∂ₜg₀c` on the slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftCompletion {
    /// `h^{ab}∂ₐh_{bc} − ½h^{ab}∂_c h_{ab}`: makes `F^c` vanish algebraically.
    #[default]
    Harmonic,
    /// `½h^{ab}(∂ₐh_{bc} − ∂_c h_{ab})`, kept for comparison; leaves `F^c ≠ 0`
    /// whenever `h^{ab}∂ₐh_{bc} ≠ 0`.
    HalfWeighted,
}

/// `(g, ∂ₜg)` on the slice with unit lapse and zero shift:
/// `g₀₀ = −1, g₀ₐ = 0, g_ab = h_ab`, `∂ₜg_ab = −2K_ab`, `∂ₜg₀₀ = 2h^{ab}K_ab`,
/// and `∂ₜg₀c` chosen so that the harmonic condition holds on the slice.
pub fn complete_gauge_data(geo: &GeometricData, order: FdOrder, shift: ShiftCompletion) -> Result<(SpacetimeMetric, Vec<f64>)> {
    let grid = &geo.grid;
    grid.supports(order)?;
    let dh = [0, 1, 2].map(|a| grid.diff(&geo.h, 6, a, order));
    let rows: Result<Vec<([f64; 10], [f64; 10])>> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let h = geo.h_at(p);
            let hinv = h.try_inverse().filter(|_| h.cholesky().is_some()).ok_or(Error::NotPositiveDefinite { point: p })?;
            let k = geo.k_at(p);
            let d = |a: usize, b: usize, c: usize| dh[a][p * 6 + sym3(b, c)];
            let mut g = MINKOWSKI;
            let mut dt = [0.0; 10];
            for a in 0..3 {
                for b in a..3 {
                    g[sym4(a + 1, b + 1)] = h[(a, b)];
                    dt[sym4(a + 1, b + 1)] = -2.0 * k[(a, b)];
                }
            }
            dt[0] = 2.0 * (0..3).flat_map(|a| (0..3).map(move |b| (a, b))).map(|(a, b)| hinv[(a, b)] * k[(a, b)]).sum::<f64>();
            for c in 0..3 {
                let mut div = 0.0;
                let mut tr = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        div += hinv[(a, b)] * d(a, b, c);
                        tr += hinv[(a, b)] * d(c, a, b);
                    }
                }
                dt[sym4(0, c + 1)] = match shift {
                    ShiftCompletion::Harmonic => div - 0.5 * tr,
                    ShiftCompletion::HalfWeighted => 0.5 * (div - tr),
                };
            }
            Ok((g, dt))
        })
        .collect();
    let rows = rows?;
    let g = rows.iter().flat_map(|r| r.0).collect();
    let dt = rows.iter().flat_map(|r| r.1).collect();
    Ok((SpacetimeMetric { grid: grid.clone(), data: g }, dt))
}

/// 3-dimensional Christoffel symbols `Γ^a_{bc}`, packed `[a][sym3(b, c)]`.
fn christoffel3(hinv: &Matrix3<f64>, dh: &[[f64; 6]; 3]) -> [[f64; 6]; 3] {
    let mut out = [[0.0; 6]; 3];
    for a in 0..3 {
        for (k, &(b, c)) in SYM3_PAIRS.iter().enumerate() {
            out[a][k] = (0..3).map(|d| 0.5 * hinv[(a, d)] * (dh[b][sym3(d, c)] + dh[c][sym3(d, b)] - dh[d][sym3(b, c)])).sum();
        }
    }
    out
}

/// Hamiltonian residual `R(h) − K_abK^{ab} + (trK)² − 16πz` and momentum residual
/// `∇_b K^{ab} − ∇^a trK + 8πj^a`, with finite-difference derivatives.
pub fn constraint_residuals(geo: &GeometricData, matter: &MatterData, order: FdOrder) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = &geo.grid;
    grid.supports(order)?;
    let n = grid.len();
    let dh = [0, 1, 2].map(|a| grid.diff(&geo.h, 6, a, order));
    let mut gamma = vec![0.0; n * 18];
    let mut kup = vec![0.0; n * 6];
    let mut trk = vec![0.0; n];
    let mut hinvs = Vec::with_capacity(n);
    for p in 0..n {
        let h = geo.h_at(p);
        if h.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite { point: p });
        }
        let hinv = h.try_inverse().ok_or(Error::NotPositiveDefinite { point: p })?;
        let d = [0, 1, 2].map(|a| {
            let mut r = [0.0; 6];
            r.copy_from_slice(&dh[a][p * 6..(p + 1) * 6]);
            r
        });
        let g3 = christoffel3(&hinv, &d);
        for a in 0..3 {
            gamma[p * 18 + a * 6..p * 18 + (a + 1) * 6].copy_from_slice(&g3[a]);
        }
        let k = geo.k_at(p);
        let ku = hinv * k * hinv;
        kup[p * 6..(p + 1) * 6].copy_from_slice(&crate::tensor::mat_to_sym3(&ku));
        trk[p] = (hinv * k).trace();
        hinvs.push(hinv);
    }
    let dgamma = [0, 1, 2].map(|a| grid.diff(&gamma, 18, a, order));
    let dkup = [0, 1, 2].map(|a| grid.diff(&kup, 6, a, order));
    let dtrk = [0, 1, 2].map(|a| grid.diff(&trk, 1, a, order));

    let mut ham = vec![0.0; n];
    let mut mom = vec![0.0; n * 3];
    for p in 0..n {
        let hinv = &hinvs[p];
        let g = |a: usize, b: usize, c: usize| gamma[p * 18 + a * 6 + sym3(b, c)];
        let dg = |e: usize, a: usize, b: usize, c: usize| dgamma[e][p * 18 + a * 6 + sym3(b, c)];
        let mut r = 0.0;
        for b in 0..3 {
            for c in 0..3 {
                let mut rbc = 0.0;
                for a in 0..3 {
                    rbc += dg(a, a, b, c) - dg(c, a, b, a);
                    for d in 0..3 {
                        rbc += g(a, a, d) * g(d, b, c) - g(a, c, d) * g(d, b, a);
                    }
                }
                r += hinv[(b, c)] * rbc;
            }
        }
        let k = geo.k_at(p);
        let ku = sym3_to_mat(&kup[p * 6..(p + 1) * 6]);
        let kk: f64 = (0..3).flat_map(|a| (0..3).map(move |b| (a, b))).map(|(a, b)| k[(a, b)] * ku[(a, b)]).sum();
        ham[p] = r - kk + trk[p] * trk[p] - 16.0 * PI * matter.z[p];
        for a in 0..3 {
            let mut s = 0.0;
            for b in 0..3 {
                s += dkup[b][p * 6 + sym3(a, b)];
                for c in 0..3 {
                    s += g(a, b, c) * ku[(c, b)] + g(b, b, c) * ku[(a, c)];
                }
                s -= hinv[(a, b)] * dtrk[b][p];
            }
            mom[p * 3 + a] = s + 8.0 * PI * matter.j[p * 3 + a];
        }
    }
    Ok((ham, mom))
}

/// How the energy density `z` is assembled from the fluid data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityReading {
    /// `z = ε(1 + (1 + Kw²) h_ab ūᵃūᵇ)`, the double normal projection of `T`.
    #[default]
    NormalProjection,
    /// `z = ε(1 + (1 + Kw²)) h_ab ūᵃūᵇ`, which vanishes for a comoving fluid.
    Literal,
}

/// Matter sources `(z, j)` and the slice value of `u⁰` from `(w, ū, h)`.
pub fn compatibility_map(w: &[f64], ubar: &[f64], h: &[f64], eos: &EquationOfState, reading: DensityReading) -> (MatterData, Vec<f64>) {
    let n = w.len();
    let mut z = vec![0.0; n];
    let mut j = vec![0.0; n * 3];
    let mut u0 = vec![0.0; n];
    for p in 0..n {
        let hm = sym3_to_mat(&h[p * 6..(p + 1) * 6]);
        let ub = nalgebra::Vector3::new(ubar[p * 3], ubar[p * 3 + 1], ubar[p * 3 + 2]);
        let huu = ub.dot(&(hm * ub));
        let eps = eos.density_of(w[p]);
        let kw = 1.0 + eos.k * w[p] * w[p];
        u0[p] = (1.0 + huu).sqrt();
        z[p] = match reading {
            DensityReading::NormalProjection => eps * (1.0 + kw * huu),
            DensityReading::Literal => eps * (1.0 + kw) * huu,
        };
        for a in 0..3 {
            j[p * 3 + a] = eps * kw * ub[a] * u0[p];
        }
    }
    (MatterData { z, j }, u0)
}

/// `χ_M (w₀ * φ + ρ)`: mollified by a compact bump of radius `width`, lifted
/// by `ρ` and cut off smoothly between `|x| = M` and `|x| = M + 1`.
pub fn regularize_initial(grid: &GridSpec, w0: &[f64], rho: f64, m: f64, width: f64) -> Result<Vec<f64>> {
    if w0.len() != grid.len() {
        return Err(GridError::LengthMismatch { expected: grid.len(), got: w0.len() }.into());
    }
    if !(rho >= 0.0 && m > 0.0 && width >= 0.0) {
        return Err(Error::InvalidParameter(format!("rho = {rho}, M = {m}, width = {width}")));
    }
    let mollified = if width > 0.0 { mollify(grid, w0, width) } else { w0.to_vec() };
    Ok((0..grid.len())
        .map(|p| {
            let x = grid.coords(p);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            chi(r, m) * (mollified[p] + rho)
        })
        .collect())
}

fn mollify(grid: &GridSpec, f: &[f64], width: f64) -> Vec<f64> {
    let h = grid.spacing();
    let reach = [0, 1, 2].map(|a| if grid.is_active(a) { (width / h[a]).floor() as isize } else { 0 });
    let mut offsets = vec![];
    for i in -reach[0]..=reach[0] {
        for j in -reach[1]..=reach[1] {
            for k in -reach[2]..=reach[2] {
                let d = [i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]];
                let d = [0, 1, 2].map(|a| if grid.is_active(a) { d[a] } else { 0.0 });
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() / width;
                let wgt = bump(r);
                if wgt > 0.0 {
                    offsets.push(([i, j, k], wgt));
                }
            }
        }
    }
    if offsets.is_empty() {
        return f.to_vec();
    }
    let n = grid.points;
    let periodic = grid.boundary == crate::grid::Boundary::Periodic;
    (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let m = grid.multi_index(p);
            let mut s = 0.0;
            let mut wsum = 0.0;
            for (off, wgt) in &offsets {
                let mut idx = [0usize; 3];
                let mut inside = true;
                for a in 0..3 {
                    let q = m[a] as isize + off[a];
                    if periodic {
                        idx[a] = q.rem_euclid(n[a] as isize) as usize;
                    } else if q < 0 || q >= n[a] as isize {
                        inside = false;
                    } else {
                        idx[a] = q as usize;
                    }
                }
                if inside {
                    s += wgt * f[grid.index(idx)];
                    wsum += wgt;
                }
            }
            // renormalized near frozen faces so constants are preserved
            if wsum > 0.0 {
                s / wsum
            } else {
                f[p]
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Scenario states

/// Vacuum, `v = 0`, `u = e₀`, `w = 0`.
pub fn minkowski_vacuum(grid: &GridSpec) -> SystemState {
    SystemState::zeros(grid.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WavePolarization {
    /// `v = A sin(k(x − t)) diag(1, −1, 0, 0)`: an exact harmonic-gauge vacuum solution.
    #[default]
    Gauge,
    /// `v = A sin(k(x − t)) (e₂₂ − e₃₃)`: a linearized gravitational wave.
    Plus,
}

/// Travelling wave along x at time `t`, vacuum fluid at rest in the local frame.
pub fn gauge_wave(grid: &GridSpec, amp: f64, k: f64, pol: WavePolarization, t: f64) -> SystemState {
    SystemState::from_fn(grid.clone(), |x| {
        let ph = k * (x[0] - t);
        let (s, c) = ph.sin_cos();
        let mut u = [0.0; NCOMP];
        let pattern: [(usize, f64); 2] = match pol {
            WavePolarization::Gauge => [(sym4(0, 0), 1.0), (sym4(1, 1), -1.0)],
            WavePolarization::Plus => [(sym4(2, 2), 1.0), (sym4(3, 3), -1.0)],
        };
        for (slot, sign) in pattern {
            u[V + slot] = sign * amp * s;
            u[H0 + slot] = -sign * amp * k * c;
            u[h_slot(1) + slot] = sign * amp * k * c;
        }
        // normalized observer at rest in the coordinates
        let g00 = MINKOWSKI[0] + u[V];
        u[W + 1] = 1.0 / (-g00).sqrt() - 1.0;
        u
    })
}

/// Right-moving acoustic wave on Minkowski: `w = w₀ + A sin(kx)`, `u¹ = κ(w₀) A sin(kx)`.
pub fn sound_wave(grid: &GridSpec, eos: &EquationOfState, w0: f64, amp: f64, k: f64) -> Result<SystemState> {
    let kap = kappa_factor(w0, eos);
    let s = SystemState::from_fn(grid.clone(), |x| {
        let dw = amp * (k * x[0]).sin();
        let u1 = kap * dw;
        let mut u = [0.0; NCOMP];
        u[W] = w0 + dw;
        u[W + 1] = (1.0 + u1 * u1).sqrt() - 1.0;
        u[W + 2] = u1;
        u
    });
    validate_fluid(&s, eos)?;
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidBallParams {
    /// Peak of the unmollified profile `w₀ = A (1 − r²/R²)₊^m`.
    pub amplitude: f64,
    /// Exponent `m`; the profile is `C^{m−1}` across `r = R`.
    #[serde(default = "default_exponent")]
    pub exponent: u32,
    pub radius: f64,
    pub rho: f64,
    /// Cutoff radius `M`.
    pub cutoff: f64,
    pub mollifier_width: f64,
    /// Transverse curvature `C` in `K = diag(κ₁, C, C)`.
    pub curvature: f64,
    /// Uniform 3-velocity `ū` inside the ball.
    pub ubar: [f64; 3],
}

impl Default for FluidBallParams {
    fn default() -> Self {
        FluidBallParams { amplitude: 0.05, exponent: 2, radius: 1.0, rho: 0.01, cutoff: 1.5, mollifier_width: 0.25, curvature: 0.2, ubar: [0.0; 3] }
    }
}

fn default_exponent() -> u32 {
    2
}

/// Unmollified fluid-ball profile `A (1 − r²/R²)₊^m`.
pub fn ball_profile(grid: &GridSpec, amplitude: f64, radius: f64, exponent: u32) -> Vec<f64> {
    (0..grid.len())
        .map(|p| {
            let x = grid.coords(p);
            let r2 = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (radius * radius);
            amplitude * (1.0 - r2).max(0.0).powi(exponent as i32)
        })
        .collect()
}

/// Fluid ball with flat `h` and `K = diag(κ₁(x), C, C)`,
/// `κ₁ = 4πz/C − C/2`. With `ū = 0` and the density depending on x only this
/// solves both constraints exactly; otherwise the residual is reported by
/// [`constraint_residuals`].
pub fn fluid_ball(grid: &GridSpec, eos: &EquationOfState, prm: &FluidBallParams, order: FdOrder, reading: DensityReading) -> Result<(SystemState, GeometricData, MatterData)> {
    if !(prm.curvature.abs() > 0.0) {
        return Err(Error::InvalidParameter("fluid-ball curvature must be nonzero".into()));
    }
    let w0 = ball_profile(grid, prm.amplitude, prm.radius, prm.exponent);
    let w = regularize_initial(grid, &w0, prm.rho, prm.cutoff, prm.mollifier_width)?;
    let n = grid.len();
    let delta = [1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
    let hfield: Vec<f64> = (0..n).flat_map(|_| delta).collect();
    let ubar: Vec<f64> = (0..n).flat_map(|p| if w[p] > 0.0 { prm.ubar } else { [0.0; 3] }).collect();
    let (matter, u0) = compatibility_map(&w, &ubar, &hfield, eos, reading);
    let c = prm.curvature;
    let kfield: Vec<f64> = (0..n).flat_map(|p| [4.0 * PI * matter.z[p] / c - 0.5 * c, 0.0, 0.0, c, 0.0, c]).collect();
    let geo = GeometricData::new(grid.clone(), hfield, kfield)?;
    let (metric, dtg) = complete_gauge_data(&geo, order, ShiftCompletion::Harmonic)?;
    let dg = [0, 1, 2].map(|a| grid.diff(&metric.data, 10, a, order));
    let mut s = SystemState::zeros(grid.clone());
    for p in 0..n {
        let u = s.point_mut(p);
        for k in 0..10 {
            u[V + k] = metric.data[p * 10 + k] - MINKOWSKI[k];
            u[H0 + k] = dtg[p * 10 + k];
            for a in 0..3 {
                u[h_slot(a + 1) + k] = dg[a][p * 10 + k];
            }
        }
        u[W] = w[p];
        u[W + 1] = u0[p] - 1.0;
        u[W + 2..W + 5].copy_from_slice(&ubar[p * 3..p * 3 + 3]);
    }
    validate_fluid(&s, eos)?;
    Ok((s, geo, matter))
}

/// Admissibility of the fluid part of a state: `w ≥ 0`, future-directed `u`, `σ² < 1`.
pub fn validate_fluid(s: &SystemState, eos: &EquationOfState) -> Result<()> {
    for p in 0..s.grid.len() {
        let u = s.point(p);
        let vel = Vector4::new(1.0 + u[W + 1], u[W + 2], u[W + 3], u[W + 4]);
        crate::fluid::check_admissible(u[W], &vel, eos).map_err(|e| e.at(p))?;
    }
    Ok(())
}

/// Metric of the slice with its packed form, for convenience in tests.
pub fn spatial_metric_as_sym4(h: &Matrix3<f64>) -> [f64; 10] {
    let mut g = nalgebra::Matrix4::zeros();
    g[(0, 0)] = -1.0;
    g.view_mut((1, 1), (3, 3)).copy_from(h);
    mat_to_sym4(&g)
}
