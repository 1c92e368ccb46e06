//! The reduced Einstein equations in harmonic gauge coupled to the symmetrized
//! Euler equations, as a first-order system in 55 unknowns per point:
//!
//! | slots  | content                                   |
//! |--------|-------------------------------------------|
//! | 0–9    | `v = g − η`                               |
//! | 10–19  | `h₀ = ∂ₜg`                                |
//! | 20–49  | `hₐ = ∂ₐg`, a-major                       |
//! | 50–54  | `W = (w, u^α − e₀^α)`                     |
//!
//! In the assembled matrices the Makino slot is measured in units of `κ(0)`,
//! i.e. the unknown is `κ(0)·w`; this is what makes `A⁰(0) = 1`. Stored states
//! always hold `w` itself.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Matrix5, SymmetricEigen, Vector3, Vector4, Vector5};
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, GridError, Result};
use crate::fluid::{fluid_matrices_unchecked, projection_unchecked, sound_speed, EquationOfState, FluidBlockMatrices, CAUSALITY_MARGIN};
use crate::geometry::{christoffel_first_kind, christoffel_point, contracted_christoffel, inverse, SpacetimeMetric};
use crate::grid::{FdOrder, GridSpec};
use crate::tensor::{sym4, sym4_to_mat, MINKOWSKI, SYM4_PAIRS};

pub const NCOMP: usize = 55;
/// Number of unknowns `(v, h₀, hₐ)` the lower-order matrix acts on.
pub const NLOWER: usize = 50;
pub const V: usize = 0;
pub const H0: usize = 10;
pub const HX: usize = 20;
pub const W: usize = 50;

/// Below this `|g⁰⁰|` the lapse is treated as collapsed.
pub const LAPSE_TOLERANCE: f64 = 1e-10;

/// Slot of `∂_c g` for `c = 0..3` (0 is the time derivative).
#[inline]
pub fn h_slot(c: usize) -> usize {
    if c == 0 {
        H0
    } else {
        HX + 10 * (c - 1)
    }
}

/// Metric `g = η + v` from a state slice.
pub fn metric_of(u: &[f64]) -> Matrix4<f64> {
    let mut s = MINKOWSKI;
    for k in 0..10 {
        s[k] += u[V + k];
    }
    sym4_to_mat(&s)
}

pub fn velocity_of(u: &[f64]) -> Vector4<f64> {
    Vector4::new(1.0 + u[W + 1], u[W + 2], u[W + 3], u[W + 4])
}

/// All four first derivatives `∂_c g` stored in a state slice.
pub fn derivatives_of(u: &[f64]) -> [[f64; 10]; 4] {
    let mut h = [[0.0; 10]; 4];
    for (c, hc) in h.iter_mut().enumerate() {
        hc.copy_from_slice(&u[h_slot(c)..h_slot(c) + 10]);
    }
    h
}

fn lapse_factor(ginv: &Matrix4<f64>) -> Result<f64> {
    let g00 = ginv[(0, 0)];
    if !(g00.abs() >= LAPSE_TOLERANCE) {
        return Err(Error::SingularLapse { point: 0, g00_upper: g00 });
    }
    Ok(1.0 / (-g00))
}

/// Raises both derivative-pair indices: `out[a][d][f] = g^{cd} g^{ef} X[e][sym(c, a)]`.
fn raise_pair(ginv: &Matrix4<f64>, x: &[[f64; 10]; 4], swap: bool) -> [[[f64; 4]; 4]; 4] {
    // X[e][(c,a)] with swap=false is indexed (e; c, a); with swap=true the packed
    // array is a first-kind Christoffel Γ[a][(c,e)].
    let get = |e: usize, c: usize, a: usize| if swap { x[a][sym4(c, e)] } else { x[e][sym4(c, a)] };
    let mut t = [[[0.0; 4]; 4]; 4]; // t[a][d][e] = g^{cd} X(e; c, a)
    for a in 0..4 {
        for d in 0..4 {
            for e in 0..4 {
                t[a][d][e] = (0..4).map(|c| ginv[(c, d)] * get(e, c, a)).sum();
            }
        }
    }
    let mut out = [[[0.0; 4]; 4]; 4];
    for a in 0..4 {
        for d in 0..4 {
            for f in 0..4 {
                out[a][d][f] = (0..4).map(|e| ginv[(e, f)] * t[a][d][e]).sum();
            }
        }
    }
    out
}

/// Symmetric bilinear form with `Q(h, h) = H(g, h)`, the quadratic remainder
/// `H_{αβ} = 2 g^{γδ} g^{εζ}(∂_ε g_{γα} ∂_ζ g_{δβ} − Γ_{αγε} Γ_{βδζ})`
/// of `g^{μν}∂_μ∂_ν g_{αβ} + 2R_{αβ}` in harmonic gauge.
pub fn quadratic_form(ginv: &Matrix4<f64>, p: &[[f64; 10]; 4], q: &[[f64; 10]; 4]) -> [f64; 10] {
    let gp = christoffel_first_kind(p);
    let gq = christoffel_first_kind(q);
    let pp = raise_pair(ginv, p, false);
    let pq = raise_pair(ginv, q, false);
    let cp = raise_pair(ginv, &gp, true);
    let cq = raise_pair(ginv, &gq, true);
    let mut out = [0.0; 10];
    for (k, &(a, b)) in SYM4_PAIRS.iter().enumerate() {
        let mut s = 0.0;
        for d in 0..4 {
            for f in 0..4 {
                s += pp[a][d][f] * q[f][sym4(d, b)] + pq[a][d][f] * p[f][sym4(d, b)];
                s -= cp[a][d][f] * gq[b][sym4(d, f)] + cq[a][d][f] * gp[b][sym4(d, f)];
            }
        }
        out[k] = s;
    }
    out
}

/// `H_{αβ}(g, ∂g)`.
pub fn quadratic_terms_h(ginv: &Matrix4<f64>, dg: &[[f64; 10]; 4]) -> [f64; 10] {
    quadratic_form(ginv, dg, dg)
}

/// Matter source of the `h₀` equation,
/// `f = −(8π ε / g⁰⁰)((1 − Kw²) g_{αβ} + 2(1 + Kw²) u_α u_β)`.
pub fn source_f(g: &Matrix4<f64>, ginv: &Matrix4<f64>, eps: f64, w: f64, u: &Vector4<f64>, eos: &EquationOfState) -> Result<[f64; 10]> {
    let l = lapse_factor(ginv)?;
    let mut out = [0.0; 10];
    if eps == 0.0 {
        return Ok(out);
    }
    let ul = g * u;
    let kw2 = eos.k * w * w;
    for (k, &(a, b)) in SYM4_PAIRS.iter().enumerate() {
        out[k] = 8.0 * PI * eps * l * ((1.0 - kw2) * g[(a, b)] + 2.0 * (1.0 + kw2) * ul[a] * ul[b]);
    }
    Ok(out)
}

/// Coefficients frozen at one point: everything the right-hand side needs
/// from the state that is not the unknown.
#[derive(Debug, Clone)]
pub struct Frozen {
    pub g: Matrix4<f64>,
    pub ginv: Matrix4<f64>,
    /// `(−g⁰⁰)⁻¹`.
    pub lapse: f64,
    pub w: f64,
    pub u: Vector4<f64>,
    pub h: [[f64; 10]; 4],
    pub fluid: FluidBlockMatrices,
    pub source: [f64; 10],
}

impl Frozen {
    /// `eps` is the density used in the matter source; direct evolution passes
    /// `max(w, 0)^β`, the iteration passes the transported density.
    pub fn new(state: &[f64], eps: f64, eos: &EquationOfState) -> Result<Self> {
        let g = metric_of(state);
        let ginv = inverse(&g)?;
        let lapse = lapse_factor(&ginv)?;
        let w = state[W];
        let u = velocity_of(state);
        let s = sound_speed(w, eos);
        if s * s > 1.0 - CAUSALITY_MARGIN {
            return Err(Error::CausalityViolation { point: 0, sigma2: s * s });
        }
        let fluid = fluid_matrices_unchecked(&g, w, &u, eos);
        let source = source_f(&g, &ginv, eps, w, &u, eos)?;
        Ok(Frozen { g, ginv, lapse, w, u, h: derivatives_of(state), fluid, source })
    }

    pub fn direct(state: &[f64], eos: &EquationOfState) -> Result<Self> {
        Self::new(state, eos.density_of(state[W]), eos)
    }
}

/// Spatial derivatives of the unknown at one point; `None` for inactive axes.
pub type PointGradient<'a> = [Option<&'a [f64]>; 3];

/// Right-hand side `R` of `A⁰ ∂ₜU = R` in stored variables (the Makino row is
/// not rescaled), linear in the unknown for fixed `Frozen`.
pub fn linear_rhs(fr: &Frozen, unk: &[f64], du: &PointGradient) -> [f64; NCOMP] {
    let mut r = [0.0; NCOMP];
    let l = fr.lapse;
    let hu = derivatives_of(unk);

    r[V..V + 10].copy_from_slice(&unk[H0..H0 + 10]);

    let q = quadratic_form(&fr.ginv, &fr.h, &hu);
    for k in 0..10 {
        r[H0 + k] = fr.source[k] - l * q[k];
    }
    for (ai, da) in du.iter().enumerate() {
        let Some(da) = da else { continue };
        let a = ai + 1;
        // ∂ₜh₀ row: 2g^{0a}∂ₐh₀ + g^{ab}∂ₐh_b
        for k in 0..10 {
            let mut s = 2.0 * fr.ginv[(0, a)] * da[H0 + k];
            for b in 1..4 {
                s += fr.ginv[(a, b)] * da[h_slot(b) + k];
            }
            r[H0 + k] += l * s;
        }
        // hₐ rows: g^{ca}∂ₐh₀
        for c in 1..4 {
            for k in 0..10 {
                r[h_slot(c) + k] += l * fr.ginv[(c, a)] * da[H0 + k];
            }
        }
        let dw = Vector5::from_column_slice(&da[W..W + 5]);
        let fw = fr.fluid.a[a] * dw;
        for i in 0..5 {
            r[W + i] -= fw[i];
        }
    }
    let gamma = christoffel_point(&fr.ginv, &hu);
    let conn = fr.fluid.connection_term(&gamma, &fr.u);
    for i in 0..5 {
        r[W + i] -= conn[i];
    }
    r
}

/// Applies `(A⁰)⁻¹` blockwise: identity on `(v, h₀)`, a 3×3 Cholesky for the
/// `hₐ` block and a 5×5 Cholesky for the fluid block.
pub fn solve_a0(fr: &Frozen, r: &[f64; NCOMP]) -> Result<[f64; NCOMP]> {
    let mut out = *r;
    let a33 = spatial_block(fr);
    let chol = a33.cholesky().ok_or_else(|| Error::IndefiniteA0 { t: 0.0, point: 0, min_eig: min_eig3(&a33) })?;
    for k in 0..10 {
        let rhs = Vector3::new(r[h_slot(1) + k], r[h_slot(2) + k], r[h_slot(3) + k]);
        let x = chol.solve(&rhs);
        for c in 0..3 {
            out[h_slot(c + 1) + k] = x[c];
        }
    }
    let a44 = fr.fluid.a[0];
    let chol = a44.cholesky().ok_or_else(|| Error::IndefiniteA0 { t: 0.0, point: 0, min_eig: min_eig5(&a44) })?;
    let x = chol.solve(&Vector5::from_column_slice(&r[W..W + 5]));
    out[W..W + 5].copy_from_slice(x.as_slice());
    Ok(out)
}

/// `a₃₃⁰` restricted to one component: `(−g⁰⁰)⁻¹ g^{ab}`.
fn spatial_block(fr: &Frozen) -> Matrix3<f64> {
    Matrix3::from_fn(|a, b| fr.lapse * fr.ginv[(a + 1, b + 1)])
}

fn min_eig3(m: &Matrix3<f64>) -> f64 {
    SymmetricEigen::new(*m).eigenvalues.min()
}

fn min_eig5(m: &Matrix5<f64>) -> f64 {
    SymmetricEigen::new(*m).eigenvalues.min()
}

/// `∂ₜU` at a point for the quasi-linear system.
pub fn point_time_derivative(state: &[f64], du: &PointGradient, eos: &EquationOfState) -> Result<[f64; NCOMP]> {
    let fr = Frozen::direct(state, eos)?;
    solve_a0(&fr, &linear_rhs(&fr, state, du))
}

/// Smallest eigenvalue of the assembled `A⁰`, capped at 1 (the identity blocks).
pub fn a0_min_eigenvalue(fr: &Frozen, eos: &EquationOfState) -> f64 {
    let a44 = scaled_fluid(&fr.fluid, eos)[0];
    min_eig3(&spatial_block(fr)).min(min_eig5(&a44)).min(1.0)
}

/// Harmonic-gauge residual `F^μ = g^{βγ}Γ^μ_{βγ}` computed from the evolved derivatives.
pub fn harmonic_residual(state: &[f64]) -> Result<[f64; 4]> {
    let g = metric_of(state);
    let ginv = inverse(&g)?;
    Ok(contracted_christoffel(&ginv, &christoffel_point(&ginv, &derivatives_of(state))))
}

// ---------------------------------------------------------------------------
// Dense assembly

/// Fluid matrices in the rescaled Makino unknown `κ(0)·w`.
fn scaled_fluid(m: &FluidBlockMatrices, eos: &EquationOfState) -> [Matrix5<f64>; 4] {
    let k0 = eos.kappa0();
    m.a.map(|a| {
        let mut s = a;
        for i in 0..5 {
            s[(0, i)] /= k0;
            s[(i, 0)] /= k0;
        }
        s
    })
}

/// Fluid matrices built directly in the rescaled unknown; `κ(w)/κ(0) = 1/(1 + Kw²)`
/// keeps the rest state exactly at the identity.
fn system_fluid_block(g: &Matrix4<f64>, w: f64, u: &Vector4<f64>, eos: &EquationOfState) -> [Matrix5<f64>; 4] {
    let s = sound_speed(w, eos);
    let r = 1.0 / (1.0 + eos.k * w * w);
    let p = projection_unchecked(g, u);
    let ul = g * u;
    [0, 1, 2, 3].map(|nu| {
        let mut m = Matrix5::zeros();
        m[(0, 0)] = r * r * u[nu];
        for b in 0..4 {
            let c = s * r * p[(nu, b)];
            m[(0, b + 1)] = c;
            m[(b + 1, 0)] = c;
            for a in 0..4 {
                m[(a + 1, b + 1)] = (g[(a, b)] + 2.0 * ul[a] * ul[b]) * u[nu];
            }
        }
        m
    })
}

fn check_point(g: &Matrix4<f64>, w: f64, eos: &EquationOfState) -> Result<Matrix4<f64>> {
    let ginv = inverse(g)?;
    lapse_factor(&ginv)?;
    let s = sound_speed(w, eos);
    if s * s > 1.0 - CAUSALITY_MARGIN {
        return Err(Error::CausalityViolation { point: 0, sigma2: s * s });
    }
    Ok(ginv)
}

/// Assembled `A⁰(v, W)`; depends on `v` and `W` only.
pub fn assemble_a0(v: &[f64; 10], wv: &[f64; 5], eos: &EquationOfState) -> Result<DMatrix<f64>> {
    let state = pack_vw(v, wv);
    let g = metric_of(&state);
    let ginv = check_point(&g, wv[0], eos)?;
    let l = lapse_factor(&ginv)?;
    let mut a = DMatrix::zeros(NCOMP, NCOMP);
    for i in 0..20 {
        a[(i, i)] = 1.0;
    }
    for c in 1..4 {
        for d in 1..4 {
            for k in 0..10 {
                a[(h_slot(c) + k, h_slot(d) + k)] = l * ginv[(c, d)];
            }
        }
    }
    let fl = system_fluid_block(&g, wv[0], &velocity_of(&state), eos);
    a.view_mut((W, W), (5, 5)).copy_from(&fl[0]);
    let min_eig = SymmetricEigen::new(a.clone()).eigenvalues.min();
    if !(min_eig > 0.0) {
        return Err(Error::IndefiniteA0 { t: 0.0, point: 0, min_eig });
    }
    Ok(a)
}

/// `Aᵃ(v, W)` for a = 1, 2, 3: the principal part minus its Minkowski value.
pub fn assemble_aa(v: &[f64; 10], wv: &[f64; 5], eos: &EquationOfState) -> Result<[DMatrix<f64>; 3]> {
    let state = pack_vw(v, wv);
    let g = metric_of(&state);
    let ginv = check_point(&g, wv[0], eos)?;
    let l = lapse_factor(&ginv)?;
    let fl = system_fluid_block(&g, wv[0], &velocity_of(&state), eos);
    Ok([1, 2, 3].map(|a| {
        let mut m = DMatrix::zeros(NCOMP, NCOMP);
        for k in 0..10 {
            m[(H0 + k, H0 + k)] = 2.0 * l * ginv[(0, a)];
            for b in 1..4 {
                let delta = if a == b { 1.0 } else { 0.0 };
                let e = l * ginv[(a, b)] - delta;
                m[(H0 + k, h_slot(b) + k)] = e;
                m[(h_slot(b) + k, H0 + k)] = e;
            }
        }
        for i in 0..5 {
            for j in 0..5 {
                m[(W + i, W + j)] = -fl[a][(i, j)];
            }
        }
        // adding 0.0 turns −0.0 into +0.0
        m.apply(|x| *x += 0.0);
        m
    }))
}

/// The constant matrices `Cᵃ`: the wave principal part at `g = η`.
pub fn constant_ca() -> [DMatrix<f64>; 3] {
    [1, 2, 3].map(|a| {
        let mut m = DMatrix::zeros(NCOMP, NCOMP);
        for k in 0..10 {
            m[(H0 + k, h_slot(a) + k)] = 1.0;
            m[(h_slot(a) + k, H0 + k)] = 1.0;
        }
        m
    })
}

fn pack_vw(v: &[f64; 10], wv: &[f64; 5]) -> [f64; NCOMP] {
    let mut s = [0.0; NCOMP];
    s[V..V + 10].copy_from_slice(v);
    s[W..W + 5].copy_from_slice(wv);
    s
}

/// Nontrivial diagonal blocks of `A⁰`: `(−g⁰⁰)⁻¹ g^{ab}` (acting on each of the
/// ten components of `h_a`) and the 5×5 fluid block in the rescaled unknown.
pub fn a0_blocks(state: &[f64], eos: &EquationOfState) -> Result<(Matrix3<f64>, Matrix5<f64>)> {
    let g = metric_of(state);
    let ginv = inverse(&g)?;
    let l = lapse_factor(&ginv)?;
    let spatial = ginv.fixed_view::<3, 3>(1, 1) * l;
    let fl = system_fluid_block(&g, state[W], &velocity_of(state), eos);
    Ok((spatial, fl[0]))
}

/// All matrices of the symmetric hyperbolic system at one point.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub a0: DMatrix<f64>,
    pub aa: [DMatrix<f64>; 3],
    pub ca: [DMatrix<f64>; 3],
    /// 55×50, acting on `(v, h₀, hₐ)`.
    pub b: DMatrix<f64>,
    pub f: DVector<f64>,
}

/// Assembles the dense system at a state. `B` is linear in the unknown with
/// coefficients taken from `state`, obtained by evaluating the right-hand side
/// on unit vectors.
pub fn assemble_block_system(state: &[f64], eos: &EquationOfState) -> Result<BlockSystem> {
    let mut v = [0.0; 10];
    v.copy_from_slice(&state[V..V + 10]);
    let mut wv = [0.0; 5];
    wv.copy_from_slice(&state[W..W + 5]);
    let a0 = assemble_a0(&v, &wv, eos)?;
    let aa = assemble_aa(&v, &wv, eos)?;
    let fr = Frozen::direct(state, eos)?;
    let k0 = eos.kappa0();
    let none: PointGradient = [None, None, None];

    let mut zero_source = fr.clone();
    zero_source.source = [0.0; 10];
    let mut b = DMatrix::zeros(NCOMP, NLOWER);
    for j in 0..NLOWER {
        let mut e = [0.0; NCOMP];
        e[j] = 1.0;
        let col = linear_rhs(&zero_source, &e, &none);
        for i in 0..NCOMP {
            b[(i, j)] = if i == W { col[i] / k0 } else { col[i] };
        }
    }
    let mut f = DVector::zeros(NCOMP);
    for k in 0..10 {
        f[H0 + k] = fr.source[k];
    }
    Ok(BlockSystem { a0, aa, ca: constant_ca(), b, f })
}

impl BlockSystem {
    /// `(Aᵃ + Cᵃ)∂ₐU + B(v, h₀, hₐ) + F` with the Makino slot rescaled by `κ(0)`.
    pub fn rhs(&self, state: &[f64], du: &PointGradient, eos: &EquationOfState) -> DVector<f64> {
        let k0 = eos.kappa0();
        let scale = |x: &[f64]| {
            let mut y = DVector::from_column_slice(x);
            y[W] *= k0;
            y
        };
        let mut r = &self.b * DVector::from_column_slice(&state[..NLOWER]) + &self.f;
        for a in 0..3 {
            if let Some(d) = du[a] {
                r += (&self.aa[a] + &self.ca[a]) * scale(d);
            }
        }
        r
    }

    /// `∂ₜU` in stored variables.
    pub fn time_derivative(&self, state: &[f64], du: &PointGradient, eos: &EquationOfState) -> Option<DVector<f64>> {
        let mut x = self.a0.clone().cholesky()?.solve(&self.rhs(state, du, eos));
        x[W] /= eos.kappa0();
        Some(x)
    }
}

/// The assembled right-hand side `R` (Makino row rescaled) from the structured route.
pub fn point_assembled_rhs(state: &[f64], du: &PointGradient, eos: &EquationOfState) -> Result<[f64; NCOMP]> {
    let fr = Frozen::direct(state, eos)?;
    let mut r = linear_rhs(&fr, state, du);
    r[W] /= eos.kappa0();
    Ok(r)
}

/// The wave-form right-hand side before division by `−g⁰⁰`:
/// `−g⁰⁰∂ₜh₀ = 2g^{0a}∂ₐh₀ + g^{ab}∂ₐh_b − H + 8πε(2(1+Kw²)u_αu_β + (1−Kw²)g_{αβ})`
/// and `g^{cd}∂ₜh_d = g^{ca}∂ₐh₀`, fluid rows as in the normalized form.
pub fn point_unnormalized_rhs(state: &[f64], du: &PointGradient, eos: &EquationOfState) -> Result<[f64; NCOMP]> {
    let g = metric_of(state);
    let ginv = inverse(&g)?;
    let h = derivatives_of(state);
    let hq = quadratic_terms_h(&ginv, &h);
    let w = state[W];
    let u = velocity_of(state);
    let ul = g * u;
    let eps = eos.density_of(w);
    let kw2 = eos.k * w * w;
    let mut r = [0.0; NCOMP];
    r[V..V + 10].copy_from_slice(&state[H0..H0 + 10]);
    for (k, &(a, b)) in SYM4_PAIRS.iter().enumerate() {
        r[H0 + k] = -hq[k] + 8.0 * PI * eps * (2.0 * (1.0 + kw2) * ul[a] * ul[b] + (1.0 - kw2) * g[(a, b)]);
    }
    for (ai, da) in du.iter().enumerate() {
        let Some(da) = da else { continue };
        let a = ai + 1;
        for k in 0..10 {
            r[H0 + k] += 2.0 * ginv[(0, a)] * da[H0 + k] + (1..4).map(|b| ginv[(a, b)] * da[h_slot(b) + k]).sum::<f64>();
            for c in 1..4 {
                r[h_slot(c) + k] += ginv[(c, a)] * da[H0 + k];
            }
        }
    }
    // fluid rows: A⁰∂ₜW = −Aᵃ∂ₐW − Aᵛ(0, Γ^β_{νμ}u^μ)
    let m = fluid_matrices_unchecked(&g, w, &u, eos);
    let gamma = christoffel_point(&ginv, &h);
    let mut fw = -m.connection_term(&gamma, &u);
    for (ai, da) in du.iter().enumerate() {
        if let Some(da) = da {
            fw -= m.a[ai + 1] * Vector5::from_column_slice(&da[W..W + 5]);
        }
    }
    r[W..W + 5].copy_from_slice(fw.as_slice());
    Ok(r)
}

// ---------------------------------------------------------------------------
// Fields

/// The 55-component state on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub grid: GridSpec,
    pub data: Vec<f64>,
}

impl SystemState {
    pub fn new(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        let expected = grid.len() * NCOMP;
        if data.len() != expected {
            return Err(GridError::LengthMismatch { expected, got: data.len() }.into());
        }
        Ok(SystemState { grid, data })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        SystemState { grid, data: vec![0.0; n * NCOMP] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> [f64; NCOMP]) -> Self {
        let data = (0..grid.len()).flat_map(|i| f(grid.coords(i))).collect();
        SystemState { grid, data }
    }

    pub fn point(&self, p: usize) -> &[f64] {
        &self.data[p * NCOMP..(p + 1) * NCOMP]
    }

    pub fn point_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.data[p * NCOMP..(p + 1) * NCOMP]
    }

    pub fn metric(&self) -> SpacetimeMetric {
        let data = (0..self.grid.len())
            .flat_map(|p| {
                let mut s = MINKOWSKI;
                for k in 0..10 {
                    s[k] += self.point(p)[V + k];
                }
                s
            })
            .collect();
        SpacetimeMetric { grid: self.grid.clone(), data }
    }

    /// Extracts slots `range` into a contiguous field.
    pub fn slots(&self, start: usize, count: usize) -> Vec<f64> {
        (0..self.grid.len()).flat_map(|p| self.point(p)[start..start + count].to_vec()).collect()
    }

    /// Max over points of `|hₐ − Dₐv|`: the first-order reduction residual.
    pub fn reduction_residual(&self, order: FdOrder) -> f64 {
        let v = self.slots(V, 10);
        let mut worst: f64 = 0.0;
        for a in self.grid.active_axes().collect::<Vec<_>>() {
            let dv = self.grid.diff(&v, 10, a, order);
            for p in 0..self.grid.len() {
                for k in 0..10 {
                    worst = worst.max((self.point(p)[h_slot(a + 1) + k] - dv[p * 10 + k]).abs());
                }
            }
        }
        worst
    }
}

/// Spatial derivatives of every slot, one field per axis (empty for inactive axes).
pub fn state_gradient(s: &SystemState, order: FdOrder) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|a| if s.grid.is_active(a) { s.grid.diff(&s.data, NCOMP, a, order) } else { Vec::new() })
}

pub(crate) fn gradient_at<'a>(grad: &'a [Vec<f64>; 3], p: usize) -> PointGradient<'a> {
    [0, 1, 2].map(|a| if grad[a].is_empty() { None } else { Some(&grad[a][p * NCOMP..(p + 1) * NCOMP]) })
}

/// The assembled right-hand side `(Aᵃ + Cᵃ)∂ₐU + BU + F` on a grid.
pub fn assemble_rhs(s: &SystemState, eos: &EquationOfState, order: FdOrder) -> Result<Vec<f64>> {
    let grad = state_gradient(s, order);
    let rows: Result<Vec<[f64; NCOMP]>> = (0..s.grid.len())
        .into_par_iter()
        .map(|p| point_assembled_rhs(s.point(p), &gradient_at(&grad, p), eos).map_err(|e| e.at(p)))
        .collect();
    Ok(rows?.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ricci_oracle, TimeDerivatives};
    use crate::grid::Boundary;
    use proptest::prelude::*;

    fn eos() -> EquationOfState {
        EquationOfState::new(1.0, 2.0).unwrap()
    }

    fn sym_err(m: &DMatrix<f64>) -> f64 {
        (m - m.transpose()).abs().max()
    }

    /// Small random state with a normalized future-directed velocity.
    pub(crate) fn random_state(seed: &[f64]) -> [f64; NCOMP] {
        let mut s = [0.0; NCOMP];
        for k in 0..50 {
            s[k] = 0.1 * seed[k];
        }
        s[W] = 0.05 * (seed[50] + 1.0);
        let g = metric_of(&s);
        let vel = [0.1 * seed[51], 0.1 * seed[52], 0.1 * seed[53]];
        let a = g[(0, 0)];
        let b = 2.0 * (0..3).map(|i| g[(0, i + 1)] * vel[i]).sum::<f64>();
        let c = 1.0 + (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| g[(i + 1, j + 1)] * vel[i] * vel[j]).sum::<f64>();
        let u0 = (-b - (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        s[W + 1] = u0 - 1.0;
        s[W + 2] = vel[0];
        s[W + 3] = vel[1];
        s[W + 4] = vel[2];
        s
    }

    #[test]
    fn minkowski_vacuum_values() {
        let a0 = assemble_a0(&[0.0; 10], &[0.0; 5], &eos()).unwrap();
        assert_eq!(a0, DMatrix::identity(NCOMP, NCOMP));
        for a in assemble_aa(&[0.0; 10], &[0.0; 5], &eos()).unwrap() {
            assert!(a.iter().all(|&x| x == 0.0 && x.to_bits() == 0));
        }
    }

    #[test]
    fn a0_spatial_block_example() {
        // g = diag(−1, 2, 1, 1): a₃₃⁰ = diag(0.5, 1, 1) ⊗ 1₁₀
        let mut v = [0.0; 10];
        v[4] = 1.0;
        let a0 = assemble_a0(&v, &[0.0; 5], &eos()).unwrap();
        for k in 0..10 {
            assert_eq!(a0[(h_slot(1) + k, h_slot(1) + k)], 0.5);
            assert_eq!(a0[(h_slot(2) + k, h_slot(2) + k)], 1.0);
            assert_eq!(a0[(h_slot(1) + k, h_slot(2) + k)], 0.0);
        }
    }

    #[test]
    fn degenerate_lapse_rejected() {
        let mut v = [0.0; 10];
        v[0] = 1.0; // g00 = 0 with g0a = 0 makes g singular
        assert!(assemble_a0(&v, &[0.0; 5], &eos()).is_err());
    }

    #[test]
    fn ca_pattern() {
        let ca = constant_ca();
        for a in 0..3 {
            assert_eq!(sym_err(&ca[a]), 0.0);
            for k in 0..10 {
                assert_eq!(ca[a][(H0 + k, h_slot(a + 1) + k)], 1.0);
            }
            assert_eq!(ca[a].iter().filter(|&&x| x != 0.0).count(), 20);
        }
    }

    #[test]
    fn source_example() {
        // Minkowski, u = e₀, γ = 2, K = 1, w = 0.1: f₀₀ = 8π · 0.01 · 1.03
        let g = sym4_to_mat(&MINKOWSKI);
        let e = eos();
        let f = source_f(&g, &g, e.density_of(0.1), 0.1, &Vector4::new(1.0, 0.0, 0.0, 0.0), &e).unwrap();
        assert!((f[0] - 8.0 * PI * 0.01 * 1.03).abs() < 1e-12);
        assert!((f[0] - 0.2588).abs() < 1e-4);
        let f = source_f(&g, &g, 0.0, 0.0, &Vector4::new(1.0, 0.0, 0.0, 0.0), &e).unwrap();
        assert!(f.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn source_continuous_at_vacuum_boundary() {
        let e = eos();
        let g = sym4_to_mat(&MINKOWSKI);
        let u = Vector4::new(1.0, 0.0, 0.0, 0.0);
        let f_at = |x: f64| {
            let w = (1.0 - x.abs()).max(0.0).powi(2);
            source_f(&g, &g, e.density_of(w), w, &u, &e).unwrap()[0]
        };
        let h = 1e-4;
        assert!((f_at(1.0 - h) - f_at(1.0 + h)).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn assembled_matrices_symmetric(seed in prop::collection::vec(-1.0f64..1.0, 54)) {
            let s = random_state(&seed);
            let bs = assemble_block_system(&s, &eos()).unwrap();
            prop_assert_eq!(sym_err(&bs.a0), 0.0);
            for a in 0..3 {
                prop_assert_eq!(sym_err(&(&bs.aa[a] + &bs.ca[a])), 0.0);
            }
            let min = SymmetricEigen::new(bs.a0.clone()).eigenvalues.min();
            prop_assert!(min > 0.5, "{}", min);
        }

        #[test]
        fn coefficients_ignore_derivatives(seed in prop::collection::vec(-1.0f64..1.0, 54), bump in prop::collection::vec(-1.0f64..1.0, 40)) {
            let s = random_state(&seed);
            let mut t = s;
            for k in 0..40 { t[H0 + k] += bump[k]; }
            let mut v = [0.0; 10]; v.copy_from_slice(&s[..10]);
            let mut wv = [0.0; 5]; wv.copy_from_slice(&s[W..]);
            let a = assemble_aa(&v, &wv, &eos()).unwrap();
            v.copy_from_slice(&t[..10]); wv.copy_from_slice(&t[W..]);
            let b = assemble_aa(&v, &wv, &eos()).unwrap();
            for i in 0..3 { prop_assert!(a[i] == b[i]); }
        }

        #[test]
        fn h_is_quadratic(seed in prop::collection::vec(-1.0f64..1.0, 54)) {
            let s = random_state(&seed);
            let g = metric_of(&s);
            let ginv = inverse(&g).unwrap();
            let h = derivatives_of(&s);
            let base = quadratic_terms_h(&ginv, &h);
            for lam in [2.0, 3.0, 0.5] {
                let scaled = h.map(|r| r.map(|x| x * lam));
                let hs = quadratic_terms_h(&ginv, &scaled);
                for k in 0..10 {
                    prop_assert!((hs[k] - lam * lam * base[k]).abs() < 1e-12 * (1.0 + base[k].abs()));
                }
            }
        }

        #[test]
        fn dense_and_structured_routes_agree(seed in prop::collection::vec(-1.0f64..1.0, 54), d in prop::collection::vec(-1.0f64..1.0, 3 * NCOMP)) {
            let e = eos();
            let s = random_state(&seed);
            let grads: Vec<&[f64]> = d.chunks(NCOMP).collect();
            let du: PointGradient = [Some(grads[0]), Some(grads[1]), Some(grads[2])];
            let structured = point_assembled_rhs(&s, &du, &e).unwrap();
            let bs = assemble_block_system(&s, &e).unwrap();
            let dense = bs.rhs(&s, &du, &e);
            for i in 0..NCOMP {
                prop_assert!((structured[i] - dense[i]).abs() < 1e-12, "{}: {} {}", i, structured[i], dense[i]);
            }
            let dt = point_time_derivative(&s, &du, &e).unwrap();
            let dt_dense = bs.time_derivative(&s, &du, &e).unwrap();
            for i in 0..NCOMP {
                prop_assert!((dt[i] - dt_dense[i]).abs() < 1e-10 * (1.0 + dt[i].abs()));
            }
        }

        #[test]
        fn unnormalized_form_matches(seed in prop::collection::vec(-1.0f64..1.0, 54), d in prop::collection::vec(-1.0f64..1.0, 3 * NCOMP)) {
            let e = eos();
            let s = random_state(&seed);
            let grads: Vec<&[f64]> = d.chunks(NCOMP).collect();
            let du: PointGradient = [Some(grads[0]), Some(grads[1]), Some(grads[2])];
            let un = point_unnormalized_rhs(&s, &du, &e).unwrap();
            let l = 1.0 / -inverse(&metric_of(&s)).unwrap()[(0, 0)];
            let mut normalized = un;
            for i in H0..W { normalized[i] *= l; }
            normalized[W] /= e.kappa0();
            let rhs = point_assembled_rhs(&s, &du, &e).unwrap();
            for i in 0..NCOMP {
                prop_assert!((normalized[i] - rhs[i]).abs() < 1e-12, "{}", i);
            }
        }
    }

    #[test]
    fn scaled_fluid_matches_congruence() {
        let e = EquationOfState::new(0.8, 5.0 / 3.0).unwrap();
        let s = random_state(&[0.3; 54]);
        let g = metric_of(&s);
        let u = velocity_of(&s);
        let direct = system_fluid_block(&g, s[W], &u, &e);
        let cong = scaled_fluid(&fluid_matrices_unchecked(&g, s[W], &u, &e), &e);
        for nu in 0..4 {
            assert!((direct[nu] - cong[nu]).abs().max() < 1e-14);
        }
    }

    #[test]
    fn vacuum_rhs_vanishes() {
        let g = GridSpec::line(1.0, 8, Boundary::Periodic).unwrap();
        let s = SystemState::zeros(g);
        assert!(assemble_rhs(&s, &eos(), FdOrder::Fourth).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pure_fluid_block_matches_fluid_matrices() {
        // v = 0: the Makino and velocity rows reduce to −Aᵃ∂ₐW
        let e = eos();
        let mut s = [0.0; NCOMP];
        s[W] = 0.2;
        s[W + 1] = (1.0f64 + 0.09).sqrt() - 1.0;
        s[W + 2] = 0.3;
        let d: Vec<f64> = (0..NCOMP).map(|i| (i as f64 * 0.37).sin()).collect();
        let du: PointGradient = [Some(&d), None, None];
        let rhs = point_assembled_rhs(&s, &du, &e).unwrap();
        let g = sym4_to_mat(&MINKOWSKI);
        let m = crate::fluid::fluid_matrices(&g, 0.2, &velocity_of(&s), &e).unwrap();
        let expect = -(m.a[1] * Vector5::from_column_slice(&d[W..W + 5]));
        for i in 0..5 {
            let got = if i == 0 { rhs[W] * e.kappa0() } else { rhs[W + i] };
            assert!((got - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn linearized_wave_operator() {
        // v = A sin(kx) T, h₀ = 0, h₁ = ∂ₓv: ∂ₜh₀ = ∂ₓ²v + O(A²)
        let amp = 1e-6;
        let grid = GridSpec::line(2.0 * PI, 64, Boundary::Periodic).unwrap();
        let t = [0.2, 0.1, 0.0, -0.3, 0.5, 0.0, 0.1, -0.2, 0.3, 0.4];
        let s = SystemState::from_fn(grid.clone(), |x| {
            let mut u = [0.0; NCOMP];
            for k in 0..10 {
                u[V + k] = amp * x[0].sin() * t[k];
                u[h_slot(1) + k] = amp * x[0].cos() * t[k];
            }
            u
        });
        let rhs = assemble_rhs(&s, &eos(), FdOrder::Fourth).unwrap();
        for p in 0..grid.len() {
            let x = grid.coords(p)[0];
            for k in 0..10 {
                let exact = -amp * x.sin() * t[k];
                assert!((rhs[p * NCOMP + H0 + k] - exact).abs() < 1e-3 * amp);
            }
        }
    }

    /// Analytic metrics with exact first and second derivatives on the t = 0 slice.
    struct Analytic {
        g: Box<dyn Fn(f64) -> [f64; 10]>,
        dx: Box<dyn Fn(f64) -> [f64; 10]>,
        dt: Box<dyn Fn(f64) -> [f64; 10]>,
        dtt: Box<dyn Fn(f64) -> [f64; 10]>,
    }

    fn diag(a: f64, b: f64, c: f64, d: f64) -> [f64; 10] {
        [a, 0.0, 0.0, 0.0, b, 0.0, 0.0, c, 0.0, d]
    }

    fn harmonic_metrics() -> Vec<Analytic> {
        // diag(−1, 1, e^{f}, e^{−f}) with f = 0.3 sin x: static, harmonic, not flat
        let static_m = Analytic {
            g: Box::new(|x| { let f = 0.3 * x.sin(); diag(-1.0, 1.0, f.exp(), (-f).exp()) }),
            dx: Box::new(|x| { let f = 0.3 * x.sin(); let fp = 0.3 * x.cos(); diag(0.0, 0.0, fp * f.exp(), -fp * (-f).exp()) }),
            dt: Box::new(|_| [0.0; 10]),
            dtt: Box::new(|_| [0.0; 10]),
        };
        // f = 0.2 cos(x − 0.5 t): a travelling harmonic profile
        let c = 0.5;
        let moving = Analytic {
            g: Box::new(|x| { let f = 0.2 * x.cos(); diag(-1.0, 1.0, f.exp(), (-f).exp()) }),
            dx: Box::new(|x| { let f = 0.2 * x.cos(); let fp = -0.2 * x.sin(); diag(0.0, 0.0, fp * f.exp(), -fp * (-f).exp()) }),
            dt: Box::new(move |x| { let f = 0.2 * x.cos(); let ft = 0.2 * c * x.sin(); diag(0.0, 0.0, ft * f.exp(), -ft * (-f).exp()) }),
            dtt: Box::new(move |x| {
                let f = 0.2 * x.cos();
                let ft = 0.2 * c * x.sin();
                let ftt = -0.2 * c * c * x.cos();
                diag(0.0, 0.0, (ftt + ft * ft) * f.exp(), (-ftt + ft * ft) * (-f).exp())
            }),
        };
        // gauge wave: η + A sin(x − t) diag(1, −1, 0, 0), flat
        let a = 0.1;
        let gauge = Analytic {
            g: Box::new(move |x| diag(-1.0 + a * x.sin(), 1.0 - a * x.sin(), 1.0, 1.0)),
            dx: Box::new(move |x| diag(a * x.cos(), -a * x.cos(), 0.0, 0.0)),
            dt: Box::new(move |x| diag(-a * x.cos(), a * x.cos(), 0.0, 0.0)),
            dtt: Box::new(move |x| diag(-a * x.sin(), a * x.sin(), 0.0, 0.0)),
        };
        vec![static_m, moving, gauge]
    }

    /// max |H − (g^{μν}∂_μ∂_ν g + 2R)| with every derivative beyond the first by finite differences.
    fn h_identity_error(m: &Analytic, n: usize) -> f64 {
        let order = FdOrder::Fourth;
        let grid = GridSpec::line(2.0 * PI, n, Boundary::Periodic).unwrap();
        let xs: Vec<f64> = (0..n).map(|p| grid.coords(p)[0]).collect();
        let field = |f: &dyn Fn(f64) -> [f64; 10]| -> Vec<f64> { xs.iter().flat_map(|&x| f(x)).collect() };
        let metric = SpacetimeMetric { grid: grid.clone(), data: field(&*m.g) };
        let td = TimeDerivatives { dtg: field(&*m.dt), dttg: field(&*m.dtt) };
        let ricci = ricci_oracle(&metric, &td, order).unwrap();
        let gx = grid.diff(&metric.data, 10, 0, order);
        let gxx = grid.diff(&gx, 10, 0, order);
        let gtx = grid.diff(&td.dtg, 10, 0, order);
        let mut worst: f64 = 0.0;
        for p in 0..n {
            let g = metric.at(p);
            let ginv = inverse(&g).unwrap();
            let mut dg = [[0.0; 10]; 4];
            dg[0] = (m.dt)(xs[p]);
            dg[1] = (m.dx)(xs[p]);
            let h = quadratic_terms_h(&ginv, &dg);
            for k in 0..10 {
                let box_g = ginv[(0, 0)] * td.dttg[p * 10 + k] + 2.0 * ginv[(0, 1)] * gtx[p * 10 + k] + ginv[(1, 1)] * gxx[p * 10 + k];
                worst = worst.max((h[k] - box_g - 2.0 * ricci[p * 10 + k]).abs());
            }
        }
        worst
    }

    #[test]
    fn h_agrees_with_ricci_oracle_at_scheme_order() {
        for (i, m) in harmonic_metrics().iter().enumerate() {
            let errs: Vec<f64> = [16, 32, 64].iter().map(|&n| h_identity_error(m, n)).collect();
            if errs[2] < 1e-12 {
                continue; // exact to rounding (e.g. no second derivatives contribute)
            }
            let order = crate::stats::fit_order(&[4.0, 2.0, 1.0], &errs);
            assert!((order - 4.0).abs() < 0.4, "metric {i}: order {order}, errors {errs:?}");
        }
    }

    #[test]
    fn harmonic_residual_of_exact_gauge_wave_vanishes() {
        let a = 0.1;
        let x: f64 = 0.7;
        let mut s = [0.0; NCOMP];
        s[0] = a * x.sin();
        s[4] = -a * x.sin();
        s[H0] = -a * x.cos();
        s[H0 + 4] = a * x.cos();
        s[HX] = a * x.cos();
        s[HX + 4] = -a * x.cos();
        let f = harmonic_residual(&s).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-15), "{f:?}");
    }
}
