//! Lorentzian metric algebra: inverses, Christoffel symbols, a finite-difference
//! Ricci tensor and index operations.
//!
//! Pointwise routines take the metric as a [`Matrix4`] and first derivatives as
//! `dg[c]` = packed `∂_c g`, with `c = 0` the time derivative.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use rayon::prelude::*;

use crate::error::{Error, GridError, Result};
use crate::grid::{FdOrder, GridSpec};
use crate::tensor::{mat_to_sym4, sym4, sym4_to_mat, SYM4_PAIRS};

pub const DET_TOLERANCE: f64 = 1e-14;

/// Christoffel symbols of the second kind at a point, `[μ][sym4(β, γ)]`.
pub type ChristoffelPoint = [[f64; 10]; 4];

pub fn inverse(g: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let det = g.determinant();
    if !(det.abs() > DET_TOLERANCE) {
        return Err(Error::SingularMetric { point: 0, det });
    }
    let inv = g.try_inverse().ok_or(Error::SingularMetric { point: 0, det })?;
    Ok((inv + inv.transpose()) * 0.5)
}

/// Eigenvalues sorted ascending; the metric is Lorentzian iff exactly the first is negative.
pub fn signature_check(g: &Matrix4<f64>) -> Result<()> {
    let mut ev: Vec<f64> = SymmetricEigen::new(*g).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    if ev[0] < 0.0 && ev[1] > 0.0 {
        Ok(())
    } else {
        Err(Error::NotLorentzian { point: 0, eigenvalues: [ev[0], ev[1], ev[2], ev[3]] })
    }
}

/// `Γ_{εβγ} = ½(∂_β g_{εγ} + ∂_γ g_{εβ} − ∂_ε g_{βγ})`, packed `[ε][sym4(β, γ)]`.
pub fn christoffel_first_kind(dg: &[[f64; 10]; 4]) -> [[f64; 10]; 4] {
    let mut out = [[0.0; 10]; 4];
    for (e, row) in out.iter_mut().enumerate() {
        for (k, &(b, c)) in SYM4_PAIRS.iter().enumerate() {
            row[k] = 0.5 * (dg[b][sym4(e, c)] + dg[c][sym4(e, b)] - dg[e][k]);
        }
    }
    out
}

pub fn christoffel_point(ginv: &Matrix4<f64>, dg: &[[f64; 10]; 4]) -> ChristoffelPoint {
    let low = christoffel_first_kind(dg);
    let mut out = [[0.0; 10]; 4];
    for (m, row) in out.iter_mut().enumerate() {
        for k in 0..10 {
            row[k] = (0..4).map(|e| ginv[(m, e)] * low[e][k]).sum();
        }
    }
    out
}

/// `F^μ = g^{βγ} Γ^μ_{βγ}`; zero in harmonic coordinates.
pub fn contracted_christoffel(ginv: &Matrix4<f64>, gamma: &ChristoffelPoint) -> [f64; 4] {
    let mut f = [0.0; 4];
    for (m, fm) in f.iter_mut().enumerate() {
        for b in 0..4 {
            for c in 0..4 {
                *fm += ginv[(b, c)] * gamma[m][sym4(b, c)];
            }
        }
    }
    f
}

pub fn lower(g: &Matrix4<f64>, u: &Vector4<f64>) -> Vector4<f64> {
    g * u
}

pub fn raise(ginv: &Matrix4<f64>, xi: &Vector4<f64>) -> Vector4<f64> {
    ginv * xi
}

/// A symmetric metric field with 10 packed components per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimeMetric {
    pub grid: GridSpec,
    pub data: Vec<f64>,
}

impl SpacetimeMetric {
    pub fn new(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        let expected = grid.len() * 10;
        if data.len() != expected {
            return Err(GridError::LengthMismatch { expected, got: data.len() }.into());
        }
        Ok(SpacetimeMetric { grid, data })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> [f64; 10]) -> Self {
        let data = (0..grid.len()).flat_map(|i| f(grid.coords(i))).collect();
        SpacetimeMetric { grid, data }
    }

    pub fn minkowski(grid: GridSpec) -> Self {
        Self::from_fn(grid, |_| crate::tensor::MINKOWSKI)
    }

    pub fn at(&self, p: usize) -> Matrix4<f64> {
        sym4_to_mat(&self.data[p * 10..(p + 1) * 10])
    }

    /// Signature check at every `stride`-th point.
    pub fn check_signature(&self, stride: usize) -> Result<()> {
        (0..self.grid.len())
            .step_by(stride.max(1))
            .try_for_each(|p| signature_check(&self.at(p)).map_err(|e| e.at(p)))
    }
}

/// Pointwise inverse, packed 10 components per point.
pub fn invert_metric(m: &SpacetimeMetric) -> Result<Vec<f64>> {
    let rows: Result<Vec<[f64; 10]>> = (0..m.grid.len())
        .into_par_iter()
        .map(|p| inverse(&m.at(p)).map(|inv| mat_to_sym4(&inv)).map_err(|e| e.at(p)))
        .collect();
    Ok(rows?.concat())
}

/// Spatial derivatives of a flat field along each axis (zero on inactive axes).
pub fn spatial_gradient(grid: &GridSpec, data: &[f64], ncomp: usize, order: FdOrder) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|a| grid.diff(data, ncomp, a, order))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    pub grid: GridSpec,
    /// 40 values per point: `[μ][sym4(β, γ)]`.
    pub data: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, p: usize, mu: usize, b: usize, c: usize) -> f64 {
        self.data[p * 40 + mu * 10 + sym4(b, c)]
    }

    pub fn at(&self, p: usize) -> ChristoffelPoint {
        let mut out = [[0.0; 10]; 4];
        for (m, row) in out.iter_mut().enumerate() {
            row.copy_from_slice(&self.data[p * 40 + m * 10..p * 40 + (m + 1) * 10]);
        }
        out
    }
}

fn gather_dg(dtg: &[f64], grad: &[Vec<f64>; 3], p: usize) -> [[f64; 10]; 4] {
    let mut dg = [[0.0; 10]; 4];
    dg[0].copy_from_slice(&dtg[p * 10..(p + 1) * 10]);
    for a in 0..3 {
        dg[a + 1].copy_from_slice(&grad[a][p * 10..(p + 1) * 10]);
    }
    dg
}

/// Christoffel symbols with spatial derivatives by finite differences and
/// `∂_t g` supplied as a field.
pub fn christoffel(m: &SpacetimeMetric, dtg: &[f64], order: FdOrder) -> Result<Christoffel> {
    m.grid.supports(order)?;
    if dtg.len() != m.data.len() {
        return Err(GridError::LengthMismatch { expected: m.data.len(), got: dtg.len() }.into());
    }
    let grad = spatial_gradient(&m.grid, &m.data, 10, order);
    let rows: Result<Vec<[f64; 40]>> = (0..m.grid.len())
        .into_par_iter()
        .map(|p| {
            let ginv = inverse(&m.at(p)).map_err(|e| e.at(p))?;
            let gam = christoffel_point(&ginv, &gather_dg(dtg, &grad, p));
            let mut flat = [0.0; 40];
            for mu in 0..4 {
                flat[mu * 10..(mu + 1) * 10].copy_from_slice(&gam[mu]);
            }
            Ok(flat)
        })
        .collect();
    Ok(Christoffel { grid: m.grid.clone(), data: rows?.concat() })
}

/// First and second time derivatives of the metric on the slice.
#[derive(Debug, Clone)]
pub struct TimeDerivatives {
    pub dtg: Vec<f64>,
    pub dttg: Vec<f64>,
}

/// Ricci tensor from finite-difference derivatives of the Christoffel symbols.
/// Only interior points (away from one-sided stencils) are accurate to the full order.
pub fn ricci_oracle(m: &SpacetimeMetric, td: &TimeDerivatives, order: FdOrder) -> Result<Vec<f64>> {
    let grid = &m.grid;
    let n = grid.len();
    let gam = christoffel(m, &td.dtg, order)?;
    let grad_g = spatial_gradient(grid, &m.data, 10, order);
    let grad_dtg = spatial_gradient(grid, &td.dtg, 10, order);

    // ∂_t Γ^μ_{βγ} = ∂_t g^{με} Γ_{εβγ} + g^{με} ∂_t Γ_{εβγ}
    let dt_gamma: Result<Vec<[f64; 40]>> = (0..n)
        .into_par_iter()
        .map(|p| {
            let g = m.at(p);
            let ginv = inverse(&g).map_err(|e| e.at(p))?;
            let dg = gather_dg(&td.dtg, &grad_g, p);
            let low = christoffel_first_kind(&dg);
            let mut ddg = [[0.0; 10]; 4];
            ddg[0].copy_from_slice(&td.dttg[p * 10..(p + 1) * 10]);
            for a in 0..3 {
                ddg[a + 1].copy_from_slice(&grad_dtg[a][p * 10..(p + 1) * 10]);
            }
            let dlow = christoffel_first_kind(&ddg);
            let dginv = -ginv * sym4_to_mat(&td.dtg[p * 10..(p + 1) * 10]) * ginv;
            let mut flat = [0.0; 40];
            for mu in 0..4 {
                for k in 0..10 {
                    flat[mu * 10 + k] = (0..4).map(|e| dginv[(mu, e)] * low[e][k] + ginv[(mu, e)] * dlow[e][k]).sum();
                }
            }
            Ok(flat)
        })
        .collect();
    let dt_gamma = dt_gamma?.concat();
    let grad_gamma = spatial_gradient(grid, &gam.data, 40, order);

    let out: Vec<[f64; 10]> = (0..n)
        .into_par_iter()
        .map(|p| {
            let d = |c: usize, mu: usize, b: usize, e: usize| -> f64 {
                let k = p * 40 + mu * 10 + sym4(b, e);
                if c == 0 {
                    dt_gamma[k]
                } else {
                    grad_gamma[c - 1][k]
                }
            };
            let gm = gam.at(p);
            let gg = |mu: usize, b: usize, c: usize| gm[mu][sym4(b, c)];
            let mut r = [0.0; 10];
            for (k, &(b, c)) in SYM4_PAIRS.iter().enumerate() {
                let mut s = 0.0;
                for mu in 0..4 {
                    s += d(mu, mu, b, c) - d(c, mu, b, mu);
                    for l in 0..4 {
                        s += gg(mu, mu, l) * gg(l, b, c) - gg(mu, c, l) * gg(l, b, mu);
                    }
                }
                r[k] = s;
            }
            r
        })
        .collect();
    Ok(out.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use proptest::prelude::*;

    fn random_metric(seed: &[f64; 10]) -> Matrix4<f64> {
        let mut s = crate::tensor::MINKOWSKI;
        for k in 0..10 {
            s[k] += 0.01 * seed[k];
        }
        sym4_to_mat(&s)
    }

    #[test]
    fn minkowski_is_self_inverse() {
        let eta = sym4_to_mat(&crate::tensor::MINKOWSKI);
        assert_eq!(inverse(&eta).unwrap(), eta);
    }

    #[test]
    fn diagonal_inverse() {
        let g = Matrix4::from_diagonal(&Vector4::new(-1.0, 4.0, 1.0, 1.0));
        let inv = inverse(&g).unwrap();
        assert!((inv[(1, 1)] - 0.25).abs() < 1e-15);
        assert!((inv[(0, 0)] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_metric_rejected() {
        let g = Matrix4::from_diagonal(&Vector4::new(-1.0, 0.0, 1.0, 1.0));
        assert!(matches!(inverse(&g), Err(Error::SingularMetric { .. })));
        let grid = GridSpec::line(1.0, 4, Boundary::Periodic).unwrap();
        let mut m = SpacetimeMetric::minkowski(grid);
        m.data[2 * 10 + 4] = 0.0;
        assert!(matches!(invert_metric(&m), Err(Error::SingularMetric { point: 2, .. })));
    }

    #[test]
    fn euclidean_metric_fails_signature() {
        assert!(signature_check(&Matrix4::identity()).is_err());
        assert!(signature_check(&sym4_to_mat(&crate::tensor::MINKOWSKI)).is_ok());
    }

    #[test]
    fn index_examples() {
        let eta = sym4_to_mat(&crate::tensor::MINKOWSKI);
        assert_eq!(lower(&eta, &Vector4::new(1.0, 0.0, 0.0, 0.0)), Vector4::new(-1.0, 0.0, 0.0, 0.0));
        assert_eq!(lower(&eta, &Vector4::new(2.0, 1.0, 0.0, 0.0)), Vector4::new(-2.0, 1.0, 0.0, 0.0));
    }

    proptest! {
        #[test]
        fn inverse_product_is_identity(seed in prop::array::uniform10(-1.0f64..1.0)) {
            let g = random_metric(&seed);
            let inv = inverse(&g).unwrap();
            prop_assert!((inv * g - Matrix4::identity()).abs().max() < 1e-12);
            prop_assert_eq!(inv, inv.transpose());
            prop_assert!(signature_check(&g).is_ok());
        }

        #[test]
        fn raise_lower_roundtrip(seed in prop::array::uniform10(-1.0f64..1.0), u in prop::array::uniform4(-3.0f64..3.0)) {
            let g = random_metric(&seed);
            let u = Vector4::from(u);
            let back = raise(&inverse(&g).unwrap(), &lower(&g, &u));
            prop_assert!((back - u).abs().max() < 1e-12);
        }

        #[test]
        fn christoffel_is_symmetric(seed in prop::array::uniform10(-1.0f64..1.0), d in prop::collection::vec(-1.0f64..1.0, 40)) {
            let g = random_metric(&seed);
            let mut dg = [[0.0; 10]; 4];
            for c in 0..4 { for k in 0..10 { dg[c][k] = d[c * 10 + k]; } }
            let gam = christoffel_point(&inverse(&g).unwrap(), &dg);
            // packed storage makes Γ^μ_{βγ} and Γ^μ_{γβ} the same number
            for mu in 0..4 { for b in 0..4 { for c in 0..4 {
                prop_assert_eq!(gam[mu][sym4(b, c)], gam[mu][sym4(c, b)]);
            }}}
        }
    }

    fn scale_metric(n: usize, order: FdOrder) -> f64 {
        // g = diag(-1, a², 1, 1), a = 1 + 0.1 sin x, Γ¹₁₁ = a'/a
        let grid = GridSpec::line(2.0 * std::f64::consts::PI, n, Boundary::Periodic).unwrap();
        let a = |x: f64| 1.0 + 0.1 * x.sin();
        let m = SpacetimeMetric::from_fn(grid.clone(), |x| {
            let mut s = crate::tensor::MINKOWSKI;
            s[4] = a(x[0]).powi(2);
            s
        });
        let gam = christoffel(&m, &vec![0.0; m.data.len()], order).unwrap();
        (0..grid.len())
            .map(|p| {
                let x = grid.coords(p)[0];
                (gam.get(p, 1, 1, 1) - 0.1 * x.cos() / a(x)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn christoffel_converges_at_stencil_order() {
        for (order, expect) in [(FdOrder::Second, 2.0), (FdOrder::Fourth, 4.0)] {
            let e: Vec<f64> = [16, 32, 64].iter().map(|&n| scale_metric(n, order)).collect();
            let p = crate::stats::fit_order(&[1.0, 0.5, 0.25], &e);
            assert!((p - expect).abs() < 0.1 * expect, "{order:?}: {p}");
        }
    }

    #[test]
    fn constant_metric_has_no_connection() {
        let grid = GridSpec::new([1.0, 1.0, 1.0], [5, 5, 5], Boundary::Periodic).unwrap();
        let m = SpacetimeMetric::from_fn(grid, |_| {
            let mut s = crate::tensor::MINKOWSKI;
            s[1] = 0.2;
            s[4] = 1.5;
            s
        });
        let gam = christoffel(&m, &vec![0.0; m.data.len()], FdOrder::Fourth).unwrap();
        assert!(gam.data.iter().all(|&v| v.abs() < 1e-14));
        let r = ricci_oracle(&m, &TimeDerivatives { dtg: vec![0.0; m.data.len()], dttg: vec![0.0; m.data.len()] }, FdOrder::Fourth).unwrap();
        assert!(r.iter().all(|&v| v.abs() < 1e-12));
    }

    /// Weak gauge-wave-like metric η + A sin(k(x − t)) T on the t = 0 slice.
    fn weak_wave_ricci(n: usize, amp: f64) -> f64 {
        let k = 1.0;
        // pure-gauge and transverse-traceless parts only
        let t = [0.3, 0.0, -0.1, 0.0, -0.3, 0.1, 0.0, 0.4, 0.2, -0.4];
        let grid = GridSpec::line(2.0 * std::f64::consts::PI, n, Boundary::Periodic).unwrap();
        let m = SpacetimeMetric::from_fn(grid.clone(), |x| {
            let mut s = crate::tensor::MINKOWSKI;
            for i in 0..10 {
                s[i] += amp * (k * x[0]).sin() * t[i];
            }
            s
        });
        let mut dtg = vec![0.0; m.data.len()];
        let mut dttg = vec![0.0; m.data.len()];
        for p in 0..grid.len() {
            let x = grid.coords(p)[0];
            for i in 0..10 {
                dtg[p * 10 + i] = -amp * k * (k * x).cos() * t[i];
                dttg[p * 10 + i] = -amp * k * k * (k * x).sin() * t[i];
            }
        }
        let r = ricci_oracle(&m, &TimeDerivatives { dtg, dttg }, FdOrder::Fourth).unwrap();
        r.iter().fold(0.0, |a: f64, &v| a.max(v.abs()))
    }

    #[test]
    fn linearized_vacuum_wave_is_ricci_flat_to_second_order() {
        let r1 = weak_wave_ricci(64, 1e-3);
        let r2 = weak_wave_ricci(64, 2e-3);
        assert!(r1 < 1e-5, "{r1}");
        // quadratic scaling in the amplitude
        assert!((r2 / r1 - 4.0).abs() < 0.2, "{}", r2 / r1);
    }
}
