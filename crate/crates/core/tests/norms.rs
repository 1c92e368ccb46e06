use einstein_euler::grid::{Boundary, GridSpec};
use einstein_euler::wsobolev::inequalities::*;
use einstein_euler::wsobolev::*;
use proptest::prelude::*;

/// Adaptive Simpson on `[a, b]`.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let d = left + right - whole;
        if depth == 0 || d.abs() <= 15.0 * tol {
            return left + right + d / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1) + rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

#[test]
fn weighted_l2_of_gaussian_matches_quadrature() {
    let n = 20001;
    let g = GridSpec::line(16.0, n, Boundary::FrozenExterior).unwrap();
    let f = |x: f64| (-x * x / 2.0).exp();
    let u: Vec<f64> = (0..n).map(|p| f(g.coords(p)[0])).collect();
    let got = norm_l2_delta(&g, &u, 1, 1.0).unwrap();
    let w = |x: f64| (1.0 + x.abs()).powi(2) * f(x) * f(x);
    let oracle = (adaptive_simpson(&w, -8.0, 0.0, 1e-13) + adaptive_simpson(&w, 0.0, 8.0, 1e-13)).sqrt();
    assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
}

#[test]
fn weighted_l2_of_zero_is_zero() {
    let g = GridSpec::new([2.0, 2.0, 2.0], [5, 5, 5], Boundary::FrozenExterior).unwrap();
    assert_eq!(norm_l2_delta(&g, &vec![0.0; g.len()], 1, 0.5).unwrap(), 0.0);
}

#[test]
fn hs_norm_of_zero_is_zero() {
    let z = FnField { dim: 1, f: |_: [f64; 3]| 0.0 };
    assert_eq!(norm_hs_delta(&z, &NormSpec::new(1.5, 0.5).unwrap(), &DyadicFamily::default()).unwrap(), 0.0);
}

#[test]
fn random_members_respect_monotonicity() {
    assert_eq!(monotonicity_violations(&random_members(100, 7)).unwrap(), 0);
}

#[test]
fn weighted_l2_band_is_two_sided() {
    let (lo, hi) = l2_equivalence_band(&family_members(TestFamily::Mixed), 0.5).unwrap();
    assert!(lo > 0.25 && hi < 4.0, "[{lo}, {hi}]");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn norm_scales_linearly(a in 0.1f64..5.0, c in -1.0f64..1.0, s in 0.0f64..2.5, delta in -1.0f64..1.5) {
        let fam = DyadicFamily { resolution: 256, ..Default::default() };
        let spec = NormSpec::new(s, delta).unwrap();
        let u = FnField { dim: 1, f: move |x: [f64; 3]| (-(x[0] - c).powi(2)).exp() };
        let au = FnField { dim: 1, f: move |x: [f64; 3]| a * (-(x[0] - c).powi(2)).exp() };
        let n1 = norm_hs_delta(&u, &spec, &fam).unwrap();
        let n2 = norm_hs_delta(&au, &spec, &fam).unwrap();
        prop_assert!((n2 - a * n1).abs() <= 1e-12 * n2.max(1.0));
    }

    #[test]
    fn norm_grows_with_regularity(s1 in 0.0f64..1.5, ds in 0.0f64..1.5, c in -1.0f64..1.0, sig in 0.3f64..1.2) {
        let fam = DyadicFamily { resolution: 256, ..Default::default() };
        let u = FnField { dim: 1, f: move |x: [f64; 3]| (-(x[0] - c).powi(2) / (2.0 * sig * sig)).exp() };
        let lo = norm_hs_delta(&u, &NormSpec::new(s1, 0.0).unwrap(), &fam).unwrap();
        let hi = norm_hs_delta(&u, &NormSpec::new(s1 + ds, 0.0).unwrap(), &fam).unwrap();
        prop_assert!(lo <= hi * (1.0 + 1e-12));
    }
}
