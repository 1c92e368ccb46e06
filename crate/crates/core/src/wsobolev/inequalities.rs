//! Empirical checks of the inequalities between weighted norms on named
//! families of test functions. Constants that are not known in closed form are
//! measured and compared against pinned regression baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{norm_hs_delta, DyadicFamily, FnField, NormSpec, ScalarField};
use crate::error::{Error, Result};
use crate::fluid::EquationOfState;
use crate::smooth::bump;

/// Boxed 1D test function.
pub type TestFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFamily {
    Gaussians,
    Bumps,
    Mixed,
}

impl std::str::FromStr for TestFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussians" => Ok(TestFamily::Gaussians),
            "bumps" => Ok(TestFamily::Bumps),
            "mixed" => Ok(TestFamily::Mixed),
            _ => Err(Error::InvalidParameter(format!("unknown test family '{s}'"))),
        }
    }
}

fn gaussian(a: f64, c: f64, sigma: f64) -> TestFn {
    Box::new(move |x| a * (-(x - c) * (x - c) / (2.0 * sigma * sigma)).exp())
}

fn bump_fn(a: f64, c: f64, r: f64) -> TestFn {
    Box::new(move |x| a * bump((x - c) / r))
}

/// Members of a named family.
pub fn family_members(fam: TestFamily) -> Vec<TestFn> {
    let mut out = vec![];
    if fam != TestFamily::Bumps {
        for &(a, c, s) in &[(1.0, 0.0, 0.3), (1.0, 0.0, 0.6), (0.5, 0.5, 1.0), (2.0, -0.3, 1.5), (1.0, 1.0, 0.8)] {
            out.push(gaussian(a, c, s));
        }
    }
    if fam != TestFamily::Gaussians {
        for &(a, c, r) in &[(1.0, 0.0, 1.0), (3.0, 0.2, 1.5), (1.0, -0.5, 0.7), (2.0, 0.0, 2.5)] {
            out.push(bump_fn(a, c, r));
        }
    }
    out
}

/// Random sums of three Gaussians with centres in `[−1, 1]`.
pub fn random_members(n: usize, seed: u64) -> Vec<TestFn> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let p: Vec<(f64, f64, f64)> = (0..3).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.25..1.2))).collect();
            Box::new(move |x: f64| p.iter().map(|&(a, c, s)| a * (-(x - c) * (x - c) / (2.0 * s * s)).exp()).sum()) as TestFn
        })
        .collect()
}

fn field(f: &TestFn) -> FnField<impl Fn([f64; 3]) -> f64 + Sync + '_> {
    FnField { dim: 1, f: move |x: [f64; 3]| f(x[0]) }
}

fn derivative(f: &TestFn) -> FnField<impl Fn([f64; 3]) -> f64 + Sync + '_> {
    let h = 1e-3;
    FnField { dim: 1, f: move |x: [f64; 3]| (8.0 * (f(x[0] + h) - f(x[0] - h)) - (f(x[0] + 2.0 * h) - f(x[0] - 2.0 * h))) / (12.0 * h) }
}

fn norm(u: &dyn ScalarField, s: f64, delta: f64, fam: &DyadicFamily) -> Result<f64> {
    norm_hs_delta(u, &NormSpec::new(s, delta)?, fam)
}

/// Weighted `L²` norm of a 1D function by composite Simpson quadrature on `[−L, L]`.
pub fn l2_delta_quadrature(f: &dyn Fn(f64) -> f64, delta: f64, half_width: f64, n: usize) -> f64 {
    let n = n + n % 4;
    let g = |x: f64| (1.0 + x.abs()).powf(2.0 * delta) * f(x).powi(2);
    // split at the kink of |x| so each half is smooth
    let half = n / 2;
    let mut s = 0.0;
    for side in [-1.0, 1.0] {
        let hh = half_width / half as f64;
        let mut acc = g(0.0) + g(side * half_width);
        for i in 1..half {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(side * i as f64 * hh);
        }
        s += acc * hh / 3.0;
    }
    s.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityResult {
    pub name: String,
    /// Worst ratio LHS/RHS over the family (or the band `[lo, hi]` for equivalences).
    pub worst: f64,
    pub best: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub family: TestFamily,
    pub results: Vec<InequalityResult>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn get(&self, name: &str) -> Option<&InequalityResult> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("inequality,best,worst,bound,pass\n");
        for r in &self.results {
            s.push_str(&format!("{},{:.6e},{:.6e},{:.6e},{}\n", r.name, r.best, r.worst, r.bound, r.pass));
        }
        s
    }
}

/// Slack allowed on inequalities whose constant is exactly 1.
pub const UNIT_SLACK: f64 = 0.05;
/// Two-sided constant of the `H_{0,δ}` / `L²_δ` equivalence for `|δ| ≤ 1`.
pub const L2_EQUIVALENCE_C: f64 = 4.0;
/// Regression baselines for measured constants, pinned at twice the values
/// measured on the mixed family (0.134, 0.538, 0.877, 1.299, 8.73).
pub const ALGEBRA_BASELINE: f64 = 0.27;
pub const EMBEDDING_BASELINE: f64 = 1.1;
pub const MOSER_BASELINE: f64 = 1.8;
pub const CUTOFF_POWER_BASELINE: f64 = 2.6;
pub const COMPOSITE_BASELINE: f64 = 17.5;

fn result(name: &str, ratios: &[f64], bound: f64) -> InequalityResult {
    let worst = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    InequalityResult { name: name.into(), worst, best, bound, pass: worst.is_finite() && worst <= bound }
}

fn family_engine() -> DyadicFamily {
    DyadicFamily { resolution: 512, ..Default::default() }
}

/// Ratio band of `‖u‖_{H_{0,δ}} / ‖u‖_{L²_δ}` (quadrature) for one `δ`.
pub fn l2_equivalence_band(members: &[TestFn], delta: f64) -> Result<(f64, f64)> {
    let fam = family_engine();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for f in members {
        let r = norm(&field(f), 0.0, delta, &fam)? / l2_delta_quadrature(f.as_ref(), delta, 16.0, 32768);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// Counts violations of `‖u‖_{s₁,δ₁} ≤ ‖u‖_{s₂,δ₂}` for `s₁ ≤ s₂, δ₁ ≤ δ₂`.
pub fn monotonicity_violations(members: &[TestFn]) -> Result<usize> {
    let fam = family_engine();
    let pairs = [((0.5, 0.0), (1.0, 0.0)), ((1.0, -0.5), (1.0, 0.5)), ((1.5, 0.0), (2.5, 1.0)), ((0.0, 0.0), (3.0, 0.0))];
    let mut bad = 0;
    for f in members {
        let u = field(f);
        for &((s1, d1), (s2, d2)) in &pairs {
            if norm(&u, s1, d1, &fam)? > norm(&u, s2, d2, &fam)? * (1.0 + 1e-12) {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

/// `‖u‖_{H_{s',δ}} / (‖u‖^{s'/s}_{H_{s,δ}} ‖u‖^{1−s'/s}_{H_{0,δ}})` for `s = 2, s' = 1`.
pub fn interpolation_ratios(members: &[TestFn], delta: f64) -> Result<Vec<f64>> {
    let fam = family_engine();
    members
        .iter()
        .map(|f| {
            let u = field(f);
            Ok(norm(&u, 1.0, delta, &fam)? / (norm(&u, 2.0, delta, &fam)?.sqrt() * norm(&u, 0.0, delta, &fam)?.sqrt()))
        })
        .collect()
}

pub fn check_inequality_suite(family: TestFamily, eos: &EquationOfState) -> Result<SuiteReport> {
    let members = family_members(family);
    let fam = family_engine();
    let (s, delta) = (2.0, 0.0);
    let mut results = vec![];

    let mut r = vec![];
    for f in &members {
        r.push(norm(&derivative(f), s - 1.0, delta + 1.0, &fam)? / norm(&field(f), s, delta, &fam)?);
    }
    results.push(result("derivative", &r, 1.0 + UNIT_SLACK));

    results.push(result("interpolation", &interpolation_ratios(&members, delta)?, 1.0 + UNIT_SLACK));

    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for d in [-0.5, 0.0, 0.5, 1.0] {
        let (a, b) = l2_equivalence_band(&members, d)?;
        lo = lo.min(a);
        hi = hi.max(b);
    }
    results.push(InequalityResult { name: "l2-equivalence".into(), worst: hi, best: lo, bound: L2_EQUIVALENCE_C, pass: hi <= L2_EQUIVALENCE_C && lo >= 1.0 / L2_EQUIVALENCE_C });

    let v = monotonicity_violations(&members)? as f64;
    results.push(InequalityResult { name: "monotonicity".into(), worst: v, best: v, bound: 0.0, pass: v == 0.0 });

    let mut r = vec![];
    for f in &members {
        for g in &members {
            let prod = FnField { dim: 1, f: |x: [f64; 3]| f(x[0]) * g(x[0]) };
            r.push(norm(&prod, s, delta, &fam)? / (norm(&field(f), s, delta, &fam)? * norm(&field(g), s, delta, &fam)?));
        }
    }
    results.push(result("algebra", &r, ALGEBRA_BASELINE));

    // sup (1+|x|)^{δ+d/2} |u| against ‖u‖_{H_{1,δ}}
    let mut r = vec![];
    for f in &members {
        let sup = (-4000..=4000).map(|i| i as f64 * 4e-3).map(|x| (1.0 + x.abs()).powf(delta + 0.5) * f(x).abs()).fold(0.0, f64::max);
        r.push(sup / norm(&field(f), 1.0, delta, &fam)?);
    }
    results.push(result("embedding", &r, EMBEDDING_BASELINE));

    // F(u) = u cos u, N = 2
    let mut r = vec![];
    for f in &members {
        let fu = FnField { dim: 1, f: |x: [f64; 3]| f(x[0]) * f(x[0]).cos() };
        let sup = (-4000..=4000).map(|i| f(i as f64 * 4e-3).abs()).fold(0.0, f64::max);
        r.push(norm(&fu, s, delta, &fam)? / ((1.0 + sup * sup) * norm(&field(f), s, delta, &fam)?));
    }
    results.push(result("moser", &r, MOSER_BASELINE));

    let mut r = vec![];
    for f in &members {
        let u = field(f);
        let g2 = norm_hs_delta(&u, &NormSpec::new(s, delta)?.with_gamma(2.0)?, &fam)?;
        let g1 = norm(&u, s, delta, &fam)?;
        r.push((g2 / g1).max(g1 / g2));
    }
    results.push(result("cutoff-power", &r, CUTOFF_POWER_BASELINE));

    let mut r = vec![];
    for f in &members {
        let lhs = norm(&field(f), s + 1.0, delta, &fam)?;
        r.push(lhs / (norm(&field(f), s, delta, &fam)? + norm(&derivative(f), s, delta + 1.0, &fam)?));
    }
    results.push(result("composite", &r, COMPOSITE_BASELINE));

    let probe = fractional_power_probe(&ProbeParams::for_eos(eos))?;
    results.push(InequalityResult { name: "fractional-power-low".into(), worst: probe.low_spread, best: probe.low_spread, bound: PROBE_BAND, pass: probe.low_stable });
    results.push(InequalityResult { name: "fractional-power-high".into(), worst: probe.high_growth, best: probe.high_growth, bound: PROBE_BLOWUP, pass: probe.high_blows_up });

    Ok(SuiteReport { family, results })
}

/// Largest admissible max/min spread of the normalized ratios below the threshold.
pub const PROBE_BAND: f64 = 1.5;
/// Growth factor over the low band midpoint required above the threshold.
pub const PROBE_BLOWUP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub beta: f64,
    /// Zero of the base profile `u = (c² − x²) e^{−x²/(2σ²)}`.
    pub c: f64,
    pub sigma: f64,
    /// `η = 2^{−k} max|u|` for `k` in this range.
    pub eta_exponents: Vec<i32>,
    pub resolution: usize,
    pub delta: f64,
}

impl ProbeParams {
    /// β = 2/(γ−1) of the given equation of state.
    pub fn for_eos(eos: &EquationOfState) -> Self {
        ProbeParams { beta: eos.beta(), c: 0.15, sigma: 0.15, eta_exponents: (3..=10).collect(), resolution: 16384, delta: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub s_low: f64,
    pub s_high: f64,
    pub etas: Vec<f64>,
    /// `r(η)/r(η₀)` at `s = β + 0.4`.
    pub low: Vec<f64>,
    /// `r(η)/r(η₀)` at `s = β + 1.5`.
    pub high: Vec<f64>,
    pub low_spread: f64,
    /// Finest high ratio divided by the low band midpoint.
    pub high_growth: f64,
    pub low_stable: bool,
    pub high_blows_up: bool,
    /// Same measurement on the mollified `(1 − |x|)₊²` profile, informational.
    pub literal_low: Vec<f64>,
    pub literal_high: Vec<f64>,
}

/// Ratios `‖|u|^β_η‖_{H_{s,δ}} / ‖u‖_{H_{s,δ}}` with `|u|^β_η = (u² + η²)^{β/2} − η^β`
/// along `η → 0`, normalized by their value at the largest `η`.
pub fn fractional_power_probe(p: &ProbeParams) -> Result<ProbeReport> {
    if !(p.beta >= 1.0) || p.eta_exponents.is_empty() {
        return Err(Error::InvalidParameter(format!("probe needs beta >= 1 and at least one eta (beta = {})", p.beta)));
    }
    let fam = DyadicFamily { resolution: p.resolution, ..Default::default() };
    let (s_low, s_high) = (p.beta + 0.4, p.beta + 1.5);
    if s_high > super::S_MAX {
        return Err(Error::InvalidParameter(format!("probe regularity {s_high} exceeds {}", super::S_MAX)));
    }
    let (c, sig) = (p.c, p.sigma);
    let base = move |x: f64| (c * c - x * x) * (-x * x / (2.0 * sig * sig)).exp();
    let peak = c * c;
    let etas: Vec<f64> = p.eta_exponents.iter().map(|&k| peak * 2f64.powi(-k)).collect();
    let beta = p.beta;
    let series = |s: f64, literal: bool| -> Result<Vec<f64>> {
        let den = norm(&FnField { dim: 1, f: |x: [f64; 3]| base(x[0]) }, s, p.delta, &fam)?;
        let mut out = vec![];
        for &eta in &etas {
            let r = if literal {
                let f = FnField { dim: 1, f: |x: [f64; 3]| mollified_kink(x[0], eta).powf(beta) };
                let d = FnField { dim: 1, f: |x: [f64; 3]| mollified_kink(x[0], eta) };
                norm(&f, s, p.delta, &fam)? / norm(&d, s, p.delta, &fam)?
            } else {
                let f = FnField { dim: 1, f: |x: [f64; 3]| regularized_power(base(x[0]), eta, beta) };
                norm(&f, s, p.delta, &fam)? / den
            };
            out.push(r);
        }
        let r0 = out[0];
        Ok(out.iter().map(|r| r / r0).collect())
    };
    let low = series(s_low, false)?;
    let high = series(s_high, false)?;
    let lmin = low.iter().copied().fold(f64::INFINITY, f64::min);
    let lmax = low.iter().copied().fold(0.0, f64::max);
    let mid = 0.5 * (lmin + lmax);
    let high_growth = high.last().copied().unwrap_or(0.0) / mid;
    let literal_low = series(s_low, true)?;
    let literal_high = series(s_high, true)?;
    Ok(ProbeReport {
        s_low,
        s_high,
        etas,
        low_spread: lmax / lmin,
        high_growth,
        low_stable: lmax / lmin <= PROBE_BAND,
        high_blows_up: high_growth > PROBE_BLOWUP,
        low,
        high,
        literal_low,
        literal_high,
    })
}

/// `(u² + η²)^{β/2} − η^β`, exactly zero where `u = 0`.
pub fn regularized_power(u: f64, eta: f64, beta: f64) -> f64 {
    eta.powf(beta) * (0.5 * beta * (u * u / (eta * eta)).ln_1p()).exp_m1()
}

/// `(1 − |x|)₊²` with the kinks at `|x| = 1` and `x = 0` smoothed on scale `η`.
fn mollified_kink(x: f64, eta: f64) -> f64 {
    let ax = (x * x + eta * eta).sqrt() - eta;
    let t = 1.0 - ax;
    // softplus keeps the exterior decay exponential
    let tp = t.max(0.0) + eta * (-(t.abs()) / eta).exp().ln_1p();
    tp * tp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_closed_form() {
        // ∫_{−1}^{1} (1+|x|)² dx = 14/3
        let ind = |x: f64| if x.abs() <= 1.0 { 1.0 } else { 0.0 };
        let q = l2_delta_quadrature(&ind, 1.0, 1.0, 64);
        assert!((q * q - 14.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn measured_suite() {
        let e = EquationOfState::new(1.0, 5.0 / 3.0).unwrap();
        let r = check_inequality_suite(TestFamily::Mixed, &e).unwrap();
        assert!(r.all_pass(), "{}", r.to_csv());
        assert!(r.get("derivative").unwrap().worst <= 1.0);
        assert!(r.get("interpolation").unwrap().worst <= 1.0);
    }
}
