use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use einstein_euler::evolve::{self, check_cfl, energy_series, gronwall_check, GronwallFit, MonitorRecord, RunOutput, MONITOR_COLUMNS};
use einstein_euler::grid::{Boundary, GridSpec};
use einstein_euler::initial_data::{self, DensityReading};
use einstein_euler::io;
use einstein_euler::nalgebra::DMatrix;
use einstein_euler::reduction::{assemble_block_system, SystemState, NCOMP, V, W};
use einstein_euler::wsobolev::inequalities::{self, TestFamily};
use einstein_euler::wsobolev::{energy_x_norm, shell_terms, x_norm, DyadicFamily, EnergyWeights, GridField, NormSpec};
use serde::Serialize;

use crate::error::{numerical, CliError};
use crate::plot::line_chart;
use crate::scenario::{Recipe, Scenario};

/// Grids up to this many points also get a CSV dump of the final state.
const CSV_DUMP_LIMIT: usize = 4096;

pub struct Options {
    pub out: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub strict_window: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Extremes {
    pub min: f64,
    pub max: f64,
    pub first: f64,
    pub last: f64,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub verb: &'static str,
    pub seed: u64,
    pub threads: Option<usize>,
    pub mode: evolve::Mode,
    pub steps: usize,
    pub dt: f64,
    pub t_end: f64,
    pub window: (f64, f64),
    pub window_warning: Option<String>,
    pub monitors: BTreeMap<String, Extremes>,
    pub gronwall: GronwallFit,
    pub picard_ratios: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_reading: Option<DensityReadingReport>,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

/// Energy density under the reading in use, against the other one.
#[derive(Debug, Clone, Serialize)]
pub struct DensityReadingReport {
    pub reading: DensityReading,
    pub max_z: f64,
    pub max_z_other: f64,
    pub max_difference: f64,
}

fn density_reading_report(sc: &Scenario) -> Result<Option<DensityReadingReport>, CliError> {
    let Recipe::FluidBall(fb) = &sc.initial else { return Ok(None) };
    let other = match fb.reading {
        DensityReading::NormalProjection => DensityReading::Literal,
        DensityReading::Literal => DensityReading::NormalProjection,
    };
    let z = |r| {
        initial_data::fluid_ball(&sc.grid, &sc.eos(), &fb.params(), sc.evolution.order, r)
            .map(|(_, _, m)| m.z)
            .map_err(|e| CliError::invalid("initial", e))
    };
    let (a, b) = (z(fb.reading)?, z(other)?);
    let max = |v: &[f64]| v.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    let diff = a.iter().zip(&b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()));
    Ok(Some(DensityReadingReport { reading: fb.reading, max_z: max(&a), max_z_other: max(&b), max_difference: diff }))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(create(path)?, value).map_err(|e| CliError::Io(e.to_string()))
}

fn core_io(e: einstein_euler::Error) -> CliError {
    match e {
        einstein_euler::Error::Io(m) => CliError::Io(m),
        other => CliError::Io(other.to_string()),
    }
}

/// Applies the window policy; returns the warning text, if any.
pub fn window_policy(sc: &Scenario, strict: bool) -> Result<Option<String>, CliError> {
    let w = sc.window_warning();
    if let Some(msg) = &w {
        if strict {
            return Err(CliError::invalid("norm.s", msg));
        }
        eprintln!("warning: {msg}");
    }
    Ok(w)
}

/// Initial state and a run, with start-up failures reported as validation errors.
fn prepare(sc: &Scenario, base: &Path) -> Result<SystemState, CliError> {
    let s0 = sc.initial_state(base)?;
    let cfg = sc.config();
    let (_, dt) = cfg.steps();
    check_cfl(&s0, &sc.eos(), dt, cfg.cfl).map_err(|e| CliError::invalid("evolution.dt", e))?;
    EnergyWeights::from_state(&s0, &sc.eos()).map_err(|e| CliError::invalid("initial", e))?;
    Ok(s0)
}

fn extremes(records: &[MonitorRecord]) -> BTreeMap<String, Extremes> {
    let mut out = BTreeMap::new();
    for (c, name) in MONITOR_COLUMNS.iter().enumerate().skip(1) {
        let vals: Vec<f64> = records.iter().map(|r| r.values()[c]).collect();
        out.insert(
            name.to_string(),
            Extremes {
                min: vals.iter().copied().fold(f64::INFINITY, f64::min),
                max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                first: vals.first().copied().unwrap_or(f64::NAN),
                last: vals.last().copied().unwrap_or(f64::NAN),
            },
        );
    }
    out
}

fn evaluate_checks(sc: &Scenario, out: &RunOutput, fit: &GronwallFit) -> Vec<CheckResult> {
    let m = &out.monitors;
    let sup = |f: &dyn Fn(&MonitorRecord) -> f64| m.iter().map(f).fold(0.0, f64::max);
    let nd0 = m.first().map_or(0.0, |r| r.norm_drift);
    let mut checks = vec![];
    let mut upper = |name: &str, value: f64, bound: Option<f64>| {
        if let Some(b) = bound {
            checks.push(CheckResult { name: name.into(), value, bound: b, pass: value <= b });
        }
    };
    upper("norm_drift", sup(&|r| (r.norm_drift - nd0).abs()), sc.checks.max_norm_drift);
    upper("harmonic_residual", sup(&|r| r.harmonic_residual), sc.checks.max_harmonic_residual);
    upper("eps_consistency", sup(&|r| r.eps_consistency), sc.checks.max_eps_consistency);
    if let Some(b) = sc.checks.min_a0_eig {
        let v = m.iter().map(|r| r.a0_min_eig).fold(f64::INFINITY, f64::min);
        checks.push(CheckResult { name: "a0_min_eig".into(), value: v, bound: b, pass: v > b });
    }
    if sc.checks.gronwall {
        checks.push(CheckResult { name: "gronwall".into(), value: fit.slack, bound: evolve::GRONWALL_SLACK, pass: fit.pass });
    }
    checks
}

fn profile_series(s: &SystemState) -> Vec<(&'static str, Vec<(f64, f64)>)> {
    let g = &s.grid;
    // slice along x through the middle of the other axes
    let mid = [0, g.points[1] / 2, g.points[2] / 2];
    let line: Vec<usize> = (0..g.points[0]).map(|i| g.index([i, mid[1], mid[2]])).collect();
    let col = |c: usize| line.iter().map(|&p| (g.coords(p)[0], s.point(p)[c])).collect::<Vec<_>>();
    vec![("v00", col(V)), ("v11", col(V + 4)), ("w", col(W)), ("u1", col(W + 2))]
}

pub fn run(sc: &Scenario, base: &Path, opts: &Options) -> Result<RunSummary, CliError> {
    let warning = window_policy(sc, opts.strict_window)?;
    let s0 = prepare(sc, base)?;
    let eos = sc.eos();
    let cfg = sc.config();
    let (steps, dt) = cfg.steps();
    let out = evolve::run(&cfg, &s0, &eos).map_err(numerical)?;
    ensure_dir(&opts.out)?;
    io::write_monitors_csv(create(&opts.out.join("monitors.csv"))?, &out.monitors).map_err(core_io)?;
    io::save_state(&opts.out.join("final_state.bin"), &out.final_state).map_err(core_io)?;
    if out.final_state.grid.len() <= CSV_DUMP_LIMIT {
        io::save_state(&opts.out.join("final_state.csv"), &out.final_state).map_err(core_io)?;
    }
    write_norm_report(&opts.out.join("norms.csv"), &[("initial", &s0), ("final", &out.final_state)], &sc.norm, &eos)?;

    let series = |f: fn(&MonitorRecord) -> f64| out.monitors.iter().map(|r| (r.t, f(r))).collect::<Vec<_>>();
    line_chart(&opts.out.join("energy.svg"), &format!("{}: energy", sc.name), "t", &[("energy_x", series(|r| r.energy_x))], false)?;
    line_chart(
        &opts.out.join("residuals.svg"),
        &format!("{}: residuals", sc.name),
        "t",
        &[("norm_drift", series(|r| r.norm_drift)), ("harmonic_residual", series(|r| r.harmonic_residual)), ("eps_consistency", series(|r| r.eps_consistency))],
        true,
    )?;
    line_chart(&opts.out.join("profile.svg"), &format!("{}: t = {}", sc.name, cfg.t_end), "x", &profile_series(&out.final_state), false)?;

    let fit = gronwall_check(&energy_series(&out.monitors));
    let checks = evaluate_checks(sc, &out, &fit);
    let pass = checks.iter().all(|c| c.pass);
    let summary = RunSummary {
        name: sc.name.clone(),
        verb: "run",
        seed: opts.seed,
        threads: opts.threads,
        mode: cfg.mode,
        steps,
        dt,
        t_end: cfg.t_end,
        window: sc.window(),
        window_warning: warning,
        monitors: extremes(&out.monitors),
        gronwall: fit,
        picard_ratios: out.picard_ratios.clone(),
        density_reading: density_reading_report(sc)?,
        checks,
        pass,
    };
    write_json(&opts.out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct NormRow {
    pub label: String,
    pub function: String,
    pub s: f64,
    pub delta: f64,
    pub gamma_psi: f64,
    pub value: f64,
    /// Share of the last dyadic shell in the sum; empty for the energy totals.
    pub tail: Option<f64>,
}

pub fn norm_rows(label: &str, s: &SystemState, spec: &NormSpec, eos: &einstein_euler::fluid::EquationOfState) -> Result<Vec<NormRow>, CliError> {
    let fam = DyadicFamily::for_dim(s.grid.dim());
    let names = io::state_component_names();
    let mut rows = vec![];
    for c in 0..NCOMP {
        let field = GridField { grid: &s.grid, data: &s.data, ncomp: NCOMP, comp: c };
        let terms = shell_terms(&field, spec, &fam).map_err(numerical)?;
        let total: f64 = terms.iter().sum();
        let tail = if total > 0.0 { terms.last().copied().unwrap_or(0.0) / total } else { 0.0 };
        rows.push(NormRow { label: label.into(), function: names[c].clone(), s: spec.s, delta: spec.delta, gamma_psi: spec.gamma_psi, value: total.sqrt(), tail: Some(tail) });
    }
    let weights = EnergyWeights::from_state(s, eos).map_err(numerical)?;
    let e = energy_x_norm(s, spec, &weights, &fam).map_err(numerical)?;
    let x = x_norm(s, spec, eos.kappa0(), &fam).map_err(numerical)?;
    for (name, value) in [("energy_x", e), ("x_norm", x)] {
        rows.push(NormRow { label: label.into(), function: name.into(), s: spec.s, delta: spec.delta, gamma_psi: spec.gamma_psi, value, tail: None });
    }
    Ok(rows)
}

fn write_norm_report(path: &Path, states: &[(&str, &SystemState)], spec: &NormSpec, eos: &einstein_euler::fluid::EquationOfState) -> Result<Vec<NormRow>, CliError> {
    let mut all = vec![];
    for (label, s) in states {
        all.extend(norm_rows(label, s, spec, eos)?);
    }
    let mut text = String::from("state,function,s,delta,gamma_psi,value,tail\n");
    for r in &all {
        let tail = r.tail.map(|t| format!("{t:e}")).unwrap_or_default();
        text += &format!("{},{},{},{},{},{:e},{}\n", r.label, r.function, r.s, r.delta, r.gamma_psi, r.value, tail);
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(all)
}

pub fn check_norms(sc: &Scenario, base: &Path, opts: &Options) -> Result<Vec<NormRow>, CliError> {
    window_policy(sc, opts.strict_window)?;
    let s0 = sc.initial_state(base)?;
    ensure_dir(&opts.out)?;
    write_norm_report(&opts.out.join("norms.csv"), &[("initial", &s0)], &sc.norm, &sc.eos())
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelResult {
    pub points: [usize; 3],
    pub dt: f64,
    pub norm_drift: f64,
    pub harmonic_residual: f64,
    pub eps_consistency: f64,
    /// Sup difference of the final state to the next finer level at shared points.
    pub self_difference: Option<f64>,
}

fn refine(grid: &GridSpec, level: u32) -> GridSpec {
    let f = 1usize << level;
    let points = [0, 1, 2].map(|a| match (grid.points[a], grid.boundary) {
        (1, _) => 1,
        (n, Boundary::Periodic) => n * f,
        (n, Boundary::FrozenExterior) => (n - 1) * f + 1,
    });
    GridSpec { points, ..grid.clone() }
}

/// Errors below this are treated as exact and get no order.
pub const ROUNDOFF_FLOOR: f64 = 1e-13;

/// Observed orders `log₂(e_l / e_{l+1})`; `None` once both sit at roundoff.
pub fn orders(errors: &[f64]) -> Vec<Option<f64>> {
    errors.windows(2).map(|w| (w[0].max(w[1]) > ROUNDOFF_FLOOR).then(|| (w[0] / w[1]).log2())).collect()
}

pub fn convergence(sc: &Scenario, base: &Path, levels: u32, opts: &Options) -> Result<Vec<LevelResult>, CliError> {
    if levels < 2 {
        return Err(CliError::invalid("levels", "need at least 2"));
    }
    window_policy(sc, opts.strict_window)?;
    let mut finals = vec![];
    let mut results = vec![];
    for l in 0..levels {
        let mut lsc = sc.clone();
        lsc.grid = refine(&sc.grid, l);
        lsc.evolution.dt = sc.evolution.dt / f64::from(1u32 << l);
        lsc.evolution.monitor_every = sc.evolution.monitor_every << l;
        lsc.validate()?;
        let s0 = prepare(&lsc, base)?;
        let cfg = lsc.config();
        let out = evolve::run(&cfg, &s0, &lsc.eos()).map_err(numerical)?;
        let m = &out.monitors;
        let nd0 = m[0].norm_drift;
        results.push(LevelResult {
            points: lsc.grid.points,
            dt: cfg.steps().1,
            norm_drift: m.iter().map(|r| (r.norm_drift - nd0).abs()).fold(0.0, f64::max),
            harmonic_residual: m.iter().map(|r| r.harmonic_residual).fold(0.0, f64::max),
            eps_consistency: m.iter().map(|r| r.eps_consistency).fold(0.0, f64::max),
            self_difference: None,
        });
        finals.push(out.final_state);
    }
    for l in 0..finals.len() - 1 {
        let (c, f) = (&finals[l], &finals[l + 1]);
        let mut worst: f64 = 0.0;
        for p in 0..c.grid.len() {
            let i = c.grid.multi_index(p);
            let q = f.grid.index([0, 1, 2].map(|a| if c.grid.points[a] == 1 { 0 } else { 2 * i[a] }));
            for k in 0..NCOMP {
                worst = worst.max((c.point(p)[k] - f.point(q)[k]).abs());
            }
        }
        results[l].self_difference = Some(worst);
    }
    ensure_dir(&opts.out)?;
    let od = orders(&results.iter().map(|r| r.norm_drift).collect::<Vec<_>>());
    let oh = orders(&results.iter().map(|r| r.harmonic_residual).collect::<Vec<_>>());
    let sd: Vec<f64> = results.iter().filter_map(|r| r.self_difference).collect();
    let os = orders(&sd);
    let mut text = String::from("level,nx,ny,nz,dt,norm_drift,harmonic_residual,eps_consistency,self_difference,order_norm_drift,order_harmonic,order_self\n");
    for (l, r) in results.iter().enumerate() {
        let get = |v: &Vec<Option<f64>>| l.checked_sub(1).and_then(|i| v.get(i).copied().flatten()).map(|x| format!("{x:.4}")).unwrap_or_default();
        text += &format!(
            "{l},{},{},{},{:e},{:e},{:e},{:e},{},{},{},{}\n",
            r.points[0],
            r.points[1],
            r.points[2],
            r.dt,
            r.norm_drift,
            r.harmonic_residual,
            r.eps_consistency,
            r.self_difference.map(|x| format!("{x:e}")).unwrap_or_default(),
            get(&od),
            get(&oh),
            get(&os)
        );
    }
    fs::write(opts.out.join("convergence.csv"), &text)?;
    print!("{text}");
    Ok(results)
}

pub fn matrices(sc: &Scenario, base: &Path, point: [usize; 3], opts: &Options) -> Result<PathBuf, CliError> {
    let s0 = sc.initial_state(base)?;
    if (0..3).any(|a| point[a] >= s0.grid.points[a]) {
        return Err(CliError::invalid("point", format!("{point:?} outside grid {:?}", s0.grid.points)));
    }
    let p = s0.grid.index(point);
    let sys = assemble_block_system(s0.point(p), &sc.eos()).map_err(|e| CliError::invalid("point", e.at(p)))?;
    let dir = opts.out.join("matrices");
    ensure_dir(&dir)?;
    io::write_matrix_csv(create(&dir.join("A0.csv"))?, &sys.a0).map_err(core_io)?;
    for a in 0..3 {
        io::write_matrix_csv(create(&dir.join(format!("A{}.csv", a + 1)))?, &sys.aa[a]).map_err(core_io)?;
        io::write_matrix_csv(create(&dir.join(format!("C{}.csv", a + 1)))?, &sys.ca[a]).map_err(core_io)?;
    }
    io::write_matrix_csv(create(&dir.join("B.csv"))?, &sys.b).map_err(core_io)?;
    let f = DMatrix::from_column_slice(sys.f.len(), 1, sys.f.as_slice());
    io::write_matrix_csv(create(&dir.join("F.csv"))?, &f).map_err(core_io)?;
    Ok(dir)
}

#[derive(Debug, Serialize)]
pub struct InequalitySummary {
    pub family: String,
    pub seed: u64,
    pub gamma: f64,
    pub results: Vec<inequalities::InequalityResult>,
    pub random_monotonicity_violations: usize,
    pub pass: bool,
}

/// Number of random functions in the seeded monotonicity check.
pub const RANDOM_MEMBERS: usize = 100;

pub fn run_inequalities(family: TestFamily, gamma: f64, opts: &Options) -> Result<InequalitySummary, CliError> {
    let eos = einstein_euler::fluid::EquationOfState::new(1.0, gamma).map_err(|e| CliError::invalid("gamma", e))?;
    let report = inequalities::check_inequality_suite(family, &eos).map_err(numerical)?;
    let random = inequalities::random_members(RANDOM_MEMBERS, opts.seed);
    let violations = inequalities::monotonicity_violations(&random).map_err(numerical)?;
    ensure_dir(&opts.out)?;
    fs::write(opts.out.join("inequalities.csv"), report.to_csv())?;
    let summary = InequalitySummary {
        family: format!("{family:?}").to_lowercase(),
        seed: opts.seed,
        gamma,
        pass: report.all_pass() && violations == 0,
        results: report.results,
        random_monotonicity_violations: violations,
    };
    write_json(&opts.out.join("inequalities.json"), &summary)?;
    Ok(summary)
}
