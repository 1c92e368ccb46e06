use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

fn eeuler(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eeuler")).args(args).arg("--out").arg(out).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_scenario(dir: &TempDir, text: &str) -> String {
    let p = dir.path().join("scenario.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SOUND: &str = r#"
name = "sound"

[grid]
extent = [6.283185307179586, 1.0, 1.0]
points = [32, 1, 1]
boundary = "periodic"

[eos]
k = 1.0
gamma = GAMMA

[initial]
kind = "sound-wave"
w0 = W0
amplitude = 1e-3
k = 1.0

[norm]
s = S
delta = -1.0

[evolution]
dt = 0.05
t_end = 0.5
monitor_every = 1
freeze_metric = true
"#;

fn sound(gamma: f64, w0: f64, s: f64) -> String {
    SOUND.replace("GAMMA", &gamma.to_string()).replace("W0", &w0.to_string()).replace("S", &s.to_string())
}

#[test]
fn vacuum_run_writes_every_artifact() {
    let tmp = TempDir::new().unwrap();
    let o = eeuler(&["run", scenario("minkowski-vacuum").to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["monitors.csv", "final_state.bin", "final_state.csv", "norms.csv", "energy.svg", "residuals.svg", "profile.svg", "summary.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(tmp.path().join("monitors.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,energy_x,norm_drift,harmonic_residual,eps_consistency,a0_min_eig");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r[1..5] == [0.0; 4] && r[5] == 1.0));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["steps"], 100);
    assert_eq!(fs::metadata(tmp.path().join("final_state.bin")).unwrap().len(), 32 * 55 * 8);
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        let o = eeuler(&["run", scenario("gauge-wave").to_str().unwrap(), "--seed", "3"], d.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["monitors.csv", "final_state.csv", "norms.csv", "final_state.bin"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn parse_error_reports_line() {
    let tmp = TempDir::new().unwrap();
    let path = write_scenario(&tmp, "name = \"x\"\n[grid]\nextent = [1.0, 1.0, 1.0]\npoints = \"many\"\n");
    let o = eeuler(&["run", &path], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_parse_error() {
    let tmp = TempDir::new().unwrap();
    let path = write_scenario(&tmp, &sound(2.0, 0.3, 2.0).replace("[initial]", "[initial]\ncolour = 1"));
    assert_eq!(code(&eeuler(&["run", &path], tmp.path())), 2);
}

#[test]
fn missing_file_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&eeuler(&["run", "/nonexistent/scenario.toml"], tmp.path())), 1);
}

#[test]
fn superluminal_sound_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let path = write_scenario(&tmp, &sound(2.0, 0.8, 2.0));
    let o = eeuler(&["run", &path], tmp.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn window_inside_gives_no_warning() {
    let tmp = TempDir::new().unwrap();
    let o = eeuler(&["run", &write_scenario(&tmp, &sound(2.0, 0.3, 2.0))], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(!stderr(&o).contains("warning"));
}

#[test]
fn window_outside_warns_or_fails_when_strict() {
    let tmp = TempDir::new().unwrap();
    let path = write_scenario(&tmp, &sound(2.5, 0.3, 2.0));
    let o = eeuler(&["run", &path], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("warning") && stderr(&o).contains("1.8333"), "{}", stderr(&o));
    assert_eq!(code(&eeuler(&["run", &path, "--strict-window"], tmp.path())), 3);
}

#[test]
fn nonpositive_regularity_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let path = write_scenario(&tmp, &sound(2.0, 0.3, 0.0));
    assert_eq!(code(&eeuler(&["run", &path], tmp.path())), 3);
}

#[test]
fn failed_check_has_its_own_exit_code() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(scenario("gauge-wave")).unwrap().replace("max_norm_drift = 1e-6", "max_norm_drift = 1e-20");
    let o = eeuler(&["run", &write_scenario(&tmp, &text)], tmp.path());
    assert_eq!(code(&o), 5, "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], false);
}

#[test]
fn convergence_reports_fourth_order() {
    let tmp = TempDir::new().unwrap();
    let o = eeuler(&["convergence", scenario("gauge-wave").to_str().unwrap(), "--levels", "3"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("convergence.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "order_norm_drift").unwrap();
    let rows: Vec<Vec<String>> = csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows[1..] {
        let p: f64 = r[col].parse().unwrap();
        assert!((p - 4.0).abs() < 0.4, "{p}");
    }
}

#[test]
fn matrices_are_dumped() {
    let tmp = TempDir::new().unwrap();
    let o = eeuler(&["matrices", scenario("sound-wave").to_str().unwrap(), "--point", "3,0,0"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a0 = fs::read_to_string(tmp.path().join("matrices/A0.csv")).unwrap();
    assert_eq!(a0.lines().count(), 55);
    assert!(a0.lines().all(|l| l.split(',').count() == 55));
    for m in ["A1", "A2", "A3", "B", "C1", "C2", "C3", "F"] {
        assert!(tmp.path().join(format!("matrices/{m}.csv")).exists());
    }
    let o = eeuler(&["matrices", scenario("sound-wave").to_str().unwrap(), "--point", "999,0,0"], tmp.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn check_norms_writes_table() {
    let tmp = TempDir::new().unwrap();
    let o = eeuler(&["check-norms", scenario("gauge-wave").to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("norms.csv")).unwrap();
    assert!(csv.starts_with("state,function,s,delta,gamma_psi,value,tail"));
}

#[test]
fn inequality_suite_passes() {
    let tmp = TempDir::new().unwrap();
    let o = eeuler(&["inequalities"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("inequalities.json")).unwrap()).unwrap();
    assert!(report.to_string().contains("fractional-power-high"));
}

#[test]
fn fluid_ball_reports_both_density_readings() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(scenario("fluid-ball")).unwrap().replace("points = [257, 1, 1]", "points = [65, 1, 1]").replace("t_end = 0.5", "t_end = 0.1171875").replace("monitor_every = 2", "monitor_every = 1");
    let o = eeuler(&["run", &write_scenario(&tmp, &text)], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    let r = &summary["density_reading"];
    assert_eq!(r["reading"], "normal-projection");
    // a comoving slab has no density under the literal grouping
    assert_eq!(r["max_z_other"], 0.0);
    assert!(r["max_z"].as_f64().unwrap() > 0.0);
}
