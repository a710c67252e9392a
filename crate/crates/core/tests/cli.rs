use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use nonlocal_core::config::{
    emit_config, parse_config, CompareParams, Experiment, Format, InitialData, RunConfig, SolveParams,
};
use nonlocal_core::problem::{Diffusion, Nonlinearity, ProblemSpec, TimeForcing};
use nonlocal_core::solver::Method;
use proptest::prelude::*;

fn nonlocal(args: &[&str], config: Option<&Path>, out: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nonlocal"));
    cmd.args(args).arg("--out").arg(out).env_remove("NONLOCAL_OUT").env_remove("NONLOCAL_THREADS");
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    if let Some(t) = threads {
        cmd.env("NONLOCAL_THREADS", t);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, cfg: &RunConfig) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, emit_config(cfg)).unwrap();
    p
}

fn stderr_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON in {text}"));
    serde_json::from_str(line).unwrap()
}

#[test]
fn heat_first_mode_in_the_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig { problem: ProblemSpec::heat(), ..RunConfig::default() };
    cfg.solver.method = Method::March;
    cfg.solver.n_modes = 16;
    cfg.solver.t_end = 0.5;
    cfg.solver.dt = 1e-3;
    cfg.output.format = Format::Csv;
    cfg.experiment = Some(Experiment::Solve(SolveParams { w0: InitialData::Mode { k: 1, amplitude: 1.0 }, ..SolveParams::default() }));
    let path = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("run");
    let o = nonlocal(&["solve"], Some(&path), &out, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..3], ["t", "alpha", "c1"]);
    assert_eq!(header.len(), 18);
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((v[2] - (-PI * PI * v[0]).exp()).abs() < 1e-8, "t = {}", v[0]);
        assert!((v[1] - v[0]).abs() < 1e-12);
        rows += 1;
    }
    assert_eq!(rows, 501);
    assert!(out.join("manifest.json").exists());
    assert!(!out.join("summary.json").exists());
    let stdout: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stdout["experiment"], "solve");
}

#[test]
fn compare_reports_no_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.solver.n_modes = 32;
    cfg.solver.t_end = 2.0;
    cfg.experiment = Some(Experiment::Compare(CompareParams::default()));
    let path = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("cmp");
    let o = nonlocal(&["compare"], Some(&path), &out, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("comparison.json")).unwrap()).unwrap();
    assert!(report["max_violation"].as_f64().unwrap() >= -1e-6, "{report}");
    assert_eq!(report["passed"], true);
    assert!(out.join("margins.csv").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.solver.n_modes = 16;
    cfg.solver.t_end = 0.2;
    let path = write_config(tmp.path(), &cfg);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        assert!(nonlocal(&["solve"], Some(&path), dir, Some(threads)).status.success());
    }
    for name in ["trajectory.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("err");

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{\"solver\": {\"dt\": }").unwrap();
    let o = nonlocal(&["solve"], Some(&bad), &out, None);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "parse_error");

    std::fs::write(&bad, "{\"solver\": {\"step\": 0.1}}").unwrap();
    assert_eq!(nonlocal(&["solve"], Some(&bad), &out, None).status.code(), Some(2));

    let mut cfg = RunConfig::default();
    cfg.problem.a = Diffusion::Saturating { m: 3.0, m_upper: 2.0 };
    let path = write_config(tmp.path(), &cfg);
    let o = nonlocal(&["solve"], Some(&path), &out, None);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!((e["error"].as_str(), e["key"].as_str()), (Some("validation_error"), Some("a.m")));

    let good = write_config(tmp.path(), &RunConfig::default());
    let o = nonlocal(&["solve", "--dt", "-1"], Some(&good), &out, None);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(nonlocal(&["solve"], None, &out, None).status.code(), Some(2));
    let o = nonlocal(&["solve"], Some(&good), &out, Some("0"));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["key"], "NONLOCAL_THREADS");
    assert_eq!(nonlocal(&["solve"], Some(&tmp.path().join("missing.json")), &out, None).status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn minimal_configs_fill_defaults() {
    assert_eq!(parse_config("{}").unwrap(), RunConfig::default());
    let c = parse_config("{\"solver\": {\"dt\": 0.01}, \"output\": {\"seed\": 9}}").unwrap();
    assert_eq!(c.solver.dt, 0.01);
    assert_eq!(c.solver.n_modes, RunConfig::default().solver.n_modes);
    assert_eq!(c.output.seed, 9);
    assert_eq!(c.problem, ProblemSpec::default());
    assert!(parse_config("{\"solver\": {\"n_modes\": \"many\"}}").is_err());
    assert!(parse_config("[]").is_err());
    assert!(parse_config("  \n{} {}").is_err());
    assert!(matches!(parse_config("\n\n  [1]"), Err(nonlocal_core::Error::Parse { line: 3, .. })));
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    (
        0.01f64..5.0,
        1e-4f64..1e-1,
        8usize..512,
        0.05f64..2.0,
        prop::sample::select(vec![Method::March, Method::Picard]),
        -3.0f64..3.0,
        any::<u64>(),
        prop::collection::vec(-1.0f64..1.0, 1..6),
        prop::sample::select(vec![Format::Csv, Format::Json, Format::Both]),
    )
        .prop_map(|(t_end, dt, n, lambda, method, h, seed, coeffs, format)| {
            let mut c = RunConfig::default();
            c.solver.t_end = t_end;
            c.solver.dt = dt;
            c.solver.n_modes = n;
            c.solver.method = method;
            c.problem.lambda = lambda;
            c.problem.h = TimeForcing::Sine { amplitude: h, frequency: 1.0 + lambda };
            c.problem.f = Nonlinearity::Polynomial { coeffs: coeffs.clone() };
            c.output.seed = seed;
            c.output.format = format;
            c.experiment = Some(Experiment::Solve(SolveParams { w0: InitialData::Coeffs { values: coeffs }, ..SolveParams::default() }));
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips(cfg in arb_config()) {
        let text = emit_config(&cfg);
        prop_assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
