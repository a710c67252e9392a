//! Experiment dispatch: one resolved configuration in, one directory of
//! artifacts out.

use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use crate::attractor::{pullback_sweep, PullbackOptions};
use crate::comparison::{compare_ordered_with, sandwich_scan};
use crate::config::{
    AttractorParams, CheckParams, CompareParams, Experiment, PhiParams, RoundtripParams, RunConfig, SolveParams,
};
use crate::error::{Error, Result};
use crate::modulus::check_modulus;
use crate::output::{table_csv, trajectory_csv, ArtifactWriter, Columns, Manifest, MANIFEST};
use crate::problem::{monotonicity_shift, solve_phi, StructuralPair};
use crate::reparam::{build_clock, from_quasilinear, quasilinear_residual, to_quasilinear};
use crate::solver::{
    march_with, mild_defect, picard_solve_interval, LocalExistenceCert, MarchOptions, Method, PicardOptions, Status,
    Trajectory,
};
use crate::spectral::Basis;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub directory: PathBuf,
    pub manifest: Manifest,
    /// false when an audit inside the experiment failed
    pub passed: bool,
}

/// Pick the experiment for a subcommand: the configured one when its kind
/// matches, defaults when the configuration has none.
pub fn resolve_experiment(cfg: &RunConfig, command: &str) -> Result<Experiment> {
    match &cfg.experiment {
        Some(e) if e.kind() == command => Ok(e.clone()),
        Some(e) => Err(Error::validation(
            "experiment.kind",
            format!("the subcommand `{command}` (configuration declares `{}`)", e.kind()),
        )),
        None => Experiment::default_for(command),
    }
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let experiment = cfg
        .experiment
        .clone()
        .ok_or_else(|| Error::validation("experiment", "an experiment section or a subcommand"))?;
    let start = Instant::now();
    let mut out = ArtifactWriter::create(&cfg.output.directory)?;
    let (time_variable, columns, passed) = match &experiment {
        Experiment::Solve(p) => run_solve(cfg, p, &mut out)?,
        Experiment::Roundtrip(p) => run_roundtrip(cfg, p, &mut out)?,
        Experiment::Compare(p) => run_compare(cfg, p, &mut out)?,
        Experiment::Attractor(p) => run_attractor(cfg, p, &mut out)?,
        Experiment::Check(p) => run_check(cfg, p, &mut out)?,
        Experiment::Phi(p) => run_phi(cfg, p, &mut out)?,
    };
    let mut manifest = Manifest::new(cfg, experiment.kind(), time_variable, columns);
    manifest.files = out.files().to_vec();
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    out.write_json(MANIFEST, &manifest)?;
    Ok(RunOutcome { directory: out.dir().to_path_buf(), manifest, passed })
}

type Emitted = (&'static str, Columns, bool);

fn columns(values: bool) -> Columns {
    if values {
        Columns::Values
    } else {
        Columns::Coefficients
    }
}

fn solve(cfg: &RunConfig, p: &SolveParams) -> Result<Trajectory> {
    let basis = Basis::new(cfg.solver.n_modes)?;
    let w0 = p.w0.build(&basis, &cfg.problem)?;
    let s = &cfg.solver;
    match s.method {
        Method::Picard => {
            let mut traj =
                picard_solve_interval(&w0, &cfg.problem, s.t_end, s.dt, &PicardOptions { tol: s.tol, ..PicardOptions::default() })?;
            if p.store_every > 1 {
                thin(&mut traj, p.store_every);
            }
            Ok(traj)
        }
        Method::March => {
            let opts = MarchOptions { store_every: p.store_every, ..MarchOptions::default() };
            march_with(&w0, &cfg.problem, s.t_end, s.dt, &opts)
        }
    }
}

fn thin(traj: &mut Trajectory, every: usize) {
    let last = traj.len() - 1;
    let keep: Vec<usize> = (0..traj.len()).filter(|i| i % every == 0 || *i == last).collect();
    traj.times = keep.iter().map(|&i| traj.times[i]).collect();
    traj.alpha_clock = keep.iter().map(|&i| traj.alpha_clock[i]).collect();
    traj.states = keep.iter().map(|&i| traj.states[i].clone()).collect();
}

#[derive(Serialize)]
struct NodeNorms {
    t: f64,
    alpha: f64,
    norm_x: f64,
    norm_half: f64,
    sup_nodes: f64,
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    method: Method,
    #[serde(flatten)]
    status: Status,
    final_time: f64,
    nodes: usize,
    dt: f64,
    tol: f64,
    clock_slope_excess: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mild_defect: Option<f64>,
    windows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_certificate: Option<&'a LocalExistenceCert>,
    norms: Vec<NodeNorms>,
}

fn run_solve(cfg: &RunConfig, p: &SolveParams, out: &mut ArtifactWriter) -> Result<Emitted> {
    let traj = solve(cfg, p)?;
    let cols = columns(p.values);
    if cfg.output.format.csv() {
        out.write("trajectory.csv", &trajectory_csv("t", &traj.times, &traj.alpha_clock, &traj.states, cols))?;
    }
    if cfg.output.format.json() {
        let norms = traj
            .times
            .iter()
            .zip(&traj.alpha_clock)
            .zip(&traj.states)
            .map(|((t, a), s)| NodeNorms {
                t: *t,
                alpha: *a,
                norm_x: s.norm_x(),
                norm_half: s.norm_frac(0.5),
                sup_nodes: s.sup_nodes(),
            })
            .collect();
        let summary = SolveSummary {
            method: traj.method,
            status: traj.status,
            final_time: traj.final_time(),
            nodes: traj.len(),
            dt: traj.dt,
            tol: traj.tol,
            clock_slope_excess: traj.clock_slope_excess(cfg.problem.m(), cfg.problem.big_m()),
            mild_defect: (traj.method == Method::Picard && p.store_every == 1).then(|| mild_defect(&traj, &cfg.problem)),
            windows: traj.certificates.len(),
            first_certificate: traj.certificates.first(),
            norms,
        };
        out.write_json("summary.json", &summary)?;
    }
    Ok(("t", cols, traj.status == Status::Completed))
}

#[derive(Serialize)]
struct RoundtripSummary {
    error: f64,
    clock_error: f64,
    residual_induced: f64,
    residual_literal: f64,
    inverse_slope_min: f64,
    inverse_slope_max: f64,
    mean_rate: f64,
    nodes: usize,
}

fn run_roundtrip(cfg: &RunConfig, p: &RoundtripParams, out: &mut ArtifactWriter) -> Result<Emitted> {
    let sp = SolveParams { w0: p.w0.clone(), values: p.values, store_every: 1 };
    let traj = solve(cfg, &sp)?;
    let clock = build_clock(&traj)?;
    let q = to_quasilinear(&traj)?;
    let back = from_quasilinear(&q, &clock, &traj.times);
    let mut error = 0.0f64;
    for (b, u) in back.iter().zip(&traj.states) {
        error = error.max(b.dist(u, 0.5)?);
    }
    let residual = quasilinear_residual(&q, &cfg.problem)?;
    let (lo, hi) = clock.inverse_slope_range();
    let cols = columns(p.values);
    if cfg.output.format.csv() {
        out.write("tau_trajectory.csv", &trajectory_csv("tau", &q.tau, &q.tau, &q.states, cols))?;
    }
    if cfg.output.format.json() {
        let span = traj.final_time() - traj.times[0];
        out.write_json(
            "roundtrip.json",
            &RoundtripSummary {
                error,
                clock_error: clock.roundtrip_error(),
                residual_induced: residual.induced,
                residual_literal: residual.literal,
                inverse_slope_min: lo,
                inverse_slope_max: hi,
                mean_rate: (traj.alpha_clock.last().unwrap() - traj.alpha_clock[0]) / span,
                nodes: traj.len(),
            },
        )?;
    }
    Ok(("tau", cols, traj.status == Status::Completed))
}

fn run_compare(cfg: &RunConfig, p: &CompareParams, out: &mut ArtifactWriter) -> Result<Emitted> {
    let basis = Basis::new(cfg.solver.n_modes)?;
    let spec = &cfg.problem;
    let mid = p.w0.build(&basis, spec)?;
    let b = spec.barrier();
    let phi = solve_phi(&basis, b.shift, b.source)?;
    let lo = mid.axpy(-p.offset, &phi.field)?;
    let hi = mid.axpy(p.offset, &phi.field)?;
    let report = compare_ordered_with(spec, &lo, &mid, &hi, cfg.solver.t_end, cfg.solver.dt, p.tolerance, p.envelope)?;
    if cfg.output.format.csv() {
        let rows = report.margins.iter().map(|m| vec![m.t, m.upper_minus_middle, m.middle_minus_lower]);
        out.write("margins.csv", &table_csv(&["t", "upper_minus_middle", "middle_minus_lower"], rows))?;
    }
    if cfg.output.format.json() {
        out.write_json("comparison.json", &report)?;
    }
    Ok(("t", Columns::Values, report.passed))
}

fn run_attractor(cfg: &RunConfig, p: &AttractorParams, out: &mut ArtifactWriter) -> Result<Emitted> {
    let opts = PullbackOptions {
        target_t: p.target_t,
        radius: p.radius,
        n_samples: p.n_samples,
        n_modes: cfg.solver.n_modes,
        max_exponent: p.max_exponent,
        dt: cfg.solver.dt,
        seed: cfg.output.seed,
        beta: p.beta,
    };
    let report = pullback_sweep(&cfg.problem, &opts)?;
    if cfg.output.format.csv() {
        let rows = (0..report.pullback_times.len()).map(|j| {
            vec![
                report.pullback_times[j],
                report.k_inf[j],
                report.k_alpha[j],
                report.k_alpha_beta[j],
                report.hausdorff_distances.get(j).copied().unwrap_or(f64::NAN),
            ]
        });
        out.write("radii.csv", &table_csv(&["sigma", "k_inf", "k_alpha", "k_alpha_beta", "hausdorff_next"], rows))?;
        if p.snapshots {
            let n = cfg.solver.n_modes;
            let mut header = vec!["sigma".to_string(), "sample".to_string()];
            header.extend((1..=n).map(|k| format!("c{k}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows = report.snapshots.iter().zip(&report.pullback_times).flat_map(|(snap, sigma)| {
                snap.iter().enumerate().map(move |(i, s)| {
                    let mut row = vec![*sigma, i as f64];
                    row.extend_from_slice(s.coeffs());
                    row
                })
            });
            out.write("snapshots.csv", &table_csv(&header, rows))?;
        }
    }
    if cfg.output.format.json() {
        out.write_json("attractor.json", &report)?;
    }
    let passed = report.k_inf.last().is_some_and(|k| *k <= report.phi_sup + 1e-3);
    Ok(("t", Columns::Coefficients, passed))
}

#[derive(Serialize)]
struct CheckSummary {
    structural: StructuralPair,
    modulus: crate::modulus::ModulusReport,
    sandwich: crate::comparison::SandwichScan,
    monotonicity_shift: f64,
    phi_sup: f64,
}

fn run_check(cfg: &RunConfig, p: &CheckParams, out: &mut ArtifactWriter) -> Result<Emitted> {
    let spec = &cfg.problem;
    let pair = spec.certify(p.scan_radius, p.grid_points);
    let modulus = check_modulus(p.p, p.beta);
    let phi_sup = if pair.barrier.satisfied_d {
        solve_phi(&Basis::new(cfg.solver.n_modes)?, pair.barrier.shift, pair.barrier.source)?.sup()
    } else {
        f64::INFINITY
    };
    let r = if phi_sup.is_finite() && phi_sup > 0.0 { phi_sup } else { 1.0 };
    let sandwich = sandwich_scan(spec, r, 10_001, crate::comparison::Envelope::Sign);
    let shift = monotonicity_shift(&spec.f, r);
    if cfg.output.format.csv() {
        let row = |c: &crate::problem::StructuralCertificate| {
            vec![c.nu, c.c0, c.c1, c.lambda1, f64::from(u8::from(c.satisfied_s)), f64::from(u8::from(c.satisfied_d))]
        };
        let rows = vec![row(&pair.low), row(&pair.high)];
        out.write("structural.csv", &table_csv(&["nu", "C0", "C1", "lambda1", "satisfied_S", "satisfied_D"], rows))?;
    }
    let passed = pair.low.satisfied_s && pair.high.satisfied_s && pair.barrier.satisfied_d && sandwich.violations == 0;
    if cfg.output.format.json() {
        out.write_json("check.json", &CheckSummary { structural: pair, modulus, sandwich, monotonicity_shift: shift, phi_sup })?;
    }
    Ok(("t", Columns::Values, passed))
}

#[derive(Serialize)]
struct PhiSummary {
    c: f64,
    #[serde(rename = "C1")]
    c1: f64,
    sup: f64,
    truncation_bound: f64,
    /// max over collocation nodes of |spectral - closed form|
    node_discrepancy: f64,
    min_node_value: f64,
}

fn run_phi(cfg: &RunConfig, p: &PhiParams, out: &mut ArtifactWriter) -> Result<Emitted> {
    let basis = Basis::new(cfg.solver.n_modes)?;
    let (c, c1) = match (p.c, p.c1) {
        (Some(c), Some(c1)) => (c, c1),
        (c, c1) => {
            let b = cfg.problem.barrier();
            (c.unwrap_or(b.shift), c1.unwrap_or(b.source))
        }
    };
    let phi = solve_phi(&basis, c, c1)?;
    let spectral = phi.field.to_values();
    let closed = phi.node_values();
    let node_discrepancy = spectral.iter().zip(&closed).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if cfg.output.format.csv() {
        let rows = (0..p.points).map(|i| {
            let x = i as f64 / (p.points - 1) as f64;
            vec![x, phi.eval(x), phi.field.eval(x)]
        });
        out.write("phi.csv", &table_csv(&["x", "closed_form", "spectral"], rows))?;
    }
    if cfg.output.format.json() {
        out.write_json(
            "phi.json",
            &PhiSummary {
                c,
                c1,
                sup: phi.sup(),
                truncation_bound: phi.truncation_bound(),
                node_discrepancy,
                min_node_value: closed.iter().copied().fold(f64::INFINITY, f64::min),
            },
        )?;
    }
    Ok(("t", Columns::Values, true))
}
