use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nonlocal_core::config::{parse_config, RunConfig};
use nonlocal_core::run::{resolve_experiment, run};
use nonlocal_core::Error;

/// Experiments for the nonlocal parabolic problem.
#[derive(Debug, Parser)]
#[command(name = "nonlocal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory (overrides NONLOCAL_OUT and the configuration)
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    modes: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long = "t-end", global = true, allow_negative_numbers = true)]
    t_end: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Solve the semilinear problem and write the trajectory
    Solve,
    /// Map a solution to the quasilinear time variable and back
    Roundtrip,
    /// Ordered runs of the lower, original and upper problems
    Compare,
    /// Pullback sweep of a sampled ball
    Attractor,
    /// Structural certificates, modulus admissibility and the sandwich scan
    Check,
    /// Barrier profile φ
    Phi,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Roundtrip => "roundtrip",
            Command::Compare => "compare",
            Command::Attractor => "attractor",
            Command::Check => "check",
            Command::Phi => "phi",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, Error> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Validation {
        key: "--config".into(),
        constraint: "a configuration file path".into(),
    })?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Ok(dir) = std::env::var("NONLOCAL_OUT") {
        if !dir.is_empty() {
            cfg.output.directory = dir;
        }
    }
    if let Some(dir) = &cli.out {
        cfg.output.directory = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.output.seed = seed;
    }
    if let Some(n) = cli.modes {
        cfg.solver.n_modes = n;
    }
    if let Some(dt) = cli.dt {
        cfg.solver.dt = dt;
    }
    if let Some(t) = cli.t_end {
        cfg.solver.t_end = t;
    }
    cfg.experiment = Some(resolve_experiment(&cfg, cli.command.name())?);
    cfg.validate()?;
    Ok(cfg)
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("NONLOCAL_THREADS") else { return Ok(()) };
    let n = v.parse::<usize>().ok().filter(|n| *n > 0).ok_or_else(|| Error::Validation {
        key: "NONLOCAL_THREADS".into(),
        constraint: "a positive integer".into(),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Io(e.to_string()))
}

fn fail(e: &Error, dir: Option<&str>) -> ExitCode {
    let json = e.to_json();
    eprintln!("{json}");
    if let Some(dir) = dir {
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(PathBuf::from(dir).join("error.json"), format!("{json:#}\n"));
        }
    }
    match e {
        Error::Parse { .. } | Error::Validation { .. } => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return fail(&e, None);
    }
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => return fail(&e, None),
    };
    match run(&cfg) {
        Ok(outcome) => {
            let line = serde_json::json!({
                "experiment": outcome.manifest.experiment,
                "directory": outcome.directory.display().to_string(),
                "passed": outcome.passed,
                "files": outcome.manifest.files.iter().map(|f| f.name.clone()).collect::<Vec<_>>(),
            });
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, Some(&cfg.output.directory)),
    }
}
