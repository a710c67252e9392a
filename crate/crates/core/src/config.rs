//! Run configuration: a JSON document with the sections `problem`, `solver`,
//! `experiment` and `output`. Every section is optional and unknown keys are
//! rejected.

use serde::{Deserialize, Serialize};

use crate::comparison::Envelope;
use crate::error::{Error, Result};
use crate::problem::{ProblemSpec, DEFAULT_SCAN_POINTS, DEFAULT_SCAN_RADIUS};
use crate::solver::{Method, DEFAULT_DT, DEFAULT_TOL};
use crate::spectral::{Basis, SpectralField};
use std::sync::Arc;

pub const MAX_MODES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub dt: f64,
    pub tol: f64,
    pub t_end: f64,
    pub n_modes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { method: Method::Picard, dt: DEFAULT_DT, tol: DEFAULT_TOL, t_end: 1.0, n_modes: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    pub format: Format,
    pub seed: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: "out".into(), format: Format::Both, seed: 0 }
    }
}

/// Initial datum w0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    /// amplitude·e_k, k counted from 1
    Mode { k: usize, amplitude: f64 },
    /// leading sine coefficients; the rest are zero
    Coeffs { values: Vec<f64> },
    /// scale·φ for the problem's barrier φ
    Phi { scale: f64 },
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::Mode { k: 1, amplitude: 0.5 }
    }
}

impl InitialData {
    pub fn build(&self, basis: &Arc<Basis>, spec: &ProblemSpec) -> Result<SpectralField> {
        match self {
            InitialData::Zero => Ok(SpectralField::zeros(basis)),
            InitialData::Mode { k, amplitude } => Ok(SpectralField::mode(basis, *k, *amplitude)),
            InitialData::Coeffs { values } => {
                let mut c = vec![0.0; basis.n_modes()];
                for (dst, v) in c.iter_mut().zip(values) {
                    *dst = *v;
                }
                SpectralField::new(basis, c)
            }
            InitialData::Phi { scale } => {
                let b = spec.barrier();
                let phi = crate::problem::solve_phi(basis, b.shift, b.source)?;
                Ok(phi.field.scale(*scale))
            }
        }
    }

    fn validate(&self, key: &str, n_modes: usize) -> Result<()> {
        match self {
            InitialData::Mode { k, amplitude } => {
                if *k == 0 || *k > n_modes {
                    return Err(Error::validation(format!("{key}.k"), format!("1 ≤ k ≤ n_modes ({n_modes})")));
                }
                if !amplitude.is_finite() {
                    return Err(Error::validation(format!("{key}.amplitude"), "a finite value"));
                }
            }
            InitialData::Coeffs { values } => {
                if values.len() > n_modes || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::validation(
                        format!("{key}.values"),
                        format!("at most n_modes ({n_modes}) finite values"),
                    ));
                }
            }
            InitialData::Phi { scale } if !scale.is_finite() => {
                return Err(Error::validation(format!("{key}.scale"), "a finite value"));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveParams {
    pub w0: InitialData,
    /// write node values instead of coefficients
    pub values: bool,
    pub store_every: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { w0: InitialData::default(), values: false, store_every: 1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundtripParams {
    pub w0: InitialData,
    pub values: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareParams {
    /// middle initial datum; the outer ones are w0 ∓ offset·φ
    pub w0: InitialData,
    pub offset: f64,
    pub envelope: Envelope,
    pub tolerance: f64,
}

impl Default for CompareParams {
    fn default() -> Self {
        CompareParams { w0: InitialData::default(), offset: 0.1, envelope: Envelope::Sign, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttractorParams {
    pub target_t: f64,
    pub radius: f64,
    pub n_samples: usize,
    pub max_exponent: u32,
    pub beta: f64,
    pub snapshots: bool,
}

impl Default for AttractorParams {
    fn default() -> Self {
        AttractorParams { target_t: 0.0, radius: 2.0, n_samples: 64, max_exponent: 8, beta: 0.25, snapshots: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckParams {
    pub scan_radius: f64,
    pub grid_points: usize,
    /// modulus exponent p and Hölder exponent β
    pub p: f64,
    pub beta: f64,
}

impl Default for CheckParams {
    fn default() -> Self {
        CheckParams { scan_radius: DEFAULT_SCAN_RADIUS, grid_points: DEFAULT_SCAN_POINTS, p: 2.0, beta: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhiParams {
    /// shift c; the barrier certificate's value when absent
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(rename = "C1", skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    pub points: usize,
}

impl Default for PhiParams {
    fn default() -> Self {
        PhiParams { c: None, c1: None, points: 201 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Solve(SolveParams),
    Roundtrip(RoundtripParams),
    Compare(CompareParams),
    Attractor(AttractorParams),
    Check(CheckParams),
    Phi(PhiParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Solve(_) => "solve",
            Experiment::Roundtrip(_) => "roundtrip",
            Experiment::Compare(_) => "compare",
            Experiment::Attractor(_) => "attractor",
            Experiment::Check(_) => "check",
            Experiment::Phi(_) => "phi",
        }
    }

    /// Default parameters for a subcommand name.
    pub fn default_for(kind: &str) -> Result<Experiment> {
        Ok(match kind {
            "solve" => Experiment::Solve(SolveParams::default()),
            "roundtrip" => Experiment::Roundtrip(RoundtripParams::default()),
            "compare" => Experiment::Compare(CompareParams::default()),
            "attractor" => Experiment::Attractor(AttractorParams::default()),
            "check" => Experiment::Check(CheckParams::default()),
            "phi" => Experiment::Phi(PhiParams::default()),
            other => return Err(Error::validation("experiment.kind", format!("a known experiment, not {other}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub solver: SolverConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub output: OutputConfig,
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(key, format!("{key} > 0")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        let s = &self.solver;
        positive("solver.dt", s.dt)?;
        positive("solver.tol", s.tol)?;
        if !(s.t_end > self.problem.sigma) || !s.t_end.is_finite() {
            return Err(Error::validation("solver.t_end", "t_end > sigma"));
        }
        if s.n_modes == 0 || s.n_modes > MAX_MODES {
            return Err(Error::validation("solver.n_modes", format!("1 ≤ n_modes ≤ {MAX_MODES}")));
        }
        if self.output.directory.is_empty() {
            return Err(Error::validation("output.directory", "a nonempty path"));
        }
        let n = s.n_modes;
        match &self.experiment {
            None => {}
            Some(Experiment::Solve(p)) => {
                p.w0.validate("experiment.w0", n)?;
                if p.store_every == 0 {
                    return Err(Error::validation("experiment.store_every", "store_every ≥ 1"));
                }
            }
            Some(Experiment::Roundtrip(p)) => p.w0.validate("experiment.w0", n)?,
            Some(Experiment::Compare(p)) => {
                p.w0.validate("experiment.w0", n)?;
                if !(p.offset >= 0.0) || !p.offset.is_finite() {
                    return Err(Error::validation("experiment.offset", "offset ≥ 0"));
                }
                positive("experiment.tolerance", p.tolerance)?;
            }
            Some(Experiment::Attractor(p)) => {
                if !p.target_t.is_finite() {
                    return Err(Error::validation("experiment.target_t", "a finite time"));
                }
                if !(p.radius >= 0.0) || !p.radius.is_finite() {
                    return Err(Error::validation("experiment.radius", "radius ≥ 0"));
                }
                if p.n_samples == 0 {
                    return Err(Error::validation("experiment.n_samples", "n_samples ≥ 1"));
                }
                if p.max_exponent > 20 {
                    return Err(Error::validation("experiment.max_exponent", "max_exponent ≤ 20"));
                }
                if !(p.beta > 0.0 && p.beta <= 0.5) {
                    return Err(Error::validation("experiment.beta", "0 < beta ≤ 1/2"));
                }
            }
            Some(Experiment::Check(p)) => {
                positive("experiment.scan_radius", p.scan_radius)?;
                if p.grid_points < 1000 {
                    return Err(Error::validation("experiment.grid_points", "grid_points ≥ 1000"));
                }
                positive("experiment.p", p.p)?;
                if !(p.beta > 0.0 && p.beta < 1.0) {
                    return Err(Error::validation("experiment.beta", "0 < beta < 1"));
                }
            }
            Some(Experiment::Phi(p)) => {
                if let Some(c) = p.c {
                    if !(c > -std::f64::consts::PI.powi(2)) || !c.is_finite() {
                        return Err(Error::validation("experiment.c", "c > -π²"));
                    }
                }
                if let Some(c1) = p.c1 {
                    if !(c1 >= 0.0) || !c1.is_finite() {
                        return Err(Error::validation("experiment.C1", "C1 ≥ 0"));
                    }
                }
                if p.points < 2 {
                    return Err(Error::validation("experiment.points", "points ≥ 2"));
                }
            }
        }
        Ok(())
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    // serde also builds structs from arrays; only an object is a document
    let start = text.trim_start();
    if !start.starts_with('{') {
        let line = 1 + text[..text.len() - start.len()].matches('\n').count();
        return Err(Error::Parse { line, key: String::new(), message: "expected a JSON object".into() });
    }
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let key = if path == "." { String::new() } else { path };
        let message = inner.to_string();
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        Error::Parse { line: inner.line(), key, message }
    })?;
    de.end().map_err(|e| Error::Parse { line: e.line(), key: String::new(), message: "trailing characters".into() })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Canonical JSON for a configuration; `parse_config` reads it back.
pub fn emit_config(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("configuration serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gets_defaults() {
        let c = parse_config("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.solver.n_modes, 64);
        assert_eq!(c.output.directory, "out");
    }

    #[test]
    fn diffusion_bounds_checked() {
        let e = parse_config(r#"{"problem": {"a": {"kind": "saturating", "m": 3, "M": 2}}}"#).unwrap_err();
        match e {
            Error::Validation { key, constraint } => {
                assert_eq!(key, "a.m");
                assert_eq!(constraint, "m ≤ M");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_names_path() {
        let e = parse_config("{\n  \"solver\": {\"dt\": 0.1,\n \"bogus\": 1}\n}").unwrap_err();
        match e {
            Error::Parse { line, key, .. } => {
                assert_eq!(key, "solver.bogus");
                assert_eq!(line, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn experiment_round_trip() {
        let text = r#"{"experiment": {"kind": "compare", "offset": 0.2}, "output": {"seed": 9}}"#;
        let c = parse_config(text).unwrap();
        assert_eq!(parse_config(&emit_config(&c)).unwrap(), c);
        assert!(parse_config(r#"{"experiment": {"kind": "compare", "nope": 1}}"#).is_err());
    }
}
