use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error in {op}: {message}")]
    Domain { op: &'static str, message: String },

    #[error("fields belong to different bases ({left} vs {right} modes)")]
    BasisMismatch { left: usize, right: usize },

    #[error("fixed-point iteration did not converge after {sweeps} sweeps (last change {last_change:.3e})")]
    NonConvergence { sweeps: usize, last_change: f64 },

    #[error("monotone iteration lost order at sweep {sweep}: excess {excess:.3e}")]
    OrderViolation { sweep: usize, excess: f64 },

    #[error("trajectory blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error("parse error at line {line} (key `{key}`): {message}")]
    Parse { line: usize, key: String, message: String },

    #[error("invalid value for `{key}`: requires {constraint}")]
    Validation { key: String, constraint: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(op: &'static str, message: impl Into<String>) -> Self {
        Error::Domain { op, message: message.into() }
    }

    pub(crate) fn validation(key: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Validation { key: key.into(), constraint: constraint.into() }
    }

    /// Short machine-readable tag used in error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain_error",
            Error::BasisMismatch { .. } => "basis_mismatch",
            Error::NonConvergence { .. } => "non_convergence",
            Error::OrderViolation { .. } => "order_violation",
            Error::BlowUp { .. } => "blown_up",
            Error::Parse { .. } => "parse_error",
            Error::Validation { .. } => "validation_error",
            Error::Io(_) => "io_error",
        }
    }
}

impl Error {
    /// Machine-readable form written by the command-line tool.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({ "error": self.kind(), "message": self.to_string() });
        let extra = match self {
            Error::Parse { line, key, .. } => serde_json::json!({ "line": line, "key": key }),
            Error::Validation { key, constraint } => serde_json::json!({ "key": key, "constraint": constraint }),
            Error::BlowUp { t } => serde_json::json!({ "t": t }),
            Error::NonConvergence { sweeps, last_change } => {
                serde_json::json!({ "sweeps": sweeps, "last_change": last_change })
            }
            Error::OrderViolation { sweep, excess } => serde_json::json!({ "sweep": sweep, "excess": excess }),
            _ => serde_json::json!({}),
        };
        if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
            obj.extend(more);
        }
        v
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
