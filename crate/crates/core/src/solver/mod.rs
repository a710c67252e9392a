//! Mild solutions of u' + Au = g(t, u), g = [λf(u) + h(α(t))] / a(l(u)),
//! with the clock α(t) = σ + ∫_σ^t a(l(u(r))) dr.

mod certificate;
mod holder;
mod march;
mod picard;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::spectral::{Basis, SpectralField};

pub use certificate::{best_certificate, local_existence_certificate, LocalExistenceCert};
pub use holder::{holder_probe, HolderReport};
pub use march::{march, march_from, march_with, MarchOptions};
pub use picard::{mild_defect, picard_solve, picard_solve_interval, PicardOptions};

pub const BLOWUP_THRESHOLD: f64 = 1e8;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Completed,
    BlownUp { t: f64 },
    MaxTimeReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Picard,
    March,
}

/// Time grid, states and accumulated clock of one solve.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub alpha_clock: Vec<f64>,
    pub status: Status,
    pub method: Method,
    /// Nominal step; Picard windows may use shorter steps.
    pub dt: f64,
    pub tol: f64,
    pub certificates: Vec<LocalExistenceCert>,
}

impl Trajectory {
    pub fn basis(&self) -> &Arc<Basis> {
        self.states[0].basis()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &SpectralField {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    /// Largest slope violation of m ≤ Δα/Δt ≤ M, relative to the step.
    pub fn clock_slope_excess(&self, m: f64, big_m: f64) -> f64 {
        let mut worst = 0.0f64;
        for i in 1..self.len() {
            let dt = self.times[i] - self.times[i - 1];
            let da = self.alpha_clock[i] - self.alpha_clock[i - 1];
            let slope = da / dt;
            worst = worst.max(m - slope).max(slope - big_m);
        }
        worst
    }

    /// State nearest to time t.
    pub fn state_near(&self, t: f64) -> &SpectralField {
        let i = self.times.partition_point(|&v| v < t).min(self.len() - 1);
        let i = if i > 0 && (t - self.times[i - 1]).abs() < (self.times[i] - t).abs() { i - 1 } else { i };
        &self.states[i]
    }

    /// Largest ‖·‖_{1/2} over the stored states.
    pub fn max_half_norm(&self) -> f64 {
        self.states.iter().fold(0.0, |m, s| m.max(s.norm_frac(0.5)))
    }
}

/// Evaluates g on coefficient slices, reusing a padded scratch buffer.
pub(crate) struct ForcingEval<'a> {
    spec: &'a ProblemSpec,
    basis: &'a Basis,
    pad: Vec<f64>,
    slope: Option<f64>,
}

impl<'a> ForcingEval<'a> {
    pub(crate) fn new(spec: &'a ProblemSpec, basis: &'a Basis) -> Self {
        ForcingEval { spec, basis, pad: vec![0.0; basis.padded_len()], slope: spec.f.linear_slope() }
    }

    pub(crate) fn diffusion(&self, coeffs: &[f64]) -> f64 {
        self.spec.a.eval(self.spec.l.eval(self.basis, coeffs))
    }

    /// Writes g(u) into `out` with h evaluated at the clock value `alpha`.
    pub(crate) fn eval(&mut self, coeffs: &[f64], alpha: f64, out: &mut [f64]) {
        let a = self.diffusion(coeffs);
        let lam = self.spec.lambda;
        match self.slope {
            Some(s) => {
                for (o, c) in out.iter_mut().zip(coeffs) {
                    *o = lam * s * c;
                }
            }
            None => {
                self.basis.synthesize_padded(coeffs, &mut self.pad);
                for v in self.pad.iter_mut() {
                    *v = lam * self.spec.f.eval(*v);
                }
                self.basis.analyze_padded(&self.pad, out);
            }
        }
        let h = self.spec.h.eval(alpha);
        let inv = 1.0 / a;
        for (o, p) in out.iter_mut().zip(self.basis.constant_projection()) {
            *o = (*o + h * p) * inv;
        }
    }
}

/// g(t, u) for the state u with accumulated clock value `alpha_t`.
pub fn forcing_g(_t: f64, u: &SpectralField, alpha_t: f64, spec: &ProblemSpec) -> SpectralField {
    let basis = u.basis();
    let mut out = vec![0.0; basis.n_modes()];
    ForcingEval::new(spec, basis).eval(u.coeffs(), alpha_t, &mut out);
    SpectralField::new(basis, out).expect("length matches basis")
}

/// Mode-wise exponential factors for a step Δ with rates μ_k + shift.
#[derive(Debug, Clone)]
pub(crate) struct StepWeights {
    pub decay: Vec<f64>,
    /// (1 - e^{-z}) / μ
    pub phi1: Vec<f64>,
    /// trapezoid weights on the left and right node
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl StepWeights {
    pub(crate) fn new(basis: &Basis, shift: f64, step: f64) -> Self {
        let n = basis.n_modes();
        let mut w = StepWeights { decay: vec![0.0; n], phi1: vec![0.0; n], left: vec![0.0; n], right: vec![0.0; n] };
        for (k, &mu) in basis.eigenvalues().iter().enumerate() {
            let z = (mu + shift) * step;
            let e = (-z).exp();
            w.decay[k] = e;
            if z < 1e-2 {
                let z2 = z * z;
                let z3 = z2 * z;
                let z4 = z2 * z2;
                w.phi1[k] = step * (1.0 - z / 2.0 + z2 / 6.0 - z3 / 24.0 + z4 / 120.0);
                w.left[k] = step * (0.5 - z / 3.0 + z2 / 8.0 - z3 / 30.0 + z4 / 144.0);
                w.right[k] = step * (0.5 - z / 6.0 + z2 / 24.0 - z3 / 120.0 + z4 / 720.0);
            } else {
                w.phi1[k] = step * (1.0 - e) / z;
                w.left[k] = step * (1.0 - e * (1.0 + z)) / (z * z);
                w.right[k] = step * (z - 1.0 + e) / (z * z);
            }
        }
        w
    }
}

/// Extend a completed (or step-capped) trajectory to `t_end` with the same
/// method and nominal step, re-issuing certificates from the endpoint.
pub fn continue_solution(traj: &Trajectory, spec: &ProblemSpec, t_end: f64) -> Result<Trajectory> {
    if matches!(traj.status, Status::BlownUp { .. }) {
        return Err(Error::domain("continue_solution", "cannot extend a trajectory that blew up"));
    }
    let t0 = traj.final_time();
    if !(t_end > t0) {
        return Err(Error::domain("continue_solution", format!("t_end {t_end} must exceed {t0}")));
    }
    let alpha0 = *traj.alpha_clock.last().expect("nonempty");
    let tail = match traj.method {
        Method::March => march::march_from(
            traj.last_state(),
            spec,
            t0,
            alpha0,
            t_end,
            traj.dt,
            &MarchOptions::default(),
        )?,
        Method::Picard => picard::picard_from(
            traj.last_state(),
            spec,
            t0,
            alpha0,
            t_end,
            traj.dt,
            &PicardOptions { tol: traj.tol, ..PicardOptions::default() },
        )?,
    };
    let mut out = traj.clone();
    out.times.extend_from_slice(&tail.times[1..]);
    out.states.extend_from_slice(&tail.states[1..]);
    out.alpha_clock.extend_from_slice(&tail.alpha_clock[1..]);
    out.certificates.extend(tail.certificates);
    out.status = tail.status;
    Ok(out)
}
