//! Time change between the semilinear problem in t and the quasilinear one in
//! τ = α(t). With w(τ) = u(t) and dα/dt = a(l(u)), the semilinear equation
//! becomes a(l(w)) w_τ = w_xx + (λf(w) + h(τ)) / a(l(w)).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pchip::Pchip;
use crate::problem::ProblemSpec;
use crate::solver::{forcing_g, march, Trajectory};
use crate::spectral::SpectralField;

/// Monotone interpolants of α and α⁻¹ through the trajectory's clock samples.
#[derive(Debug, Clone)]
pub struct ClockMap {
    pub t_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    forward: Pchip,
    inverse: Pchip,
}

impl ClockMap {
    pub fn alpha(&self, t: f64) -> f64 {
        self.forward.eval(t)
    }

    pub fn inverse(&self, tau: f64) -> f64 {
        self.inverse.eval(tau)
    }

    /// max |α⁻¹(α(t)) - t| over nodes and interval midpoints.
    pub fn roundtrip_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for w in self.t_grid.windows(2) {
            for t in [w[0], 0.5 * (w[0] + w[1])] {
                worst = worst.max((self.inverse(self.alpha(t)) - t).abs());
            }
        }
        worst
    }

    /// Smallest and largest slope of α⁻¹ at the knots.
    pub fn inverse_slope_range(&self) -> (f64, f64) {
        self.inverse.slopes().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)))
    }
}

pub fn build_clock(traj: &Trajectory) -> Result<ClockMap> {
    if traj.len() < 2 {
        return Err(Error::domain("build_clock", "trajectory needs at least two nodes"));
    }
    if traj.alpha_clock.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("build_clock", "clock samples are not strictly increasing"));
    }
    let t_grid = traj.times.clone();
    let tau_grid = traj.alpha_clock.clone();
    let forward = Pchip::new(t_grid.clone(), tau_grid.clone());
    let inverse = Pchip::new(tau_grid.clone(), t_grid.clone());
    Ok(ClockMap { t_grid, tau_grid, forward, inverse })
}

/// Discrete solution of the quasilinear problem on a uniform τ-grid.
#[derive(Debug, Clone)]
pub struct TauTrajectory {
    pub tau: Vec<f64>,
    /// α⁻¹(τ) for each grid point
    pub t: Vec<f64>,
    pub states: Vec<SpectralField>,
}

/// Linear interpolation of states on a strictly increasing grid.
fn interpolate(grid: &[f64], states: &[SpectralField], s: f64) -> SpectralField {
    let n = grid.len();
    let i = grid.partition_point(|&v| v <= s).clamp(1, n - 1);
    let (s0, s1) = (grid[i - 1], grid[i]);
    let th = ((s - s0) / (s1 - s0)).clamp(0.0, 1.0);
    if th == 0.0 {
        return states[i - 1].clone();
    }
    if th == 1.0 {
        return states[i].clone();
    }
    let c = states[i - 1].coeffs().iter().zip(states[i].coeffs()).map(|(a, b)| a + th * (b - a)).collect();
    SpectralField::new(states[i].basis(), c).expect("same basis")
}

pub fn to_quasilinear(traj: &Trajectory) -> Result<TauTrajectory> {
    to_quasilinear_with(traj, traj.len())
}

/// Resample u(α⁻¹(τ)) on `n_tau` uniform τ points over [σ, α(t_end)].
pub fn to_quasilinear_with(traj: &Trajectory, n_tau: usize) -> Result<TauTrajectory> {
    if n_tau < 2 {
        return Err(Error::domain("to_quasilinear", "need at least two τ points"));
    }
    let clock = build_clock(traj)?;
    let tau0 = clock.tau_grid[0];
    let tau1 = *clock.tau_grid.last().unwrap();
    let t_end = traj.final_time();
    let mut tau = Vec::with_capacity(n_tau);
    let mut t = Vec::with_capacity(n_tau);
    let mut states = Vec::with_capacity(n_tau);
    for j in 0..n_tau {
        let s = if j + 1 == n_tau { tau1 } else { tau0 + (tau1 - tau0) * j as f64 / (n_tau - 1) as f64 };
        let tj = if j == 0 {
            traj.times[0]
        } else if j + 1 == n_tau {
            t_end
        } else {
            clock.inverse(s)
        };
        tau.push(s);
        t.push(tj);
        states.push(interpolate(&traj.times, &traj.states, tj));
    }
    Ok(TauTrajectory { tau, t, states })
}

/// States of u recovered at the original times through τ = α(t).
pub fn from_quasilinear(q: &TauTrajectory, clock: &ClockMap, times: &[f64]) -> Vec<SpectralField> {
    times.iter().map(|&t| interpolate(&q.tau, &q.states, clock.alpha(t))).collect()
}

/// Largest X-norm residual over interior τ nodes, central differences in τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasilinearResidual {
    /// a w_τ - w_xx - (λf + h(τ))/a, the equation the time change produces
    pub induced: f64,
    /// w_τ - a w_xx - λf - h(τ), the divergence form read literally
    pub literal: f64,
}

pub fn quasilinear_residual(q: &TauTrajectory, spec: &ProblemSpec) -> Result<QuasilinearResidual> {
    let n = q.tau.len();
    if n < 3 {
        return Err(Error::domain("quasilinear_residual", "need at least three τ points"));
    }
    let basis = q.states[0].basis().clone();
    let mu = basis.eigenvalues();
    let mut induced = 0.0f64;
    let mut literal = 0.0f64;
    for i in 1..n - 1 {
        let w = &q.states[i];
        let a = spec.a.eval(spec.l.eval(&basis, w.coeffs()));
        let g = forcing_g(q.t[i], w, q.tau[i], spec);
        let span = q.tau[i + 1] - q.tau[i - 1];
        let (mut ri, mut rl) = (0.0, 0.0);
        for (k, &mu_k) in mu.iter().enumerate() {
            let wt = (q.states[i + 1].coeffs()[k] - q.states[i - 1].coeffs()[k]) / span;
            let lap = -mu_k * w.coeffs()[k];
            let r1 = a * wt - lap - g.coeffs()[k];
            let r2 = wt - a * lap - a * g.coeffs()[k];
            ri += r1 * r1;
            rl += r2 * r2;
        }
        induced = induced.max(ri.sqrt());
        literal = literal.max(rl.sqrt());
    }
    Ok(QuasilinearResidual { induced, literal })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    /// max over t-nodes of ‖roundtrip - original‖_{1/2}
    pub error: f64,
    pub clock_error: f64,
    pub residual: QuasilinearResidual,
    pub nodes: usize,
    /// α(t_end) - σ divided by t_end - σ; lies in [m, M]
    pub mean_rate: f64,
}

pub fn roundtrip_of(traj: &Trajectory, spec: &ProblemSpec) -> Result<RoundtripReport> {
    let clock = build_clock(traj)?;
    let q = to_quasilinear(traj)?;
    let back = from_quasilinear(&q, &clock, &traj.times);
    let mut error = 0.0f64;
    for (b, u) in back.iter().zip(&traj.states) {
        error = error.max(b.dist(u, 0.5)?);
    }
    let span = traj.final_time() - traj.times[0];
    Ok(RoundtripReport {
        error,
        clock_error: clock.roundtrip_error(),
        residual: quasilinear_residual(&q, spec)?,
        nodes: traj.len(),
        mean_rate: (traj.alpha_clock.last().unwrap() - traj.alpha_clock[0]) / span,
    })
}

/// Solve with the exponential march, go to τ-time and back.
pub fn roundtrip_check(w0: &SpectralField, spec: &ProblemSpec, t_end: f64, dt: f64) -> Result<RoundtripReport> {
    let traj = march(w0, spec, t_end, dt)?;
    roundtrip_of(&traj, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Diffusion, Nonlinearity, TimeForcing};
    use crate::spectral::Basis;

    #[test]
    fn unit_diffusion_is_identity() {
        let b = Basis::new(16).unwrap();
        let mut spec = ProblemSpec::default();
        spec.a = Diffusion::Constant { value: 1.0 };
        let w0 = SpectralField::mode(&b, 1, 0.5);
        let r = roundtrip_check(&w0, &spec, 0.2, 1e-3).unwrap();
        assert!(r.error < 1e-12, "{}", r.error);
        assert!(r.clock_error < 1e-12);
    }

    #[test]
    fn constant_rescaling() {
        let b = Basis::new(8).unwrap();
        let mut spec = ProblemSpec::heat();
        spec.a = Diffusion::Constant { value: 2.0 };
        let w0 = SpectralField::mode(&b, 1, 1.0);
        let traj = march(&w0, &spec, 0.1, 1e-3).unwrap();
        let clock = build_clock(&traj).unwrap();
        assert!((clock.alpha(0.05) - 0.1).abs() < 1e-12);
        let q = to_quasilinear(&traj).unwrap();
        for (tau, w) in q.tau.iter().zip(&q.states) {
            // w(τ) = u(τ/2) = e^{-π²τ/2} e₁
            let exact = (-std::f64::consts::PI.powi(2) * tau / 2.0).exp();
            assert!((w.coeffs()[0] - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn induced_residual_small_literal_not() {
        let b = Basis::new(8).unwrap();
        let mut spec = ProblemSpec::heat();
        spec.f = Nonlinearity::Linear { slope: 0.0 };
        spec.a = Diffusion::Constant { value: 2.0 };
        spec.h = TimeForcing::Zero;
        let w0 = SpectralField::mode(&b, 1, 1.0);
        let traj = march(&w0, &spec, 0.1, 1e-4).unwrap();
        let q = to_quasilinear(&traj).unwrap();
        let r = quasilinear_residual(&q, &spec).unwrap();
        assert!(r.induced < 1e-3, "{r:?}");
        assert!(r.literal > 1.0, "{r:?}");
    }
}
