//! Order-preservation machinery: the envelopes g⁻ ≤ g ≤ g⁺, ordered runs,
//! positivity, the φ barrier and the monotone iteration u_{n+1} = F_{u⁻}(u_n).
//!
//! Order is audited at the collocation nodes. Spectral truncation does not
//! preserve pointwise order exactly, so every audit carries a tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{monotonicity_shift, solve_phi, Diffusion, Nonlinearity, ProblemSpec, TimeForcing};
use crate::solver::{march, ForcingEval, Method, Status, StepWeights, Trajectory, DEFAULT_DT};
use crate::spectral::{Basis, SpectralField};

pub const DEFAULT_ORDER_TOL: f64 = 1e-6;
pub const MONOTONE_CAUCHY_TOL: f64 = 1e-8;
pub const MONOTONE_MAX_SWEEPS: usize = 100;

/// How the autonomous envelopes of g = (λf + h)/a are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    /// Divisor chosen by the sign of λf ∓ K, valid for every a ∈ [m, M].
    Sign,
    /// (λf - K)/M and (λf + K)/m regardless of sign.
    Fixed,
    /// Fixed envelopes with m and M exchanged; a negative control.
    Swapped,
}

fn envelope_spec(spec: &ProblemSpec, shift: f64, pos: f64, neg: f64) -> ProblemSpec {
    ProblemSpec {
        lambda: 1.0,
        sigma: spec.sigma,
        f: Nonlinearity::Envelope {
            inner: Box::new(spec.f.clone()),
            lambda: spec.lambda,
            shift,
            pos_divisor: pos,
            neg_divisor: neg,
        },
        a: Diffusion::Constant { value: 1.0 },
        l: spec.l,
        h: TimeForcing::Zero,
        structural: None,
    }
}

/// Autonomous (lower, upper) specs with a ≡ 1 and h ≡ 0 whose forcing brackets g.
pub fn sandwich_specs(spec: &ProblemSpec) -> (ProblemSpec, ProblemSpec) {
    sandwich_specs_with(spec, Envelope::Sign)
}

pub fn sandwich_specs_with(spec: &ProblemSpec, kind: Envelope) -> (ProblemSpec, ProblemSpec) {
    let (m, big) = spec.a.bounds();
    let k = spec.k_bound();
    match kind {
        Envelope::Sign => (envelope_spec(spec, -k, big, m), envelope_spec(spec, k, m, big)),
        Envelope::Fixed => (envelope_spec(spec, -k, big, big), envelope_spec(spec, k, m, m)),
        Envelope::Swapped => (envelope_spec(spec, -k, m, m), envelope_spec(spec, k, big, big)),
    }
}

/// Direct scan of γu + g⁻(u) ≤ γu + (λf(u) + h)/a ≤ γu + g⁺(u) over
/// u ∈ [-r, r], a ∈ [m, M] and h ∈ [-K, K].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichScan {
    pub radius: f64,
    pub gamma: f64,
    pub points: usize,
    pub violations: usize,
    /// smallest margin of either inequality; ≥ 0 when there are no violations
    pub min_margin: f64,
    /// the shifted envelopes γu + g±(u) are nondecreasing on the grid
    pub envelopes_increasing: bool,
}

pub fn sandwich_scan(spec: &ProblemSpec, radius: f64, points: usize, kind: Envelope) -> SandwichScan {
    let (lower, upper) = sandwich_specs_with(spec, kind);
    let (m, big) = spec.a.bounds();
    let k = spec.k_bound();
    let gamma = spec.lambda * monotonicity_shift(&spec.f, radius) / m;
    let a_samples: Vec<f64> = (0..=8).map(|i| m + (big - m) * i as f64 / 8.0).collect();
    let h_samples: Vec<f64> = (0..=8).map(|i| -k + 2.0 * k * i as f64 / 8.0).collect();
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    let mut increasing = true;
    let mut prev: Option<(f64, f64)> = None;
    let points = points.max(2);
    for i in 0..points {
        let u = -radius + 2.0 * radius * i as f64 / (points - 1) as f64;
        let lo = gamma * u + lower.f.eval(u);
        let hi = gamma * u + upper.f.eval(u);
        if let Some((pl, ph)) = prev {
            let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
            increasing &= lo >= pl - slack && hi >= ph - slack;
        }
        prev = Some((lo, hi));
        let fu = spec.lambda * spec.f.eval(u);
        for &a in &a_samples {
            for &h in &h_samples {
                let mid = gamma * u + (fu + h) / a;
                let margin = (mid - lo).min(hi - mid);
                let slack = 1e-12 * (1.0 + mid.abs());
                if margin < -slack {
                    violations += 1;
                }
                min_margin = min_margin.min(margin);
            }
        }
    }
    SandwichScan { radius, gamma, points, violations, min_margin, envelopes_increasing: increasing }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    #[serde(flatten)]
    pub status: Status,
    pub final_time: f64,
    pub max_half_norm: f64,
}

impl RunSummary {
    fn of(label: &str, traj: &Trajectory) -> Self {
        RunSummary {
            label: label.to_string(),
            status: traj.status,
            final_time: traj.final_time(),
            max_half_norm: traj.max_half_norm(),
        }
    }
}

/// Per stored time: smallest node value of upper - middle and middle - lower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub t: f64,
    pub upper_minus_middle: f64,
    pub middle_minus_lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub runs: Vec<RunSummary>,
    pub max_violation: f64,
    pub violation_count: usize,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub margins: Vec<Margin>,
}

fn check_ordered(lo: &SpectralField, hi: &SpectralField) -> Result<()> {
    let (a, b) = (lo.to_values(), hi.to_values());
    let scale = a.iter().chain(&b).fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if a.iter().zip(&b).any(|(x, y)| x - y > 1e-12 * scale) {
        return Err(Error::domain("compare_ordered", "initial data are not ordered at the nodes"));
    }
    Ok(())
}

pub fn compare_ordered(
    spec: &ProblemSpec,
    w0_low: &SpectralField,
    w0_mid: &SpectralField,
    w0_high: &SpectralField,
    t_end: f64,
) -> Result<ComparisonReport> {
    compare_ordered_with(spec, w0_low, w0_mid, w0_high, t_end, DEFAULT_DT, DEFAULT_ORDER_TOL, Envelope::Sign)
}

#[allow(clippy::too_many_arguments)]
pub fn compare_ordered_with(
    spec: &ProblemSpec,
    w0_low: &SpectralField,
    w0_mid: &SpectralField,
    w0_high: &SpectralField,
    t_end: f64,
    dt: f64,
    tol: f64,
    kind: Envelope,
) -> Result<ComparisonReport> {
    check_ordered(w0_low, w0_mid)?;
    check_ordered(w0_mid, w0_high)?;
    let (lower, upper) = sandwich_specs_with(spec, kind);
    let (lo, (mid, hi)) = rayon::join(
        || march(w0_low, &lower, t_end, dt),
        || rayon::join(|| march(w0_mid, spec, t_end, dt), || march(w0_high, &upper, t_end, dt)),
    );
    let (lo, mid, hi) = (lo?, mid?, hi?);
    let count = lo.len().min(mid.len()).min(hi.len());
    let mut margins = Vec::with_capacity(count);
    let mut max_violation = 0.0f64;
    let mut violation_count = 0;
    for i in 0..count {
        let (vl, vm, vh) = (lo.states[i].to_values(), mid.states[i].to_values(), hi.states[i].to_values());
        let mut um = f64::INFINITY;
        let mut ml = f64::INFINITY;
        for j in 0..vm.len() {
            let d1 = vh[j] - vm[j];
            let d2 = vm[j] - vl[j];
            violation_count += usize::from(d1 < -tol) + usize::from(d2 < -tol);
            um = um.min(d1);
            ml = ml.min(d2);
        }
        max_violation = max_violation.min(um).min(ml);
        margins.push(Margin { t: mid.times[i], upper_minus_middle: um, middle_minus_lower: ml });
    }
    let completed = [&lo, &mid, &hi].iter().all(|t| t.status == Status::Completed);
    Ok(ComparisonReport {
        runs: vec![RunSummary::of("lower", &lo), RunSummary::of("middle", &mid), RunSummary::of("upper", &hi)],
        max_violation,
        violation_count,
        tolerance: tol,
        passed: completed && max_violation >= -tol,
        margins,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub min_value: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(flatten)]
    pub status: Status,
}

/// Smallest node value over a run from w0 ≥ 0.
pub fn positivity_check(spec: &ProblemSpec, w0: &SpectralField, t_end: f64, dt: f64, tol: f64) -> Result<PositivityReport> {
    let start = w0.to_values();
    let scale = start.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if start.iter().any(|v| *v < -1e-12 * scale) {
        return Err(Error::domain("positivity_check", "initial datum is negative at a node"));
    }
    let traj = march(w0, spec, t_end, dt)?;
    let min_value = traj
        .states
        .iter()
        .flat_map(|s| s.to_values())
        .fold(f64::INFINITY, f64::min);
    Ok(PositivityReport {
        min_value,
        tolerance: tol,
        passed: traj.status == Status::Completed && min_value >= -tol,
        status: traj.status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub shift: f64,
    pub source: f64,
    pub phi_sup: f64,
    /// max over nodes and times of |u| - φ
    pub phi_excess: f64,
    /// max over nodes and times of |u| - w⁺
    pub majorant_excess: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(flatten)]
    pub status: Status,
}

/// Solution of w_t + (A + c)w = source from w⁺(0) = |w0|, evaluated at `times`.
pub fn linear_majorant(w0: &SpectralField, c: f64, source: f64, times: &[f64]) -> Result<Vec<SpectralField>> {
    let basis = w0.basis();
    let start = SpectralField::from_values(basis, &w0.to_values().iter().map(|v| v.abs()).collect::<Vec<_>>())?;
    let t0 = times.first().copied().unwrap_or(0.0);
    times
        .iter()
        .map(|&t| {
            let s = t - t0;
            let coeffs = start
                .coeffs()
                .iter()
                .zip(basis.eigenvalues())
                .zip(basis.constant_projection())
                .map(|((c0, mu), p)| {
                    let rate = mu + c;
                    let e = (-rate * s).exp();
                    e * c0 + (1.0 - e) / rate * source * p
                })
                .collect();
            SpectralField::new(basis, coeffs)
        })
        .collect()
}

/// Audit |u(t, x)| ≤ φ(x) and |u| ≤ w⁺ at every node and stored time.
pub fn barrier_check(spec: &ProblemSpec, w0: &SpectralField, t_end: f64, dt: f64, tol: f64) -> Result<BarrierReport> {
    let cert = spec.barrier();
    if !cert.satisfied_d {
        return Err(Error::domain("barrier_check", "structural certificate does not satisfy (D)"));
    }
    let phi = solve_phi(w0.basis(), cert.shift, cert.source)?;
    let phi_nodes = phi.node_values();
    let traj = march(w0, spec, t_end, dt)?;
    let majorant = linear_majorant(w0, cert.shift, cert.source, &traj.times)?;
    let mut phi_excess = f64::NEG_INFINITY;
    let mut majorant_excess = f64::NEG_INFINITY;
    for (s, w) in traj.states.iter().zip(&majorant) {
        for ((u, p), m) in s.to_values().iter().zip(&phi_nodes).zip(w.to_values()) {
            phi_excess = phi_excess.max(u.abs() - p);
            majorant_excess = majorant_excess.max(u.abs() - m);
        }
    }
    Ok(BarrierReport {
        shift: cert.shift,
        source: cert.source,
        phi_sup: phi.sup(),
        phi_excess,
        majorant_excess,
        tolerance: tol,
        passed: traj.status == Status::Completed && phi_excess <= tol && majorant_excess <= tol,
        status: traj.status,
    })
}

/// Shift k for the monotone iteration: γ = λk_f/m with k_f from
/// monotonicity_shift on the run's value range.
pub fn iteration_shift(spec: &ProblemSpec, radius: f64) -> f64 {
    spec.lambda * monotonicity_shift(&spec.f, radius) / spec.m()
}

/// One application of the shifted exponential-Euler map: from `start`,
/// u_{n+1} = e^{-(A+k)h} u_n + φ₁((A+k)h) [g(v_n) + k v_n] along `prev`.
/// With `prev = None` the map is applied to its own output (a march).
fn shifted_sweep(
    basis: &Basis,
    spec: &ProblemSpec,
    k: f64,
    times: &[f64],
    alpha0: f64,
    start: &[f64],
    prev: Option<&[Vec<f64>]>,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = basis.n_modes();
    let mut eval = ForcingEval::new(spec, basis);
    let mut out = Vec::with_capacity(times.len());
    let mut alphas = Vec::with_capacity(times.len());
    out.push(start.to_vec());
    alphas.push(alpha0);
    let mut step = f64::NAN;
    let mut w: Option<StepWeights> = None;
    let mut g = vec![0.0; n];
    let source = |i: usize, out: &Vec<Vec<f64>>| -> Vec<f64> {
        match prev {
            Some(p) => p[i].clone(),
            None => out[i].clone(),
        }
    };
    let mut v = source(0, &out);
    let mut a_prev = eval.diffusion(&v);
    for i in 0..times.len() - 1 {
        let h = times[i + 1] - times[i];
        if h != step {
            step = h;
            w = Some(StepWeights::new(basis, k, h));
        }
        let wt = w.as_ref().unwrap();
        eval.eval(&v, alphas[i], &mut g);
        let cur = &out[i];
        let next: Vec<f64> = (0..n).map(|j| wt.decay[j] * cur[j] + wt.phi1[j] * (g[j] + k * v[j])).collect();
        out.push(next);
        v = source(i + 1, &out);
        let a = eval.diffusion(&v);
        alphas.push(alphas[i] + 0.5 * h * (a_prev + a));
        a_prev = a;
    }
    (out, alphas)
}

/// Fixed point of F_{w0} on a uniform grid: the exponential march of
/// u_t + (A + k)u = g(u) + ku.
pub fn shifted_reference(w0: &SpectralField, spec: &ProblemSpec, k: f64, t_end: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end > spec.sigma) {
        return Err(Error::domain("shifted_reference", "need dt > 0 and t_end after sigma"));
    }
    if !(k >= 0.0) {
        return Err(Error::domain("shifted_reference", format!("shift {k} must be nonnegative")));
    }
    let steps = ((t_end - spec.sigma) / dt - 1e-9).ceil().max(1.0) as usize;
    let times: Vec<f64> = (0..=steps)
        .map(|i| if i == steps { t_end } else { spec.sigma + dt * i as f64 })
        .collect();
    let basis = w0.basis();
    let (states, alphas) = shifted_sweep(basis, spec, k, &times, spec.sigma, w0.coeffs(), None);
    Ok(Trajectory {
        times,
        states: states.into_iter().map(|c| SpectralField::new(basis, c)).collect::<Result<_>>()?,
        alpha_clock: alphas,
        status: Status::Completed,
        method: Method::March,
        dt,
        tol: 0.0,
        certificates: Vec::new(),
    })
}

#[derive(Debug, Clone)]
pub struct MonotoneResult {
    pub limit: Trajectory,
    pub sweeps: usize,
    /// largest node increase of an iterate over its predecessor
    pub max_increase: f64,
    /// sup-node change in the last sweep
    pub last_change: f64,
}

/// Iterate u_{j+1} = F_{u⁻}(u_j) seeded by `reference`. Each iterate must lie
/// below its predecessor at every node within `order_tol`.
pub fn monotone_iterate(
    u_minus: &SpectralField,
    reference: &Trajectory,
    spec: &ProblemSpec,
    k: f64,
    sweeps: usize,
) -> Result<MonotoneResult> {
    monotone_iterate_with(u_minus, reference, spec, k, sweeps, DEFAULT_ORDER_TOL, MONOTONE_CAUCHY_TOL)
}

pub fn monotone_iterate_with(
    u_minus: &SpectralField,
    reference: &Trajectory,
    spec: &ProblemSpec,
    k: f64,
    sweeps: usize,
    order_tol: f64,
    cauchy_tol: f64,
) -> Result<MonotoneResult> {
    if u_minus.basis().id() != reference.basis().id() {
        return Err(Error::BasisMismatch { left: u_minus.basis().n_modes(), right: reference.basis().n_modes() });
    }
    if !(k >= 0.0) {
        return Err(Error::domain("monotone_iterate", format!("shift {k} must be nonnegative")));
    }
    let start = u_minus.to_values();
    if start.iter().zip(reference.states[0].to_values()).any(|(a, b)| *a > b + order_tol) {
        return Err(Error::domain("monotone_iterate", "u_minus is not below the reference initial state"));
    }
    let basis = reference.basis().clone();
    let mut cur: Vec<Vec<f64>> = reference.states.iter().map(|s| s.coeffs().to_vec()).collect();
    let mut cur_vals: Vec<Vec<f64>> = cur.iter().map(|c| basis.values(c)).collect();
    let mut max_increase = f64::NEG_INFINITY;
    let mut change = f64::INFINITY;
    for sweep in 1..=sweeps {
        let (next, alphas) =
            shifted_sweep(&basis, spec, k, &reference.times, reference.alpha_clock[0], u_minus.coeffs(), Some(&cur));
        let next_vals: Vec<Vec<f64>> = next.iter().map(|c| basis.values(c)).collect();
        let mut increase = f64::NEG_INFINITY;
        change = 0.0;
        for (a, b) in next_vals.iter().zip(&cur_vals) {
            for (x, y) in a.iter().zip(b) {
                increase = increase.max(x - y);
                change = change.max((x - y).abs());
            }
        }
        max_increase = max_increase.max(increase);
        if increase > order_tol {
            return Err(Error::OrderViolation { sweep, excess: increase });
        }
        cur = next;
        cur_vals = next_vals;
        if change < cauchy_tol {
            let limit = Trajectory {
                times: reference.times.clone(),
                states: cur.into_iter().map(|c| SpectralField::new(&basis, c)).collect::<Result<_>>()?,
                alpha_clock: alphas,
                status: Status::Completed,
                method: reference.method,
                dt: reference.dt,
                tol: cauchy_tol,
                certificates: Vec::new(),
            };
            return Ok(MonotoneResult { limit, sweeps: sweep, max_increase, last_change: change });
        }
    }
    Err(Error::NonConvergence { sweeps, last_change: change })
}

/// monotone_iterate with k doubled after every order violation.
pub fn monotone_iterate_adaptive(
    u_minus: &SpectralField,
    reference: &Trajectory,
    spec: &ProblemSpec,
    k: f64,
    max_doublings: usize,
) -> Result<(MonotoneResult, f64)> {
    let mut k = k;
    let mut tries = 0;
    loop {
        match monotone_iterate(u_minus, reference, spec, k, MONOTONE_MAX_SWEEPS) {
            Ok(r) => return Ok((r, k)),
            Err(Error::OrderViolation { .. }) if tries < max_doublings => {
                k = if k > 0.0 { 2.0 * k } else { 1.0 };
                tries += 1;
            }
            Err(e) => return Err(e),
        }
    }
}
