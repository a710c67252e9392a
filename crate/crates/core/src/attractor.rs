//! Pullback absorption and attractor estimates for the process generated by
//! the nonautonomous problem, plus operational checks of the process axioms.
//!
//! The bounded set is a finite low-discrepancy sample of a ball in X^{1/2},
//! so every estimate here approximates the attractor from inside.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::problem::{solve_phi, ProblemSpec};
use crate::solver::{march, march_from, MarchOptions, Status, Trajectory};
use crate::spectral::{Basis, SpectralField};
use std::sync::Arc;

const SAMPLE_MODES: usize = 8;
const PRIMES: [u64; SAMPLE_MODES + 1] = [2, 3, 5, 7, 11, 13, 17, 19, 23];
/// Slack for the monotonicity audits; pullback runs converge to roundoff.
pub const MONOTONE_SLACK: f64 = 1e-10;

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// `n` fields in the X^{1/2}-ball of radius `radius`, supported on the first
/// eight modes: Halton points mapped to Gaussian directions (weighted by
/// μ_k^{-1/2}) and radii R·U^{1/8}.
pub fn sample_ball(basis: &Arc<Basis>, radius: f64, n: usize, seed: u64) -> Vec<SpectralField> {
    let normal = Normal::standard();
    let modes = SAMPLE_MODES.min(basis.n_modes());
    let mu = basis.eigenvalues();
    (0..n as u64)
        .map(|i| {
            let idx = seed.wrapping_mul(1_000_003).wrapping_add(i + 1);
            let mut c = vec![0.0; basis.n_modes()];
            for k in 0..modes {
                let u = radical_inverse(idx, PRIMES[k]).clamp(1e-12, 1.0 - 1e-12);
                c[k] = normal.inverse_cdf(u) / mu[k].sqrt();
            }
            let norm = basis.frac_norm_sq(&c, 0.5).sqrt();
            let r = radius * radical_inverse(idx, PRIMES[SAMPLE_MODES]).powf(1.0 / modes as f64);
            let s = if norm > 0.0 { r / norm } else { 0.0 };
            SpectralField::new(basis, c.into_iter().map(|v| v * s).collect()).expect("basis length")
        })
        .collect()
}

/// Symmetric Hausdorff distance in ‖·‖_{1/2} between finite sets.
pub fn hausdorff(a: &[SpectralField], b: &[SpectralField]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("hausdorff", "empty set"));
    }
    let one_sided = |x: &[SpectralField], y: &[SpectralField]| -> Result<f64> {
        let mut worst = 0.0f64;
        for p in x {
            let mut best = f64::INFINITY;
            for q in y {
                best = best.min(p.dist(q, 0.5)?);
            }
            worst = worst.max(best);
        }
        Ok(worst)
    };
    Ok(one_sided(a, b)?.max(one_sided(b, a)?))
}

/// M₁·C(K∞)·(λ₁/2)^{α-1}·Γ(1-α), the X^α radius of the absorbing set.
///
/// The shifted semigroup e^{-(A+c)t} has ‖A^α e^{-(A+c)t}‖ ≤ M t^{-α} e^{-λ₁t/2};
/// at the full rate λ₁ the constant would be infinite for α > 0.
pub fn absorbing_radius(spec: &ProblemSpec, alpha: f64) -> Result<f64> {
    if !(0.5..1.0).contains(&alpha) {
        return Err(Error::domain("absorbing_radius", format!("alpha {alpha} outside [1/2, 1)")));
    }
    let cert = spec.barrier();
    if !cert.satisfied_d || !(cert.lambda1 > 0.0) {
        return Err(Error::domain("absorbing_radius", "first eigenvalue of A + C₀ is not positive"));
    }
    let basis = Basis::new(64)?;
    let k_inf = solve_phi(&basis, cert.shift, cert.source)?.sup();
    let c = (spec.lambda * spec.f.sup_abs(k_inf + 1.0) + spec.k_bound()) / spec.m() + cert.shift.abs() * (k_inf + 1.0);
    if c == 0.0 {
        return Ok(0.0);
    }
    let rate = cert.lambda1 / 2.0;
    // sup_t t^α μ^α e^{-(μ + c - rate)t} = (αμ / (e(μ + c - rate)))^α per mode;
    // the ratio tends to 1 as μ grows.
    let e = std::f64::consts::E;
    let mut ratio = 1.0f64;
    for &mu in basis.eigenvalues() {
        ratio = ratio.max(mu / (mu + cert.shift - rate));
    }
    let m1 = (alpha * ratio / e).powf(alpha);
    Ok(m1 * c * rate.powf(alpha - 1.0) * gamma(1.0 - alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackOptions {
    pub target_t: f64,
    pub radius: f64,
    pub n_samples: usize,
    pub n_modes: usize,
    /// σ_j = target_t - 2^j for j in 0..=max_exponent
    pub max_exponent: u32,
    pub dt: f64,
    pub seed: u64,
    /// extra smoothness for the ‖·‖_{1/2+β} boundedness audit
    pub beta: f64,
}

impl Default for PullbackOptions {
    fn default() -> Self {
        PullbackOptions {
            target_t: 0.0,
            radius: 2.0,
            n_samples: 64,
            n_modes: 32,
            max_exponent: 8,
            dt: 5e-3,
            seed: 0,
            beta: 0.25,
        }
    }
}

impl PullbackOptions {
    pub fn schedule(&self) -> Vec<f64> {
        (0..=self.max_exponent).map(|j| self.target_t - 2f64.powi(j as i32)).collect()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AttractorReport {
    pub target_t: f64,
    pub pullback_times: Vec<f64>,
    /// sup over samples of the largest node value, per σ_j
    pub k_inf: Vec<f64>,
    /// sup over samples of ‖·‖_{1/2}, per σ_j
    pub k_alpha: Vec<f64>,
    /// sup over samples of ‖·‖_{1/2+β}, per σ_j
    pub k_alpha_beta: Vec<f64>,
    /// between the snapshots of σ_j and σ_{j+1}
    pub hausdorff_distances: Vec<f64>,
    pub phi_sup: f64,
    pub absorbing_radius: f64,
    /// max over snapshot members and nodes of |u| - φ
    pub barrier_excess: f64,
    pub n_samples: usize,
    pub radius: f64,
    pub dt: f64,
    /// Fields approximate the attractor from inside: they evolve a finite
    /// sample of the initial ball.
    pub sampled_from_inside: bool,
    #[serde(skip)]
    pub snapshots: Vec<Vec<SpectralField>>,
}

impl AttractorReport {
    /// K∞ estimates nonincreasing from index `from` on, within the slack.
    pub fn k_inf_nonincreasing_from(&self, from: usize) -> bool {
        self.k_inf.windows(2).skip(from).all(|w| w[1] <= w[0] + MONOTONE_SLACK)
    }

    pub fn hausdorff_nonincreasing_from(&self, from: usize) -> bool {
        self.hausdorff_distances.windows(2).skip(from).all(|w| w[1] <= w[0] + MONOTONE_SLACK)
    }
}

fn evolve(w0: &SpectralField, spec: &ProblemSpec, sigma: f64, target: f64, dt: f64) -> Result<SpectralField> {
    let mut s = spec.clone();
    s.sigma = sigma;
    let opts = MarchOptions { store_every: usize::MAX, ..MarchOptions::default() };
    let traj = crate::solver::march_with(w0, &s, target, dt, &opts)?;
    match traj.status {
        Status::Completed => Ok(traj.last_state().clone()),
        Status::BlownUp { t } => Err(Error::BlowUp { t }),
        Status::MaxTimeReached => Err(Error::domain("pullback_sweep", "step cap reached")),
    }
}

pub fn pullback_sweep(spec: &ProblemSpec, opts: &PullbackOptions) -> Result<AttractorReport> {
    let cert = spec.barrier();
    if !cert.satisfied_d {
        return Err(Error::domain("pullback_sweep", "structural certificate does not satisfy (D)"));
    }
    if opts.n_samples == 0 || !(opts.dt > 0.0) || !(opts.radius >= 0.0) {
        return Err(Error::domain("pullback_sweep", "need samples, dt > 0 and radius ≥ 0"));
    }
    let basis = Basis::new(opts.n_modes)?;
    let phi = solve_phi(&basis, cert.shift, cert.source)?;
    let phi_nodes = phi.node_values();
    let samples = sample_ball(&basis, opts.radius, opts.n_samples, opts.seed);
    let schedule = opts.schedule();

    let jobs: Vec<(usize, usize)> =
        (0..schedule.len()).flat_map(|j| (0..samples.len()).map(move |i| (j, i))).collect();
    let finals: Vec<Result<SpectralField>> = jobs
        .par_iter()
        .map(|&(j, i)| evolve(&samples[i], spec, schedule[j], opts.target_t, opts.dt))
        .collect();
    let mut snapshots: Vec<Vec<SpectralField>> = vec![Vec::with_capacity(samples.len()); schedule.len()];
    for (&(j, _), r) in jobs.iter().zip(finals) {
        snapshots[j].push(r?);
    }

    let mut report = AttractorReport {
        target_t: opts.target_t,
        pullback_times: schedule,
        phi_sup: phi.sup(),
        absorbing_radius: absorbing_radius(spec, 0.5)?,
        barrier_excess: f64::NEG_INFINITY,
        n_samples: opts.n_samples,
        radius: opts.radius,
        dt: opts.dt,
        sampled_from_inside: true,
        ..AttractorReport::default()
    };
    for snap in &snapshots {
        let mut k_inf = 0.0f64;
        let mut k_a = 0.0f64;
        let mut k_ab = 0.0f64;
        for s in snap {
            let vals = s.to_values();
            for (v, p) in vals.iter().zip(&phi_nodes) {
                k_inf = k_inf.max(v.abs());
                report.barrier_excess = report.barrier_excess.max(v.abs() - p);
            }
            k_a = k_a.max(s.norm_frac(0.5));
            k_ab = k_ab.max(s.norm_frac(0.5 + opts.beta));
        }
        report.k_inf.push(k_inf);
        report.k_alpha.push(k_a);
        report.k_alpha_beta.push(k_ab);
    }
    let distances: Vec<Result<f64>> = snapshots.par_windows(2).map(|w| hausdorff(&w[0], &w[1])).collect();
    report.hausdorff_distances = distances.into_iter().collect::<Result<_>>()?;
    report.snapshots = snapshots;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomsReport {
    /// (C1) runs completed out of the sampled (τ, z)
    pub c1_completed: usize,
    pub c1_total: usize,
    /// (C2) tail vs a solve from the tail's first state; the clock either
    /// restarts at the later time or carries the accumulated value
    pub c2_fresh_clock: f64,
    pub c2_carried_clock: f64,
    /// (C3) splice of two runs vs one run over the union
    pub c3_fresh_clock: f64,
    pub c3_carried_clock: f64,
    /// (C4) for w0_j = (1 + 1/j) w0: (j, sup over checkpoints of ‖u_j - u‖_{1/2})
    pub c4_errors: Vec<(usize, f64)>,
    /// log-log slope of the C4 errors against 1/j
    pub c4_rate: f64,
}

fn sup_dist(a: &Trajectory, b: &Trajectory, offset: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, s) in b.states.iter().enumerate() {
        worst = worst.max(a.states[offset + i].dist(s, 0.5)?);
    }
    Ok(worst)
}

/// Operational checks of (C1)-(C4) on the samples (τ_i, z_i) over `span`.
pub fn process_axioms_check(
    spec: &ProblemSpec,
    samples: &[(f64, SpectralField)],
    span: f64,
    dt: f64,
) -> Result<AxiomsReport> {
    if samples.is_empty() {
        return Err(Error::domain("process_axioms_check", "no samples"));
    }
    let steps = (span / dt).round() as usize;
    if steps < 4 || ((steps as f64) * dt - span).abs() > 1e-9 * span {
        return Err(Error::domain("process_axioms_check", "span must hold at least four whole steps of dt"));
    }
    let opts = MarchOptions::default();
    let runs: Vec<Result<Trajectory>> = samples
        .par_iter()
        .map(|(tau, z)| {
            let mut s = spec.clone();
            s.sigma = *tau;
            march(z, &s, tau + span, dt)
        })
        .collect();
    let mut report = AxiomsReport {
        c1_completed: 0,
        c1_total: samples.len(),
        c2_fresh_clock: 0.0,
        c2_carried_clock: 0.0,
        c3_fresh_clock: 0.0,
        c3_carried_clock: 0.0,
        c4_errors: Vec::new(),
        c4_rate: f64::NAN,
    };
    let mut first: Option<(Trajectory, f64)> = None;
    for ((tau, _), run) in samples.iter().zip(runs) {
        let Ok(traj) = run else { continue };
        if traj.status != Status::Completed {
            continue;
        }
        report.c1_completed += 1;
        let mid = steps / 2;
        let s_mid = traj.times[mid];
        let end = traj.final_time();
        // (C2)
        let mut fresh_spec = spec.clone();
        fresh_spec.sigma = s_mid;
        let fresh = march(&traj.states[mid], &fresh_spec, end, dt)?;
        let carried = march_from(&traj.states[mid], spec, s_mid, traj.alpha_clock[mid], end, dt, &opts)?;
        report.c2_fresh_clock = report.c2_fresh_clock.max(sup_dist(&traj, &fresh, mid)?);
        report.c2_carried_clock = report.c2_carried_clock.max(sup_dist(&traj, &carried, mid)?);
        // (C3): first half then a continuation, against the single run
        let mut head_spec = spec.clone();
        head_spec.sigma = *tau;
        let head = march(&traj.states[0], &head_spec, s_mid, dt)?;
        let splice_at = head.len() - 1;
        let tail_fresh = march(head.last_state(), &fresh_spec, end, dt)?;
        let tail_carried =
            march_from(head.last_state(), spec, s_mid, *head.alpha_clock.last().unwrap(), end, dt, &opts)?;
        report.c3_fresh_clock = report.c3_fresh_clock.max(sup_dist(&traj, &tail_fresh, splice_at)?);
        report.c3_carried_clock = report.c3_carried_clock.max(sup_dist(&traj, &tail_carried, splice_at)?);
        if first.is_none() {
            first = Some((traj, *tau));
        }
    }
    // (C4)
    if let Some((base, tau)) = first {
        let mut s = spec.clone();
        s.sigma = tau;
        let end = base.final_time();
        let js = [1usize, 2, 4, 8, 16, 32];
        let errs: Vec<Result<(usize, f64)>> = js
            .par_iter()
            .map(|&j| {
                let w = base.states[0].scale(1.0 + 1.0 / j as f64);
                let t = march(&w, &s, end, dt)?;
                Ok((j, sup_dist(&base, &t, 0)?))
            })
            .collect();
        report.c4_errors = errs.into_iter().collect::<Result<_>>()?;
        let pts: Vec<(f64, f64)> = report
            .c4_errors
            .iter()
            .filter(|(_, e)| *e > 0.0)
            .map(|(j, e)| ((1.0 / *j as f64).ln(), e.ln()))
            .collect();
        if pts.len() >= 2 {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            report.c4_rate = sxy / sxx;
        }
    }
    Ok(report)
}
