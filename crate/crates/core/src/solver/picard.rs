//! Fixed-point iteration of (Fu)(t) = T(t-σ)w₀ + ∫_σ^t T(t-s) g(s, u) ds on
//! certified windows. The convolution uses the exponentially weighted
//! trapezoid rule with exact e^{-μ_k Δ} factors, so forcing that is constant
//! in time is integrated exactly.

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::spectral::{Basis, SpectralField};

use super::certificate::{best_certificate, LocalExistenceCert};
use super::{ForcingEval, Method, Status, StepWeights, Trajectory, BLOWUP_THRESHOLD, DEFAULT_TOL};

const MIN_WINDOW_STEPS: usize = 8;

#[derive(Debug, Clone)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    pub blowup_threshold: f64,
    /// Retries with a halved window after non-convergence.
    pub max_halvings: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { tol: DEFAULT_TOL, max_sweeps: 200, blowup_threshold: BLOWUP_THRESHOLD, max_halvings: 20 }
    }
}

struct Window {
    states: Vec<Vec<f64>>,
    alphas: Vec<f64>,
}

fn clock(eval: &ForcingEval, states: &[Vec<f64>], alpha0: f64, h: f64, alphas: &mut Vec<f64>) {
    alphas.clear();
    alphas.push(alpha0);
    let mut a_prev = eval.diffusion(&states[0]);
    for s in &states[1..] {
        let a = eval.diffusion(s);
        let last = *alphas.last().unwrap();
        alphas.push(last + 0.5 * h * (a_prev + a));
        a_prev = a;
    }
}

fn picard_window(
    basis: &Basis,
    spec: &ProblemSpec,
    alpha0: f64,
    u0: &[f64],
    h: f64,
    steps: usize,
    opts: &PicardOptions,
) -> Result<Window> {
    let n = basis.n_modes();
    let w = StepWeights::new(basis, 0.0, h);
    let mut eval = ForcingEval::new(spec, basis);

    let mut free = vec![u0.to_vec()];
    for i in 0..steps {
        let next: Vec<f64> = free[i].iter().zip(&w.decay).map(|(c, e)| c * e).collect();
        free.push(next);
    }
    let mut cur = free.clone();
    let mut alphas = Vec::with_capacity(steps + 1);
    let mut g = vec![vec![0.0; n]; steps + 1];
    let mut change = f64::INFINITY;

    for _ in 0..opts.max_sweeps {
        clock(&eval, &cur, alpha0, h, &mut alphas);
        for i in 0..=steps {
            eval.eval(&cur[i], alphas[i], &mut g[i]);
        }
        let mut integral = vec![0.0; n];
        change = 0.0f64;
        for i in 0..steps {
            for k in 0..n {
                integral[k] = w.decay[k] * integral[k] + w.left[k] * g[i][k] + w.right[k] * g[i + 1][k];
            }
            let next: Vec<f64> = free[i + 1].iter().zip(&integral).map(|(a, b)| a + b).collect();
            let diff: Vec<f64> = next.iter().zip(&cur[i + 1]).map(|(a, b)| a - b).collect();
            change = change.max(basis.frac_norm_sq(&diff, 0.5).sqrt());
            cur[i + 1] = next;
        }
        if !change.is_finite() {
            break;
        }
        if change < opts.tol {
            clock(&eval, &cur, alpha0, h, &mut alphas);
            return Ok(Window { states: cur, alphas });
        }
    }
    Err(Error::NonConvergence { sweeps: opts.max_sweeps, last_change: change })
}

/// One certified window [σ, σ + T₁] split into `n_steps` uniform steps.
pub fn picard_solve(
    w0: &SpectralField,
    spec: &ProblemSpec,
    cert: &LocalExistenceCert,
    n_steps: usize,
    tol: f64,
) -> Result<Trajectory> {
    if n_steps < MIN_WINDOW_STEPS {
        return Err(Error::domain("picard_solve", format!("n_steps {n_steps} must be at least {MIN_WINDOW_STEPS}")));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("picard_solve", "tol must be positive"));
    }
    let basis = w0.basis();
    let h = cert.t1 / n_steps as f64;
    let opts = PicardOptions { tol, ..PicardOptions::default() };
    let win = picard_window(basis, spec, spec.sigma, w0.coeffs(), h, n_steps, &opts)?;
    let times = (0..=n_steps).map(|i| spec.sigma + h * i as f64).collect();
    Ok(Trajectory {
        times,
        states: win.states.into_iter().map(|c| SpectralField::new(basis, c)).collect::<Result<_>>()?,
        alpha_clock: win.alphas,
        status: Status::Completed,
        method: Method::Picard,
        dt: h,
        tol,
        certificates: vec![cert.clone()],
    })
}

/// Chain certified windows from σ to `t_end`. Windows hold whole steps of
/// `dt` when T₁ allows at least eight of them, otherwise eight steps of T₁/8.
pub fn picard_solve_interval(
    w0: &SpectralField,
    spec: &ProblemSpec,
    t_end: f64,
    dt: f64,
    opts: &PicardOptions,
) -> Result<Trajectory> {
    picard_from(w0, spec, spec.sigma, spec.sigma, t_end, dt, opts)
}

pub(crate) fn picard_from(
    u0: &SpectralField,
    spec: &ProblemSpec,
    t0: f64,
    alpha0: f64,
    t_end: f64,
    dt: f64,
    opts: &PicardOptions,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end > t0) {
        return Err(Error::domain("picard_solve_interval", "need dt > 0 and t_end after the start"));
    }
    let basis = u0.basis().clone();
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![u0.clone()],
        alpha_clock: vec![alpha0],
        status: Status::Completed,
        method: Method::Picard,
        dt,
        tol: opts.tol,
        certificates: Vec::new(),
    };
    let mut t = t0;
    let mut cell = 0usize;
    while t < t_end - 1e-12 * (t_end - t0) {
        let state = traj.last_state().clone();
        let cert = best_certificate(&state, spec)?;
        // next point of the grid t0 + k·dt strictly after t
        while t0 + cell as f64 * dt <= t + 1e-9 * dt {
            cell += 1;
        }
        let grid_next = (t0 + cell as f64 * dt).min(t_end);
        let (mut steps, mut h) = if cert.t1 >= dt && grid_next - t >= dt * (1.0 - 1e-9) {
            let whole = (cert.t1 / dt).floor() as usize;
            (whole.max(1), dt)
        } else {
            let len = cert.t1.min(grid_next - t);
            (MIN_WINDOW_STEPS, len / MIN_WINDOW_STEPS as f64)
        };
        if steps < MIN_WINDOW_STEPS && h == dt {
            h = dt * steps as f64 / MIN_WINDOW_STEPS as f64;
            steps = MIN_WINDOW_STEPS;
        }
        let remaining = t_end - t;
        if steps as f64 * h >= remaining * (1.0 - 1e-12) {
            steps = ((remaining / h) - 1e-9).ceil().max(1.0) as usize;
            h = remaining / steps as f64;
        }
        let alpha = *traj.alpha_clock.last().unwrap();
        let mut attempt = 0;
        let win = loop {
            match picard_window(&basis, spec, alpha, state.coeffs(), h, steps, opts) {
                Ok(w) => break w,
                Err(Error::NonConvergence { .. }) if attempt < opts.max_halvings => {
                    attempt += 1;
                    if steps >= 2 * MIN_WINDOW_STEPS {
                        steps /= 2;
                    } else {
                        h /= 2.0;
                    }
                }
                Err(e) => return Err(e),
            }
        };
        traj.certificates.push(cert);
        let window_end = t + h * steps as f64;
        let snap = if (window_end - t_end).abs() < 1e-9 * h {
            t_end
        } else {
            let k = ((window_end - t0) / dt).round();
            let g = t0 + k * dt;
            if (window_end - g).abs() < 1e-9 * dt { g } else { window_end }
        };
        for i in 1..=steps {
            let ti = if i == steps { snap } else { t + h * i as f64 };
            let c = &win.states[i];
            let norm = basis.frac_norm_sq(c, 0.5).sqrt();
            traj.times.push(ti);
            traj.states.push(SpectralField::new(&basis, c.clone())?);
            traj.alpha_clock.push(win.alphas[i]);
            if !norm.is_finite() || norm > opts.blowup_threshold {
                traj.status = Status::BlownUp { t: ti };
                return Ok(traj);
            }
        }
        t = *traj.times.last().unwrap();
    }
    Ok(traj)
}

/// max_n ‖u(t_n) - T(t_n - t_0)u(t_0) - Σ quadrature‖_{1/2}: how far the stored
/// states are from satisfying the discrete variation-of-constants formula.
pub fn mild_defect(traj: &Trajectory, spec: &ProblemSpec) -> f64 {
    let basis = traj.basis().clone();
    let n = basis.n_modes();
    let mut eval = ForcingEval::new(spec, &basis);
    let mut g_prev = vec![0.0; n];
    let mut g_next = vec![0.0; n];
    eval.eval(traj.states[0].coeffs(), traj.alpha_clock[0], &mut g_prev);
    let mut free = traj.states[0].coeffs().to_vec();
    let mut integral = vec![0.0; n];
    let mut worst = 0.0f64;
    let mut step = traj.times.get(1).map_or(0.0, |t| t - traj.times[0]);
    let mut w = StepWeights::new(&basis, 0.0, step);
    for i in 1..traj.len() {
        let h = traj.times[i] - traj.times[i - 1];
        if (h - step).abs() > 1e-14 * h {
            step = h;
            w = StepWeights::new(&basis, 0.0, h);
        }
        eval.eval(traj.states[i].coeffs(), traj.alpha_clock[i], &mut g_next);
        for k in 0..n {
            free[k] *= w.decay[k];
            integral[k] = w.decay[k] * integral[k] + w.left[k] * g_prev[k] + w.right[k] * g_next[k];
        }
        let diff: Vec<f64> =
            traj.states[i].coeffs().iter().zip(free.iter().zip(&integral)).map(|(u, (a, b))| u - a - b).collect();
        worst = worst.max(basis.frac_norm_sq(&diff, 0.5).sqrt());
        std::mem::swap(&mut g_prev, &mut g_next);
    }
    worst
}
