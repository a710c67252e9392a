//! First-order exponential integrator
//! u_{n+1} = T(Δt) u_n + A^{-1}(I - T(Δt)) g(t_n, u_n).

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::spectral::SpectralField;

use super::{ForcingEval, Method, Status, StepWeights, Trajectory, BLOWUP_THRESHOLD};

#[derive(Debug, Clone)]
pub struct MarchOptions {
    pub blowup_threshold: f64,
    /// Stop with `MaxTimeReached` after this many steps.
    pub max_steps: Option<usize>,
    /// Keep every k-th state (the first and last are always kept).
    pub store_every: usize,
}

impl Default for MarchOptions {
    fn default() -> Self {
        MarchOptions { blowup_threshold: BLOWUP_THRESHOLD, max_steps: None, store_every: 1 }
    }
}

pub fn march(w0: &SpectralField, spec: &ProblemSpec, t_end: f64, dt: f64) -> Result<Trajectory> {
    march_with(w0, spec, t_end, dt, &MarchOptions::default())
}

pub fn march_with(
    w0: &SpectralField,
    spec: &ProblemSpec,
    t_end: f64,
    dt: f64,
    opts: &MarchOptions,
) -> Result<Trajectory> {
    march_from(w0, spec, spec.sigma, spec.sigma, t_end, dt, opts)
}

/// March from (t0, u0) with the clock already at `alpha0`.
pub fn march_from(
    u0: &SpectralField,
    spec: &ProblemSpec,
    t0: f64,
    alpha0: f64,
    t_end: f64,
    dt: f64,
    opts: &MarchOptions,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::domain("march", format!("dt {dt} must be positive")));
    }
    if !(t_end > t0) {
        return Err(Error::domain("march", format!("t_end {t_end} must exceed start {t0}")));
    }
    let basis = u0.basis().clone();
    let n = basis.n_modes();
    let w = StepWeights::new(&basis, 0.0, dt);
    let mut eval = ForcingEval::new(spec, &basis);

    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![u0.clone()],
        alpha_clock: vec![alpha0],
        status: Status::Completed,
        method: Method::March,
        dt,
        tol: 0.0,
        certificates: Vec::new(),
    };

    let mut u = u0.coeffs().to_vec();
    let mut g = vec![0.0; n];
    let mut t = t0;
    let mut alpha = alpha0;
    let mut a_now = eval.diffusion(&u);
    let mut steps = 0usize;
    let store_every = opts.store_every.max(1);

    loop {
        if opts.max_steps.is_some_and(|m| steps >= m) {
            traj.status = Status::MaxTimeReached;
            break;
        }
        let last = t + dt >= t_end - 1e-9 * dt;
        let clipped = last && (t_end - t - dt).abs() > 1e-9 * dt;
        eval.eval(&u, alpha, &mut g);
        let step = if clipped { t_end - t } else { dt };
        if clipped {
            let wc = StepWeights::new(&basis, 0.0, step);
            for k in 0..n {
                u[k] = wc.decay[k] * u[k] + wc.phi1[k] * g[k];
            }
        } else {
            for k in 0..n {
                u[k] = w.decay[k] * u[k] + w.phi1[k] * g[k];
            }
        }
        t = if last { t_end } else { t + dt };
        steps += 1;

        let finite = u.iter().all(|c| c.is_finite());
        let norm = if finite { basis.frac_norm_sq(&u, 0.5).sqrt() } else { f64::INFINITY };
        if !finite || norm > opts.blowup_threshold {
            if finite {
                alpha += 0.5 * step * (a_now + eval.diffusion(&u));
                traj.times.push(t);
                traj.states.push(SpectralField::new(&basis, u.clone())?);
                traj.alpha_clock.push(alpha);
            }
            traj.status = Status::BlownUp { t };
            break;
        }
        let a_next = eval.diffusion(&u);
        alpha += 0.5 * step * (a_now + a_next);
        a_now = a_next;
        if last || steps.is_multiple_of(store_every) {
            traj.times.push(t);
            traj.states.push(SpectralField::new(&basis, u.clone())?);
            traj.alpha_clock.push(alpha);
        }
        if last {
            break;
        }
    }
    if traj.status == Status::MaxTimeReached && *traj.times.last().unwrap() != t {
        traj.times.push(t);
        traj.states.push(SpectralField::new(&basis, u)?);
        traj.alpha_clock.push(alpha);
    }
    Ok(traj)
}
