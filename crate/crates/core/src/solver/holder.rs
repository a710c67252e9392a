use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Trajectory;

const MAX_NODES: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub beta: f64,
    /// max ‖u(t+h) - u(t)‖_{1/2} t^β h^{-β} over node pairs with t > 0.1 T.
    pub constant: f64,
    /// Log-log slope of ‖u(t+h) - u(t)‖_{1/2} against h at t = T/2.
    pub slope: f64,
    pub pairs: usize,
}

/// Fit the constant in ‖u(t+h) - u(t)‖_{1/2} ≤ C t^{-β} h^{β}, with t measured
/// from the initial time.
pub fn holder_probe(traj: &Trajectory, beta: f64) -> Result<HolderReport> {
    if traj.len() < 32 {
        return Err(Error::domain("holder_probe", format!("need at least 32 nodes, got {}", traj.len())));
    }
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::domain("holder_probe", format!("beta {beta} outside (0, 1/2)")));
    }
    let t0 = traj.times[0];
    let span = traj.final_time() - t0;
    let stride = traj.len().div_ceil(MAX_NODES);
    let idx: Vec<usize> = (0..traj.len()).step_by(stride).collect();

    let mut constant = 0.0f64;
    let mut pairs = 0usize;
    for (a, &i) in idx.iter().enumerate() {
        let ti = traj.times[i] - t0;
        if ti <= 0.1 * span {
            continue;
        }
        for &j in &idx[a + 1..] {
            let h = traj.times[j] - traj.times[i];
            let d = traj.states[j].dist(&traj.states[i], 0.5)?;
            constant = constant.max(d * ti.powf(beta) * h.powf(-beta));
            pairs += 1;
        }
    }

    let base = traj.times.partition_point(|&t| t - t0 < 0.5 * span);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut k = 1usize;
    while base + k < traj.len() && xs.len() < 10 {
        let h = traj.times[base + k] - traj.times[base];
        let d = traj.states[base + k].dist(&traj.states[base], 0.5)?;
        if d > 0.0 {
            xs.push(h.ln());
            ys.push(d.ln());
        }
        k *= 2;
    }
    let slope = if xs.len() >= 2 {
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    Ok(HolderReport { beta, constant, slope, pairs })
}
