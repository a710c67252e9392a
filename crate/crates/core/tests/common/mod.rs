//! Independent oracles shared by the integration tests. None of this code
//! goes through the library's transforms or integrators.

#![allow(dead_code)]

use std::f64::consts::PI;

use nonlocal_core::problem::ProblemSpec;

/// Truncated Galerkin system c' = -μc + P[(λf(u) + h(α))/a(l(u))], α' = a(l(u)),
/// integrated by classical RK4. P[λf(u)] uses the trapezoid rule on `quad`
/// uniform intervals, which is spectrally accurate for odd periodic
/// integrands; the constant h(α) is projected exactly.
pub struct GalerkinOracle<'a> {
    spec: &'a ProblemSpec,
    n: usize,
    quad: usize,
    // sin((k+1)π x_j) for interior x_j = j/quad
    table: Vec<f64>,
    mu: Vec<f64>,
    mean: Vec<f64>,
}

impl<'a> GalerkinOracle<'a> {
    pub fn new(spec: &'a ProblemSpec, n: usize, quad: usize) -> Self {
        let mut table = vec![0.0; n * (quad - 1)];
        for j in 1..quad {
            let x = j as f64 / quad as f64;
            for k in 0..n {
                table[(j - 1) * n + k] = 2f64.sqrt() * ((k + 1) as f64 * PI * x).sin();
            }
        }
        let mu = (1..=n).map(|k| (k as f64 * PI).powi(2)).collect();
        let mean = (1..=n)
            .map(|k| 2f64.sqrt() * (1.0 - (k as f64 * PI).cos()) / (k as f64 * PI))
            .collect();
        GalerkinOracle { spec, n, quad, table, mu, mean }
    }

    fn functional(&self, c: &[f64]) -> f64 {
        use nonlocal_core::problem::Functional;
        match self.spec.l {
            Functional::L2Squared => c.iter().map(|v| v * v).sum(),
            Functional::H1Squared => c.iter().zip(&self.mu).map(|(v, m)| m * v * v).sum(),
            Functional::AbsMean => c.iter().zip(&self.mean).map(|(v, m)| v * m).sum::<f64>().abs(),
        }
    }

    /// Right-hand side on (c, α).
    pub fn rhs(&self, c: &[f64], alpha: f64, dc: &mut [f64]) -> f64 {
        let a = self.spec.a.eval(self.functional(c));
        let h = self.spec.h.eval(alpha);
        let w = 1.0 / self.quad as f64;
        for d in dc.iter_mut() {
            *d = 0.0;
        }
        for j in 0..self.quad - 1 {
            let row = &self.table[j * self.n..(j + 1) * self.n];
            let u: f64 = row.iter().zip(c).map(|(s, v)| s * v).sum();
            let g = self.spec.lambda * self.spec.f.eval(u) / a;
            for k in 0..self.n {
                dc[k] += w * g * row[k];
            }
        }
        for k in 0..self.n {
            dc[k] += h / a * self.mean[k] - self.mu[k] * c[k];
        }
        a
    }

    /// States at each time in `checkpoints` (ascending, starting after σ).
    pub fn solve(&self, c0: &[f64], dt: f64, checkpoints: &[f64]) -> Vec<(Vec<f64>, f64)> {
        let n = self.n;
        let mut c = c0.to_vec();
        let mut alpha = self.spec.sigma;
        let mut t = self.spec.sigma;
        let mut out = Vec::new();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        for &target in checkpoints {
            let steps = ((target - t) / dt).round() as usize;
            let h = (target - t) / steps as f64;
            for _ in 0..steps {
                let a1 = self.rhs(&c, alpha, &mut k1);
                for i in 0..n {
                    tmp[i] = c[i] + 0.5 * h * k1[i];
                }
                let a2 = self.rhs(&tmp, alpha + 0.5 * h * a1, &mut k2);
                for i in 0..n {
                    tmp[i] = c[i] + 0.5 * h * k2[i];
                }
                let a3 = self.rhs(&tmp, alpha + 0.5 * h * a2, &mut k3);
                for i in 0..n {
                    tmp[i] = c[i] + h * k3[i];
                }
                let a4 = self.rhs(&tmp, alpha + h * a3, &mut k4);
                for i in 0..n {
                    c[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                alpha += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            }
            t = target;
            out.push((c.clone(), alpha));
        }
        out
    }
}

/// ‖c‖_{1/2} computed from its definition.
pub fn half_norm(c: &[f64]) -> f64 {
    c.iter().enumerate().map(|(k, v)| ((k + 1) as f64 * PI).powi(2) * v * v).sum::<f64>().sqrt()
}

pub fn half_dist(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    half_norm(&d)
}

/// Series Σ c_k √2 sin(kπx) evaluated directly.
pub fn eval_series(c: &[f64], x: f64) -> f64 {
    c.iter().enumerate().map(|(k, v)| v * 2f64.sqrt() * ((k + 1) as f64 * PI * x).sin()).sum()
}
