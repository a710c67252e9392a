//! Admissibility of the logarithmic modulus w(x) = (ln 1/x)^{-p}:
//! ∫_0^{t₀} u^{-1} w(u^β) du < ∞.
//!
//! With s = ln(1/u) the integral becomes β^{-p} ∫_{ln(1/t₀)}^∞ s^{-p} ds,
//! which is integrated over doubling segments; ε_i = exp(-s₀ 2^{i+1}) is the
//! matching sequence of lower cutoffs in the original variable.

use serde::{Deserialize, Serialize};

const SEGMENTS: usize = 60;
const PANELS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub p: f64,
    pub beta: f64,
    pub t0: f64,
    pub converges: bool,
    /// Partial integral plus geometric tail; infinite when divergent.
    pub estimate: f64,
    /// Ratio of the last two segment contributions.
    pub tail_ratio: f64,
    pub partial_sums: Vec<f64>,
}

pub fn check_modulus(p: f64, beta: f64) -> ModulusReport {
    check_modulus_on(p, beta, (-1f64).exp())
}

/// Integrate over (ε, t₀] for the cutoffs ε_i and decide convergence from
/// the decay of successive segment contributions.
pub fn check_modulus_on(p: f64, beta: f64, t0: f64) -> ModulusReport {
    assert!(t0 > 0.0 && t0 < 1.0, "t0 must lie in (0,1)");
    let s0 = (1.0 / t0).ln();
    let integrand = |s: f64| (beta * s).powf(-p);
    let mut partial = Vec::with_capacity(SEGMENTS);
    let mut pieces = Vec::with_capacity(SEGMENTS);
    let mut total = 0.0;
    for i in 0..SEGMENTS {
        let a = s0 * 2f64.powi(i as i32);
        let piece = simpson(&integrand, a, 2.0 * a);
        pieces.push(piece);
        total += piece;
        partial.push(total);
    }
    let r = pieces[SEGMENTS - 1] / pieces[SEGMENTS - 2];
    let converges = r < 1.0 - 1e-10;
    let estimate = if converges { total + pieces[SEGMENTS - 1] * r / (1.0 - r) } else { f64::INFINITY };
    ModulusReport { p, beta, t0, converges, estimate, tail_ratio: r, partial_sums: partial }
}

/// Composite Simpson in log s, where s^{-p} is smooth and slowly varying.
fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (la, lb) = (a.ln(), b.ln());
    let h = (lb - la) / PANELS as f64;
    let g = |y: f64| {
        let s = y.exp();
        f(s) * s
    };
    let mut acc = g(la) + g(lb);
    for i in 1..PANELS {
        let y = la + h * i as f64;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(y);
    }
    acc * h / 3.0
}
