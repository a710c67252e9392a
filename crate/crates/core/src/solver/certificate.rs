use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_li;

use crate::error::{Error, Result};
use crate::problem::{embedding_constant, ProblemSpec};
use crate::spectral::{operator_constants, semigroup_apply, SpectralField};

/// Fractional power of the phase space X^{1/2}.
const ALPHA: f64 = 0.5;
/// Windows never exceed the horizon used for M_α.
const HORIZON: f64 = 1.0;

/// Radius ρ of the ball B_{ρ,a}(w₀), the forcing bound on it and the
/// existence time T₁ = min{a, ρ / (2 M_α N_a)}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalExistenceCert {
    pub rho: f64,
    #[serde(rename = "N_a")]
    pub n_a: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "M_alpha")]
    pub m_alpha: f64,
    pub omega: f64,
    pub a_window: f64,
    /// N_a M_α ∫_0^{T1} s^{-α} e^{-ωs} ds, never above ρ/2.
    pub quadrature: f64,
}

thread_local! {
    static CONSTANTS: RefCell<HashMap<usize, (f64, f64)>> = RefCell::new(HashMap::new());
}

fn constants(n: usize) -> (f64, f64) {
    CONSTANTS.with(|c| *c.borrow_mut().entry(n).or_insert_with(|| operator_constants(ALPHA, n)))
}

/// ∫_0^a s^{-α} e^{-ωs} ds = ω^{α-1} γ(1-α, ωa).
fn kernel_integral(a: f64, omega: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    omega.powf(ALPHA - 1.0) * gamma_li(1.0 - ALPHA, omega * a)
}

pub fn local_existence_certificate(w0: &SpectralField, spec: &ProblemSpec, rho: f64) -> Result<LocalExistenceCert> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain("local_existence_certificate", format!("rho {rho} must be positive")));
    }
    let norm = w0.norm_frac(ALPHA);
    if !norm.is_finite() {
        return Err(Error::domain("local_existence_certificate", "initial datum has no finite X^{1/2} norm"));
    }
    let (m_alpha, omega) = constants(w0.basis().n_modes());
    let r_inf = embedding_constant() * (norm + rho);
    let n_a = (spec.lambda * spec.f.sup_abs(r_inf) + spec.k_bound()) / spec.m();

    let fits = |a: f64| -> bool {
        let moved = semigroup_apply(w0, a, 0.0).and_then(|v| v.dist(w0, ALPHA)).unwrap_or(f64::INFINITY);
        moved <= rho / 2.0 && n_a * m_alpha * kernel_integral(a, omega) <= rho / 2.0
    };
    let a_window = if fits(HORIZON) {
        HORIZON
    } else {
        let (mut lo, mut hi) = (0.0, HORIZON);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if fits(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let t1 = if n_a > 0.0 { a_window.min(rho / (2.0 * m_alpha * n_a)) } else { a_window };
    if !(t1 > 0.0) {
        return Err(Error::domain("local_existence_certificate", "empty existence window"));
    }
    Ok(LocalExistenceCert {
        rho,
        n_a,
        t1,
        m_alpha,
        omega,
        a_window,
        quadrature: n_a * m_alpha * kernel_integral(t1, omega),
    })
}

/// Certificate with the longest T₁ over ρ = 2^k, k = -8..4.
pub fn best_certificate(w0: &SpectralField, spec: &ProblemSpec) -> Result<LocalExistenceCert> {
    let mut best: Option<LocalExistenceCert> = None;
    for k in -8..=4 {
        let c = local_existence_certificate(w0, spec, 2f64.powi(k))?;
        if best.as_ref().is_none_or(|b| c.t1 > b.t1) {
            best = Some(c);
        }
    }
    Ok(best.expect("at least one radius"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Basis;

    #[test]
    fn zero_forcing_uses_whole_window() {
        let b = Basis::new(16).unwrap();
        let c = local_existence_certificate(&SpectralField::zeros(&b), &ProblemSpec::heat(), 1.0).unwrap();
        assert_eq!(c.n_a, 0.0);
        assert_eq!(c.t1, c.a_window);
    }

    #[test]
    fn kernel_integral_small_a() {
        // ∫_0^a s^{-1/2} ds ≈ 2√a for ωa ≪ 1
        let a = 1e-8;
        assert!((kernel_integral(a, 1.0) - 2.0 * a.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn larger_ball_never_lowers_bound() {
        let b = Basis::new(16).unwrap();
        let w0 = SpectralField::mode(&b, 1, 1.0);
        let spec = ProblemSpec::default();
        let c1 = local_existence_certificate(&w0, &spec, 0.5).unwrap();
        let c2 = local_existence_certificate(&w0, &spec, 1.0).unwrap();
        assert!(c2.n_a >= c1.n_a);
        assert!(c1.quadrature <= c1.rho / 2.0 * (1.0 + 1e-12));
    }
}
