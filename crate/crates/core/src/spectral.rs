//! Diagonal realization of A = -d²/dx² on (0,1) with Dirichlet conditions.
//!
//! Fields are stored as coefficients against the orthonormal eigenfunctions
//! e_k(x) = √2 sin(kπx), so A, its fractional powers and the heat semigroup
//! all act mode by mode. Collocation uses the interior nodes x_j = j/(n+1),
//! where the sine matrix is a type-I discrete sine transform.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

static NEXT_BASIS_ID: AtomicU64 = AtomicU64::new(1);

/// Number of log-spaced times used when maximizing over t in `operator_constants`.
const CONSTANT_GRID: usize = 4000;

/// Sine eigenbasis with its collocation tables.
#[derive(Debug)]
pub struct Basis {
    id: u64,
    n: usize,
    eigenvalues: Vec<f64>,
    nodes: Vec<f64>,
    // row j, column k: √2 sin((k+1)π x_j)
    synth: Vec<f64>,
    pad: usize,
    pad_nodes: Vec<f64>,
    // padded synthesis, pad × n
    pad_synth: Vec<f64>,
    // padded analysis truncated to n modes, n × pad
    pad_analysis: Vec<f64>,
    constant: Vec<f64>,
}

impl Basis {
    /// Build the basis for `n_modes` modes. Nonlinear terms are evaluated on
    /// ceil(3n/2) padded nodes.
    pub fn new(n_modes: usize) -> Result<Arc<Basis>> {
        if n_modes == 0 {
            return Err(Error::domain("Basis::new", "n_modes must be positive"));
        }
        let n = n_modes;
        let eigenvalues = (1..=n).map(|k| (k as f64 * PI).powi(2)).collect();
        let nodes = (1..=n).map(|j| j as f64 / (n + 1) as f64).collect();
        let synth = sine_table(n, n);

        let pad = (3 * n).div_ceil(2);
        let pad_nodes = (1..=pad).map(|j| j as f64 / (pad + 1) as f64).collect();
        let pad_synth = sine_table(pad, n);
        let scale = 1.0 / (pad + 1) as f64;
        let mut pad_analysis = vec![0.0; n * pad];
        for k in 0..n {
            for j in 0..pad {
                pad_analysis[k * pad + j] = pad_synth[j * n + k] * scale;
            }
        }

        let constant = (1..=n)
            .map(|k| if k % 2 == 1 { 2.0 * 2f64.sqrt() / (k as f64 * PI) } else { 0.0 })
            .collect();

        Ok(Arc::new(Basis {
            id: NEXT_BASIS_ID.fetch_add(1, Ordering::Relaxed),
            n,
            eigenvalues,
            nodes,
            synth,
            pad,
            pad_nodes,
            pad_synth,
            pad_analysis,
            constant,
        }))
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    /// μ_k = (kπ)², k = 1..n.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn padded_len(&self) -> usize {
        self.pad
    }

    pub fn padded_nodes(&self) -> &[f64] {
        &self.pad_nodes
    }

    /// Exact sine coefficients of the constant function 1.
    pub fn constant_projection(&self) -> &[f64] {
        &self.constant
    }

    /// Node values from coefficients.
    pub fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        matvec(&self.synth, self.n, coeffs, out);
    }

    /// Coefficients from node values; inverse of `synthesize`.
    pub fn analyze(&self, values: &[f64], out: &mut [f64]) {
        let n = self.n;
        let scale = 1.0 / (n + 1) as f64;
        for (k, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, v) in values.iter().enumerate() {
                s += self.synth[j * n + k] * v;
            }
            *o = s * scale;
        }
    }

    /// Values on the padded grid of a field given by n coefficients.
    pub fn synthesize_padded(&self, coeffs: &[f64], out: &mut [f64]) {
        matvec(&self.pad_synth, self.n, coeffs, out);
    }

    /// First n sine coefficients of padded-grid values.
    pub fn analyze_padded(&self, values: &[f64], out: &mut [f64]) {
        matvec(&self.pad_analysis, self.pad, values, out);
    }

    pub fn values(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.synthesize(coeffs, &mut out);
        out
    }

    pub fn coefficients(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.analyze(values, &mut out);
        out
    }

    /// Squared fractional norm Σ μ_k^{2α} c_k².
    pub fn frac_norm_sq(&self, coeffs: &[f64], alpha: f64) -> f64 {
        if alpha == 0.0 {
            return coeffs.iter().map(|c| c * c).sum();
        }
        if alpha == 0.5 {
            return coeffs.iter().zip(&self.eigenvalues).map(|(c, m)| m * c * c).sum();
        }
        coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, m)| m.powf(2.0 * alpha) * c * c)
            .sum()
    }
}

fn sine_table(rows: usize, cols: usize) -> Vec<f64> {
    let h = 1.0 / (rows + 1) as f64;
    let mut t = vec![0.0; rows * cols];
    for j in 0..rows {
        for k in 0..cols {
            // reduce the angle before sin to keep the table accurate for large k·j
            let p = ((k + 1) * (j + 1)) % (2 * (rows + 1));
            t[j * cols + k] = 2f64.sqrt() * (PI * p as f64 * h).sin();
        }
    }
    t
}

fn matvec(m: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (row, o) in m.chunks_exact(cols).zip(out.iter_mut()) {
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// A function on (0,1) in the sine eigenbasis.
#[derive(Debug, Clone)]
pub struct SpectralField {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.basis.id == other.basis.id && self.coeffs == other.coeffs
    }
}

impl SpectralField {
    pub fn new(basis: &Arc<Basis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.n {
            return Err(Error::BasisMismatch { left: coeffs.len(), right: basis.n });
        }
        Ok(SpectralField { basis: basis.clone(), coeffs })
    }

    pub fn zeros(basis: &Arc<Basis>) -> Self {
        SpectralField { basis: basis.clone(), coeffs: vec![0.0; basis.n] }
    }

    /// amplitude · e_k (k is 1-based).
    pub fn mode(basis: &Arc<Basis>, k: usize, amplitude: f64) -> Self {
        let mut f = Self::zeros(basis);
        if (1..=basis.n).contains(&k) {
            f.coeffs[k - 1] = amplitude;
        }
        f
    }

    pub fn from_values(basis: &Arc<Basis>, values: &[f64]) -> Result<Self> {
        if values.len() != basis.n {
            return Err(Error::BasisMismatch { left: values.len(), right: basis.n });
        }
        Ok(SpectralField { basis: basis.clone(), coeffs: basis.coefficients(values) })
    }

    /// Interpolate a pointwise function at the collocation nodes.
    pub fn from_fn(basis: &Arc<Basis>, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = basis.nodes.iter().map(|&x| f(x)).collect();
        SpectralField { basis: basis.clone(), coeffs: basis.coefficients(&values) }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn to_values(&self) -> Vec<f64> {
        self.basis.values(&self.coeffs)
    }

    /// Evaluate the truncated series at an arbitrary point.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * 2f64.sqrt() * ((k + 1) as f64 * PI * x).sin())
            .sum()
    }

    /// ‖u‖_X, the L² norm.
    pub fn norm_x(&self) -> f64 {
        self.norm_frac(0.0)
    }

    /// ‖u‖_α = ‖A^α u‖_X.
    pub fn norm_frac(&self, alpha: f64) -> f64 {
        self.basis.frac_norm_sq(&self.coeffs, alpha).sqrt()
    }

    /// Largest absolute value over the collocation nodes.
    pub fn sup_nodes(&self) -> f64 {
        self.to_values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check(&self, other: &SpectralField) -> Result<()> {
        if self.basis.id != other.basis.id {
            return Err(Error::BasisMismatch { left: self.basis.n, right: other.basis.n });
        }
        Ok(())
    }

    /// self + s·other
    pub fn axpy(&self, s: f64, other: &SpectralField) -> Result<SpectralField> {
        self.check(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + s * b).collect();
        Ok(SpectralField { basis: self.basis.clone(), coeffs })
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, s: f64) -> SpectralField {
        SpectralField { basis: self.basis.clone(), coeffs: self.coeffs.iter().map(|c| s * c).collect() }
    }

    /// ‖self - other‖_α
    pub fn dist(&self, other: &SpectralField, alpha: f64) -> Result<f64> {
        Ok(self.sub(other)?.norm_frac(alpha))
    }
}

pub fn to_values(u: &SpectralField) -> Vec<f64> {
    u.to_values()
}

pub fn from_values(basis: &Arc<Basis>, values: &[f64]) -> Result<SpectralField> {
    SpectralField::from_values(basis, values)
}

/// A^{αfrac} T(t) u, acting diagonally.
pub fn semigroup_apply(u: &SpectralField, t: f64, alpha_frac: f64) -> Result<SpectralField> {
    if !(0.0..=1.0).contains(&alpha_frac) {
        return Err(Error::domain("semigroup_apply", format!("fractional power {alpha_frac} outside [0,1]")));
    }
    if t < 0.0 || !t.is_finite() {
        return Err(Error::domain("semigroup_apply", format!("time {t} must be finite and nonnegative")));
    }
    if t == 0.0 && alpha_frac > 0.0 {
        return Err(Error::domain("semigroup_apply", "t = 0 requires fractional power 0"));
    }
    let coeffs = u
        .coeffs
        .iter()
        .zip(u.basis.eigenvalues())
        .map(|(c, &mu)| {
            let p = if alpha_frac == 0.0 { 1.0 } else { mu.powf(alpha_frac) };
            p * (-mu * t).exp() * c
        })
        .collect();
    Ok(SpectralField { basis: u.basis.clone(), coeffs })
}

/// (A + cI)^{-1} u.
pub fn apply_resolvent_shifted(u: &SpectralField, c: f64) -> Result<SpectralField> {
    if c <= -PI * PI || !c.is_finite() {
        return Err(Error::domain("apply_resolvent_shifted", format!("shift {c} must exceed -π²")));
    }
    let coeffs = u.coeffs.iter().zip(u.basis.eigenvalues()).map(|(v, mu)| v / (mu + c)).collect();
    Ok(SpectralField { basis: u.basis.clone(), coeffs })
}

/// Semigroup constants (M_α, ω) with ‖A^α T(t)‖ ≤ M_α t^{-α} e^{-ωt} for 0 < t ≤ 1.
///
/// ω = μ₁. For α > 0 the supremum over all t > 0 is infinite (the first mode
/// contributes μ₁^α t^α), so the maximization runs over (0, 1]; every window
/// built from these constants is capped at length 1.
pub fn operator_constants(alpha_frac: f64, n_modes: usize) -> (f64, f64) {
    operator_constants_on(alpha_frac, n_modes, 1.0)
}

pub fn operator_constants_on(alpha_frac: f64, n_modes: usize, horizon: f64) -> (f64, f64) {
    let omega = PI * PI;
    if alpha_frac == 0.0 {
        return (1.0, omega);
    }
    let mu_max = (n_modes as f64 * PI).powi(2);
    let lo = (1e-4 / mu_max).ln();
    let hi = horizon.ln();
    let mut best = 0.0f64;
    for i in 0..CONSTANT_GRID {
        let t = (lo + (hi - lo) * i as f64 / (CONSTANT_GRID - 1) as f64).exp();
        let mut m = 0.0f64;
        for k in 1..=n_modes {
            let mu = (k as f64 * PI).powi(2);
            m = m.max(mu.powf(alpha_frac) * (-(mu - omega) * t).exp());
        }
        best = best.max(t.powf(alpha_frac) * m);
    }
    (1.05 * best, omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_mode_values() {
        let b = Basis::new(16).unwrap();
        let u = SpectralField::mode(&b, 1, 1.0);
        for (v, x) in u.to_values().iter().zip(b.nodes()) {
            assert!((v - 2f64.sqrt() * (PI * x).sin()).abs() < 1e-14);
        }
        assert!(SpectralField::zeros(&b).to_values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn roundtrip_transform() {
        let b = Basis::new(64).unwrap();
        let c: Vec<f64> = (0..64).map(|k| ((k * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let back = b.coefficients(&b.values(&c));
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, r) in c.iter().zip(&back) {
            assert!((a - r).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn padded_projection_is_exact_for_band_limited_data() {
        let b = Basis::new(12).unwrap();
        let c: Vec<f64> = (0..12).map(|k| 1.0 / (k + 1) as f64).collect();
        let mut vals = vec![0.0; b.padded_len()];
        b.synthesize_padded(&c, &mut vals);
        let mut back = vec![0.0; 12];
        b.analyze_padded(&vals, &mut back);
        for (a, r) in c.iter().zip(&back) {
            assert!((a - r).abs() < 1e-13);
        }
    }

    #[test]
    fn semigroup_examples() {
        let b = Basis::new(8).unwrap();
        let e1 = SpectralField::mode(&b, 1, 1.0);
        let out = semigroup_apply(&e1, 1.0 / (PI * PI), 0.0).unwrap();
        assert!((out.coeffs()[0] - (-1f64).exp()).abs() < 1e-15);

        let e3 = SpectralField::mode(&b, 3, 1.0);
        let out = semigroup_apply(&e3, 0.01, 0.5).unwrap();
        let expect = 3.0 * PI * (-(3.0 * PI).powi(2) * 0.01).exp();
        assert!((out.coeffs()[2] - expect).abs() < 1e-13 * expect);

        assert!(semigroup_apply(&e1, 0.0, 0.5).is_err());
        assert!(semigroup_apply(&e1, 0.0, 0.0).is_ok());
    }

    #[test]
    fn resolvent_examples() {
        let b = Basis::new(4).unwrap();
        let e1 = SpectralField::mode(&b, 1, 1.0);
        let p2 = PI * PI;
        assert!((apply_resolvent_shifted(&e1, 0.0).unwrap().coeffs()[0] - 1.0 / p2).abs() < 1e-15);
        assert!((apply_resolvent_shifted(&e1, p2).unwrap().coeffs()[0] - 1.0 / (2.0 * p2)).abs() < 1e-15);
        assert!((apply_resolvent_shifted(&e1, -p2 / 2.0).unwrap().coeffs()[0] - 2.0 / p2).abs() < 1e-15);
        assert!(apply_resolvent_shifted(&e1, -p2).is_err());
    }

    #[test]
    fn constant_projection_matches_quadrature() {
        let b = Basis::new(9).unwrap();
        let m = 20_000;
        for k in 1..=9 {
            let f = |x: f64| 2f64.sqrt() * (k as f64 * PI * x).sin();
            let h = 1.0 / m as f64;
            let mut s = f(0.0) + f(1.0);
            for i in 1..m {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
            }
            assert!((s * h / 3.0 - b.constant_projection()[k - 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn operator_constant_alpha_zero_is_one() {
        let (m, w) = operator_constants(0.0, 64);
        assert_eq!(m, 1.0);
        assert_eq!(w, PI * PI);
    }

    #[test]
    fn mixing_bases_is_rejected() {
        let a = Basis::new(8).unwrap();
        let b = Basis::new(8).unwrap();
        let u = SpectralField::mode(&a, 1, 1.0);
        let v = SpectralField::mode(&b, 1, 1.0);
        assert!(matches!(u.add(&v), Err(Error::BasisMismatch { .. })));
        assert!(u.add(&u).is_ok());
    }
}
