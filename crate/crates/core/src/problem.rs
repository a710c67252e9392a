//! Catalogs for f, a, l, h and the structural machinery built on them:
//! sign-condition certificates, the pointwise barrier φ, embedding and
//! monotonicity constants.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{apply_resolvent_shifted, Basis, SpectralField};

pub const DEFAULT_SCAN_RADIUS: f64 = 10.0;
pub const DEFAULT_SCAN_POINTS: usize = 100_000;

/// Reaction term f.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    /// u - u³
    ChafeeInfante,
    Linear { slope: f64 },
    Sine,
    /// Σ coeffs[i] uⁱ
    Polynomial { coeffs: Vec<f64> },
    /// (lambda·inner(u) + shift) / d with d = pos_divisor where the numerator
    /// is nonnegative and neg_divisor where it is negative.
    Envelope {
        inner: Box<Nonlinearity>,
        lambda: f64,
        shift: f64,
        pos_divisor: f64,
        neg_divisor: f64,
    },
}

impl Nonlinearity {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::ChafeeInfante => u - u * u * u,
            Nonlinearity::Linear { slope } => slope * u,
            Nonlinearity::Sine => u.sin(),
            Nonlinearity::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c),
            Nonlinearity::Envelope { inner, lambda, shift, pos_divisor, neg_divisor } => {
                let num = lambda * inner.eval(u) + shift;
                if num >= 0.0 {
                    num / pos_divisor
                } else {
                    num / neg_divisor
                }
            }
        }
    }

    /// Closed-form derivative where the catalog provides one.
    pub fn derivative(&self, u: f64) -> Option<f64> {
        match self {
            Nonlinearity::ChafeeInfante => Some(1.0 - 3.0 * u * u),
            Nonlinearity::Linear { slope } => Some(*slope),
            Nonlinearity::Sine => Some(u.cos()),
            Nonlinearity::Polynomial { coeffs } => Some(
                coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (i, c)| acc * u + i as f64 * c),
            ),
            Nonlinearity::Envelope { .. } => None,
        }
    }

    /// Slope s when f(u) = s·u exactly; lets the solver skip collocation.
    pub fn linear_slope(&self) -> Option<f64> {
        match self {
            Nonlinearity::Linear { slope } => Some(*slope),
            Nonlinearity::Polynomial { coeffs } => {
                let s = coeffs.get(1).copied().unwrap_or(0.0);
                let rest = coeffs.iter().enumerate().all(|(i, c)| i == 1 || *c == 0.0);
                rest.then_some(s)
            }
            _ => None,
        }
    }

    /// Upper bound for sup_{|s| ≤ r} |f(s)|.
    pub fn sup_abs(&self, r: f64) -> f64 {
        let r = r.abs();
        match self {
            Nonlinearity::ChafeeInfante => {
                let edge = (r - r * r * r).abs();
                if r >= 1.0 / 3f64.sqrt() {
                    edge.max(2.0 / (3.0 * 3f64.sqrt()))
                } else {
                    edge
                }
            }
            Nonlinearity::Linear { slope } => slope.abs() * r,
            Nonlinearity::Sine => r.min(PI / 2.0).sin(),
            Nonlinearity::Polynomial { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.abs())
            }
            Nonlinearity::Envelope { inner, lambda, shift, pos_divisor, neg_divisor } => {
                (lambda.abs() * inner.sup_abs(r) + shift.abs()) / pos_divisor.min(*neg_divisor)
            }
        }
    }

    fn validate(&self, key: &str) -> Result<()> {
        match self {
            Nonlinearity::Linear { slope } if !slope.is_finite() => {
                Err(Error::validation(format!("{key}.slope"), "a finite value"))
            }
            Nonlinearity::Polynomial { coeffs } if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) => {
                Err(Error::validation(format!("{key}.coeffs"), "a nonempty list of finite values"))
            }
            Nonlinearity::Envelope { inner, lambda, shift, pos_divisor, neg_divisor } => {
                if !(*pos_divisor > 0.0 && *neg_divisor > 0.0) {
                    return Err(Error::validation(format!("{key}.pos_divisor"), "positive divisors"));
                }
                if !lambda.is_finite() || !shift.is_finite() {
                    return Err(Error::validation(format!("{key}.lambda"), "finite lambda and shift"));
                }
                inner.validate(&format!("{key}.inner"))
            }
            _ => Ok(()),
        }
    }
}

/// Diffusion coefficient a(s) for s ≥ 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Diffusion {
    Constant { value: f64 },
    /// m + (M - m) s / (1 + s)
    Saturating {
        m: f64,
        #[serde(rename = "M")]
        m_upper: f64,
    },
}

impl Diffusion {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Diffusion::Constant { value } => *value,
            Diffusion::Saturating { m, m_upper } => {
                let s = s.max(0.0);
                m + (m_upper - m) * s / (1.0 + s)
            }
        }
    }

    /// Declared bounds (m, M).
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Diffusion::Constant { value } => (*value, *value),
            Diffusion::Saturating { m, m_upper } => (*m, *m_upper),
        }
    }

    pub fn is_constant(&self) -> bool {
        let (m, big) = self.bounds();
        m == big
    }
}

/// Scalar functional l(u) ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Functional {
    /// ‖u‖²_{L²}
    L2Squared,
    /// |∫u|
    AbsMean,
    /// ‖u'‖²_{L²}
    H1Squared,
}

impl Functional {
    pub fn eval(&self, basis: &Basis, coeffs: &[f64]) -> f64 {
        match self {
            Functional::L2Squared => basis.frac_norm_sq(coeffs, 0.0),
            Functional::H1Squared => basis.frac_norm_sq(coeffs, 0.5),
            Functional::AbsMean => {
                coeffs.iter().zip(basis.constant_projection()).map(|(c, p)| c * p).sum::<f64>().abs()
            }
        }
    }
}

/// Time forcing h(s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeForcing {
    Zero,
    Sine { amplitude: f64, frequency: f64 },
    /// amplitude · e^{-|s|}
    Decay { amplitude: f64 },
    Constant { value: f64 },
}

impl TimeForcing {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            TimeForcing::Zero => 0.0,
            TimeForcing::Sine { amplitude, frequency } => amplitude * (frequency * s).sin(),
            TimeForcing::Decay { amplitude } => amplitude * (-s.abs()).exp(),
            TimeForcing::Constant { value } => *value,
        }
    }

    /// K = sup_s |h(s)|.
    pub fn bound(&self) -> f64 {
        match self {
            TimeForcing::Zero => 0.0,
            TimeForcing::Sine { amplitude, frequency } => {
                if *frequency == 0.0 {
                    0.0
                } else {
                    amplitude.abs()
                }
            }
            TimeForcing::Decay { amplitude } => amplitude.abs(),
            TimeForcing::Constant { value } => value.abs(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            TimeForcing::Zero | TimeForcing::Constant { .. } => true,
            TimeForcing::Sine { amplitude, frequency } => *amplitude == 0.0 || *frequency == 0.0,
            TimeForcing::Decay { amplitude } => *amplitude == 0.0,
        }
    }
}

/// One instance of u_t = u_xx + (λf(u) + h(α(t))) / a(l(u)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSpec {
    pub lambda: f64,
    pub sigma: f64,
    pub f: Nonlinearity,
    pub a: Diffusion,
    pub l: Functional,
    pub h: TimeForcing,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structural: Option<StructuralPair>,
}

impl Default for ProblemSpec {
    /// λ = 5, f = u - u³, a = 1 + s/(1+s), l = ‖u‖², h = 0.2 sin t.
    fn default() -> Self {
        ProblemSpec {
            lambda: 5.0,
            sigma: 0.0,
            f: Nonlinearity::ChafeeInfante,
            a: Diffusion::Saturating { m: 1.0, m_upper: 2.0 },
            l: Functional::L2Squared,
            h: TimeForcing::Sine { amplitude: 0.2, frequency: 1.0 },
            structural: None,
        }
    }
}

impl ProblemSpec {
    /// Linear heat equation with a ≡ 1 and no forcing.
    pub fn heat() -> Self {
        ProblemSpec {
            lambda: 1.0,
            sigma: 0.0,
            f: Nonlinearity::Linear { slope: 0.0 },
            a: Diffusion::Constant { value: 1.0 },
            l: Functional::L2Squared,
            h: TimeForcing::Zero,
            structural: None,
        }
    }

    pub fn m(&self) -> f64 {
        self.a.bounds().0
    }

    pub fn big_m(&self) -> f64 {
        self.a.bounds().1
    }

    pub fn k_bound(&self) -> f64 {
        self.h.bound()
    }

    /// Checks parameters, then samples a and h on a diagnostic grid.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::validation("lambda", "lambda > 0"));
        }
        if !self.sigma.is_finite() {
            return Err(Error::validation("sigma", "a finite initial time"));
        }
        match &self.a {
            Diffusion::Constant { value } => {
                if !(*value > 0.0) || !value.is_finite() {
                    return Err(Error::validation("a.value", "value > 0"));
                }
            }
            Diffusion::Saturating { m, m_upper } => {
                if !(*m > 0.0) || !m.is_finite() {
                    return Err(Error::validation("a.m", "m > 0"));
                }
                if !(m <= m_upper) || !m_upper.is_finite() {
                    return Err(Error::validation("a.m", "m ≤ M"));
                }
            }
        }
        let finite = match &self.h {
            TimeForcing::Zero => true,
            TimeForcing::Sine { amplitude, frequency } => amplitude.is_finite() && frequency.is_finite(),
            TimeForcing::Decay { amplitude } => amplitude.is_finite(),
            TimeForcing::Constant { value } => value.is_finite(),
        };
        if !finite {
            return Err(Error::validation("h", "finite parameters"));
        }
        self.f.validate("f")?;

        let (m, big) = self.a.bounds();
        let k = self.k_bound();
        for i in 0..=2000 {
            let s = if i == 0 { 0.0 } else { 1e-3 * 1.01f64.powi(i) };
            let v = self.a.eval(s);
            if v < m * (1.0 - 1e-12) || v > big * (1.0 + 1e-12) {
                return Err(Error::validation("a", "m ≤ a(s) ≤ M on the diagnostic grid"));
            }
            let t = self.sigma + (i as f64 - 1000.0) * 0.05;
            if self.h.eval(t).abs() > k * (1.0 + 1e-12) {
                return Err(Error::validation("h", "|h(s)| ≤ K on the diagnostic grid"));
            }
        }
        Ok(())
    }

    /// Structural certificates for ν = m/λ and ν = M/λ plus the derived barrier.
    pub fn certify(&self, radius: f64, grid_points: usize) -> StructuralPair {
        let nu_low = self.m() / self.lambda;
        let nu_high = self.big_m() / self.lambda;
        let low = check_structural(&self.f, nu_low, radius, grid_points);
        let high = check_structural(&self.f, nu_high, radius, grid_points);
        let barrier = barrier_certificate(self, radius, grid_points);
        StructuralPair { low, high, barrier }
    }

    /// Return a copy with the structural field filled in.
    pub fn certified(&self) -> Self {
        let mut s = self.clone();
        s.structural = Some(self.certify(DEFAULT_SCAN_RADIUS, DEFAULT_SCAN_POINTS));
        s
    }

    /// Barrier certificate, computing it when the problem carries none.
    pub fn barrier(&self) -> BarrierCertificate {
        match &self.structural {
            Some(p) => p.barrier.clone(),
            None => barrier_certificate(self, DEFAULT_SCAN_RADIUS, DEFAULT_SCAN_POINTS),
        }
    }
}

/// Result of scanning uf(u) ≤ -νC₀u² + |u|C₁.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuralCertificate {
    pub nu: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    pub lambda1: f64,
    pub satisfied_s: bool,
    pub satisfied_d: bool,
}

/// Pointwise barrier for the full problem: every solution obeys
/// u·g(u) ≤ -shift·u² + source·|u|, so |u| stays below the solution φ of
/// (A + shift)φ = source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierCertificate {
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    pub shift: f64,
    pub source: f64,
    pub lambda1: f64,
    pub satisfied_s: bool,
    pub satisfied_d: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuralPair {
    pub low: StructuralCertificate,
    pub high: StructuralCertificate,
    pub barrier: BarrierCertificate,
}

/// C₀ candidates -4, -3.5, ..., 4.
pub fn default_candidates() -> Vec<f64> {
    (0..=16).map(|i| -4.0 + 0.5 * i as f64).collect()
}

/// sup of the solution of (A + c)φ = 1, attained at x = 1/2.
pub fn phi_peak(c: f64) -> f64 {
    if c <= -PI * PI {
        f64::INFINITY
    } else if c == 0.0 {
        0.125
    } else if c > 0.0 {
        (1.0 - 1.0 / (c.sqrt() / 2.0).cosh()) / c
    } else {
        (1.0 - 1.0 / ((-c).sqrt() / 2.0).cos()) / c
    }
}

pub fn check_structural(f: &Nonlinearity, nu: f64, radius: f64, grid_points: usize) -> StructuralCertificate {
    check_structural_with(f, nu, radius, grid_points, &default_candidates())
}

/// Scan (S) for each candidate C₀ and keep the certificate with the smallest
/// barrier sup C₁·φ₁(νC₀) among those satisfying (D); ties go to the larger λ₁.
/// Without any (D)-candidate the largest λ₁ is returned.
pub fn check_structural_with(
    f: &Nonlinearity,
    nu: f64,
    radius: f64,
    grid_points: usize,
    candidates: &[f64],
) -> StructuralCertificate {
    let grid_points = grid_points.max(2);
    let mut best: Option<(StructuralCertificate, f64)> = None;
    let mut fallback: Option<StructuralCertificate> = None;
    for &c0 in candidates {
        let c1 = sign_constant(f, nu, c0, radius, grid_points);
        if !c1.is_finite() {
            continue;
        }
        let lambda1 = PI * PI + nu * c0;
        let cert = StructuralCertificate {
            nu,
            c0,
            c1,
            lambda1,
            satisfied_s: true,
            satisfied_d: lambda1 > 0.0,
        };
        if cert.satisfied_d {
            let peak = c1 * phi_peak(nu * c0);
            let better = match &best {
                None => true,
                Some((b, bp)) => {
                    let tie = (peak - bp).abs() <= 1e-12 * bp.abs().max(1e-300);
                    peak < *bp && !tie || tie && lambda1 > b.lambda1
                }
            };
            if better {
                best = Some((cert, peak));
            }
        } else if fallback.as_ref().is_none_or(|b| lambda1 > b.lambda1) {
            fallback = Some(cert);
        }
    }
    if let Some((c, _)) = best {
        return c;
    }
    fallback.unwrap_or(StructuralCertificate {
        nu,
        c0: f64::NAN,
        c1: f64::INFINITY,
        lambda1: f64::NAN,
        satisfied_s: false,
        satisfied_d: false,
    })
}

/// q(u) = (u f(u) + ν c0 u²) / |u|.
fn sign_ratio(f: &Nonlinearity, nu: f64, c0: f64, u: f64) -> f64 {
    (u * f.eval(u) + nu * c0 * u * u) / u.abs()
}

/// Smallest C₁ ≥ 0 with uf(u) ≤ -νc0u² + |u|C₁ on [-R, R], or infinity when q
/// grows at least linearly past ±R.
pub fn sign_constant(f: &Nonlinearity, nu: f64, c0: f64, radius: f64, grid_points: usize) -> f64 {
    let q = |u: f64| sign_ratio(f, nu, c0, u);
    for side in [radius, -radius] {
        let near = q(side);
        let far = q(4.0 * side);
        if near > 0.0 && far >= 2.0 * near || !far.is_finite() {
            return f64::INFINITY;
        }
    }
    let n = grid_points.max(3);
    let step = 2.0 * radius / (n - 1) as f64;
    let at = |i: usize| -radius + step * i as f64;
    let vals: Vec<f64> = (0..n)
        .map(|i| {
            let u = at(i);
            if u == 0.0 {
                f64::NEG_INFINITY
            } else {
                q(u)
            }
        })
        .collect();
    let grid_max = vals.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut best = grid_max;
    for i in 1..n - 1 {
        let (l, c, r) = (vals[i - 1], vals[i], vals[i + 1]);
        if !(c.is_finite() && l.is_finite() && r.is_finite()) || c < l || c < r || (c == l && c == r) {
            continue;
        }
        // the refined peak cannot exceed c by more than the neighbouring rise
        if c + (c - l).max(c - r) < grid_max {
            continue;
        }
        best = best.max(refine_max(&q, at(i - 1), at(i + 1)));
    }
    // one-sided limits at 0 when the grid brackets it
    if f.eval(0.0) != 0.0 {
        best = best.max(q(1e-12)).max(q(-1e-12));
    }
    best
}

fn refine_max(q: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    if lo < 0.0 && hi > 0.0 {
        return refine_max(q, lo, -1e-300).max(refine_max(q, 1e-300, hi));
    }
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (q(x1), q(x2));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = q(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = q(x1);
        }
    }
    f1.max(f2)
}

/// Joint constant C₀ valid for both ν = m/λ and ν = M/λ. Averaging the two
/// inequalities over a ∈ [m, M] and adding |h| ≤ K gives
/// u(λf(u) + h)/a ≤ -C₀u² + |u|(λC₁ + K)/m.
pub fn barrier_certificate(spec: &ProblemSpec, radius: f64, grid_points: usize) -> BarrierCertificate {
    let (m, big) = spec.a.bounds();
    let lam = spec.lambda;
    let k = spec.k_bound();
    let mut best: Option<(BarrierCertificate, f64)> = None;
    let mut fallback: Option<BarrierCertificate> = None;
    for c0 in default_candidates() {
        let c1 = sign_constant(&spec.f, m / lam, c0, radius, grid_points)
            .max(sign_constant(&spec.f, big / lam, c0, radius, grid_points));
        if !c1.is_finite() {
            continue;
        }
        let source = (lam * c1 + k) / m;
        let cert = BarrierCertificate {
            c0,
            c1,
            shift: c0,
            source,
            lambda1: PI * PI + c0,
            satisfied_s: true,
            satisfied_d: PI * PI + c0 > 0.0,
        };
        if cert.satisfied_d {
            let peak = source * phi_peak(c0);
            let better = match &best {
                None => true,
                Some((b, bp)) => {
                    let tie = (peak - bp).abs() <= 1e-12 * bp.abs().max(1e-300);
                    peak < *bp && !tie || tie && cert.lambda1 > b.lambda1
                }
            };
            if better {
                best = Some((cert, peak));
            }
        } else if fallback.as_ref().is_none_or(|b| cert.lambda1 > b.lambda1) {
            fallback = Some(cert);
        }
    }
    if let Some((c, _)) = best {
        return c;
    }
    fallback.unwrap_or(BarrierCertificate {
        c0: f64::NAN,
        c1: f64::INFINITY,
        shift: f64::NAN,
        source: f64::INFINITY,
        lambda1: f64::NAN,
        satisfied_s: false,
        satisfied_d: false,
    })
}

/// Solution of (A + c)φ = C1 with Dirichlet conditions.
#[derive(Debug, Clone)]
pub struct Phi {
    pub c: f64,
    pub c1: f64,
    pub field: SpectralField,
}

impl Phi {
    /// Closed-form value.
    pub fn eval(&self, x: f64) -> f64 {
        let (c, c1) = (self.c, self.c1);
        if c == 0.0 {
            0.5 * c1 * x * (1.0 - x)
        } else if c > 0.0 {
            let s = c.sqrt();
            c1 / c * (1.0 - (s * (x - 0.5)).cosh() / (s / 2.0).cosh())
        } else {
            let s = (-c).sqrt();
            c1 / c * (1.0 - (s * (x - 0.5)).cos() / (s / 2.0).cos())
        }
    }

    /// Closed-form values at the collocation nodes.
    pub fn node_values(&self) -> Vec<f64> {
        self.field.basis().nodes().iter().map(|&x| self.eval(x)).collect()
    }

    /// ‖φ‖_∞ = φ(1/2).
    pub fn sup(&self) -> f64 {
        self.eval(0.5)
    }

    /// Bound on |spectral - closed form| at any point from the discarded modes.
    pub fn truncation_bound(&self) -> f64 {
        let n = self.field.basis().n_modes();
        let mut tail = 0.0;
        let mut k = n + 1;
        while k < n + 200_000 {
            if k % 2 == 1 {
                let mu = (k as f64 * PI).powi(2);
                tail += 4.0 / (k as f64 * PI) / (mu + self.c);
            }
            k += 1;
        }
        // remainder past the loop: Σ_{odd k>K} 4/(π³k³) ≤ 1/(π³K²)
        let kk = k as f64;
        tail += 1.0 / (PI.powi(3) * kk * kk);
        self.c1.abs() * tail
    }
}

pub fn solve_phi(basis: &Arc<Basis>, c: f64, c1: f64) -> Result<Phi> {
    if c <= -PI * PI || !c.is_finite() {
        return Err(Error::domain("solve_phi", format!("shift {c} must exceed -π²")));
    }
    if !(c1 >= 0.0) {
        return Err(Error::domain("solve_phi", format!("source {c1} must be nonnegative")));
    }
    let rhs = SpectralField::new(basis, basis.constant_projection().iter().map(|p| p * c1).collect())?;
    let field = apply_resolvent_shifted(&rhs, c)?;
    Ok(Phi { c, c1, field })
}

/// Constant in ‖u‖_∞ ≤ C‖u'‖_{L²} on H¹₀(0,1).
pub fn embedding_constant() -> f64 {
    FRAC_1_SQRT_2
}

/// k ≥ 0 making s ↦ f(s) + k s nondecreasing on [-r, r]; 10% margin.
pub fn monotonicity_shift(f: &Nonlinearity, r: f64) -> f64 {
    let n = 20_001;
    let mut min_slope = f64::INFINITY;
    for i in 0..n {
        let s = -r + 2.0 * r * i as f64 / (n - 1) as f64;
        let d = f.derivative(s).unwrap_or_else(|| {
            let h = 1e-6 * s.abs().max(1.0);
            (f.eval(s + h) - f.eval(s - h)) / (2.0 * h)
        });
        min_slope = min_slope.min(d);
    }
    1.1 * (-min_slope).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chafee_infante_certificate() {
        let c = check_structural(&Nonlinearity::ChafeeInfante, 1.0, 10.0, 100_000);
        assert_eq!(c.c0, -1.0);
        assert_eq!(c.c1, 0.0);
        assert!((c.lambda1 - (PI * PI - 1.0)).abs() < 1e-14);
        assert!(c.satisfied_s && c.satisfied_d);
    }

    #[test]
    fn linear_certificate() {
        let c = check_structural(&Nonlinearity::Linear { slope: 1.0 }, 1.0, 10.0, 100_000);
        assert_eq!((c.c0, c.c1), (-1.0, 0.0));
    }

    #[test]
    fn restricted_candidate_matches_dense_max() {
        let c = check_structural_with(&Nonlinearity::ChafeeInfante, 1.0, 10.0, 100_000, &[0.0]);
        // max of |u| - |u|³ at |u| = 1/√3
        let exact = 2.0 / (3.0 * 3f64.sqrt());
        assert!((c.c1 - exact).abs() < 1e-12);
    }

    #[test]
    fn quintic_is_flagged() {
        let f = Nonlinearity::Polynomial { coeffs: vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0] };
        let c = check_structural(&f, 1.0, 10.0, 10_000);
        assert!(!c.satisfied_s);
    }

    #[test]
    fn phi_closed_forms() {
        let b = Basis::new(64).unwrap();
        assert_eq!(solve_phi(&b, 0.0, 1.0).unwrap().eval(0.5), 0.125);
        let p = solve_phi(&b, PI * PI, 1.0).unwrap();
        assert!((p.eval(0.5) - (1.0 - 1.0 / (PI / 2.0).cosh()) / (PI * PI)).abs() < 1e-15);
        assert!(solve_phi(&b, -PI * PI, 1.0).is_err());
        assert!(solve_phi(&b, 0.0, -1.0).is_err());
    }

    #[test]
    fn monotonicity_examples() {
        let k = monotonicity_shift(&Nonlinearity::ChafeeInfante, 2.0);
        assert!(k >= 11.0);
        assert_eq!(monotonicity_shift(&Nonlinearity::Linear { slope: 1.0 }, 3.0), 0.0);
    }

    #[test]
    fn validation_reports_keys() {
        let mut s = ProblemSpec::default();
        s.a = Diffusion::Saturating { m: 3.0, m_upper: 2.0 };
        assert_eq!(s.validate(), Err(Error::validation("a.m", "m ≤ M")));
        s.a = Diffusion::Saturating { m: 1.0, m_upper: 2.0 };
        s.lambda = 0.0;
        assert!(matches!(s.validate(), Err(Error::Validation { key, .. }) if key == "lambda"));
    }

    #[test]
    fn polynomial_evaluation() {
        let f = Nonlinearity::Polynomial { coeffs: vec![1.0, -2.0, 0.0, 3.0] };
        assert_eq!(f.eval(2.0), 1.0 - 4.0 + 24.0);
        assert_eq!(f.derivative(2.0), Some(-2.0 + 36.0));
        assert_eq!(f.linear_slope(), None);
        let g = Nonlinearity::Polynomial { coeffs: vec![0.0, 2.5] };
        assert_eq!(g.linear_slope(), Some(2.5));
    }

    #[test]
    fn default_barrier() {
        let b = ProblemSpec::default().barrier();
        assert!(b.satisfied_s && b.satisfied_d);
        assert_eq!(b.c0, -4.0);
        assert!(b.source > 0.0);
    }
}
