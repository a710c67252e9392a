use std::f64::consts::PI;

use nonlocal_core::comparison::{
    barrier_check, compare_ordered_with, iteration_shift, linear_majorant, monotone_iterate, positivity_check,
    sandwich_scan, sandwich_specs, sandwich_specs_with, shifted_reference, Envelope,
};
use nonlocal_core::problem::{solve_phi, Diffusion, Nonlinearity, ProblemSpec, TimeForcing};
use nonlocal_core::solver::{march, Status};
use nonlocal_core::spectral::{Basis, SpectralField};
use nonlocal_core::Error;
use proptest::prelude::*;

fn min_gap(lo: &SpectralField, hi: &SpectralField) -> f64 {
    hi.to_values().iter().zip(lo.to_values()).map(|(h, l)| h - l).fold(f64::INFINITY, f64::min)
}

#[test]
fn sign_envelopes_are_clean_where_swapped_ones_fail() {
    let spec = ProblemSpec::default();
    for r in [0.1, 1.0, 2.0, 5.0] {
        let s = sandwich_scan(&spec, r, 20_001, Envelope::Sign);
        assert_eq!(s.violations, 0, "r = {r}");
        assert!(s.min_margin >= 0.0 && s.envelopes_increasing);
        assert!(sandwich_scan(&spec, r, 20_001, Envelope::Swapped).violations > 0);
    }
    // pure forcing: the envelopes are -K/m and K/m
    let spec = ProblemSpec {
        lambda: 1.0,
        f: Nonlinearity::Linear { slope: 0.0 },
        a: Diffusion::Saturating { m: 0.5, m_upper: 2.0 },
        h: TimeForcing::Sine { amplitude: 0.3, frequency: 2.0 },
        ..ProblemSpec::default()
    };
    let (lo, hi) = sandwich_specs(&spec);
    assert!((lo.f.eval(0.7) + 0.6).abs() < 1e-15 && (hi.f.eval(-0.7) - 0.6).abs() < 1e-15);
    assert_eq!((lo.a.bounds(), lo.h.bound()), ((1.0, 1.0), 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sign_envelopes_bracket_the_forcing(
        u in -4.0f64..4.0, s in 0.0f64..1.0, tau in -20.0f64..20.0, lambda in 0.1f64..3.0,
    ) {
        let spec = ProblemSpec { lambda, ..ProblemSpec::default() };
        let (m, big) = spec.a.bounds();
        let a = m + s * (big - m);
        let g = (lambda * spec.f.eval(u) + spec.h.eval(tau)) / a;
        let (lo, hi) = sandwich_specs_with(&spec, Envelope::Sign);
        prop_assert!(lo.f.eval(u) <= g + 1e-12);
        prop_assert!(g <= hi.f.eval(u) + 1e-12);
    }
}

#[test]
fn linear_runs_with_collapsed_envelopes_stay_ordered() {
    let b = Basis::new(32).unwrap();
    let spec = ProblemSpec { f: Nonlinearity::Linear { slope: 2.0 }, ..ProblemSpec::heat() };
    let (lo, hi) = sandwich_specs(&spec);
    for u in [-1.0, 0.0, 0.4] {
        assert_eq!(lo.f.eval(u), spec.f.eval(u));
        assert_eq!(hi.f.eval(u), spec.f.eval(u));
    }
    let e1 = SpectralField::mode(&b, 1, 1.0);
    let r = compare_ordered_with(&spec, &e1.scale(-0.5), &e1.scale(0.25), &e1, 2.0, 1e-3, 1e-6, Envelope::Sign).unwrap();
    assert!(r.passed);
    assert!(r.max_violation >= -1e-14, "{}", r.max_violation);
    assert_eq!(r.violation_count, 0);
}

#[test]
fn unordered_data_are_rejected() {
    let b = Basis::new(8).unwrap();
    let e1 = SpectralField::mode(&b, 1, 1.0);
    let z = SpectralField::zeros(&b);
    let res = compare_ordered_with(&ProblemSpec::default(), &e1, &z, &e1, 0.1, 1e-3, 1e-6, Envelope::Sign);
    assert!(matches!(res, Err(Error::Domain { .. })));
}

#[test]
fn ordering_is_transitive_up_to_twice_the_tolerance() {
    let b = Basis::new(32).unwrap();
    let spec = ProblemSpec::default();
    let mid = SpectralField::mode(&b, 1, 0.3);
    let bump = SpectralField::from_fn(&b, |x| 0.05 * (PI * x).sin().powi(2));
    let (lo0, hi0) = (mid.sub(&bump).unwrap(), mid.add(&bump).unwrap());
    let r = compare_ordered_with(&spec, &lo0, &mid, &hi0, 2.0, 2e-3, 1e-6, Envelope::Sign).unwrap();
    assert!(r.passed, "{}", r.max_violation);
    let eps = -r.max_violation;
    let (lower, upper) = sandwich_specs(&spec);
    let lo = march(&lo0, &lower, 2.0, 2e-3).unwrap();
    let hi = march(&hi0, &upper, 2.0, 2e-3).unwrap();
    for (l, h) in lo.states.iter().zip(&hi.states) {
        assert!(min_gap(l, h) >= -2.0 * eps - 1e-15);
    }
    for m in &r.margins {
        assert!(m.upper_minus_middle + m.middle_minus_lower >= -2.0 * eps - 1e-15);
    }
}

#[test]
fn heat_preserves_order_of_node_data() {
    let b = Basis::new(64).unwrap();
    let spec = ProblemSpec::heat();
    let lo = SpectralField::from_fn(&b, |x| x * (1.0 - x));
    let hi = lo.add(&SpectralField::from_fn(&b, |x| (PI * x).sin().powi(2) * (2.0 * PI * x).cos().powi(2))).unwrap();
    assert!(min_gap(&lo, &hi) >= 0.0);
    let a = march(&lo, &spec, 0.5, 1e-3).unwrap();
    let c = march(&hi, &spec, 0.5, 1e-3).unwrap();
    for (l, h) in a.states.iter().zip(&c.states) {
        assert!(min_gap(l, h) >= -1e-6);
    }
}

#[test]
fn positivity_examples() {
    let b = Basis::new(32).unwrap();
    let bump = SpectralField::from_fn(&b, |x| x * (1.0 - x));
    let heat = ProblemSpec::heat();
    let r = positivity_check(&heat, &bump, 1.0, 1e-3, 1e-6).unwrap();
    assert!(r.passed && r.status == Status::Completed);
    let ci = ProblemSpec { f: Nonlinearity::ChafeeInfante, ..ProblemSpec::heat() };
    assert!(positivity_check(&ci, &bump.scale(3.0), 1.0, 1e-3, 1e-6).unwrap().passed);
    let pushed = ProblemSpec { h: TimeForcing::Constant { value: -2.0 }, ..ProblemSpec::heat() };
    let r = positivity_check(&pushed, &bump, 1.0, 1e-3, 1e-6).unwrap();
    assert!(!r.passed && r.min_value < -1e-3);
    assert!(positivity_check(&heat, &bump.scale(-1.0), 1.0, 1e-3, 1e-6).is_err());
}

#[test]
fn barrier_examples() {
    let spec = ProblemSpec::default().certified();
    let cert = spec.barrier();
    let b = Basis::new(32).unwrap();
    let phi = solve_phi(&b, cert.shift, cert.source).unwrap();
    let node_phi = SpectralField::from_values(&b, &phi.node_values()).unwrap();
    for w0 in [node_phi.scale(0.5), node_phi.scale(-0.9), SpectralField::zeros(&b)] {
        let r = barrier_check(&spec, &w0, 10.0, 1e-3, 1e-6).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.phi_sup, phi.sup());
    }
}

#[test]
fn majorant_from_zero_rises_to_the_barrier() {
    let b = Basis::new(32).unwrap();
    let c1 = 0.75;
    let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
    let w = linear_majorant(&SpectralField::zeros(&b), 0.0, c1, &times).unwrap();
    let phi = solve_phi(&b, 0.0, c1).unwrap();
    let target = phi.field.to_values();
    let mut prev = vec![0.0; 32];
    for s in &w {
        let v = s.to_values();
        for ((x, p), t) in v.iter().zip(&prev).zip(&target) {
            assert!(*x >= p - 1e-15 && *x <= t + 1e-15);
        }
        prev = v;
    }
    assert!(w.last().unwrap().dist(&phi.field, 0.5).unwrap() < 1e-12);
}

#[test]
fn monotone_iteration_from_the_reference_is_stationary() {
    let b = Basis::new(16).unwrap();
    let spec = ProblemSpec::default();
    let w0 = SpectralField::mode(&b, 1, 0.5);
    let k = iteration_shift(&spec, 1.0);
    let reference = shifted_reference(&w0, &spec, k, 0.5, 1e-3).unwrap();
    let r = monotone_iterate(&w0, &reference, &spec, k, 10).unwrap();
    assert_eq!(r.sweeps, 1);
    for (a, b) in r.limit.states.iter().zip(&reference.states) {
        assert_eq!(a, b);
    }
}

#[test]
fn monotone_iteration_for_increasing_linear_forcing() {
    let b = Basis::new(16).unwrap();
    let spec = ProblemSpec { f: Nonlinearity::Linear { slope: 0.5 }, ..ProblemSpec::heat() };
    let w0 = SpectralField::mode(&b, 1, 1.0);
    let reference = shifted_reference(&w0, &spec, 0.0, 1.0, 1e-3).unwrap();
    let r = monotone_iterate(&SpectralField::zeros(&b), &reference, &spec, 0.0, 50).unwrap();
    assert!(r.max_increase <= 0.0);
    for s in &r.limit.states {
        assert!(s.norm_x() < 1e-8);
    }
}

#[test]
fn monotone_iteration_descends_from_the_reference() {
    let b = Basis::new(32).unwrap();
    let spec = ProblemSpec::default().certified();
    let cert = spec.barrier();
    let phi = solve_phi(&b, cert.shift, cert.source).unwrap();
    let w0 = SpectralField::mode(&b, 1, 0.5);
    let u_minus = w0.sub(&SpectralField::from_values(&b, &phi.node_values()).unwrap().scale(0.1)).unwrap();
    let k = iteration_shift(&spec, 1.0);
    let reference = shifted_reference(&w0, &spec, k, 1.0, 1e-3).unwrap();
    let r = monotone_iterate(&u_minus, &reference, &spec, k, 100).unwrap();
    assert!(r.sweeps > 1);
    assert!(r.max_increase <= 1e-6);
    for (l, u) in r.limit.states.iter().zip(&reference.states) {
        assert!(min_gap(l, u) >= -1e-6);
    }
    // the limit is the shifted march from u_minus
    let direct = shifted_reference(&u_minus, &spec, k, 1.0, 1e-3).unwrap();
    for (l, d) in r.limit.states.iter().zip(&direct.states) {
        assert!(l.dist(d, 0.0).unwrap() < 1e-7);
    }
}
