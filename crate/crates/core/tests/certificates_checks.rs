use hardylab::certificates::*;
use hardylab::error::LabError;
use hardylab::types::{Params, PointN};
use proptest::prelude::*;
use std::f64::consts::PI;

const KAPPA: f64 = 703.194_889_354_477_3;

fn halfball(id: InequalityId, n: usize, r: f64, m: usize) -> InequalitySpec {
    InequalitySpec::new(id, Params { n, r, m, ..Params::default() })
}

/// `sum_i (X_1...X_i)^2(t)` by the recursion. Terms decay like `i^{-4}`,
/// so the dropped tail is below a third of the cutoff times the index.
fn series_b(t: f64) -> f64 {
    let x1 = |t: f64| 1.0 / (1.0 - t.ln());
    let (mut x, mut prod, mut sum) = (t, 1.0, 0.0);
    for _ in 0..10_000 {
        x = x1(x);
        prod *= x;
        sum += prod * prod;
        if prod * prod < 1e-15 * sum {
            break;
        }
    }
    sum
}

/// Remainder of the extra-term inequality for `u = r^a (1 - r) x_3/|x|` in
/// `n = 3`, `R = 1`, by Simpson's rule in `x = -ln r`.
fn extra_oracle(a: f64) -> f64 {
    let steps = 40_000;
    let top = 90.0;
    let h = top / steps as f64;
    let mut sum = 0.0;
    for i in 0..=steps {
        let x = i as f64 * h;
        let r = (-x).exp();
        let f = r.powf(a) * (1.0 - r);
        let df = a * r.powf(a - 1.0) * (1.0 - r) - r.powf(a);
        // dr = r dx; the radial integrands carry r^2, r^0 and r^{1/2}.
        let integrand =
            r * (df * df * r * r - 0.25 * f * f - 0.25 * f * f * series_b(r / KAPPA) - 0.125 * f * f * r.sqrt());
        let w = if i == 0 || i == steps {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * integrand;
    }
    // Angular factor |S^2| / 6 for (x_3/|x|)^2.
    2.0 * PI / 3.0 * sum * h / 3.0
}

#[test]
fn zero_trial_has_zero_remainder() {
    for id in InequalityId::ALL {
        let spec = if id.is_domain() { InequalitySpec::domain(id, 3, 1.0).unwrap() } else { halfball(id, 3, 1.0, 1) };
        let r = remainder(&spec, &TrialFunction::Zero, &QuadSpec::default()).unwrap();
        assert_eq!((r.value, r.quad_error), (0.0, 0.0));
    }
}

#[test]
fn extra_term_power_profile_matches_oracle() {
    let spec = halfball(InequalityId::HalfballExtra, 3, 1.0, 0);
    let u = TrialFunction::Separable(Profile::Power { exponent: 0.8, outer: 1.0 });
    let r = remainder(&spec, &u, &QuadSpec::default()).unwrap();
    let oracle = extra_oracle(0.8);
    assert!(r.value > 0.0);
    assert!((r.value - oracle).abs() < 1e-7 * oracle.abs(), "{} vs {oracle}", r.value);
}

#[test]
fn kappa_matches_frozen_value() {
    assert!((kappa() - KAPPA).abs() < 1e-9);
}

#[test]
fn support_outside_the_ball_is_rejected() {
    let spec = halfball(InequalityId::HalfballLogseries, 3, 1.0, 0);
    let u = TrialFunction::Separable(Profile::Power { exponent: 0.8, outer: 1.5 });
    assert!(matches!(remainder(&spec, &u, &QuadSpec::default()), Err(LabError::SupportViolation(_))));
}

#[test]
fn hypotheses_are_enforced() {
    let mut s = InequalitySpec::domain(InequalityId::DomainLogseries, 3, 1.0).unwrap();
    assert!(s.validate().is_ok());
    s.params.rho *= 0.5;
    assert!(s.validate().is_err());
    assert!(halfball(InequalityId::HalfballMlogs, 3, 1.0, 0).validate().is_err());
    assert!(halfball(InequalityId::HalfballSobolev, 2, 1.0, 0).validate().is_err());
    assert!(InequalitySpec::domain(InequalityId::HalfballExtra, 3, 1.0).is_err());
    assert_eq!("domain-hardy".parse::<InequalityId>().unwrap(), InequalityId::DomainHardy);
    assert!("domain".parse::<InequalityId>().is_err());
}

#[test]
fn logseries_suite_has_no_violations() {
    let spec = halfball(InequalityId::HalfballLogseries, 3, 1.0, 0);
    let rep = random_trial_suite(&spec, TrialFamily::Random, 1000, 42, false).unwrap();
    assert_eq!(rep.violations, 0);
    assert!(rep.min_relative > 0.0);
    assert_eq!(rep.count, 1000);
}

#[test]
fn suites_are_deterministic() {
    let spec = halfball(InequalityId::HalfballMlogs, 4, 2.0, 2);
    let a = random_trial_suite(&spec, TrialFamily::Random, 200, 9, true).unwrap();
    let b = random_trial_suite(&spec, TrialFamily::Random, 200, 9, true).unwrap();
    assert_eq!(a, b);
    let c = random_trial_suite(&spec, TrialFamily::Random, 200, 10, true).unwrap();
    assert_ne!(a.argmin, c.argmin);
}

#[test]
fn domain_logseries_mesh_trials_pass() {
    let spec = InequalitySpec::domain(InequalityId::DomainLogseries, 3, 1.0).unwrap();
    let rep = random_trial_suite(&spec, TrialFamily::Random, 100, 3, false).unwrap();
    assert_eq!(rep.violations, 0);
}

#[test]
fn sharpness_family_is_near_extremal() {
    let spec = halfball(InequalityId::HalfballLogseries, 3, 1.0, 0);
    let mut last = f64::INFINITY;
    for eps in [0.1, 0.03, 0.01] {
        let rep = random_trial_suite(&spec, TrialFamily::Sharpness { eps }, 1, 0, false).unwrap();
        let r = rep.argmin.remainder;
        assert!(rep.min_relative >= 0.0 && rep.min_relative < last);
        last = rep.min_relative;
        if eps == 0.01 {
            assert!(rep.min_relative < 0.02);
            let q = r.energy / r.hardy_mass;
            assert!((q - 2.25).abs() < 0.05 * 2.25, "quotient {q}");
        }
    }
}

#[test]
fn probed_constant_separates_passing_and_failing() {
    let spec = halfball(InequalityId::HalfballSobolev, 3, 1.0, 0);
    let rep = random_trial_suite(&spec, TrialFamily::Random, 300, 5, true).unwrap();
    let c = rep.probe_c.unwrap();
    assert!(c > 0.0 && c.is_finite());
    let mut below = spec;
    below.sobolev_c = 0.99 * c;
    assert_eq!(random_trial_suite(&below, TrialFamily::Random, 300, 5, false).unwrap().violations, 0);
    let mut above = spec;
    above.sobolev_c = 1.5 * c;
    assert!(random_trial_suite(&above, TrialFamily::Random, 300, 5, false).unwrap().violations > 0);
}

#[test]
fn mesh_trial_must_vanish_on_the_boundary() {
    let spec = InequalitySpec::domain(InequalityId::DomainHardy, 3, 1.0).unwrap();
    let ctx = MeshContext::for_domain(&spec, &QuadSpec::default()).unwrap();
    let ones = vec![1.0; ctx.mesh().vertices.len()];
    assert!(matches!(ctx.remainder(&ones), Err(LabError::SupportViolation(_))));
    let zero = vec![0.0; ctx.mesh().vertices.len()];
    assert_eq!(ctx.remainder(&zero).unwrap().value, 0.0);
}

#[test]
fn gef_holds_for_small_dimensions() {
    for n in 2..=10 {
        let c = cert_gef(n).unwrap();
        assert!(c.holds && c.monotone && c.margin > 0.0, "{c:?}");
        assert!((c.max_lhs - gef_lhs(n, c.r, c.t_max)).abs() < 1e-15);
    }
    let c = cert_gef(3).unwrap();
    // 9 r (r + 4) sqrt(r + 2) with r = 1/(9 sqrt 75), in extended precision.
    assert!((c.max_lhs - 0.657_390_887_208_859_5).abs() < 1e-12);
    assert!(cert_gef(1).is_err());
}

#[test]
fn tau_lower_bound_brackets() {
    for n in 2..=10 {
        let lo = tau_lower_bound(n).unwrap();
        let hi = tau_upper_bound(n).unwrap();
        assert!(lo > 0.0 && lo <= hi, "n = {n}: {lo} {hi}");
        let b = tau_bounds(n).unwrap();
        assert!(b.certified <= b.lower && b.lower - b.certified < 1e-4 * b.lower);
    }
}

#[test]
fn tau_lower_bound_matches_fine_scan() {
    // First grid point where the gap turns negative, 1e7 points on (0, 2e-3].
    let n = 3;
    let steps = 10_000_000u64;
    let h = 2e-3 / steps as f64;
    let mut crossing = None;
    for i in 1..=steps {
        let t = i as f64 * h;
        if tau_gap(n, t) < 0.0 {
            crossing = Some(t);
            break;
        }
    }
    let t = crossing.expect("gap changes sign");
    let lo = tau_lower_bound(n).unwrap();
    assert!((t - lo).abs() < 1e-8 + h);
    // Extended-precision root of the same equation.
    assert!((lo - 6.897_682_855_066_727e-4).abs() < 1e-15);
}

#[test]
fn tau_upper_bound_values() {
    assert!((tau_upper_bound(2).unwrap() - 2.0 * PI.exp()).abs() < 1e-12);
    assert!((tau_upper_bound(5).unwrap() - 2.0 * (PI / 2.0).exp()).abs() < 1e-13);
    // 2 exp(pi / sqrt 2) to 40 digits.
    assert!((tau_upper_bound(3).unwrap() - 18.441_225_037_747_055).abs() < 1e-13);
}

#[test]
fn counterexample_at_half_threshold() {
    let probe = counterexample_bound(3, 1.3, 0.25).unwrap();
    let rho = 0.5 * probe.rho_threshold;
    let c = counterexample_bound(3, 1.3, rho).unwrap();
    assert!(c.rho_condition);
    assert!(c.upper_bound < 2.25, "{c:?}");
    assert_eq!(c.threshold, 2.25);
}

#[test]
fn counterexample_implication_on_grid() {
    let thetas: Vec<f64> = (1..=20).map(|i| 0.5 * PI * i as f64 / 21.0).collect();
    let rhos: Vec<f64> = (1..=20).map(|i| 10f64.powf(-12.0 + 11.0 * i as f64 / 20.0) * 0.45).collect();
    let sweep = counterexample_sweep(3, &thetas, &rhos).unwrap();
    assert_eq!(sweep.cases.len(), 400);
    assert_eq!(sweep.implication_failures, 0);
    assert!(sweep.cond_true > 0 && sweep.cond_true < 400);
    // On the grid, the condition and the strict bound coincide.
    for c in &sweep.cases {
        assert_eq!(c.rho_condition, c.upper_bound < c.threshold, "{c:?}");
    }
}

#[test]
fn counterexample_near_half_space() {
    let c = counterexample_bound(3, 0.5 * PI - 1e-3, 0.1).unwrap();
    assert!((c.lambda1 - 2.0).abs() < 1e-2);
    assert!(c.rho_threshold < 1e-6);
    assert!(!c.rho_condition);
    assert!(counterexample_bound(3, 1.0, 0.6).is_err());
    assert!(counterexample_bound(3, 1.7, 0.1).is_err());
}

#[test]
fn divergence_identity_holds() {
    for (n, r) in [(3, 1.0), (4, 2.0)] {
        let pts = half_ball_samples(n, r, 100, 11);
        let rep = div_field_check(n, r, &pts).unwrap();
        assert!(rep.max_rel_discrepancy < 1e-5, "{rep:?}");
        assert!(rep.min_hardy_margin >= 0.0);
        assert!(rep.passed(1e-5));
    }
}

#[test]
fn divergence_samples_need_margin() {
    let p = PointN::new(vec![0.3, 0.2, 1e-4]);
    assert!(matches!(div_field_check(3, 1.0, &[p]), Err(LabError::Geometry(_))));
    let p = PointN::new(vec![0.0, 0.0, 0.9995]);
    assert!(div_field_check(3, 1.0, &[p]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_bumps_never_violate_logseries(
        exponent in -0.9f64..0.1,
        lo in -8.0f64..-0.5,
        width in 0.3f64..6.0,
        ramp in 0.05f64..0.5,
        c1 in -0.5f64..0.5,
        c2 in -0.5f64..0.5,
    ) {
        let outer = (lo + width).min(0.0).exp();
        let inner = lo.exp().min(0.5 * outer);
        let spec = halfball(InequalityId::HalfballLogseries, 3, 1.0, 0);
        let p = Profile::Bump { exponent, inner, outer, ramp, modulation: [c1, c2] };
        let r = remainder(&spec, &TrialFunction::Separable(p), &QuadSpec::default()).unwrap();
        prop_assert!(r.passes());
        prop_assert!(r.energy >= 2.25 * r.hardy_mass);
    }

    #[test]
    fn closed_form_dominates_hardy_weight(x in 0.01f64..0.6, y in -0.6f64..0.6, z in 0.01f64..0.6) {
        let p = [x, y, z];
        let r2 = x * x + y * y + z * z;
        prop_assume!(r2 < 0.98);
        let c = div_closed_form(3, 1.0, &p).unwrap();
        prop_assert!(c * r2 >= 2.25);
    }
}
