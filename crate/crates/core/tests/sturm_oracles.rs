use hardylab::sturm1d::*;
use std::f64::consts::PI;

/// Shooting oracle for the example cap: start at the regular singular end
/// `pi` with the Frobenius expansion, integrate
/// `g'' + (n-2) cot(t) g' + lambda g = 0` by RK4 to `theta`, and bisect on
/// `g(theta) = 0`.
fn shoot_example(n: usize, theta: f64) -> f64 {
    let nn = n as f64;
    let end_value = |lam: f64| {
        let d = 1e-3;
        let c = lam / (2.0 * (nn - 1.0));
        let mut t = PI - d;
        let mut y = [1.0 - c * d * d, 2.0 * c * d];
        let steps = 20_000;
        let h = (theta - t) / steps as f64;
        let f = |t: f64, y: [f64; 2]| [y[1], -(nn - 2.0) * t.cos() / t.sin() * y[1] - lam * y[0]];
        for _ in 0..steps {
            let k1 = f(t, y);
            let k2 = f(t + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = f(t + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = f(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += h;
        }
        y[0]
    };
    // The first eigenvalue is the first sign change of g(theta) in lambda.
    let (mut lo, mut hi) = (1e-6, 1e-6);
    let s0 = end_value(lo).signum();
    while end_value(hi).signum() == s0 {
        lo = hi;
        hi += 0.05;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if end_value(mid).signum() == s0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn example_cap_matches_shooting() {
    let p = CapProblem { n: 3, angle: 1.0, variant: CapVariant::Example, k: 1 };
    let fd = cap_eigenpair(&p, 64).unwrap().estimate.value;
    let sh = shoot_example(3, 1.0);
    assert!(fd < 2.0);
    assert!((fd - sh).abs() < 1e-6, "fd={fd} shooting={sh}");
}

#[test]
fn hemisphere_gives_n_minus_one() {
    for n in [3, 4, 5, 7] {
        for variant in [CapVariant::Cone, CapVariant::Example] {
            let p = CapProblem { n, angle: PI / 2.0, variant, k: 1 };
            let v = cap_eigenpair(&p, 64).unwrap().estimate.value;
            assert!((v - (n as f64 - 1.0)).abs() < 1e-6, "n={n} {variant:?}: {v}");
        }
    }
}

#[test]
fn second_order_trace() {
    for (n, variant, angle) in
        [(3, CapVariant::Example, 1.0), (4, CapVariant::Cone, 0.8), (7, CapVariant::Example, 1.4)]
    {
        let p = CapProblem { n, angle, variant, k: 1 };
        let s = cap_eigenpair(&p, 64).unwrap();
        for r in &s.order_ratios {
            assert!((3.5..=4.5).contains(r), "n={n} {variant:?}: ratios {:?}", s.order_ratios);
        }
    }
}

#[test]
fn cone_and_example_are_mirror_images() {
    for angle in [0.4, 1.1, 2.3] {
        let c = cone_cap_mu1(4, angle).unwrap();
        let e = example_cap_lambda1(4, PI - angle).unwrap();
        assert!((c - e).abs() < 1e-8, "angle {angle}: {c} vs {e}");
    }
}

#[test]
fn example_cap_monotone_in_theta() {
    for n in [3, 5] {
        let mut prev = 0.0;
        for i in 1..12 {
            let th = 0.13 * i as f64;
            let v = example_cap_lambda1(n, th).unwrap();
            assert!(v > prev);
            if th < PI / 2.0 {
                assert!(v < n as f64 - 1.0);
            }
            prev = v;
        }
    }
}

#[test]
fn cone_cap_monotone_and_simple() {
    let mut prev = f64::INFINITY;
    for i in 1..12 {
        let a = 0.25 * i as f64;
        let mu1 = cone_cap_mu1(3, a).unwrap();
        assert!(mu1 < prev);
        prev = mu1;
        let mu2 =
            cap_eigenpair(&CapProblem { n: 3, angle: a, variant: CapVariant::Cone, k: 2 }, 64).unwrap().estimate.value;
        assert!(mu2 > mu1);
    }
}

#[test]
fn eigenfunctions_are_weighted_orthogonal() {
    let s1 = cap_eigenpair(&CapProblem { n: 4, angle: 1.2, variant: CapVariant::Cone, k: 1 }, 64).unwrap();
    let s2 = cap_eigenpair(&CapProblem { n: 4, angle: 1.2, variant: CapVariant::Cone, k: 2 }, 64).unwrap();
    let dot: f64 = (0..s1.weights.len()).map(|i| s1.weights[i] * s1.eigenfunction[i] * s2.eigenfunction[i]).sum();
    let n1: f64 = (0..s1.weights.len()).map(|i| s1.weights[i] * s1.eigenfunction[i].powi(2)).sum();
    assert!(dot.abs() < 1e-8);
    assert!((n1 - 1.0).abs() < 1e-12);
}

#[test]
fn annulus_closed_form_and_numeric() {
    let c = radial_annulus_constant(3, 2.0, 2.0 * (2.0 * PI).exp()).unwrap();
    assert!((c.closed_form - 0.5).abs() < 1e-14);
    let c2 = radial_annulus_constant(2, 1.0, PI.exp()).unwrap();
    assert!((c2.closed_form - 1.0).abs() < 1e-14);
    for (n, a, b) in
        [(3, 2.0, 2.0 * (2.0 * PI).exp()), (2, 1.0, PI.exp()), (4, 1.0, 20.0), (5, 0.5, 3.0), (7, 1.0, 1.5)]
    {
        let c = radial_annulus_constant(n, a, b).unwrap();
        assert!(c.discrepancy() < 1e-6, "({n},{a},{b}): {c:?}");
    }
}

#[test]
fn cone_constant_values() {
    for n in [3, 4, 6] {
        let v = cone_hardy_constant(n, PI / 2.0).unwrap();
        assert!((v - (n * n) as f64 / 4.0).abs() < 1e-6);
    }
    assert!(cone_hardy_constant(3, PI / 4.0).unwrap() > 2.25);
    let a = cone_hardy_constant(3, 2.6).unwrap();
    let b = cone_hardy_constant(3, 2.9).unwrap();
    assert!(b < a && b > 0.25);
}

/// Beta-function closed form of the sharpness quotient.
fn sharpness_exact(n: usize, eps: f64) -> f64 {
    let a = -0.5 * (n as f64 - 2.0) + eps;
    let e2 = 2.0 * eps;
    let i2 = 2.0 / (e2 * (e2 + 1.0) * (e2 + 2.0));
    let i1 = a * a / e2 - 2.0 * a * (a + 1.0) / (e2 + 1.0) + (a + 1.0) * (a + 1.0) / (e2 + 2.0);
    (i1 + (n as f64 - 1.0) * i2) / i2
}

#[test]
fn sharpness_quotient_matches_beta_integrals() {
    for n in [3, 4, 6] {
        for eps in [0.2, 0.1, 0.05, 0.01] {
            let q = sharpness_quotient(n, eps).unwrap();
            let want = sharpness_exact(n, eps);
            assert!(((q - want) / want).abs() < 1e-10, "n={n} eps={eps}: {q} vs {want}");
        }
    }
}

#[test]
fn sharpness_approaches_quarter_n_squared() {
    for n in [3, 4] {
        let target = (n * n) as f64 / 4.0;
        let qs: Vec<f64> = [0.2, 0.1, 0.05, 0.01].iter().map(|&e| sharpness_quotient(n, e).unwrap()).collect();
        for w in qs.windows(2) {
            assert!(w[1] < w[0]);
        }
        let last = *qs.last().unwrap();
        assert!(last > target && last < 1.05 * target);
    }
}
