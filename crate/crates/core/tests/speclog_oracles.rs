use hardylab::speclog::*;

// Reference values from a 40-digit evaluation: direct summation until
// 1 - X_k < 2e-3 and at least 20000 terms, followed by a nine-term
// asymptotic tail.
const ETA_REF: [(f64, f64, f64); 6] = [
    (1e-30, 0.019_974_368_951_894_570_05, 0.000_212_520_569_037_312_971_3),
    (0.01, 0.366_472_665_507_840_391_2, 0.037_926_240_216_605_054_66),
    (0.1, 0.773_588_222_167_312_190_5, 0.121_845_129_681_051_274_9),
    (0.3, 1.542_213_968_259_892_224, 0.325_364_383_877_779_211_7),
    (0.367_879_441_171_442_321_6, 1.875_059_873_296_337_048, 0.422_271_120_365_118_222_6),
    (0.9, 18.821_443_490_373_553_42, 5.982_304_340_207_005_744),
];

const KAPPA_REF: f64 = 703.194_889_354_477_280_1;

#[test]
fn eta_and_b_match_high_precision_reference() {
    for (t, e_ref, b_ref) in ETA_REF {
        let e = eta(t).unwrap();
        let b = big_b(t).unwrap();
        let tol = 4e-15 * e_ref.max(1.0);
        assert!(e.value - tol <= e_ref && e_ref <= e.upper() + tol, "eta({t}) = {:?}, ref {e_ref}", e);
        assert!(b.value - tol <= b_ref && b_ref <= b.upper() + tol, "B({t}) = {:?}, ref {b_ref}", b);
    }
}

/// Crude enclosure from direct summation alone: with a = 1/2 + e/(4 - 2e),
/// p = 1/a and c = 1/(a e), the tail after N terms is at most
/// P_N (1 + c) / (p - 1).
fn crude_eta(t: f64, n_terms: usize) -> (f64, f64) {
    let mut x = 1.0 / (1.0 - t.ln());
    let mut e = 1.0 - x;
    let mut p = x;
    let mut s = p;
    for _ in 1..n_terms {
        let l = -(-e).ln_1p();
        x = 1.0 / (1.0 + l);
        e = l / (1.0 + l);
        p *= x;
        s += p;
    }
    let a = 0.5 + e / (4.0 - 2.0 * e);
    let pw = 1.0 / a;
    let c = 1.0 / (a * e);
    (s, s + p * (1.0 + c) / (pw - 1.0))
}

#[test]
fn eta_lies_inside_direct_summation_bracket() {
    for t in [1e-8, 1e-3, 0.05, 0.2] {
        let (lo, hi) = crude_eta(t, 2_000_000);
        let e = eta(t).unwrap();
        assert!(e.value >= lo - 1e-13 && e.upper() <= hi + 1e-13, "t={t}");
        assert!(hi - lo < 1e-6);
    }
}

#[test]
fn kappa_reproduces_reference_and_defining_equation() {
    let rep = kappa_report(1e-12).unwrap();
    assert!(rep.kappa > 1.0);
    assert!(rep.residual <= 1e-12, "{rep:?}");
    assert!(rep.solver_gap <= 1e-10, "{rep:?}");
    assert!((rep.kappa - KAPPA_REF).abs() < 1e-9, "{rep:?}");
}

#[test]
fn b_bounded_by_eta_times_x1() {
    for t in [0.01, 0.1, 0.3] {
        let e = eta(t).unwrap();
        let b = big_b(t).unwrap();
        assert!(b.upper() <= e.value * x1(t));
    }
}

#[test]
fn eta_vanishes_at_zero() {
    assert!(eta(1e-30).unwrap().value < 0.1);
}

#[test]
fn derivative_identities_spot_checks() {
    let probes = [Probe::X { k: 1, t: 0.5 }, Probe::X { k: 3, t: 0.2 }, Probe::Eta { t: 0.3 }];
    for p in probes {
        let err = derivative_identity_error(p).unwrap();
        assert!(err < 1e-6, "{p:?}: {err:e}");
    }
}

#[test]
fn tail_bound_dominates_doubling_difference() {
    // With a loose tolerance the enclosure must cover a tighter evaluation.
    for t in [1e-4, 0.1, 0.5] {
        let coarse = eta_with_tol(t, 1e-6).unwrap();
        let fine = eta_with_tol(t, 1e-15).unwrap();
        assert!(fine.value >= coarse.value - 1e-15);
        assert!(fine.upper() <= coarse.upper() + 1e-15);
    }
}

#[test]
fn eta_bounded_by_quarter_below_inverse_kappa() {
    let kappa = solve_kappa(1e-12).unwrap();
    for t in log_grid(1e-12, 1.0 / kappa, 200) {
        assert!(eta(t).unwrap().value <= 0.25 + 1e-13, "t={t}");
    }
}
