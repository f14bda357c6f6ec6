//! One pass/fail line per acceptance criterion, with its runtime budget.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use hardylab::certificates::{
    cert_gef, counterexample_bound, counterexample_sweep, div_field_check, half_ball_samples, random_trial_suite,
    tau_lower_bound, tau_upper_bound, InequalityId, InequalitySpec, TrialFamily,
};
use hardylab::conformal::{conformal_suite, pullback_energy_pair, standard_pullbacks, QuadSpec};
use hardylab::femlab::{hardy_trace, lambda_tau, lambda_tau_trace, shell_bound, MeridianDomain, MeshOptions};
use hardylab::potentials::{
    cone_sobolev_bound, groundstate_identity_check, subcritical_test, AxialBump, Classification, GroundStateTrial,
    GroundStateWeights, IdentityQuad, PotentialSpec,
};
use hardylab::speclog::{derivative_identity_report, kappa_report, log_grid, Probe};
use hardylab::sturm1d::{cap_eigenpair, radial_annulus_constant, CapProblem, CapVariant};
use hardylab::Params;
use hardylab_cli::Report;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: String) -> Check {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion(id: usize, budget: Duration, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let r = f();
    let t = start.elapsed();
    let in_time = t <= budget;
    let (ok, detail) = match r {
        Ok(d) => (in_time, d),
        Err(d) => (false, d),
    };
    println!(
        "criterion {id:2}: {}  {detail} [{:.2} s of {} s]",
        if ok { "PASS" } else { "FAIL" },
        t.as_secs_f64(),
        budget.as_secs()
    );
    ok
}

fn kappa_solvers() -> Check {
    let k = kappa_report(1e-14).map_err(|e| e.to_string())?;
    ensure(
        k.residual <= 1e-12 && k.solver_gap <= 1e-10,
        format!("kappa {:.14} residual {:.1e} solver gap {:.1e}", k.kappa, k.residual, k.solver_gap),
    )
}

fn derivative_identities() -> Check {
    let grid = log_grid(1e-6, 1.0 - 1e-6, 1000);
    let mut worst = 0.0f64;
    for k in 0..=6 {
        let probes: Vec<Probe> =
            grid.iter().map(|&t| if k == 0 { Probe::Eta { t } } else { Probe::X { k, t } }).collect();
        worst = worst.max(derivative_identity_report(&probes).map_err(|e| e.to_string())?);
    }
    ensure(worst < 1e-6, format!("max rel err {worst:.2e} over X_1..X_6 and eta"))
}

fn cap_hemisphere() -> Check {
    let mut worst = 0.0f64;
    for n in [3, 4, 5, 7] {
        let p = CapProblem { n, angle: 0.5 * PI, variant: CapVariant::Example, k: 1 };
        let v = cap_eigenpair(&p, 64).map_err(|e| e.to_string())?.estimate.value;
        worst = worst.max((v - (n as f64 - 1.0)).abs());
    }
    ensure(worst < 1e-6, format!("max |lambda_1 - (n-1)| = {worst:.2e} for n in 3,4,5,7"))
}

fn annulus_closed_form() -> Check {
    let cases = [(3, 2.0, 2.0 * (2.0 * PI).exp()), (3, 1.0, 10.0), (4, 1.0, 5.0), (5, 0.5, 20.0), (7, 1.0, PI.exp())];
    let mut worst = 0.0f64;
    let mut half = f64::NAN;
    for (i, &(n, a, b)) in cases.iter().enumerate() {
        let c = radial_annulus_constant(n, a, b).map_err(|e| e.to_string())?;
        worst = worst.max(c.discrepancy());
        if i == 0 {
            half = c.numeric.value;
        }
    }
    ensure(
        worst < 1e-6 && (half - 0.5).abs() < 1e-6,
        format!("max discrepancy {worst:.2e}; exact case gives {half:.12}"),
    )
}

fn conformal() -> Check {
    let mut gap = 0.0f64;
    for n in [3, 4] {
        let rep = conformal_suite(n, 1000, 2024).map_err(|e| e.to_string())?;
        if !rep.passes() {
            return Err(format!("identity suite failed: {rep:?}"));
        }
        for (kind, f) in standard_pullbacks(n) {
            let e = pullback_energy_pair(&f, kind, n, QuadSpec::default()).map_err(|e| e.to_string())?;
            gap = gap.max(e.rel_gap());
        }
    }
    ensure(gap < 1e-6, format!("identities hold on 1000 samples, n = 3, 4; energy gap {gap:.2e}"))
}

fn half_ball_fem() -> Check {
    let tr =
        hardy_trace(&MeridianDomain::half_ball(3, 1.0), MeshOptions::default(), 4, 1e-8).map_err(|e| e.to_string())?;
    let v = tr.values();
    let above = v.iter().all(|&x| x >= 2.25 - 1e-3);
    let decreasing = v.windows(2).all(|w| w[1] < w[0]);
    ensure(above && decreasing, format!("levels {v:.5?}"))
}

fn lambda_tau_checks() -> Check {
    let big = lambda_tau(3, 100.0, 4).map_err(|e| e.to_string())?.value;
    let bound = shell_bound(3, 100.0);
    let thin = lambda_tau_trace(3, 0.05, 4, 1e-8).map_err(|e| e.to_string())?.values();
    let vals: Vec<f64> = [30.0, 50.0, 100.0]
        .iter()
        .map(|&t| lambda_tau(3, t, 3).map(|e| e.value))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let ok = big < 2.25
        && big <= 1.05 * bound
        && thin.iter().all(|&v| v >= 2.25 - 1e-3)
        && vals.windows(2).all(|w| w[1] < w[0]);
    ensure(ok, format!("tau=100: {big:.5} (shell {bound:.5}); tau=0.05 levels {thin:.5?}; tau=30,50,100: {vals:.5?}"))
}

fn certificates() -> Check {
    let mut min_margin = f64::INFINITY;
    for n in 2..=10 {
        let g = cert_gef(n).map_err(|e| e.to_string())?;
        if !g.holds {
            return Err(format!("gef fails for n = {n}: {g:?}"));
        }
        min_margin = min_margin.min(g.margin);
        let lo = tau_lower_bound(n).map_err(|e| e.to_string())?;
        let hi = tau_upper_bound(n).map_err(|e| e.to_string())?;
        if !(lo > 0.0 && lo <= hi) {
            return Err(format!("tau bounds out of order for n = {n}: {lo} vs {hi}"));
        }
    }
    let pts = half_ball_samples(3, 1.0, 100, 2024);
    let d = div_field_check(3, 1.0, &pts).map_err(|e| e.to_string())?;
    ensure(
        d.max_rel_discrepancy < 1e-5,
        format!("gef margin >= {min_margin:.3}; tau bounds ordered; div discrepancy {:.2e}", d.max_rel_discrepancy),
    )
}

fn counterexample() -> Check {
    let probe = counterexample_bound(3, 1.3, 0.25).map_err(|e| e.to_string())?;
    let c = counterexample_bound(3, 1.3, 0.5 * probe.rho_threshold).map_err(|e| e.to_string())?;
    let thetas: Vec<f64> = (1..=20).map(|i| 0.5 * PI * i as f64 / 21.0).collect();
    let rhos: Vec<f64> = (1..=20).map(|i| 0.45 * 10f64.powf(-12.0 + 11.0 * i as f64 / 20.0)).collect();
    let s = counterexample_sweep(3, &thetas, &rhos).map_err(|e| e.to_string())?;
    ensure(
        c.upper_bound < 2.25 && s.implication_failures == 0,
        format!(
            "bound {:.6} at rho {:.3e}; grid: {} of 400 satisfy the condition, {} failures",
            c.upper_bound, c.rho, s.cond_true, s.implication_failures
        ),
    )
}

fn fuzzing() -> Check {
    let halfball = |id, m| InequalitySpec::new(id, Params { n: 3, r: 1.0, m, ..Params::default() });
    let specs = [
        halfball(InequalityId::HalfballSobolev, 0),
        halfball(InequalityId::HalfballMlogs, 1),
        halfball(InequalityId::HalfballMlogs, 2),
        halfball(InequalityId::HalfballLogseries, 0),
        halfball(InequalityId::HalfballExtra, 0),
        InequalitySpec::domain(InequalityId::DomainLogseries, 3, 1.0).map_err(|e| e.to_string())?,
    ];
    let mut notes = Vec::new();
    for spec in &specs {
        let probe = spec.id.has_sobolev();
        let rep = random_trial_suite(spec, TrialFamily::Random, 1000, 2024, probe).map_err(|e| e.to_string())?;
        if rep.violations > 0 || rep.probe_c.is_some_and(|c| !(c > 0.0)) {
            return Err(format!("{} (m = {}): {} violations", spec.id, spec.params.m, rep.violations));
        }
        notes.push(format!(
            "{}{}",
            spec.id,
            if spec.id == InequalityId::HalfballMlogs { format!("/m{}", spec.params.m) } else { String::new() }
        ));
    }
    let spec = halfball(InequalityId::HalfballLogseries, 0);
    let rep =
        random_trial_suite(&spec, TrialFamily::Sharpness { eps: 0.01 }, 1, 0, false).map_err(|e| e.to_string())?;
    let q = rep.argmin.remainder.energy / rep.argmin.remainder.hardy_mass;
    ensure(
        ((q - 2.25) / 2.25).abs() < 0.05,
        format!("0 violations in 1000 trials each ({}); sharpness quotient {q:.4}", notes.join(", ")),
    )
}

fn potentials() -> Check {
    let want = [Classification::Infinite, Classification::Infinite, Classification::Finite, Classification::Finite];
    for (alpha, w) in [1.0, 2.0, 2.5, 3.0].into_iter().zip(want) {
        let v = PotentialSpec::logweighted(alpha, Params::with_n(3));
        let got = subcritical_test(&v, 1e-10).map_err(|e| e.to_string())?.classification;
        if got != w {
            return Err(format!("alpha = {alpha}: {got:?}"));
        }
    }
    let bump = AxialBump { center: 0.5, inner: 0.05, outer: 0.3, amplitude: 1e4 };
    let c = groundstate_identity_check(
        &GroundStateTrial::Bump(bump),
        &GroundStateWeights::new(3, 1.0),
        1.0,
        &IdentityQuad::default(),
    )
    .map_err(|e| e.to_string())?;
    if c.rel_err >= 1e-5 {
        return Err(format!("identity rel err {:.2e}", c.rel_err));
    }
    let angles = [1.2, 0.6, 0.3, 0.1, 0.03];
    let bounds =
        angles.iter().map(|&a| cone_sobolev_bound(3, a)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let ordered = bounds.iter().all(|b| b.sharp <= b.coarse);
    let shrinking = bounds.windows(2).all(|w| w[1].coarse < w[0].coarse);
    let last = bounds.last().unwrap().coarse / bounds[0].coarse;
    ensure(
        ordered && shrinking && last < 1e-2,
        format!(
            "classification ok; identity rel err {:.1e}; coarse ratio {last:.1e} from angle 1.2 to 0.03",
            c.rel_err
        ),
    )
}

fn cli(args: &[&str]) -> (Option<i32>, Report) {
    let out = Command::new(env!("CARGO_BIN_EXE_hardylab")).args(args).output().expect("binary runs");
    let mut r: Report = serde_json::from_slice(&out.stdout).expect("report parses");
    r.provenance.timestamp.clear();
    (out.status.code(), r)
}

fn reproducibility() -> Check {
    let seeded: [&[&str]; 4] = [
        &["verify", "--inequality", "halfball-logseries", "--n", "3", "--trials", "100", "--seed", "7"],
        &["verify", "--inequality", "domain-logseries", "--trials", "20", "--seed", "3", "--jobs", "2"],
        &["conformal", "check", "--n", "3", "--samples", "200", "--seed", "11"],
        &["divcheck", "--n", "3", "--R", "1", "--samples", "50", "--seed", "5"],
    ];
    for args in seeded {
        let (ca, a) = cli(args);
        let (cb, b) = cli(args);
        if a != b || ca != cb || ca != Some(0) {
            return Err(format!("{} differs between runs or failed", args.join(" ")));
        }
    }
    let (code, r) = cli(&["verify", "--inequality", "halfball-sobolev", "--trials", "50", "--sobolev-c", "1e6"]);
    ensure(
        code == Some(1) && !r.passed,
        "4 seeded commands reproduce; a failing certificate exits with status 1".to_string(),
    )
}

#[test]
fn acceptance() {
    let s = Duration::from_secs;
    let results = [
        criterion(1, s(1), kappa_solvers),
        criterion(2, s(5), derivative_identities),
        criterion(3, s(10), cap_hemisphere),
        criterion(4, s(10), annulus_closed_form),
        criterion(5, s(30), conformal),
        criterion(6, s(60), half_ball_fem),
        criterion(7, s(120), lambda_tau_checks),
        criterion(8, s(20), certificates),
        criterion(9, s(30), counterexample),
        criterion(10, s(60), fuzzing),
        criterion(11, s(30), potentials),
        criterion(12, s(120), reproducibility),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, &ok)| !ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
