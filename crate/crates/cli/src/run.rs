use std::f64::consts::PI;

use hardylab::certificates::{
    self, counterexample_bound, counterexample_sweep, div_field_check, half_ball_samples, InequalitySpec, TrialFamily,
};
use hardylab::conformal::{conformal_suite, pullback_energy_pair, standard_pullbacks, QuadSpec};
use hardylab::femlab::{annulus_options, build_meridian_mesh_with, lambda_tau_trace, shell_bound, MeridianDomain};
use hardylab::potentials::{
    cone_sobolev_bound, cr_v_estimate, groundstate_identity_check, subcritical_test, AxialBump, GroundStateTrial,
    GroundStateWeights, IdentityQuad, PotentialFamily, PotentialSpec,
};
use hardylab::speclog::{self, Probe};
use hardylab::sturm1d::{cap_eigenpair, radial_annulus_constant, sharpness_quotient, CapProblem, CapVariant};
use hardylab::{LabError, Params, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::*;
use crate::report::{Provenance, Report, ReportError};

/// What a command produced before it is wrapped into a report.
pub struct Outcome {
    pub results: Value,
    pub warnings: Vec<String>,
    pub passed: bool,
}

impl Outcome {
    fn new(results: Value, passed: bool) -> Self {
        Outcome { results, warnings: Vec::new(), passed }
    }

    fn warn(mut self, cond: bool, msg: impl Into<String>) -> Self {
        if cond {
            self.warnings.push(msg.into());
        }
        self
    }
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report values serialize")
}

pub const DEFAULT_SEED: u64 = 0;

/// Resolved parameters: the command's own fields plus seed and tolerance.
pub fn resolved_params(cfg: &RunConfig) -> Value {
    let mut v = to_value(&cfg.command);
    if let Value::Object(m) = &mut v {
        m.shift_remove("command");
        if cfg.command.seeded() {
            m.insert("seed".into(), json!(cfg.seed.unwrap_or(DEFAULT_SEED)));
        }
        if let Some(t) = cfg.tol {
            m.insert("tol".into(), json!(t));
        }
    }
    v
}

/// Run one configuration and wrap the outcome into a report.
pub fn dispatch(cfg: &RunConfig) -> Report {
    let name = cfg.command.name();
    let params = resolved_params(cfg);
    let seed = cfg.command.seeded().then(|| cfg.seed.unwrap_or(DEFAULT_SEED));
    match validate(cfg).and_then(|_| execute(cfg)) {
        Ok(o) => Report {
            command: name.to_string(),
            params,
            results: o.results,
            provenance: Provenance::now(seed),
            warnings: o.warnings,
            passed: o.passed,
            error: None,
        },
        Err(e) => Report::failed(name, params, seed, ReportError::from(&e)),
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LabError::invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn at_least(field: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(LabError::invalid(field, format!("must be at least {min}, got {v}")))
    }
}

/// Preconditions checked before any computation starts.
pub fn validate(cfg: &RunConfig) -> Result<()> {
    if let Some(t) = cfg.tol {
        positive("tol", t)?;
    }
    match &cfg.command {
        Command::Kappa(_) | Command::Batch(_) => Ok(()),
        Command::Speclog(a) => match &a.action {
            SpeclogAction::Eval(e) => {
                at_least("k", e.k, 1)?;
                if !(e.t > 0.0 && e.t <= 1.0) {
                    return Err(LabError::invalid("t", "must lie in (0, 1]"));
                }
                Ok(())
            }
            SpeclogAction::Kappa(_) => Ok(()),
            SpeclogAction::Derivatives(d) => {
                at_least("k-max", d.k_max, 1)?;
                at_least("points", d.points, 1)?;
                if !(d.t_min >= 1e-6 && d.t_max <= 1.0 - 1e-6 && d.t_min <= d.t_max) {
                    return Err(LabError::invalid("t-min", "need 1e-6 <= t-min <= t-max <= 1 - 1e-6"));
                }
                Ok(())
            }
        },
        Command::Conformal(a) => match &a.action {
            ConformalAction::Check(c) => {
                at_least("n", c.n, 2)?;
                at_least("samples", c.samples, 1)
            }
        },
        Command::CapEig(a) => {
            CapProblem { n: a.n, angle: a.theta, variant: variant(a.variant), k: a.k }.validate()?;
            at_least("resolution", a.resolution, hardylab::sturm1d::MIN_RESOLUTION)
        }
        Command::Annulus1d(a) => {
            at_least("n", a.n, 2)?;
            positive("a", a.a)?;
            if !(a.b > a.a && a.b.is_finite()) {
                return Err(LabError::invalid("b", "must exceed a"));
            }
            Ok(())
        }
        Command::Annulus(a) => {
            at_least("n", a.n, 2)?;
            positive("tau", a.tau)?;
            at_least("levels", a.levels, 2)
        }
        Command::Sharpness(a) => {
            at_least("n", a.n, 2)?;
            if !(a.eps > 0.0 && a.eps < 0.5) {
                return Err(LabError::invalid("eps", "must lie in (0, 1/2)"));
            }
            Ok(())
        }
        Command::Verify(a) => {
            at_least("trials", a.trials, 1)?;
            if a.family == FamilyArg::Sharpness && !(a.eps > 0.0 && a.eps < 0.5) {
                return Err(LabError::invalid("eps", "must lie in (0, 1/2)"));
            }
            inequality_spec(a)?.validate()
        }
        Command::TauBounds(a) => at_least("n", a.n, 2),
        Command::Counterexample(a) => {
            at_least("n", a.n, 2)?;
            if !(a.theta > 0.0 && a.theta < 0.5 * PI) {
                return Err(LabError::invalid("theta", format!("must lie in (0, pi/2), got {}", a.theta)));
            }
            if let Some(r) = a.rho {
                if !(r > 0.0 && r < 0.5) {
                    return Err(LabError::invalid("rho", format!("must lie in (0, 1/2), got {r}")));
                }
            }
            Ok(())
        }
        Command::Divcheck(a) => {
            at_least("n", a.n, 2)?;
            positive("R", a.big_r)?;
            at_least("samples", a.samples, 1)
        }
        Command::Subcritical(a) => {
            potential(a.family, a.alpha, a.s, Params { n: a.n, rho: a.rho, d: a.d, ..Params::default() }).validate()
        }
        Command::Crv(a) => {
            potential(a.family, a.alpha, a.s, Params { n: a.n, rho: a.rho, d: a.d, ..Params::default() }).validate()?;
            positive("r", a.r)?;
            at_least("levels", a.levels, 1)
        }
        Command::ConeSobolev(a) => {
            at_least("n", a.n, 3)?;
            if !(a.theta > 0.0 && a.theta < PI) {
                return Err(LabError::invalid("theta", "must lie in (0, pi)"));
            }
            Ok(())
        }
        Command::GroundstateCheck(a) => {
            let w = GroundStateWeights::new(a.n, a.rho).with_logs(a.m, a.d_tilde);
            w.validate()?;
            positive("d", a.d)?;
            positive("amplitude", a.amplitude.abs())
        }
    }
}

fn variant(v: VariantArg) -> CapVariant {
    match v {
        VariantArg::Cone => CapVariant::Cone,
        VariantArg::Example => CapVariant::Example,
    }
}

fn potential(f: PotentialArg, alpha: f64, s: f64, params: Params) -> PotentialSpec {
    match f {
        PotentialArg::Power => PotentialSpec::power(s, params),
        PotentialArg::Logweighted => PotentialSpec::logweighted(alpha, params),
    }
}

fn inequality_spec(a: &VerifyArgs) -> Result<InequalitySpec> {
    let mut spec = if a.inequality.is_domain() {
        positive("d", a.d)?;
        InequalitySpec::domain(a.inequality, a.n, a.d)?
    } else {
        InequalitySpec::new(a.inequality, Params { n: a.n, r: a.r, m: a.m, ..Params::default() })
    };
    spec.sobolev_c = a.sobolev_c;
    Ok(spec)
}

fn kappa_outcome(tol: Option<f64>) -> Result<Outcome> {
    let tol = tol.unwrap_or(1e-14);
    let k = speclog::kappa_report(tol)?;
    let passed = k.residual <= tol.max(1e-12) && k.solver_gap <= (100.0 * tol * k.kappa).max(1e-10);
    Ok(Outcome::new(to_value(&k), passed))
}

/// Run a validated configuration.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    match &cfg.command {
        Command::Kappa(_) => kappa_outcome(cfg.tol),
        Command::Speclog(a) => match &a.action {
            SpeclogAction::Kappa(_) => kappa_outcome(cfg.tol),
            SpeclogAction::Eval(e) => {
                let tol = cfg.tol.unwrap_or(speclog::DEFAULT_TOL);
                let eta = speclog::eta_with_tol(e.t, tol)?;
                let b = speclog::big_b_with_tol(e.t, tol)?;
                let r = json!({
                    "k": e.k,
                    "t": e.t,
                    "x_k": speclog::eval_x(e.k, e.t)?,
                    "prod_x": speclog::prod_x(e.k, e.t)?,
                    "value": eta.value,
                    "tail_bound": eta.tail_bound,
                    "terms": eta.terms_used,
                    "b": to_value(&b),
                });
                Ok(Outcome::new(r, true))
            }
            SpeclogAction::Derivatives(d) => {
                let tol = cfg.tol.unwrap_or(1e-6);
                let grid = speclog::log_grid(d.t_min, d.t_max, d.points);
                let mut rows = Vec::with_capacity(d.k_max + 1);
                let mut worst = 0.0f64;
                for k in 0..=d.k_max {
                    let probes: Vec<Probe> =
                        grid.iter().map(|&t| if k == 0 { Probe::Eta { t } } else { Probe::X { k, t } }).collect();
                    let err = speclog::derivative_identity_report(&probes)?;
                    worst = worst.max(err);
                    let name = if k == 0 { "eta".to_string() } else { format!("x{k}") };
                    rows.push(json!({ "function": name, "max_rel_err": err }));
                }
                let r = json!({ "points": d.points, "max_rel_err": worst, "table": rows });
                Ok(Outcome::new(r, worst < tol))
            }
        },
        Command::Conformal(a) => match &a.action {
            ConformalAction::Check(c) => {
                let tol = cfg.tol.unwrap_or(1e-6);
                let rep = conformal_suite(c.n, c.samples, seed)?;
                let mut energies = Vec::new();
                let mut worst = 0.0f64;
                for (kind, f) in standard_pullbacks(c.n) {
                    let e = pullback_energy_pair(&f, kind, c.n, QuadSpec::default())?;
                    worst = worst.max(e.rel_gap());
                    energies.push(json!({
                        "map": format!("{kind:?}"),
                        "source": e.source,
                        "image": e.image,
                        "rel_gap": e.rel_gap(),
                    }));
                }
                let r = json!({ "identities": to_value(&rep), "energy": energies, "max_energy_gap": worst });
                Ok(Outcome::new(r, rep.passes() && worst < tol))
            }
        },
        Command::CapEig(a) => {
            let p = CapProblem { n: a.n, angle: a.theta, variant: variant(a.variant), k: a.k };
            let sol = cap_eigenpair(&p, a.resolution)?;
            let tol = cfg.tol.unwrap_or(1e-6);
            // The lower hemisphere with a Neumann pole has first eigenvalue n - 1.
            let reference = (a.variant == VariantArg::Example && a.k == 1 && (a.theta - 0.5 * PI).abs() < 1e-15)
                .then_some(a.n as f64 - 1.0);
            let e = &sol.estimate;
            let passed = reference.is_none_or(|r| (e.value - r).abs() <= tol);
            let r = json!({
                "value": e.value,
                "residual": e.residual,
                "reference": reference,
                "order_ratios": sol.order_ratios,
                "table": to_value(&e.trace),
            });
            Ok(Outcome::new(r, passed).warn(e.residual > tol, "extrapolation residual exceeds the tolerance"))
        }
        Command::Annulus1d(a) => {
            let c = radial_annulus_constant(a.n, a.a, a.b)?;
            let tol = cfg.tol.unwrap_or(1e-6);
            let r = json!({
                "closed_form": c.closed_form,
                "numeric": c.numeric.value,
                "residual": c.numeric.residual,
                "discrepancy": c.discrepancy(),
                "table": to_value(&c.numeric.trace),
            });
            Ok(Outcome::new(r, c.discrepancy() <= tol))
        }
        Command::Annulus(a) => {
            let tol = cfg.tol.unwrap_or(hardylab::femlab::DEFAULT_TOL);
            if let Some(path) = &a.mesh_dump {
                let d = MeridianDomain::annulus(a.n, 1.0, a.tau);
                d.validate()?;
                let mesh = build_meridian_mesh_with(&d, annulus_options(a.tau))?;
                std::fs::write(path, mesh.dump())
                    .map_err(|e| LabError::invalid("mesh-dump", format!("cannot write {}: {e}", path.display())))?;
            }
            let tr = lambda_tau_trace(a.n, a.tau, a.levels, tol)?;
            let sharp = (a.n * a.n) as f64 / 4.0;
            let est = tr.estimate();
            let r = json!({
                "estimate": est.value,
                "sharp_constant": sharp,
                "below_sharp": est.value < sharp,
                "shell_bound": shell_bound(a.n, a.tau),
                "table": to_value(&tr.levels),
            });
            let worst_res = tr.levels.iter().map(|l| l.residual).fold(0.0, f64::max);
            Ok(Outcome::new(r, tr.is_nonincreasing(1e-10))
                .warn(worst_res > tol, "eigen residual exceeds the tolerance on some level"))
        }
        Command::Sharpness(a) => {
            let q = sharpness_quotient(a.n, a.eps)?;
            let sharp = (a.n * a.n) as f64 / 4.0;
            let r = json!({ "quotient": q, "sharp_constant": sharp, "rel_gap": (q - sharp) / sharp });
            Ok(Outcome::new(r, q >= sharp * (1.0 - 1e-12)))
        }
        Command::Verify(a) => {
            let spec = inequality_spec(a)?;
            let family = match a.family {
                FamilyArg::Random => TrialFamily::Random,
                FamilyArg::Sharpness => TrialFamily::Sharpness { eps: a.eps },
            };
            let rep = certificates::random_trial_suite(&spec, family, a.trials, seed, a.probe_c)?;
            let worst = rep.argmin.remainder;
            let passed = rep.passed() && rep.probe_c.is_none_or(|c| c > 0.0);
            Ok(Outcome::new(to_value(&rep), passed)
                .warn(worst.quad_error >= worst.value.abs(), "quadrature error dominates the smallest remainder"))
        }
        Command::TauBounds(a) => {
            let b = certificates::tau_bounds(a.n)?;
            let gef = certificates::cert_gef(a.n)?;
            let passed = b.lower > 0.0 && b.lower <= b.upper && gef.holds;
            Ok(Outcome::new(json!({ "bounds": to_value(&b), "gef": to_value(&gef) }), passed))
        }
        Command::Counterexample(a) => {
            let rho = match a.rho {
                Some(r) => r,
                None => {
                    let probe = counterexample_bound(a.n, a.theta, 0.25)?;
                    if probe.rho_threshold <= 0.0 {
                        return Err(LabError::Inconclusive(
                            "lambda1 >= n - 1 at this angle, so no threshold radius exists".into(),
                        ));
                    }
                    0.5 * probe.rho_threshold
                }
            };
            let case = counterexample_bound(a.n, a.theta, rho)?;
            let mut passed = case.implication_holds();
            let mut r = json!({ "case": to_value(&case) });
            if a.grid > 0 {
                let thetas: Vec<f64> = (1..=a.grid).map(|i| 0.5 * PI * i as f64 / (a.grid + 1) as f64).collect();
                let rhos: Vec<f64> =
                    (1..=a.grid).map(|i| 0.45 * 10f64.powf(-12.0 + 11.0 * i as f64 / a.grid as f64)).collect();
                let s = counterexample_sweep(a.n, &thetas, &rhos)?;
                passed &= s.implication_failures == 0;
                r["sweep"] = json!({
                    "cases": s.cases.len(),
                    "cond_true": s.cond_true,
                    "implication_failures": s.implication_failures,
                });
            }
            Ok(Outcome::new(r, passed))
        }
        Command::Divcheck(a) => {
            let tol = cfg.tol.unwrap_or(1e-5);
            let pts = half_ball_samples(a.n, a.big_r, a.samples, seed);
            let rep = div_field_check(a.n, a.big_r, &pts)?;
            Ok(Outcome::new(to_value(&rep), rep.passed(tol)))
        }
        Command::Subcritical(a) => {
            let v = potential(a.family, a.alpha, a.s, Params { n: a.n, rho: a.rho, d: a.d, ..Params::default() });
            let rep = subcritical_test(&v, cfg.tol.unwrap_or(1e-10))?;
            Ok(Outcome::new(to_value(&rep), true))
        }
        Command::Crv(a) => {
            let v = potential(a.family, a.alpha, a.s, Params { n: a.n, rho: a.rho, d: a.d, ..Params::default() });
            let tr = cr_v_estimate(&v, a.r, a.levels, cfg.tol.unwrap_or(hardylab::femlab::DEFAULT_TOL))?;
            let vals: Vec<f64> = tr.estimate.trace.iter().map(|t| t.value).collect();
            let monotone = vals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-10));
            let critical = matches!(v.family, PotentialFamily::Logweighted { alpha } if alpha <= 2.0);
            let r = json!({
                "r": tr.r,
                "estimate": tr.estimate.value,
                "residual": tr.estimate.residual,
                "table": to_value(&tr.estimate.trace),
            });
            Ok(Outcome::new(r, monotone).warn(
                critical,
                "for alpha <= 2 the estimates decrease only like 1/ln ln(1/r); finite levels stay far from the limit",
            ))
        }
        Command::ConeSobolev(a) => {
            let b = cone_sobolev_bound(a.n, a.theta)?;
            Ok(Outcome::new(to_value(&b), b.sharp <= b.coarse))
        }
        Command::GroundstateCheck(a) => {
            let w = GroundStateWeights::new(a.n, a.rho).with_logs(a.m, a.d_tilde);
            let bump = AxialBump { center: a.center, inner: a.inner, outer: a.outer, amplitude: a.amplitude };
            let c = groundstate_identity_check(&GroundStateTrial::Bump(bump), &w, a.d, &IdentityQuad::default())?;
            let tol = cfg.tol.unwrap_or(1e-5);
            Ok(Outcome::new(to_value(&c), c.rel_err < tol)
                .warn(c.quad_convergence > tol, "quadrature has not settled below the tolerance"))
        }
        Command::Batch(_) => Err(LabError::invalid("command", "batch files cannot nest batch runs")),
    }
}
