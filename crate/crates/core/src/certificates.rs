//! Remainder checks for the half-ball and exterior-ball inequalities, and
//! the scalar certificates used in their proofs.
//!
//! A remainder is `∫|∇u|^2` minus every right-hand term of an inequality,
//! evaluated for an explicit admissible `u`. Separable trials
//! `u = f(|x|) x_n/|x|` on a half ball reduce to one-dimensional integrals in
//! `s = ln |x|`; trials on the curved domain are piecewise-linear functions on
//! a meridian mesh and go through the femlab assembly.

use crate::error::{LabError, Result};
use crate::femlab::sparse::CsrMatrix;
use crate::femlab::{
    assemble, build_meridian_mesh_with, integrate_nodal, mass_matrix, refine, FnWeight, MeridianDomain, MeridianMesh,
    MeshOptions, SparseSystem,
};
use crate::quad::adaptive_many;
use crate::special::sphere_area;
use crate::speclog::{big_b_neg_log, eta_mid, prod_x_neg_log, solve_kappa, x1};
use crate::sturm1d::example_cap_lambda1;
use crate::types::{Params, PointN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

/// `kappa` to full double precision, computed once.
pub fn kappa() -> f64 {
    static K: OnceLock<f64> = OnceLock::new();
    *K.get_or_init(|| solve_kappa(1e-14).expect("kappa solver converges"))
}

/// `sigma_n = 1/(sqrt(75) n^2)`.
pub fn sigma_n(n: usize) -> f64 {
    1.0 / (75f64.sqrt() * (n * n) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InequalityId {
    /// Hardy plus the `X_1`-weighted Sobolev term on `B_R^+`.
    HalfballSobolev,
    /// Hardy, `m` logarithmic terms and a Sobolev term on `B_R^+`.
    HalfballMlogs,
    /// Hardy plus the full logarithmic series on `B_R^+`.
    HalfballLogseries,
    /// The series with `X_i(|x|/kappa R)` plus `|x|^{-3/2}/(8 R^{1/2})`.
    HalfballExtra,
    /// Plain Hardy with constant `n^2/4` under a large exterior ball.
    DomainHardy,
    /// Hardy plus the Sobolev term with `X_1(|x|/3D)` under a large exterior ball.
    DomainHardySobolev,
    /// Hardy plus the logarithmic series with `X_i(|x|/(3 kappa D))`.
    DomainLogseries,
}

impl InequalityId {
    pub const ALL: [InequalityId; 7] = [
        InequalityId::HalfballSobolev,
        InequalityId::HalfballMlogs,
        InequalityId::HalfballLogseries,
        InequalityId::HalfballExtra,
        InequalityId::DomainHardy,
        InequalityId::DomainHardySobolev,
        InequalityId::DomainLogseries,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            InequalityId::HalfballSobolev => "halfball-sobolev",
            InequalityId::HalfballMlogs => "halfball-mlogs",
            InequalityId::HalfballLogseries => "halfball-logseries",
            InequalityId::HalfballExtra => "halfball-extra",
            InequalityId::DomainHardy => "domain-hardy",
            InequalityId::DomainHardySobolev => "domain-hardy-sobolev",
            InequalityId::DomainLogseries => "domain-logseries",
        }
    }

    pub fn is_domain(&self) -> bool {
        matches!(self, InequalityId::DomainHardy | InequalityId::DomainHardySobolev | InequalityId::DomainLogseries)
    }

    pub fn has_sobolev(&self) -> bool {
        matches!(self, InequalityId::HalfballSobolev | InequalityId::HalfballMlogs | InequalityId::DomainHardySobolev)
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InequalityId {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        InequalityId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| LabError::invalid("inequality", format!("unknown id {s:?}")))
    }
}

/// An inequality with its parameters. Half-ball ids read `n`, `r` and `m`;
/// domain ids read `n`, `rho` (exterior ball `B_rho(-rho e_n)`) and `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalitySpec {
    pub id: InequalityId,
    pub params: Params,
    /// Constant in front of the Sobolev term. Zero checks the remaining
    /// terms exactly.
    pub sobolev_c: f64,
}

impl InequalitySpec {
    pub fn new(id: InequalityId, params: Params) -> Self {
        InequalitySpec { id, params, sobolev_c: 0.0 }
    }

    /// Domain-mode spec on `{|x| < d, |x + rho e_n| > rho}` with the smallest
    /// exterior radius the statement allows.
    pub fn domain(id: InequalityId, n: usize, d: f64) -> Result<Self> {
        let ratio = match id {
            InequalityId::DomainHardy => tau_lower_bound(n)?,
            InequalityId::DomainHardySobolev | InequalityId::DomainLogseries => sigma_n(n),
            _ => return Err(LabError::invalid("inequality", format!("{id} is not a domain id"))),
        };
        Ok(InequalitySpec::new(id, Params { n, rho: d / ratio, d, ..Params::default() }))
    }

    /// Outer radius of the region the trials live in.
    pub fn radius(&self) -> f64 {
        if self.id.is_domain() {
            self.params.d
        } else {
            self.params.r
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if p.n < 2 {
            return Err(LabError::invalid("n", "must be at least 2"));
        }
        if self.id.has_sobolev() && p.n < 3 {
            return Err(LabError::invalid("n", format!("{} needs n >= 3", self.id)));
        }
        if !(self.sobolev_c >= 0.0 && self.sobolev_c.is_finite()) {
            return Err(LabError::invalid("sobolev_c", "must be finite and nonnegative"));
        }
        if self.id == InequalityId::HalfballMlogs && p.m == 0 {
            return Err(LabError::invalid("m", "halfball-mlogs needs m >= 1"));
        }
        if self.id.is_domain() {
            if !(p.d > 0.0 && p.rho > 0.0) {
                return Err(LabError::invalid("d", "need d > 0 and rho > 0"));
            }
            let ratio = match self.id {
                InequalityId::DomainHardy => tau_lower_bound(p.n)?,
                _ => sigma_n(p.n),
            };
            if p.rho * ratio < p.d * (1.0 - 1e-12) {
                return Err(LabError::invalid(
                    "rho",
                    format!("{} needs rho >= d / {ratio:e}, got rho = {}", self.id, p.rho),
                ));
            }
        } else if !(p.r > 0.0) {
            return Err(LabError::invalid("r", "must be positive"));
        }
        Ok(())
    }

    fn terms(&self) -> Terms {
        let p = &self.params;
        let n = p.n as f64;
        let k = kappa();
        let (mut logs, mut sob) = (Vec::new(), None);
        let sob_power = (2.0 * n - 2.0) / (n - 2.0);
        match self.id {
            InequalityId::HalfballSobolev => {
                sob = Some(SobolevTerm { depth: 1, scale: p.r, power: sob_power });
            }
            InequalityId::HalfballMlogs => {
                logs.push((0.25, RadialWeight::LogPartial { m: p.m, scale: p.r }));
                sob = Some(SobolevTerm { depth: p.m + 1, scale: p.r, power: sob_power });
            }
            InequalityId::HalfballLogseries => {
                logs.push((0.25, RadialWeight::LogSeries { scale: p.r }));
            }
            InequalityId::HalfballExtra => {
                logs.push((0.25, RadialWeight::LogSeries { scale: k * p.r }));
                logs.push((1.0 / (8.0 * p.r.sqrt()), RadialWeight::Root));
            }
            InequalityId::DomainHardy => {}
            InequalityId::DomainHardySobolev => {
                sob = Some(SobolevTerm { depth: 1, scale: 3.0 * p.d, power: sob_power });
            }
            InequalityId::DomainLogseries => {
                logs.push((0.25, RadialWeight::LogSeries { scale: 3.0 * k * p.d }));
            }
        }
        Terms { logs, sob }
    }
}

/// Multiplier of `u^2/|x|^2` in a right-hand term, as a function of `ln |x|`.
#[derive(Debug, Clone, Copy)]
enum RadialWeight {
    /// `B(|x|/scale)`, upper end of its enclosure.
    LogSeries { scale: f64 },
    /// `sum_{i <= m} (X_1...X_i)^2 (|x|/scale)`.
    LogPartial { m: usize, scale: f64 },
    /// `|x|^{1/2}`, turning `u^2/|x|^2` into `u^2/|x|^{3/2}`.
    Root,
}

impl RadialWeight {
    fn at(&self, s: f64) -> Result<f64> {
        match *self {
            RadialWeight::LogSeries { scale } => Ok(big_b_neg_log(scale.ln() - s)?.upper()),
            RadialWeight::LogPartial { m, scale } => {
                let l = scale.ln() - s;
                let mut sum = 0.0;
                for i in 1..=m {
                    sum += prod_x_neg_log(i, l)?.powi(2);
                }
                Ok(sum)
            }
            RadialWeight::Root => Ok((0.5 * s).exp()),
        }
    }
}

/// `(∫ (X_1...X_depth)^power |u|^{2n/(n-2)})^{(n-2)/n}` with `X_i(|x|/scale)`.
#[derive(Debug, Clone, Copy)]
struct SobolevTerm {
    depth: usize,
    scale: f64,
    power: f64,
}

impl SobolevTerm {
    fn weight(&self, s: f64) -> Result<f64> {
        Ok(prod_x_neg_log(self.depth, self.scale.ln() - s)?.powf(self.power))
    }
}

struct Terms {
    logs: Vec<(f64, RadialWeight)>,
    sob: Option<SobolevTerm>,
}

/// Radial profile of a separable trial `u = f(|x|) x_n/|x|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// `r^exponent (1 + c1 t + c2 t^2)` on `[inner, outer]`, where `t` is the
    /// relative position in `ln r`, with cubic ramps of relative width `ramp`
    /// in `ln r` at both ends.
    Bump { exponent: f64, inner: f64, outer: f64, ramp: f64, modulation: [f64; 2] },
    /// `r^{-(n-2)/2 + eps} (1 - r/outer)` on `(0, outer)`.
    Sharpness { eps: f64, outer: f64 },
    /// `r^exponent (1 - r/outer)` on `(0, outer)`; needs `exponent > -(n-2)/2`.
    Power { exponent: f64, outer: f64 },
}

/// Relative size of the integrand envelope at which the tail of a profile
/// reaching the origin is dropped.
const TAIL_CUT: f64 = 1e-18;

fn check_outer(outer: f64, radius: f64) -> Result<()> {
    if !(outer > 0.0) {
        return Err(LabError::invalid("outer", "must be positive"));
    }
    if outer > radius * (1.0 + 1e-14) {
        return Err(LabError::SupportViolation(format!(
            "profile reaches r = {outer} beyond the domain radius {radius}"
        )));
    }
    Ok(())
}

impl Profile {
    fn validate(&self, n: usize, radius: f64) -> Result<()> {
        match *self {
            Profile::Bump { exponent, inner, outer, ramp, modulation } => {
                if !(exponent.is_finite() && inner > 0.0 && outer > inner) {
                    return Err(LabError::invalid("profile", "need 0 < inner < outer"));
                }
                if !(ramp > 0.0 && ramp <= 0.5) {
                    return Err(LabError::invalid("ramp", "must lie in (0, 1/2]"));
                }
                if !modulation.iter().all(|c| c.is_finite()) {
                    return Err(LabError::invalid("modulation", "must be finite"));
                }
                check_outer(outer, radius)
            }
            Profile::Sharpness { eps, outer } => {
                if !(eps > 0.0 && eps < 0.5) {
                    return Err(LabError::invalid("eps", "must lie in (0, 1/2)"));
                }
                check_outer(outer, radius)
            }
            Profile::Power { exponent, outer } => {
                if !(exponent.is_finite() && exponent > -0.5 * (n as f64 - 2.0)) {
                    return Err(LabError::invalid("exponent", "must exceed -(n-2)/2"));
                }
                check_outer(outer, radius)
            }
        }
    }

    /// Power `a` with `f(e^s) = e^{a s} g(s)`.
    fn exponent(&self, n: usize) -> f64 {
        match *self {
            Profile::Bump { exponent, .. } | Profile::Power { exponent, .. } => exponent,
            Profile::Sharpness { eps, .. } => -0.5 * (n as f64 - 2.0) + eps,
        }
    }

    /// Decay rate `2a + n - 2` of the mass integrand at the origin, for
    /// profiles that reach it.
    fn tail_rate(&self, n: usize) -> Option<f64> {
        match self {
            Profile::Bump { .. } => None,
            _ => Some(2.0 * self.exponent(n) + n as f64 - 2.0),
        }
    }

    /// Breakpoints in `s = ln r` between which `g` is smooth.
    fn pieces(&self, n: usize) -> Vec<f64> {
        match *self {
            Profile::Bump { inner, outer, ramp, .. } => {
                let (s0, s1) = (inner.ln(), outer.ln());
                let w = ramp * (s1 - s0);
                let mut v = vec![s0, s0 + w, s1 - w, s1];
                v.dedup();
                v
            }
            Profile::Sharpness { outer, .. } | Profile::Power { outer, .. } => {
                let s1 = outer.ln();
                let len = -TAIL_CUT.ln() / self.tail_rate(n).unwrap_or(1.0);
                let mut v = vec![s1 - len];
                v.extend([s1 - 30.0, s1 - 1.0].into_iter().filter(|&x| x > s1 - len));
                v.push(s1);
                v
            }
        }
    }

    /// `(g, dg/ds)`.
    fn g(&self, s: f64) -> (f64, f64) {
        match *self {
            Profile::Bump { inner, outer, ramp, modulation, .. } => {
                let (s0, s1) = (inner.ln(), outer.ln());
                if s <= s0 || s >= s1 {
                    return (0.0, 0.0);
                }
                let len = s1 - s0;
                let t = (s - s0) / len;
                let p = 1.0 + modulation[0] * t + modulation[1] * t * t;
                let dp = (modulation[0] + 2.0 * modulation[1] * t) / len;
                let w = ramp * len;
                let (chi, dchi) = if s < s0 + w {
                    let x = (s - s0) / w;
                    (x * x * (3.0 - 2.0 * x), 6.0 * x * (1.0 - x) / w)
                } else if s > s1 - w {
                    let x = (s1 - s) / w;
                    (x * x * (3.0 - 2.0 * x), -6.0 * x * (1.0 - x) / w)
                } else {
                    (1.0, 0.0)
                };
                (p * chi, dp * chi + p * dchi)
            }
            Profile::Sharpness { outer, .. } | Profile::Power { outer, .. } => {
                let e = (s - outer.ln()).exp();
                if e >= 1.0 {
                    (0.0, 0.0)
                } else {
                    (1.0 - e, -e)
                }
            }
        }
    }

    /// `f(r)`, zero outside the support.
    pub fn value(&self, n: usize, r: f64) -> f64 {
        if !(r > 0.0) {
            return 0.0;
        }
        let s = r.ln();
        let (g, _) = self.g(s);
        if g == 0.0 {
            0.0
        } else {
            (self.exponent(n) * s).exp() * g
        }
    }

    pub fn outer(&self) -> f64 {
        match *self {
            Profile::Bump { outer, .. } | Profile::Sharpness { outer, .. } | Profile::Power { outer, .. } => outer,
        }
    }
}

/// A trial function for `remainder`.
#[derive(Debug, Clone, PartialEq)]
pub enum TrialFunction {
    Zero,
    /// `u = f(|x|) x_n/|x|` on the half ball.
    Separable(Profile),
    /// Piecewise-linear axisymmetric function given by its vertex values.
    Mesh {
        mesh: MeridianMesh,
        values: Vec<f64>,
    },
}

/// Quadrature controls for `remainder`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    /// Relative tolerance of the one-dimensional adaptive rule.
    pub rel_tol: f64,
    /// Extra element splits for the reference mass matrices of mesh trials.
    pub mesh_splits: usize,
    /// Gauss order per direction for the Sobolev integral of mesh trials.
    pub mesh_order: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { rel_tol: 1e-10, mesh_splits: 1, mesh_order: 6 }
    }
}

/// Remainder of an inequality for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Remainder {
    /// Left side minus every right-hand term.
    pub value: f64,
    pub quad_error: f64,
    /// `∫ |∇u|^2`.
    pub energy: f64,
    /// `∫ u^2/|x|^2`.
    pub hardy_mass: f64,
    /// The Sobolev factor without its constant, zero when absent.
    pub sobolev: f64,
}

impl Remainder {
    pub fn zero() -> Self {
        Remainder { value: 0.0, quad_error: 0.0, energy: 0.0, hardy_mass: 0.0, sobolev: 0.0 }
    }

    /// True when the value is not below minus its error estimate.
    pub fn passes(&self) -> bool {
        self.value >= -self.quad_error
    }

    /// `value / ∫u^2/|x|^2`, zero for the zero function.
    pub fn relative(&self) -> f64 {
        if self.hardy_mass > 0.0 {
            self.value / self.hardy_mass
        } else {
            0.0
        }
    }
}

/// `∫_{S^{n-1}_+} omega_n^2 dS = |S^{n-1}| / (2n)`.
fn angular_l2(n: usize) -> f64 {
    sphere_area(n - 1) / (2.0 * n as f64)
}

/// `∫_{S^{n-1}_+} |omega_n|^q dS = |S^{n-2}| B((q+1)/2, (n-1)/2) / 2`.
fn angular_lq(n: usize, q: f64) -> f64 {
    let (a, b) = (0.5 * (q + 1.0), 0.5 * (n as f64 - 1.0));
    let beta = (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp();
    0.5 * sphere_area(n - 2) * beta
}

/// LHS minus RHS of `spec` for the trial `u`, with a quadrature error bound.
pub fn remainder(spec: &InequalitySpec, u: &TrialFunction, quad: &QuadSpec) -> Result<Remainder> {
    spec.validate()?;
    match u {
        TrialFunction::Zero => Ok(Remainder::zero()),
        TrialFunction::Separable(p) => separable_remainder(spec, p, quad),
        TrialFunction::Mesh { mesh, values } => {
            let ctx = MeshContext::from_mesh(spec, mesh.clone(), quad)?;
            ctx.remainder(values)
        }
    }
}

fn separable_remainder(spec: &InequalitySpec, prof: &Profile, quad: &QuadSpec) -> Result<Remainder> {
    prof.validate(spec.params.n, spec.radius())?;
    let n = spec.params.n;
    let nf = n as f64;
    let terms = spec.terms();
    let a = prof.exponent(n);
    let q = 2.0 * nf / (nf - 2.0);
    let e_mass = 2.0 * a + nf - 2.0;
    let e_sob = q * a + nf;
    let nlog = terms.logs.len();
    let k = 2 + nlog + usize::from(terms.sob.is_some());
    let pieces = prof.pieces(n);
    let mut totals = vec![0.0; k];
    let mut errors = vec![0.0; k];
    let mut failure: Option<LabError> = None;
    for w in pieces.windows(2) {
        let res = adaptive_many(
            |s, out| {
                let (g, dg) = prof.g(s);
                let em = (e_mass * s).exp();
                let d = a * g + dg;
                out[0] = em * d * d;
                out[1] = em * g * g;
                for (j, (_, wt)) in terms.logs.iter().enumerate() {
                    out[2 + j] = if g == 0.0 {
                        0.0
                    } else {
                        match wt.at(s) {
                            Ok(v) => em * g * g * v,
                            Err(e) => {
                                failure.get_or_insert(e);
                                0.0
                            }
                        }
                    };
                }
                if let Some(sob) = &terms.sob {
                    out[k - 1] = if g == 0.0 {
                        0.0
                    } else {
                        match sob.weight(s) {
                            Ok(v) => (e_sob * s).exp() * g.abs().powf(q) * v,
                            Err(e) => {
                                failure.get_or_insert(e);
                                0.0
                            }
                        }
                    };
                }
            },
            k,
            w[0],
            w[1],
            1e-300,
            quad.rel_tol,
        )?;
        for (i, r) in res.iter().enumerate() {
            totals[i] += r.value;
            errors[i] += r.error;
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    if let Some(d) = prof.tail_rate(n) {
        // Dropped tail below the first breakpoint, bounded through |g| <= 1,
        // |g'| <= 1 and the log weights, which increase in s.
        let s0 = pieces[0];
        let tail = (d * s0).exp() / d;
        errors[0] += (a.abs() + 1.0).powi(2) * tail;
        errors[1] += tail;
        for (j, (_, wt)) in terms.logs.iter().enumerate() {
            errors[2 + j] += tail * wt.at(s0)?;
        }
        if terms.sob.is_some() {
            let ds = 0.5 * q * d;
            errors[k - 1] += (ds * s0).exp() / ds;
        }
    }
    let ang = angular_l2(n);
    let h = 0.5 * (nf - 2.0);
    let mut value = totals[0] - h * h * totals[1];
    let mut err = errors[0] + h * h * errors[1];
    for (j, (c, _)) in terms.logs.iter().enumerate() {
        value -= c * totals[2 + j];
        err += c * errors[2 + j];
    }
    value *= ang;
    err *= ang;
    let mut sobolev = 0.0;
    if terms.sob.is_some() {
        let bq = angular_lq(n, q);
        let raw = bq * totals[k - 1];
        let ex = (nf - 2.0) / nf;
        sobolev = raw.powf(ex);
        let c = spec.sobolev_c;
        value -= c * sobolev;
        if raw > 0.0 {
            err += c * ex * sobolev / raw * bq * errors[k - 1];
        }
    }
    Ok(Remainder {
        value,
        quad_error: err,
        energy: ang * (totals[0] + (nf - 1.0) * totals[1]),
        hardy_mass: ang * totals[1],
        sobolev,
    })
}

/// Assembled forms on a fixed mesh for repeated remainder evaluation.
pub struct MeshContext {
    spec: InequalitySpec,
    mesh: MeridianMesh,
    sys: SparseSystem,
    /// `(coefficient, coarse mass, reference mass)`; the first entry is the
    /// Hardy term.
    masses: Vec<(f64, CsrMatrix, CsrMatrix)>,
    sob: Option<SobolevTerm>,
    order: usize,
}

impl MeshContext {
    /// Mesh of `{|x| < d, |x + rho e_n| > rho}` for a domain spec, with one
    /// uniform refinement of the default graded mesh.
    pub fn for_domain(spec: &InequalitySpec, quad: &QuadSpec) -> Result<Self> {
        spec.validate()?;
        if !spec.id.is_domain() {
            return Err(LabError::invalid("inequality", format!("{} has no mesh domain", spec.id)));
        }
        let p = &spec.params;
        let dom = MeridianDomain::exterior_ball_complement(p.n, p.rho, p.d);
        dom.validate()?;
        let mesh = refine(&build_meridian_mesh_with(&dom, MeshOptions::default())?);
        MeshContext::from_mesh(spec, mesh, quad)
    }

    pub fn from_mesh(spec: &InequalitySpec, mesh: MeridianMesh, quad: &QuadSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.params.n;
        let terms = spec.terms();
        let hardy = FnWeight { f: |s: f64, z: f64| 1.0 / (s * s + z * z), pole: Some([0.0, 0.0]) };
        let sys = assemble(&mesh, n, &hardy)?;
        let fine = mass_matrix(&mesh, &sys, &hardy, quad.mesh_splits)?;
        let mut masses = vec![(0.25 * (n * n) as f64, sys.m.clone(), fine)];
        for (c, wt) in &terms.logs {
            let wt = *wt;
            let f = move |s: f64, z: f64| {
                let r2 = s * s + z * z;
                wt.at(0.5 * r2.ln()).unwrap_or(f64::NAN) / r2
            };
            let w = FnWeight { f, pole: Some([0.0, 0.0]) };
            let coarse = mass_matrix(&mesh, &sys, &w, 0)?;
            let fine = mass_matrix(&mesh, &sys, &w, quad.mesh_splits)?;
            masses.push((*c, coarse, fine));
        }
        Ok(MeshContext { spec: *spec, mesh, sys, masses, sob: terms.sob, order: quad.mesh_order })
    }

    pub fn mesh(&self) -> &MeridianMesh {
        &self.mesh
    }

    /// Remainder of the piecewise-linear function with vertex values `u`.
    pub fn remainder(&self, u: &[f64]) -> Result<Remainder> {
        if u.len() != self.mesh.vertices.len() {
            return Err(LabError::invalid(
                "values",
                format!("{} values for {} vertices", u.len(), self.mesh.vertices.len()),
            ));
        }
        for (v, &d) in self.mesh.dirichlet.iter().enumerate() {
            if d && u[v] != 0.0 {
                return Err(LabError::SupportViolation(format!("trial is nonzero on boundary vertex {v}")));
            }
        }
        let x = self.sys.restrict(u);
        let energy = self.sys.k.quad_form(&x);
        let mut value = energy;
        let mut err = 0.0;
        let mut hardy_mass = 0.0;
        for (i, (c, coarse, fine)) in self.masses.iter().enumerate() {
            let (mc, mf) = (coarse.quad_form(&x), fine.quad_form(&x));
            if i == 0 {
                hardy_mass = mf;
            }
            value -= c * mf;
            err += c * (mc - mf).abs();
        }
        let mut sobolev = 0.0;
        if let Some(sob) = self.sob {
            let n = self.spec.params.n as f64;
            let q = 2.0 * n / (n - 2.0);
            let f = |s: f64, z: f64, uv: f64| {
                let r = (s * s + z * z).sqrt();
                sob.weight(r.ln()).unwrap_or(f64::NAN) * uv.abs().powf(q)
            };
            let lo = integrate_nodal(&self.mesh, self.spec.params.n, u, &f, self.order);
            let hi = integrate_nodal(&self.mesh, self.spec.params.n, u, &f, self.order + 4);
            if !hi.is_finite() {
                return Err(LabError::Quadrature("Sobolev integrand is not finite".into()));
            }
            let ex = (n - 2.0) / n;
            sobolev = hi.powf(ex);
            let c = self.spec.sobolev_c;
            value -= c * sobolev;
            if hi > 0.0 {
                err += c * ex * sobolev / hi * (hi - lo).abs();
            }
        }
        Ok(Remainder { value, quad_error: err, energy, hardy_mass, sobolev })
    }

    /// Vertex values of `f(|x|) cos(pi a / (2 a_max(|x|)))`, where `a` is the
    /// angle from `e_n` and `a_max(r) = acos(-r/(2 rho))` is the angle at
    /// which the ray meets the exterior ball. Zero on boundary vertices.
    pub fn separable_values(&self, prof: &Profile) -> Result<Vec<f64>> {
        prof.validate(self.spec.params.n, self.spec.radius())?;
        let n = self.spec.params.n;
        let rho = self.spec.params.rho;
        Ok(self
            .mesh
            .vertices
            .iter()
            .zip(&self.mesh.dirichlet)
            .map(|(p, &d)| {
                let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                if d || r == 0.0 {
                    return 0.0;
                }
                let amax = (-r / (2.0 * rho)).clamp(-1.0, 1.0).acos();
                let sigma = p[0].atan2(p[1]) / amax;
                if sigma >= 1.0 {
                    0.0
                } else {
                    prof.value(n, r) * (0.5 * PI * sigma).cos()
                }
            })
            .collect())
    }
}

/// Trial families for `random_trial_suite`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum TrialFamily {
    /// Seeded random bumps.
    Random,
    /// The near-extremal profile `r^{-(n-2)/2 + eps}(1 - r/R)`, one trial.
    Sharpness { eps: f64 },
}

/// Draw `count` bump profiles for dimension `n` on radius `radius`.
///
/// Exponents lie in `(-(n-2)/2 - 0.4, -(n-2)/2 + 0.6)`; the outer radius is
/// log-uniform in `[e^{-3}, 0.999] radius` and the inner radius log-uniform
/// between `e^{-12}` and `e^{-0.5}` times the outer one.
pub fn random_profiles(n: usize, radius: f64, count: usize, seed: u64) -> Vec<Profile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = -0.5 * (n as f64 - 2.0);
    (0..count)
        .map(|_| {
            let exponent = base + rng.random_range(-0.4..0.6);
            let outer = radius * rng.random_range(-3.0..0.999f64.ln()).exp();
            let inner = outer * (-rng.random_range(0.5..12.0f64)).exp();
            let ramp = rng.random_range(0.05..0.5);
            let modulation = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
            Profile::Bump { exponent, inner, outer, ramp, modulation }
        })
        .collect()
}

/// Outcome of one trial in a suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub profile: Profile,
    pub remainder: Remainder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub id: InequalityId,
    pub params: Params,
    pub seed: u64,
    pub count: usize,
    pub family: TrialFamily,
    /// Smallest remainder relative to `∫u^2/|x|^2`.
    pub min_relative: f64,
    /// The trial attaining `min_relative`.
    pub argmin: TrialOutcome,
    /// Trials whose remainder is below minus its quadrature error.
    pub violations: usize,
    pub max_quad_error: f64,
    /// Largest Sobolev constant every trial tolerates, when requested.
    pub probe_c: Option<f64>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Run `count` seeded trials of `spec` and reduce to the worst case.
///
/// Half-ball ids use separable trials and one-dimensional quadrature; domain
/// ids interpolate the same profiles, bent to vanish on the exterior ball, on
/// a graded mesh of the domain. With `probe_c` the Sobolev constant of `spec`
/// is ignored and the report carries the largest constant all trials accept.
pub fn random_trial_suite(
    spec: &InequalitySpec,
    family: TrialFamily,
    count: usize,
    seed: u64,
    probe_c: bool,
) -> Result<SuiteReport> {
    if count == 0 {
        return Err(LabError::invalid("count", "must be at least 1"));
    }
    spec.validate()?;
    let mut spec = *spec;
    if probe_c {
        if !spec.id.has_sobolev() {
            return Err(LabError::invalid("probe_c", format!("{} has no Sobolev term", spec.id)));
        }
        spec.sobolev_c = 0.0;
    }
    let n = spec.params.n;
    let radius = spec.radius();
    let (profiles, count) = match family {
        TrialFamily::Random => (random_profiles(n, radius, count, seed), count),
        TrialFamily::Sharpness { eps } => (vec![Profile::Sharpness { eps, outer: radius }], 1),
    };
    let quad = QuadSpec::default();
    let ctx = match (spec.id.is_domain(), family) {
        (true, TrialFamily::Random) => Some(MeshContext::for_domain(&spec, &quad)?),
        _ => None,
    };
    let outcomes: Vec<TrialOutcome> = profiles
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            let remainder = match &ctx {
                Some(c) => c.remainder(&c.separable_values(p)?)?,
                None => separable_remainder(&spec, p, &quad)?,
            };
            Ok(TrialOutcome { index, profile: *p, remainder })
        })
        .collect::<Result<_>>()?;
    let argmin = *outcomes
        .iter()
        .filter(|o| o.remainder.hardy_mass > 0.0)
        .min_by(|a, b| a.remainder.relative().total_cmp(&b.remainder.relative()).then(a.index.cmp(&b.index)))
        .ok_or_else(|| LabError::Inconclusive("every trial vanished on the mesh".into()))?;
    let violations = outcomes.iter().filter(|o| !o.remainder.passes()).count();
    let max_quad_error = outcomes.iter().map(|o| o.remainder.quad_error).fold(0.0, f64::max);
    let probe = probe_c.then(|| {
        outcomes
            .iter()
            .filter(|o| o.remainder.sobolev > 0.0)
            .map(|o| (o.remainder.value + o.remainder.quad_error) / o.remainder.sobolev)
            .fold(f64::INFINITY, f64::min)
    });
    Ok(SuiteReport {
        id: spec.id,
        params: spec.params,
        seed,
        count,
        family,
        min_relative: argmin.remainder.relative(),
        argmin,
        violations,
        max_quad_error,
        probe_c: probe,
    })
}

/// `n^2 r^{1/2} t^{1/2} (t + 4) (t + 2)^{1/2}`.
pub fn gef_lhs(n: usize, r: f64, t: f64) -> f64 {
    (n * n) as f64 * (r * t).sqrt() * (t + 4.0) * (t + 2.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GefCertificate {
    pub n: usize,
    pub r: f64,
    /// Upper end `1/(75 n^4 r)` of the admissible `t` range.
    pub t_max: f64,
    pub max_lhs: f64,
    /// `1 - max_lhs`.
    pub margin: f64,
    /// Every grid value is at most the endpoint value.
    pub monotone: bool,
    pub holds: bool,
}

/// Check `gef_lhs(n, sigma_n, t) <= 1` for `0 < t <= 1/(75 n^4 sigma_n)`.
///
/// The left side is a product of increasing nonnegative factors, so its
/// maximum is the endpoint value; a dense grid confirms the monotonicity.
pub fn cert_gef(n: usize) -> Result<GefCertificate> {
    if n < 2 {
        return Err(LabError::invalid("n", "must be at least 2"));
    }
    let r = sigma_n(n);
    let t_max = 1.0 / (75.0 * (n as f64).powi(4) * r);
    let end = gef_lhs(n, r, t_max);
    const GRID: usize = 20_000;
    let mut prev = 0.0;
    let mut monotone = true;
    let mut max_lhs = 0.0f64;
    for i in 1..=GRID {
        let t = t_max * i as f64 / GRID as f64;
        let v = gef_lhs(n, r, t);
        monotone &= v >= prev && v <= end;
        max_lhs = max_lhs.max(v);
        prev = v;
    }
    for i in 0..200 {
        let t = t_max * 10f64.powf(-12.0 * (1.0 - i as f64 / 200.0));
        let v = gef_lhs(n, r, t);
        monotone &= v <= end;
        max_lhs = max_lhs.max(v);
    }
    let margin = 1.0 - max_lhs;
    Ok(GefCertificate { n, r, t_max, max_lhs, margin, monotone, holds: monotone && margin > 0.0 })
}

/// `X_1^2(t/(2(t+1))) - n^2 t (t+2)`.
pub fn tau_gap(n: usize, t: f64) -> f64 {
    x1(t / (2.0 * (t + 1.0))).powi(2) - (n * n) as f64 * t * (t + 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauBounds {
    pub n: usize,
    /// First zero of `tau_gap`.
    pub lower: f64,
    /// Largest `t` up to which positivity of `tau_gap` is certified by
    /// monotone cell bounds.
    pub certified: f64,
    /// `2 e^{pi/sqrt(n-1)}`.
    pub upper: f64,
}

/// Left end of the cell scan; below it positivity follows from the
/// monotonicity of `X_1(s)^2/s` on `(0, 1/e)`.
const TAU_SCAN_START: f64 = 1e-12;
const TAU_CELL_RATIO: f64 = 1.0 + 1e-5;

/// Lower bound for the dimensional threshold of the annulus problem with a
/// certificate of positivity on `(0, certified]`.
pub fn tau_bounds(n: usize) -> Result<TauBounds> {
    if n < 2 {
        return Err(LabError::invalid("n", "must be at least 2"));
    }
    let nn = (n * n) as f64;
    let lhs = |t: f64| x1(t / (2.0 * (t + 1.0))).powi(2);
    let rhs = |t: f64| nn * t * (t + 2.0);
    // On (0, a0]: X_1(s)^2/s decreases for s < 1/e, so X_1(s(t))^2 >= K s(t)
    // with K its value at a0, and s(t) >= t/(2(a0+1)), rhs(t) <= n^2 t (a0+2).
    let a0 = TAU_SCAN_START;
    let s0 = a0 / (2.0 * (a0 + 1.0));
    let k = lhs(a0) / s0;
    if k / (2.0 * (a0 + 1.0)) < nn * (a0 + 2.0) {
        return Err(LabError::Inconclusive("initial interval is not certified".into()));
    }
    // Both sides increase, so lhs(a) >= rhs(b) certifies the cell [a, b].
    let mut a = a0;
    loop {
        let b = a * TAU_CELL_RATIO;
        if lhs(a) < rhs(b) {
            break;
        }
        a = b;
        if a > 1e6 {
            return Err(LabError::Convergence("no crossing below 1e6".into()));
        }
    }
    let certified = a;
    let mut hi = a;
    while tau_gap(n, hi) > 0.0 {
        hi *= 1.0 + 1e-4;
    }
    let mut lo = certified;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tau_gap(n, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(TauBounds { n, lower: lo, certified, upper: tau_upper_bound(n)? })
}

pub fn tau_lower_bound(n: usize) -> Result<f64> {
    static CACHE: OnceLock<std::sync::Mutex<Vec<(usize, f64)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&(_, v)) = cache.lock().unwrap().iter().find(|(m, _)| *m == n) {
        return Ok(v);
    }
    let v = tau_bounds(n)?.lower;
    cache.lock().unwrap().push((n, v));
    Ok(v)
}

/// `2 e^{pi / sqrt(n-1)}`.
pub fn tau_upper_bound(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(LabError::invalid("n", "must be at least 2"));
    }
    Ok(2.0 * (PI / (n as f64 - 1.0).sqrt()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleBound {
    pub n: usize,
    pub theta: f64,
    pub rho: f64,
    pub lambda1: f64,
    /// `((n-2)/2)^2 + (pi/ln(2 rho cos theta))^2 + lambda1`.
    pub upper_bound: f64,
    /// `n^2/4`.
    pub threshold: f64,
    /// `e^{-pi/sqrt(n-1-lambda1)} / (2 cos theta)`, zero when `lambda1 >= n-1`.
    pub rho_threshold: f64,
    pub rho_condition: bool,
}

impl CounterexampleBound {
    /// `rho_condition` implies `upper_bound < threshold`.
    pub fn implication_holds(&self) -> bool {
        !self.rho_condition || self.upper_bound < self.threshold
    }
}

fn check_theta_rho(theta: f64, rho: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 0.5 * PI) {
        return Err(LabError::invalid("theta", "must lie in (0, pi/2)"));
    }
    if !(rho > 0.0 && rho < 0.5) {
        return Err(LabError::invalid("rho", "must lie in (0, 1/2)"));
    }
    Ok(())
}

/// Separated-variables upper bound for the Hardy constant of the cone-cut
/// domain with a small exterior ball, using `lambda1` from the cap solver.
pub fn counterexample_bound(n: usize, theta: f64, rho: f64) -> Result<CounterexampleBound> {
    check_theta_rho(theta, rho)?;
    let lambda1 = example_cap_lambda1(n, theta)?;
    counterexample_with(n, theta, rho, lambda1)
}

fn counterexample_with(n: usize, theta: f64, rho: f64, lambda1: f64) -> Result<CounterexampleBound> {
    check_theta_rho(theta, rho)?;
    let h = 0.5 * (n as f64 - 2.0);
    let l = (2.0 * rho * theta.cos()).ln();
    let upper_bound = h * h + (PI / l).powi(2) + lambda1;
    let gap = n as f64 - 1.0 - lambda1;
    let rho_threshold = if gap > 0.0 { (-PI / gap.sqrt()).exp() / (2.0 * theta.cos()) } else { 0.0 };
    Ok(CounterexampleBound {
        n,
        theta,
        rho,
        lambda1,
        upper_bound,
        threshold: 0.25 * (n * n) as f64,
        rho_threshold,
        rho_condition: rho < rho_threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSweep {
    pub cases: Vec<CounterexampleBound>,
    pub cond_true: usize,
    pub implication_failures: usize,
}

/// Evaluate every `(theta, rho)` pair; `lambda1` is solved once per angle.
pub fn counterexample_sweep(n: usize, thetas: &[f64], rhos: &[f64]) -> Result<CounterexampleSweep> {
    let lambdas: Vec<f64> = thetas
        .par_iter()
        .map(|&t| {
            check_theta_rho(t, 0.25)?;
            example_cap_lambda1(n, t)
        })
        .collect::<Result<_>>()?;
    let mut cases = Vec::with_capacity(thetas.len() * rhos.len());
    for (&t, &l) in thetas.iter().zip(&lambdas) {
        for &r in rhos {
            cases.push(counterexample_with(n, t, r, l)?);
        }
    }
    let cond_true = cases.iter().filter(|c| c.rho_condition).count();
    let implication_failures = cases.iter().filter(|c| !c.implication_holds()).count();
    Ok(CounterexampleSweep { cases, cond_true, implication_failures })
}

/// The vector field `T` at `x`:
/// `(n/2 + eta/2) x/|x|^2 - e_n/x_n + x / (2 (R^{1/2} - |x|^{1/2}) |x|^{3/2})`
/// with `eta = eta(|x|/(kappa R))`.
pub fn div_field(n: usize, big_r: f64, x: &[f64]) -> Result<Vec<f64>> {
    let r2: f64 = x.iter().map(|c| c * c).sum();
    let r = r2.sqrt();
    let eta = eta_mid(r / (kappa() * big_r))?;
    let a = 0.5 * (n as f64 + eta) / r2;
    let c = 1.0 / (2.0 * (big_r.sqrt() - r.sqrt()) * r.powf(1.5));
    let mut t: Vec<f64> = x.iter().map(|xi| (a + c) * xi).collect();
    t[n - 1] -= 1.0 / x[n - 1];
    Ok(t)
}

/// Closed form of `div T - |T|^2`:
/// `n^2/(4|x|^2) + B/(4|x|^2) + (1/2 - eta) / (2 (R^{1/2} - |x|^{1/2}) |x|^{3/2})`.
pub fn div_closed_form(n: usize, big_r: f64, x: &[f64]) -> Result<f64> {
    let r2: f64 = x.iter().map(|c| c * c).sum();
    let r = r2.sqrt();
    let t = r / (kappa() * big_r);
    let eta = eta_mid(t)?;
    let b = crate::speclog::big_b_mid(t)?;
    let nn = (n * n) as f64;
    Ok(0.25 * (nn + b) / r2 + (0.5 - eta) / (2.0 * (big_r.sqrt() - r.sqrt()) * r.powf(1.5)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivCheckReport {
    pub n: usize,
    pub big_r: f64,
    pub samples: usize,
    pub max_rel_discrepancy: f64,
    pub worst_sample: Vec<f64>,
    /// Smallest `|x|^2 (closed form) - n^2/4` over the samples.
    pub min_hardy_margin: f64,
}

impl DivCheckReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_discrepancy < tol && self.min_hardy_margin >= 0.0
    }
}

/// Minimum distance of a sample to `{x_n = 0}`, `{0}` and `{|x| = R}`.
pub const SAMPLE_MARGIN: f64 = 1e-3;

/// Compare a finite-difference divergence of `T` against the closed form.
///
/// Central differences with steps `h` and `h/2` are combined by Richardson
/// extrapolation; `h = 1e-5`, reduced to `1e-3` times the distance to the
/// singular set for samples closer than `1e-2`.
pub fn div_field_check(n: usize, big_r: f64, samples: &[PointN]) -> Result<DivCheckReport> {
    if n < 2 {
        return Err(LabError::invalid("n", "must be at least 2"));
    }
    if !(big_r > 0.0) {
        return Err(LabError::invalid("R", "must be positive"));
    }
    if samples.is_empty() {
        return Err(LabError::invalid("samples", "need at least one sample"));
    }
    let mut worst = (0.0f64, Vec::new());
    let mut min_margin = f64::INFINITY;
    for p in samples {
        let x = &p.coords;
        if x.len() != n {
            return Err(LabError::invalid("samples", format!("point of dimension {} for n = {n}", x.len())));
        }
        let r = p.norm();
        let delta = x[n - 1].min(r).min(big_r - r);
        if !(delta >= SAMPLE_MARGIN) {
            return Err(LabError::Geometry(format!(
                "sample {x:?} is within {SAMPLE_MARGIN} of the boundary or the origin"
            )));
        }
        let h = 1e-5f64.min(1e-3 * delta);
        let mut div = 0.0;
        for i in 0..n {
            let d = |step: f64| -> Result<f64> {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += step;
                xm[i] -= step;
                Ok((div_field(n, big_r, &xp)?[i] - div_field(n, big_r, &xm)?[i]) / (2.0 * step))
            };
            let (d1, d2) = (d(h)?, d(0.5 * h)?);
            div += (4.0 * d2 - d1) / 3.0;
        }
        let t = div_field(n, big_r, x)?;
        let t2: f64 = t.iter().map(|c| c * c).sum();
        let closed = div_closed_form(n, big_r, x)?;
        let rel = ((div - t2) - closed).abs() / closed.abs();
        if rel > worst.0 || worst.1.is_empty() {
            worst = (rel, x.clone());
        }
        min_margin = min_margin.min(r * r * closed - 0.25 * (n * n) as f64);
    }
    Ok(DivCheckReport {
        n,
        big_r,
        samples: samples.len(),
        max_rel_discrepancy: worst.0,
        worst_sample: worst.1,
        min_hardy_margin: min_margin,
    })
}

/// Seeded points of `B_R^+` at least `SAMPLE_MARGIN` from the singular set.
pub fn half_ball_samples(n: usize, big_r: f64, count: usize, seed: u64) -> Vec<PointN> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let m = 2.0 * SAMPLE_MARGIN;
    while out.len() < count {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-big_r..big_r)).collect();
        x[n - 1] = x[n - 1].abs();
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if x[n - 1] >= m && r >= m && big_r - r >= m {
            out.push(PointN::new(x));
        }
    }
    out
}
