//! Ground-state weights for the exterior-ball geometry, integrability tests
//! for potentials at the boundary point, `C_r(V)` probes and cone Sobolev
//! bounds.
//!
//! Points are in `R^n` with the boundary point at the origin and the exterior
//! ball `B(-rho e_n, rho)` below it. The built-in domain is
//! `{|x| < D, |x + 2 rho e_n| > 2 rho}`, on which the ground state `phi` is
//! positive and `q` nonnegative.

use crate::error::{LabError, Result};
use crate::femlab::sparse::SkylineLdl;
use crate::femlab::{
    assemble, build_meridian_mesh_with, mass_matrix, refine, smallest_eigenpair, FnWeight, MeridianDomain, MeshOptions,
    Weight,
};
use crate::quad::{adaptive, gauss_legendre};
use crate::special::{sobolev_constant, sphere_area};
use crate::speclog::{prod_x, x1};
use crate::sturm1d::{cap_eigenpair, CapProblem, CapVariant, MIN_RESOLUTION};
use crate::types::{EigenEstimate, Params, PointN, TraceEntry};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Parameters of `phi`, `phi_m` and their potentials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateWeights {
    pub n: usize,
    pub rho: f64,
    /// Number of logarithmic factors in `phi_m`; zero gives `phi`.
    pub m: usize,
    /// Scale `D~` in `X_i(|x| / (3 kappa D~))`.
    pub d_tilde: f64,
}

impl GroundStateWeights {
    pub fn new(n: usize, rho: f64) -> Self {
        GroundStateWeights { n, rho, m: 0, d_tilde: 1.0 }
    }

    pub fn with_logs(self, m: usize, d_tilde: f64) -> Self {
        GroundStateWeights { m, d_tilde, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(LabError::invalid("n", "must be at least 2"));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(LabError::invalid("rho", "must be positive"));
        }
        if !(self.d_tilde > 0.0 && self.d_tilde.is_finite()) {
            return Err(LabError::invalid("d_tilde", "must be positive"));
        }
        Ok(())
    }

    fn log_scale(&self) -> f64 {
        3.0 * crate::certificates::kappa() * self.d_tilde
    }

    /// `|x|^2`, `|x + 2 rho e_n|^2` and `|x|^2 + 2 rho x_n`, after the
    /// domain checks.
    fn parts(&self, x: &PointN) -> Result<(f64, f64, f64)> {
        self.validate()?;
        if x.dim() != self.n {
            return Err(LabError::invalid("x", format!("dimension {} for n = {}", x.dim(), self.n)));
        }
        let r2 = x.norm_sq();
        let xn = x.last();
        let w2 = r2 + 4.0 * self.rho * xn + 4.0 * self.rho * self.rho;
        let mut num = r2 + 2.0 * self.rho * xn;
        // Points on the exterior sphere up to rounding.
        if num < 0.0 && num > -1e-13 * (r2 + 2.0 * self.rho * xn.abs()) {
            num = 0.0;
        }
        if r2 == 0.0 {
            return Err(LabError::domain("the weights are singular at the origin"));
        }
        if w2 == 0.0 {
            return Err(LabError::domain("the weights are singular at -2 rho e_n"));
        }
        if num < 0.0 {
            return Err(LabError::domain(format!("{:?} lies inside the exterior ball B(-rho e_n, rho)", x.coords)));
        }
        Ok((r2, w2, num))
    }

    /// `X_1 ... X_k(|x| / (3 kappa D~))` for `k = 1..=m`, with `|x| = sqrt(r2)`.
    fn log_products(&self, r2: f64) -> Result<Vec<f64>> {
        if self.m == 0 {
            return Ok(Vec::new());
        }
        let t = r2.sqrt() / self.log_scale();
        if t >= 1.0 {
            return Err(LabError::domain(format!(
                "|x| = {} is not below 3 kappa D~ = {}",
                r2.sqrt(),
                self.log_scale()
            )));
        }
        (1..=self.m).map(|k| prod_x(k, t)).collect()
    }

    /// `(|x + rho e_n|^2 - rho^2) / (|x|^{n/2} |x + 2 rho e_n|^{n/2})`.
    pub fn phi(&self, x: &PointN) -> Result<f64> {
        let (r2, w2, num) = self.parts(x)?;
        let h = 0.25 * self.n as f64;
        Ok(num / (r2.powf(h) * w2.powf(h)))
    }

    /// `(n^2/4) (|x|^2 + 4 rho x_n) / (|x|^2 |x + 2 rho e_n|^2)`.
    pub fn q(&self, x: &PointN) -> Result<f64> {
        let (r2, w2, _) = self.parts(x)?;
        let nn = (self.n * self.n) as f64;
        Ok(0.25 * nn * (r2 + 4.0 * self.rho * x.last()) / (r2 * w2))
    }

    /// `phi` times `(X_1 ... X_m)^{-1/2}`.
    pub fn phi_m(&self, x: &PointN) -> Result<f64> {
        let phi = self.phi(x)?;
        let p = self.log_products(x.norm_sq())?;
        Ok(match p.last() {
            Some(&last) => phi / last.sqrt(),
            None => phi,
        })
    }

    /// The bracketed factor multiplying `(sum_k X_1...X_k)/|x|^2` in `q_m`:
    /// `(n/2)(|x|^2 + 2 rho x_n)/|x + 2 rho e_n|^2 - |x|^2/(|x|^2 + 2 rho x_n)`.
    pub fn brace(&self, x: &PointN) -> Result<f64> {
        let (r2, w2, num) = self.parts(x)?;
        if num == 0.0 {
            return Err(LabError::domain("the bracket is singular on the exterior sphere"));
        }
        Ok(0.5 * self.n as f64 * num / w2 - r2 / num)
    }

    /// `q + brace(x) (sum_{k <= m} X_1...X_k) / |x|^2`.
    pub fn q_m(&self, x: &PointN) -> Result<f64> {
        let q = self.q(x)?;
        if self.m == 0 {
            return Ok(q);
        }
        let sum: f64 = self.log_products(x.norm_sq())?.iter().sum();
        Ok(q + self.brace(x)? * sum / x.norm_sq())
    }

    /// `-Δ phi_m / phi_m`, the weight of `w^2` after the substitution
    /// `u = phi_m w`:
    /// `n^2 rho^2 / (|x|^2 |x + 2 rho e_n|^2)` plus, for `m >= 1`,
    /// `(1/|x|^2) (sum X^2/4 - brace * sum X)` with the sums over products.
    pub fn substitution_potential(&self, x: &PointN) -> Result<f64> {
        let (r2, w2, _) = self.parts(x)?;
        let nn = (self.n * self.n) as f64;
        let base = nn * self.rho * self.rho / (r2 * w2);
        if self.m == 0 {
            return Ok(base);
        }
        let p = self.log_products(r2)?;
        let s1: f64 = p.iter().sum();
        let s2: f64 = p.iter().map(|v| v * v).sum();
        Ok(base + (0.25 * s2 - self.brace(x)? * s1) / r2)
    }

    /// `∇ ln phi_m`.
    pub fn grad_log_phi_m(&self, x: &PointN) -> Result<Vec<f64>> {
        let (r2, w2, num) = self.parts(x)?;
        if num == 0.0 {
            return Err(LabError::domain("ln phi is singular on the exterior sphere"));
        }
        let h = 0.5 * self.n as f64;
        let s1: f64 = self.log_products(r2)?.iter().sum();
        let n = self.n;
        Ok((0..n)
            .map(|i| {
                let xi = x.coords[i];
                let shifted = if i == n - 1 { xi + 2.0 * self.rho } else { xi };
                let dnum = 2.0 * xi + if i == n - 1 { 2.0 * self.rho } else { 0.0 };
                dnum / num - h * xi / r2 - h * shifted / w2 - 0.5 * s1 * xi / r2
            })
            .collect())
    }

    /// A constant `c` with `q <= c/|x|` on `{|x| < D, |x + 2 rho e_n| >= 2 rho}`.
    pub fn q_bound_constant(&self, d: f64) -> f64 {
        let nn = (self.n * self.n) as f64;
        nn * (d + 4.0 * self.rho) / (16.0 * self.rho * self.rho)
    }
}

/// Built-in domain `{|x| < d, |x + 2 rho e_n| > 2 rho}`.
pub fn potentials_domain(n: usize, rho: f64, d: f64) -> Result<MeridianDomain> {
    let dom = MeridianDomain::exterior_ball_complement(n, 2.0 * rho, d);
    dom.validate()?;
    Ok(dom)
}

/// A bump `amplitude ((r - inner)(outer - r))^3` in `r = |x - center e_n|`
/// on `inner < r < outer`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxialBump {
    pub center: f64,
    pub inner: f64,
    pub outer: f64,
    pub amplitude: f64,
}

impl AxialBump {
    fn radial(&self, r: f64) -> (f64, f64) {
        if r <= self.inner || r >= self.outer {
            return (0.0, 0.0);
        }
        let (a, b) = (r - self.inner, self.outer - r);
        let p = a * b;
        let dp = b - a;
        (self.amplitude * p * p * p, self.amplitude * 3.0 * p * p * dp)
    }
}

/// Trial for the ground-state identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GroundStateTrial {
    Zero,
    Bump(AxialBump),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// `∫ |∇(phi_m w)|^2`.
    pub lhs: f64,
    /// `∫ phi_m^2 |∇w|^2 + ∫ P phi_m^2 w^2` with `P = -Δphi_m/phi_m`.
    pub rhs: f64,
    pub rel_err: f64,
    /// Relative change of both sides between the last two panel counts.
    pub quad_convergence: f64,
    pub panels: usize,
}

/// Quadrature settings for `groundstate_identity_check`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityQuad {
    /// Target relative self-convergence between panel counts `p` and `2p`.
    pub self_tol: f64,
    pub max_panels: usize,
}

impl Default for IdentityQuad {
    fn default() -> Self {
        IdentityQuad { self_tol: 1e-9, max_panels: 512 }
    }
}

/// Both sides of `∫|∇(phi_m w)|^2 = ∫ phi_m^2 |∇w|^2 + ∫ P phi_m^2 w^2` for
/// an axisymmetric `w`, by composite Gauss rules in polar coordinates around
/// the bump center, doubling the panel count until the sides settle.
pub fn groundstate_identity_check(
    wfun: &GroundStateTrial,
    w: &GroundStateWeights,
    d: f64,
    quad: &IdentityQuad,
) -> Result<IdentityCheck> {
    w.validate()?;
    let bump = match wfun {
        GroundStateTrial::Zero => {
            return Ok(IdentityCheck { lhs: 0.0, rhs: 0.0, rel_err: 0.0, quad_convergence: 0.0, panels: 0 })
        }
        GroundStateTrial::Bump(b) => *b,
    };
    if !(bump.inner >= 0.0 && bump.outer > bump.inner && bump.amplitude.is_finite()) {
        return Err(LabError::invalid("bump", "need 0 <= inner < outer"));
    }
    // The closed support ball must avoid the origin, the ball
    // B(-2 rho e_n, 2 rho) and the sphere |x| = d.
    if !(bump.center > bump.outer && bump.center + bump.outer < d) {
        return Err(LabError::SupportViolation(format!(
            "bump around {} e_n of radius {} leaves the domain of radius {d}",
            bump.center, bump.outer
        )));
    }
    if w.m > 0 && bump.center + bump.outer >= w.log_scale() {
        return Err(LabError::SupportViolation("bump reaches |x| >= 3 kappa D~".into()));
    }
    let (mut prev, mut panels) = (None::<(f64, f64)>, 4usize);
    loop {
        let (lhs, rhs) = identity_sides(&bump, w, panels)?;
        if let Some((pl, pr)) = prev {
            let conv = ((lhs - pl).abs() / lhs.abs()).max((rhs - pr).abs() / rhs.abs());
            if conv <= quad.self_tol || 2 * panels > quad.max_panels {
                let rel_err = (lhs - rhs).abs() / lhs.abs().max(f64::MIN_POSITIVE);
                return Ok(IdentityCheck { lhs, rhs, rel_err, quad_convergence: conv, panels });
            }
        }
        prev = Some((lhs, rhs));
        panels *= 2;
    }
}

fn identity_sides(b: &AxialBump, w: &GroundStateWeights, panels: usize) -> Result<(f64, f64)> {
    const ORDER: usize = 8;
    let (gx, gw) = gauss_legendre(ORDER);
    let n = w.n;
    let omega = sphere_area(n - 2);
    let (hr, ha) = ((b.outer - b.inner) / panels as f64, PI / panels as f64);
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for pr in 0..panels {
        for (xr, wr) in gx.iter().zip(&gw) {
            let r = b.inner + hr * (pr as f64 + 0.5 * (xr + 1.0));
            let (f, df) = b.radial(r);
            if f == 0.0 && df == 0.0 {
                continue;
            }
            for pa in 0..panels {
                for (xa, wa) in gx.iter().zip(&gw) {
                    let a = ha * (pa as f64 + 0.5 * (xa + 1.0));
                    let (s, z) = (r * a.sin(), b.center + r * a.cos());
                    let mut c = vec![0.0; n];
                    c[0] = s;
                    c[n - 1] = z;
                    let x = PointN::new(c);
                    let phi = w.phi_m(&x)?;
                    let g = w.grad_log_phi_m(&x)?;
                    // Unit vector from the center, in the (s, z) plane.
                    let (es, ez) = (a.sin(), a.cos());
                    let (gs, gz) = (g[0], g[n - 1]);
                    let grad_u2 = phi * phi * ((df * es + f * gs).powi(2) + (df * ez + f * gz).powi(2));
                    let p = w.substitution_potential(&x)?;
                    let rhs_v = phi * phi * (df * df + p * f * f);
                    let jac = 0.25 * hr * ha * wr * wa * r * omega * s.powi(n as i32 - 2);
                    lhs += jac * grad_u2;
                    rhs += jac * rhs_v;
                }
            }
        }
    }
    Ok((lhs, rhs))
}

/// Behavior of `V` near the origin: `V ~ |x|^{-s} X_1(|x|/D)^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub s: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PotentialFamily {
    /// `|x|^{-s}`.
    Power { s: f64 },
    /// `X_1(|x|/D)^alpha / |x|^2`.
    Logweighted { alpha: f64 },
    /// Radial table `(|x|, V)` with increasing radii, interpolated linearly
    /// in `ln |x|`.
    Tabulated { table: Vec<(f64, f64)>, singularity: Option<Singularity> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub family: PotentialFamily,
    /// `n`, `rho` and `d` of the domain `{|x| < d, |x + 2 rho e_n| > 2 rho}`.
    pub params: Params,
}

impl PotentialSpec {
    pub fn power(s: f64, params: Params) -> Self {
        PotentialSpec { family: PotentialFamily::Power { s }, params }
    }

    pub fn logweighted(alpha: f64, params: Params) -> Self {
        PotentialSpec { family: PotentialFamily::Logweighted { alpha }, params }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if p.n < 2 {
            return Err(LabError::invalid("n", "must be at least 2"));
        }
        if !(p.d > 0.0 && p.rho > 0.0) {
            return Err(LabError::invalid("d", "need d > 0 and rho > 0"));
        }
        match &self.family {
            PotentialFamily::Power { s } if !s.is_finite() => Err(LabError::invalid("s", "must be finite")),
            PotentialFamily::Logweighted { alpha } if !alpha.is_finite() => {
                Err(LabError::invalid("alpha", "must be finite"))
            }
            PotentialFamily::Tabulated { table, .. } => {
                if table.len() < 2 {
                    return Err(LabError::invalid("table", "needs at least two rows"));
                }
                if table.iter().any(|&(r, v)| !(r > 0.0) || !(v >= 0.0) || !v.is_finite()) {
                    return Err(LabError::invalid("table", "radii must be positive and values nonnegative"));
                }
                if table.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(LabError::invalid("table", "radii must increase"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `V` at distance `r` from the origin.
    pub fn value(&self, r: f64) -> f64 {
        match &self.family {
            PotentialFamily::Power { s } => r.powf(-s),
            PotentialFamily::Logweighted { alpha } => x1(r / self.params.d).powf(*alpha) / (r * r),
            PotentialFamily::Tabulated { table, .. } => {
                let i = table.partition_point(|&(t, _)| t < r);
                if i == 0 {
                    table[0].1
                } else if i == table.len() {
                    table[i - 1].1
                } else {
                    let ((r0, v0), (r1, v1)) = (table[i - 1], table[i]);
                    let t = (r / r0).ln() / (r1 / r0).ln();
                    v0 + t * (v1 - v0)
                }
            }
        }
    }

    fn singularity(&self) -> Result<Singularity> {
        match &self.family {
            PotentialFamily::Power { s } => Ok(Singularity { s: *s, alpha: 0.0 }),
            PotentialFamily::Logweighted { alpha } => Ok(Singularity { s: 2.0, alpha: *alpha }),
            PotentialFamily::Tabulated { singularity, .. } => singularity
                .ok_or_else(|| LabError::Inconclusive("tabulated potential has no singularity metadata".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Finite,
    Infinite,
}

/// Growth of the truncated integral over `eps < |x|` as `eps -> 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DivergenceRate {
    /// `eps^{-power} ln(1/eps)^{log_power}`.
    Power { power: f64, log_power: f64 },
    /// `ln(1/eps)^{log_power}`.
    Log { log_power: f64 },
    /// `ln ln(1/eps)`.
    LogLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubcriticalReport {
    pub classification: Classification,
    /// `∫ V^{n/2} X_1^{1-n}` over the half ball of radius `D` for the
    /// built-in families, when finite.
    pub value: Option<f64>,
    pub rate: Option<DivergenceRate>,
    /// `alpha n/2 + 1 - n` for the critical power `s = 2`.
    pub beta: Option<f64>,
}

/// Integrability of `V^{n/2} X_1(|x|/D)^{1-n}` at the origin.
///
/// With `V ~ |x|^{-s} X_1^alpha` the radial integrand is
/// `r^{n - 1 - s n/2} X_1^{alpha n/2 + 1 - n}`; for `s = 2` the substitution
/// `dX_1 = X_1^2 dr/r` turns it into `X_1^{beta - 2} dX_1`.
pub fn subcritical_test(v: &PotentialSpec, tol: f64) -> Result<SubcriticalReport> {
    v.validate()?;
    if !(tol > 0.0) {
        return Err(LabError::invalid("tol", "must be positive"));
    }
    let sing = v.singularity()?;
    let n = v.params.n as f64;
    let d = v.params.d;
    let half_sphere = 0.5 * sphere_area(v.params.n - 1);
    let log_power = sing.alpha * n / 2.0 + 1.0 - n;
    let tabulated = matches!(v.family, PotentialFamily::Tabulated { .. });
    let excess = sing.s * n / 2.0 - n;
    if excess.abs() <= tol {
        let beta = log_power;
        let (classification, value, rate) = if beta > 1.0 + tol {
            (Classification::Finite, (!tabulated).then(|| half_sphere / (beta - 1.0)), None)
        } else if (beta - 1.0).abs() <= tol {
            (Classification::Infinite, None, Some(DivergenceRate::LogLog))
        } else {
            (Classification::Infinite, None, Some(DivergenceRate::Log { log_power: 1.0 - beta }))
        };
        return Ok(SubcriticalReport { classification, value, rate, beta: Some(beta) });
    }
    if excess > 0.0 {
        return Ok(SubcriticalReport {
            classification: Classification::Infinite,
            value: None,
            rate: Some(DivergenceRate::Power { power: excess, log_power: -log_power }),
            beta: None,
        });
    }
    let value = if tabulated {
        None
    } else {
        // r = D e^{-y}: D^g ∫_0^∞ e^{-g y} (1 + y)^{-log_power} dy, g = -excess.
        let g = -excess;
        let k = -log_power;
        let integral = if k >= 0.0 && k.fract() == 0.0 {
            // Binomial expansion: sum_j C(k, j) j! / g^{j+1}.
            let k = k as usize;
            let mut sum = 0.0;
            let mut c = 1.0;
            for j in 0..=k {
                sum += c / g.powi(j as i32 + 1);
                c *= (k - j) as f64;
            }
            sum
        } else {
            adaptive(|y| (-g * y).exp() * (1.0 + y).powf(k), 0.0, 60.0 / g, 1e-300, 1e-12)?.value
        };
        Some(half_sphere * d.powf(g) * integral)
    };
    Ok(SubcriticalReport { classification: Classification::Finite, value, rate: None, beta: None })
}

/// One refinement level of a `C_r(V)` probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrvTrace {
    pub r: f64,
    pub estimate: EigenEstimate,
}

/// Upper bounds for
/// `C_r(V) = inf (∫|∇u|^2 - (n^2/4) ∫u^2/|x|^2) / ∫ V u^2` over the
/// axisymmetric functions on `Omega ∩ B_r`, one per uniform refinement.
///
/// Fails with `IndefiniteForm` when the discrete numerator has a negative
/// direction, which would make the quotient meaningless at that resolution.
pub fn cr_v_estimate(v: &PotentialSpec, r: f64, levels: usize, tol: f64) -> Result<CrvTrace> {
    v.validate()?;
    let p = &v.params;
    let dom = potentials_domain(p.n, p.rho, r)?;
    cr_v_on(v, &dom, MeshOptions::default(), levels, tol)
}

/// `C_r(V)` trace on an arbitrary meridian domain with its singularity at the
/// origin.
pub fn cr_v_on(
    v: &PotentialSpec,
    dom: &MeridianDomain,
    opts: MeshOptions,
    levels: usize,
    tol: f64,
) -> Result<CrvTrace> {
    v.validate()?;
    dom.validate()?;
    if levels == 0 {
        return Err(LabError::invalid("levels", "must be at least 1"));
    }
    let pole = dom.singularity().unwrap_or([0.0, 0.0]);
    let n = dom.params.n;
    let nn4 = 0.25 * (n * n) as f64;
    let mut mesh = build_meridian_mesh_with(dom, opts)?;
    let mut trace = Vec::with_capacity(levels);
    let mut last = None;
    for level in 0..levels {
        if level > 0 {
            mesh = refine(&mesh);
        }
        let sys = assemble(&mesh, n, &Weight::Hardy { z0: pole[1] })?;
        let a = sys.k.lin_comb(1.0, &sys.m, -nn4);
        let fac = SkylineLdl::factor(&a)?;
        if fac.negative_pivots > 0 {
            return Err(LabError::IndefiniteForm(format!(
                "numerator form has {} negative directions on level {level}; refine the mesh",
                fac.negative_pivots
            )));
        }
        let vw = FnWeight { f: |s: f64, z: f64| v.value((s * s + (z - pole[1]).powi(2)).sqrt()), pole: Some(pole) };
        let mv = mass_matrix(&mesh, &sys, &vw, 0)?;
        let e = smallest_eigenpair(&a, &mv, tol)?;
        trace.push(TraceEntry { resolution: sys.dofs(), value: e.value });
        last = Some(e);
    }
    let e = last.unwrap();
    Ok(CrvTrace { r: dom.params.r, estimate: EigenEstimate { value: e.value, residual: e.residual, trace } })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSobolevBound {
    pub n: usize,
    pub angle: f64,
    /// `|Sigma|`, the area of the cap.
    pub area: f64,
    /// `omega^{-2/n} (n-2)^{-2/n} S_n |Sigma|^{2/n}`.
    pub coarse: f64,
    /// `omega^{-2/n} (n-2)^{-2/n} S_n / (∫ |phi_1|^{2n/(n-2)})^{(n-2)/n}`.
    pub sharp: f64,
    /// The coarse bound with the factor `omega^{-2(n-1)/n}`.
    pub coarse_alt: f64,
}

/// Bounds for the Sobolev constant of the cone over the cap of the given
/// opening angle, `omega = |S^{n-1}|`, `phi_1` the L^2-normalized first cap
/// eigenfunction.
pub fn cone_sobolev_bound(n: usize, angle: f64) -> Result<ConeSobolevBound> {
    if n < 3 {
        return Err(LabError::invalid("n", "must be at least 3"));
    }
    if !(angle > 0.0 && angle < PI) {
        return Err(LabError::invalid("angle", "must lie in (0, pi)"));
    }
    let nf = n as f64;
    let e = n as i32 - 2;
    let area = sphere_area(n - 2) * adaptive(|t| t.sin().powi(e), 0.0, angle, 1e-300, 1e-14)?.value;
    let omega = sphere_area(n - 1);
    let base = (nf - 2.0).powf(-2.0 / nf) * sobolev_constant(n);
    let coarse = omega.powf(-2.0 / nf) * base * area.powf(2.0 / nf);
    let coarse_alt = omega.powf(-2.0 * (nf - 1.0) / nf) * base * area.powf(2.0 / nf);
    let sol = cap_eigenpair(&CapProblem { n, angle, variant: CapVariant::Cone, k: 1 }, MIN_RESOLUTION)?;
    let q = 2.0 * nf / (nf - 2.0);
    let lq: f64 = sol.weights.iter().zip(&sol.eigenfunction).map(|(w, g)| w * g.abs().powf(q)).sum();
    let sharp = omega.powf(-2.0 / nf) * base / lq.powf((nf - 2.0) / nf);
    Ok(ConeSobolevBound { n, angle, area, coarse, sharp, coarse_alt })
}

/// `psi(x) = |x|^{-(n-2)/2} phi_1(angle from e_n)` for the cone over a cap,
/// with `phi_1` the normalized first cap eigenfunction, zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeGroundState {
    pub n: usize,
    pub angle: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl ConeGroundState {
    pub fn new(n: usize, angle: f64) -> Result<Self> {
        let sol = cap_eigenpair(&CapProblem { n, angle, variant: CapVariant::Cone, k: 1 }, MIN_RESOLUTION)?;
        let sign = if sol.eigenfunction.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        Ok(ConeGroundState { n, angle, nodes: sol.nodes, values: sol.eigenfunction.iter().map(|g| sign * g).collect() })
    }

    /// Cap eigenfunction at polar angle `t`, linear between grid nodes.
    pub fn profile(&self, t: f64) -> f64 {
        if t >= self.angle || t < 0.0 {
            return 0.0;
        }
        let i = self.nodes.partition_point(|&x| x < t);
        if i == 0 {
            return self.values[0];
        }
        if i == self.nodes.len() {
            return self.values[i - 1] * (self.angle - t) / (self.angle - self.nodes[i - 1]);
        }
        let (t0, t1) = (self.nodes[i - 1], self.nodes[i]);
        self.values[i - 1] + (t - t0) / (t1 - t0) * (self.values[i] - self.values[i - 1])
    }

    pub fn eval(&self, x: &PointN) -> Result<f64> {
        if x.dim() != self.n {
            return Err(LabError::invalid("x", "dimension mismatch"));
        }
        let r = x.norm();
        if r == 0.0 {
            return Err(LabError::domain("psi is singular at the origin"));
        }
        let t = (x.last() / r).clamp(-1.0, 1.0).acos();
        Ok(r.powf(-0.5 * (self.n as f64 - 2.0)) * self.profile(t))
    }
}
