//! Weighted Sturm–Liouville eigenproblems `-(w g')' = lambda w g` on an
//! interval, discretized by a flux-form finite-volume scheme and solved by
//! Sturm-count bisection on the tridiagonal pencil.

use crate::error::{LabError, Result};
use crate::quad::{adaptive, GaussRule};
use crate::special::sphere_area;
use crate::types::{EigenEstimate, TraceEntry};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Minimum number of intervals on the coarsest grid.
pub const MIN_RESOLUTION: usize = 64;

/// Number of dyadic grids in a Richardson trace.
pub const TRACE_LEVELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndCondition {
    Dirichlet,
    /// No constraint. Covers Neumann ends and ends where the weight vanishes.
    Natural,
}

/// Interval, weight and end conditions of a problem.
pub struct WeightedProblem<'a> {
    pub a: f64,
    pub b: f64,
    pub weight: &'a dyn Fn(f64) -> f64,
    pub left: EndCondition,
    pub right: EndCondition,
}

/// Symmetric tridiagonal stiffness with diagonal mass, restricted to free nodes.
#[derive(Debug, Clone)]
pub struct Pencil {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    pub mass: Vec<f64>,
    pub nodes: Vec<f64>,
}

/// Flux-form discretization on `intervals` equal cells.
///
/// Each node balances the fluxes `w(t_{i +- 1/2}) (g_{i+-1} - g_i) / h` against
/// the weight integrated over its dual cell. At a natural end the dual cell is
/// a half cell, which is the even ghost-point reflection of the interior
/// stencil and keeps second-order accuracy.
pub fn discretize(p: &WeightedProblem, intervals: usize) -> Pencil {
    let h = (p.b - p.a) / intervals as f64;
    let g = GaussRule::new(4);
    let t = |i: usize| p.a + h * i as f64;
    let flux: Vec<f64> = (0..intervals).map(|i| (p.weight)(p.a + h * (i as f64 + 0.5)) / h).collect();
    let half_mass = |lo: f64, hi: f64| g.integrate(lo, hi, |s| (p.weight)(s));
    let first = if p.left == EndCondition::Dirichlet { 1 } else { 0 };
    let last = if p.right == EndCondition::Dirichlet { intervals - 1 } else { intervals };
    let mut pen = Pencil { diag: Vec::new(), off: Vec::new(), mass: Vec::new(), nodes: Vec::new() };
    for i in first..=last {
        let ti = t(i);
        let mut d = 0.0;
        let mut m = 0.0;
        if i > 0 {
            d += flux[i - 1];
            m += half_mass(ti - 0.5 * h, ti);
        }
        if i < intervals {
            d += flux[i];
            m += half_mass(ti, ti + 0.5 * h);
        }
        pen.diag.push(d);
        pen.mass.push(m);
        pen.nodes.push(ti);
        if i < last {
            pen.off.push(-flux[i]);
        }
    }
    pen
}

impl Pencil {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `lambda`.
    pub fn sturm_count(&self, lambda: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.len() {
            let mut di = self.diag[i] - lambda * self.mass[i];
            if i > 0 {
                di -= self.off[i - 1] * self.off[i - 1] / d;
            }
            if di == 0.0 {
                di = -f64::EPSILON * (self.diag[i].abs() + lambda.abs() * self.mass[i]);
            }
            if di < 0.0 {
                count += 1;
            }
            d = di;
        }
        count
    }

    fn upper_bound(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs() / self.mass[i];
                if i > 0 {
                    s += self.off[i - 1].abs() / (self.mass[i] * self.mass[i - 1]).sqrt();
                }
                if i + 1 < n {
                    s += self.off[i].abs() / (self.mass[i] * self.mass[i + 1]).sqrt();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// The `k`-th smallest eigenvalue (`k >= 1`) by bisection.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.len() {
            return Err(LabError::invalid("k", format!("must lie in 1..={}", self.len())));
        }
        let (mut lo, mut hi) = (-1.0, self.upper_bound() * 1.01 + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.sturm_count(mid) >= k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * hi.abs().max(1.0) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Solve `(K - sigma M) x = rhs` with the Thomas algorithm.
    fn shifted_solve(&self, sigma: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut piv = self.diag[0] - sigma * self.mass[0];
        c[0] = if n > 1 { self.off[0] / piv } else { 0.0 };
        d[0] = rhs[0] / piv;
        for i in 1..n {
            piv = self.diag[i] - sigma * self.mass[i] - self.off[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = self.off[i] / piv;
            }
            d[i] = (rhs[i] - self.off[i - 1] * d[i - 1]) / piv;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }

    /// Eigenvector for an eigenvalue, normalized to `sum m_i x_i^2 = 1` and
    /// made positive at its largest entry.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.len();
        let sigma = lambda - 1e-10 * lambda.abs().max(1.0);
        let mut x = vec![1.0; n];
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += 1e-3 * (i as f64 * 0.7).sin();
        }
        for _ in 0..4 {
            let rhs: Vec<f64> = x.iter().zip(&self.mass).map(|(a, m)| a * m).collect();
            x = self.shifted_solve(sigma, &rhs);
            let nrm = x.iter().zip(&self.mass).map(|(a, m)| m * a * a).sum::<f64>().sqrt();
            x.iter_mut().for_each(|a| *a /= nrm);
        }
        let imax = (0..n).max_by(|&i, &j| x[i].abs().total_cmp(&x[j].abs())).unwrap();
        if x[imax] < 0.0 {
            x.iter_mut().for_each(|a| *a = -*a);
        }
        x
    }
}

/// Result of a trace of dyadic solves with Richardson extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlSolution {
    pub estimate: EigenEstimate,
    /// Ratios of successive raw differences; near 4 for second order.
    pub order_ratios: Vec<f64>,
    pub nodes: Vec<f64>,
    pub eigenfunction: Vec<f64>,
    /// Dual-cell weights on the finest grid: `sum weights g^2 = 1`.
    pub weights: Vec<f64>,
}

/// `k`-th eigenpair with Richardson extrapolation over `TRACE_LEVELS` grids
/// starting at `resolution` intervals.
pub fn solve_weighted(p: &WeightedProblem, k: usize, resolution: usize) -> Result<SlSolution> {
    if resolution < MIN_RESOLUTION {
        return Err(LabError::invalid("resolution", format!("must be at least {MIN_RESOLUTION}")));
    }
    let mut trace = Vec::with_capacity(TRACE_LEVELS);
    let mut finest = None;
    for level in 0..TRACE_LEVELS {
        let n = resolution << level;
        let pen = discretize(p, n);
        let lam = pen.eigenvalue(k)?;
        trace.push(TraceEntry { resolution: n, value: lam });
        if level + 1 == TRACE_LEVELS {
            finest = Some((pen, lam));
        }
    }
    let diffs: Vec<f64> = trace.windows(2).map(|w| w[1].value - w[0].value).collect();
    for w in diffs.windows(2) {
        if w[1].abs() >= w[0].abs() && w[0].abs() > 1e-13 * trace[0].value.abs().max(1.0) {
            return Err(LabError::Convergence(format!(
                "eigenvalue trace is not settling: differences {:e} then {:e}",
                w[0], w[1]
            )));
        }
    }
    let order_ratios = diffs.windows(2).map(|w| w[0] / w[1]).collect();
    let r1: Vec<f64> = trace.windows(2).map(|w| (4.0 * w[1].value - w[0].value) / 3.0).collect();
    let r2: Vec<f64> = r1.windows(2).map(|w| (16.0 * w[1] - w[0]) / 15.0).collect();
    let value = *r2.last().unwrap();
    let residual = (r2[r2.len() - 1] - r2[r2.len() - 2]).abs().max((r1[r1.len() - 1] - value).abs() * 1e-2);
    let (pen, lam) = finest.unwrap();
    let eigenfunction = pen.eigenvector(lam);
    Ok(SlSolution {
        estimate: EigenEstimate { value, residual, trace },
        order_ratios,
        nodes: pen.nodes.clone(),
        eigenfunction,
        weights: pen.mass.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapVariant {
    /// Interval `(0, angle)`, regular at 0, Dirichlet at `angle`.
    Cone,
    /// Interval `(angle, pi)`, Dirichlet at `angle`, Neumann at `pi`.
    Example,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapProblem {
    pub n: usize,
    pub angle: f64,
    pub variant: CapVariant,
    pub k: usize,
}

impl CapProblem {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(LabError::invalid("n", "must be at least 2"));
        }
        if !(self.angle > 0.0 && self.angle < PI) {
            return Err(LabError::invalid("angle", "must lie strictly inside (0, pi)"));
        }
        if self.k == 0 {
            return Err(LabError::invalid("k", "must be at least 1"));
        }
        Ok(())
    }
}

/// `k`-th eigenpair of `-(sin^{n-2} g')' = lambda sin^{n-2} g` for a cap.
///
/// The eigenfunction is scaled so that `omega_{n-2} int g^2 sin^{n-2} = 1`.
pub fn cap_eigenpair(p: &CapProblem, resolution: usize) -> Result<SlSolution> {
    p.validate()?;
    let e = p.n as i32 - 2;
    let w = move |t: f64| t.sin().powi(e);
    let prob = match p.variant {
        CapVariant::Cone => WeightedProblem {
            a: 0.0,
            b: p.angle,
            weight: &w,
            left: EndCondition::Natural,
            right: EndCondition::Dirichlet,
        },
        CapVariant::Example => WeightedProblem {
            a: p.angle,
            b: PI,
            weight: &w,
            left: EndCondition::Dirichlet,
            right: EndCondition::Natural,
        },
    };
    let mut sol = solve_weighted(&prob, p.k, resolution)?;
    let omega = sphere_area(p.n - 2);
    let s = omega.sqrt();
    sol.eigenfunction.iter_mut().for_each(|g| *g /= s);
    sol.weights.iter_mut().for_each(|m| *m *= omega);
    Ok(sol)
}

/// First eigenvalue `lambda_1(n, theta)` of the example cap.
pub fn example_cap_lambda1(n: usize, theta: f64) -> Result<f64> {
    let p = CapProblem { n, angle: theta, variant: CapVariant::Example, k: 1 };
    Ok(cap_eigenpair(&p, MIN_RESOLUTION)?.estimate.value)
}

/// First Dirichlet eigenvalue `mu_1` of the cap of the given opening angle.
pub fn cone_cap_mu1(n: usize, angle: f64) -> Result<f64> {
    let p = CapProblem { n, angle, variant: CapVariant::Cone, k: 1 };
    Ok(cap_eigenpair(&p, MIN_RESOLUTION)?.estimate.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusConstant {
    pub closed_form: f64,
    pub numeric: EigenEstimate,
}

impl AnnulusConstant {
    pub fn discrepancy(&self) -> f64 {
        (self.closed_form - self.numeric.value).abs()
    }
}

/// `((n-2)/2)^2 + (pi / ln(b/a))^2` together with a numeric solve of
/// `min int f'^2 r^{n-1} / int f^2 r^{n-3}` over `f(a) = f(b) = 0`.
///
/// With `r = e^s` both integrals carry the weight `e^{(n-2)s}`.
pub fn radial_annulus_constant(n: usize, a: f64, b: f64) -> Result<AnnulusConstant> {
    if !(a > 0.0 && b > a) {
        return Err(LabError::invalid("b", "need 0 < a < b"));
    }
    let half = 0.5 * (n as f64 - 2.0);
    let len = (b / a).ln();
    let closed_form = half * half + (PI / len).powi(2);
    let e = n as f64 - 2.0;
    let w = move |s: f64| (e * s).exp();
    let prob =
        WeightedProblem { a: 0.0, b: len, weight: &w, left: EndCondition::Dirichlet, right: EndCondition::Dirichlet };
    let sol = solve_weighted(&prob, 1, MIN_RESOLUTION)?;
    Ok(AnnulusConstant { closed_form, numeric: sol.estimate })
}

/// `(n-2)^2/4 + mu_1` for the cone over the cap of the given angle.
pub fn cone_hardy_constant(n: usize, angle: f64) -> Result<f64> {
    let h = 0.5 * (n as f64 - 2.0);
    Ok(h * h + cone_cap_mu1(n, angle)?)
}

/// Half-ball Hardy quotient of `u(r) = r^{-(n-2)/2 + eps} (1 - r)` times the
/// first angular mode:
/// `[int u'^2 r^{n-1} + (n-1) int u^2 r^{n-3}] / int u^2 r^{n-3}` on `(0, 1)`.
///
/// After `r = e^{-s}` both integrands are `e^{-2 eps s}` times bounded factors.
pub fn sharpness_quotient(n: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(LabError::Divergence(format!("eps = {eps}: the trial function has infinite energy for eps <= 0")));
    }
    if eps >= 0.5 {
        return Err(LabError::invalid("eps", "must lie in (0, 1/2)"));
    }
    let alpha = -0.5 * (n as f64 - 2.0) + eps;
    let s_max = 40.0 / eps;
    let grad = |s: f64| {
        let r = (-s).exp();
        let c = alpha * (1.0 - r) - r;
        (-2.0 * eps * s).exp() * c * c
    };
    let mass = |s: f64| {
        let r = (-s).exp();
        (-2.0 * eps * s).exp() * (1.0 - r) * (1.0 - r)
    };
    let i1 = adaptive(grad, 0.0, s_max, 1e-14, 1e-13)?.value;
    let i2 = adaptive(mass, 0.0, s_max, 1e-14, 1e-13)?.value;
    Ok((i1 + (n as f64 - 1.0) * i2) / i2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hemisphere_values() {
        for n in [3, 4] {
            for variant in [CapVariant::Cone, CapVariant::Example] {
                let p = CapProblem { n, angle: PI / 2.0, variant, k: 1 };
                let s = cap_eigenpair(&p, 64).unwrap();
                assert!((s.estimate.value - (n as f64 - 1.0)).abs() < 1e-6, "{s:?}");
            }
        }
    }

    #[test]
    fn resolution_floor() {
        let p = CapProblem { n: 3, angle: 1.0, variant: CapVariant::Cone, k: 1 };
        assert!(cap_eigenpair(&p, 32).is_err());
    }

    #[test]
    fn sharpness_rejects_nonpositive_eps() {
        assert!(matches!(sharpness_quotient(3, 0.0), Err(LabError::Divergence(_))));
    }
}
