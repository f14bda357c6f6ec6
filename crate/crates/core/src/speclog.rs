//! Iterated logarithms `X_k`, the series `eta` and `B`, and the constant `kappa`.
//!
//! `X_1(t) = 1/(1 - ln t)` and `X_{k+1} = X_k(X_1(t))`. Writing
//! `eps_k = 1 - X_k`, the recursion is `eps_{k+1} = L/(1+L)` with
//! `L = -ln(1 - eps_k)`, so `eps_k ~ 2/k` and the products `X_1...X_i`
//! decay only like `i^{-2}`. Plain summation therefore cannot reach tight
//! tolerances; the series tails are instead enclosed between explicit sub-
//! and supersolutions of the tail recursion `F(e) = (1-g(e))^q (1 + F(g(e)))`.

use crate::error::{LabError, Result};
use crate::types::SeriesValue;
use serde::{Deserialize, Serialize};

/// Hard cap on explicitly summed terms.
pub const MAX_TERMS: usize = 1_000_000;

/// Default absolute tolerance for `eta` and `big_b`.
pub const DEFAULT_TOL: f64 = 1e-15;

/// Below this value of `1 - X_k` the tail enclosure is valid.
const TAIL_SWITCH: f64 = 0.1;

/// Half-width coefficient of the tail enclosure, in units of `eps^5`.
const TAIL_K: f64 = 0.1;

/// Asymptotic tail coefficients `(power, coefficient)` for `sum prod X_j`.
const TAIL_ETA: [(i32, f64); 6] = [
    (-1, 2.0),
    (0, -7.0 / 6.0),
    (1, -1.0 / 9.0),
    (2, -157.0 / 2160.0),
    (3, -125.0 / 2592.0),
    (4, -36767.0 / 1_088_640.0),
];

/// Same for `sum prod X_j^2`.
const TAIL_B: [(i32, f64); 6] = [
    (-1, 2.0 / 3.0),
    (0, -25.0 / 36.0),
    (1, 1.0 / 10.0),
    (2, 31.0 / 3240.0),
    (3, -347.0 / 27216.0),
    (4, -86543.0 / 10_886_400.0),
];

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(LabError::domain(format!("t = {t} must lie in (0, 1]")));
    }
    Ok(())
}

fn check_depth(k: usize) -> Result<()> {
    if k == 0 {
        return Err(LabError::domain("depth k must be at least 1"));
    }
    Ok(())
}

/// `X_1(t)` without argument checks.
#[inline]
pub fn x1(t: f64) -> f64 {
    1.0 / (1.0 - t.ln())
}

/// State of the iteration: `x = X_k` and `eps = 1 - X_k`, both kept accurate.
#[derive(Clone, Copy, Debug)]
struct Iter {
    x: f64,
    eps: f64,
}

impl Iter {
    fn first(t: f64) -> Self {
        Iter::from_neg_log(-t.ln())
    }

    fn from_neg_log(l: f64) -> Self {
        Iter { x: 1.0 / (1.0 + l), eps: l / (1.0 + l) }
    }

    fn next(self) -> Self {
        let l = if self.eps < 0.5 { -(-self.eps).ln_1p() } else { -self.x.ln() };
        Iter { x: 1.0 / (1.0 + l), eps: l / (1.0 + l) }
    }
}

/// `X_k(t)` by `k - 1` compositions of `X_1`.
pub fn eval_x(k: usize, t: f64) -> Result<f64> {
    check_depth(k)?;
    check_t(t)?;
    let mut it = Iter::first(t);
    for _ in 1..k {
        it = it.next();
    }
    Ok(it.x)
}

/// `X_1(t) X_2(t) ... X_i(t)`.
pub fn prod_x(i: usize, t: f64) -> Result<f64> {
    check_depth(i)?;
    check_t(t)?;
    let mut it = Iter::first(t);
    let mut p = it.x;
    for _ in 1..i {
        it = it.next();
        p *= it.x;
    }
    Ok(p)
}

/// All of `X_1(t), ..., X_k(t)`.
pub fn x_family(k: usize, t: f64) -> Result<Vec<f64>> {
    check_depth(k)?;
    check_t(t)?;
    let mut out = Vec::with_capacity(k);
    let mut it = Iter::first(t);
    out.push(it.x);
    for _ in 1..k {
        it = it.next();
        out.push(it.x);
    }
    Ok(out)
}

fn tail_poly(coeffs: &[(i32, f64)], e: f64) -> f64 {
    coeffs.iter().map(|&(p, c)| c * e.powi(p)).sum()
}

/// Enclosure `[lo, hi]` of `sum_{j>N} prod_{l=N+1..j} X_l^q` given `eps_N`.
fn tail_enclosure(q: u32, eps: f64) -> (f64, f64) {
    let coeffs: &[(i32, f64)] = if q == 1 { &TAIL_ETA } else { &TAIL_B };
    let mid = tail_poly(coeffs, eps);
    let half = TAIL_K * eps.powi(5);
    ((mid - half).max(0.0), mid + half)
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, v: f64) {
        let t = self.s + v;
        if self.s.abs() >= v.abs() {
            self.c += (self.s - t) + v;
        } else {
            self.c += (v - t) + self.s;
        }
        self.s = t;
    }

    fn total(&self) -> f64 {
        self.s + self.c
    }
}

fn power_series(t: f64, q: u32, tol: f64) -> Result<SeriesValue> {
    if !(t > 0.0 && t < 1.0) {
        return Err(LabError::domain(format!("t = {t} must lie in (0, 1); the series diverges at t = 1")));
    }
    power_series_from(Iter::first(t), q, tol)
}

fn power_series_from(first: Iter, q: u32, tol: f64) -> Result<SeriesValue> {
    if !(tol > 0.0) {
        return Err(LabError::invalid("tol", "must be positive"));
    }
    let mut it = first;
    let mut p = it.x.powi(q as i32);
    let mut sum = Sum::default();
    sum.add(p);
    let mut terms = 1usize;
    loop {
        if it.eps <= TAIL_SWITCH {
            let (lo, hi) = tail_enclosure(q, it.eps);
            let width = p * (hi - lo);
            if width < tol {
                let lower = p * lo;
                let mut s = sum;
                s.add(lower);
                return Ok(SeriesValue { value: s.total(), tail_bound: width, terms_used: terms });
            }
        }
        if terms >= MAX_TERMS {
            let width = if it.eps <= TAIL_SWITCH {
                let (lo, hi) = tail_enclosure(q, it.eps);
                p * (hi - lo)
            } else {
                f64::INFINITY
            };
            return Err(LabError::ToleranceNotReachable { tol, terms, width });
        }
        it = it.next();
        p *= it.x.powi(q as i32);
        sum.add(p);
        terms += 1;
    }
}

/// `eta(t) = sum_i X_1(t)...X_i(t)` to the default tolerance.
pub fn eta(t: f64) -> Result<SeriesValue> {
    power_series(t, 1, DEFAULT_TOL)
}

pub fn eta_with_tol(t: f64, tol: f64) -> Result<SeriesValue> {
    power_series(t, 1, tol)
}

/// `B(t) = sum_i X_1(t)^2...X_i(t)^2` to the default tolerance.
pub fn big_b(t: f64) -> Result<SeriesValue> {
    power_series(t, 2, DEFAULT_TOL)
}

pub fn big_b_with_tol(t: f64, tol: f64) -> Result<SeriesValue> {
    power_series(t, 2, tol)
}

fn check_neg_log(l: f64) -> Result<()> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(LabError::domain(format!("-ln t = {l} must be positive and finite")));
    }
    Ok(())
}

/// `X_1...X_i` at `t = e^{-l}`. Stays accurate where `t` itself underflows.
pub fn prod_x_neg_log(i: usize, l: f64) -> Result<f64> {
    check_depth(i)?;
    if !(l >= 0.0) {
        return Err(LabError::domain(format!("-ln t = {l} must be nonnegative")));
    }
    let mut it = Iter::from_neg_log(l);
    let mut p = it.x;
    for _ in 1..i {
        it = it.next();
        p *= it.x;
    }
    Ok(p)
}

/// `eta(e^{-l})`, midpoint of the enclosure.
pub fn eta_neg_log(l: f64) -> Result<f64> {
    check_neg_log(l)?;
    power_series_from(Iter::from_neg_log(l), 1, DEFAULT_TOL).map(|s| s.value + 0.5 * s.tail_bound)
}

/// `B(e^{-l})` with its enclosure.
pub fn big_b_neg_log(l: f64) -> Result<SeriesValue> {
    check_neg_log(l)?;
    power_series_from(Iter::from_neg_log(l), 2, DEFAULT_TOL)
}

/// Midpoint of the enclosure, the best single estimate of the series.
pub fn eta_mid(t: f64) -> Result<f64> {
    eta(t).map(|s| s.value + 0.5 * s.tail_bound)
}

pub fn big_b_mid(t: f64) -> Result<f64> {
    big_b(t).map(|s| s.value + 0.5 * s.tail_bound)
}

fn kappa_residual(s: f64) -> Result<f64> {
    Ok(eta_mid((-s).exp())? - 0.25)
}

/// `kappa > 1` with `eta(1/kappa) = 1/4`, by bisection in `ln kappa`.
pub fn solve_kappa(tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(LabError::invalid("tol", "must be positive"));
    }
    // eta(t) increases with t, so the residual decreases with s = ln kappa.
    let (mut lo, mut hi) = (1e-3, 60.0);
    let (r_lo, r_hi) = (kappa_residual(lo)?, kappa_residual(hi)?);
    if !(r_lo > 0.0 && r_hi < 0.0) {
        return Err(LabError::Convergence("kappa bracket lost".into()));
    }
    let mut best = (f64::INFINITY, 0.5 * (lo + hi));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = kappa_residual(mid)?;
        if r.abs() < best.0 {
            best = (r.abs(), mid);
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    if best.0 > tol {
        return Err(LabError::Convergence(format!("kappa residual {:e} exceeds tolerance {tol:e}", best.0)));
    }
    Ok(best.1.exp())
}

/// Independent secant iteration on the same equation, used as a cross-check.
pub fn solve_kappa_secant(tol: f64) -> Result<f64> {
    let (mut s0, mut s1) = (5.0, 8.0);
    let (mut r0, mut r1) = (kappa_residual(s0)?, kappa_residual(s1)?);
    for _ in 0..100 {
        if r1 == r0 {
            break;
        }
        let s2 = s1 - r1 * (s1 - s0) / (r1 - r0);
        s0 = s1;
        r0 = r1;
        s1 = s2;
        r1 = kappa_residual(s1)?;
        if r1.abs() <= tol * 1e-3 || (s1 - s0).abs() <= 1e-15 * s1.abs() {
            break;
        }
    }
    if r1.abs() > tol {
        return Err(LabError::Convergence(format!("secant residual {:e} exceeds tolerance {tol:e}", r1.abs())));
    }
    Ok(s1.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub kappa: f64,
    pub residual: f64,
    pub kappa_secant: f64,
    pub solver_gap: f64,
}

/// Both root finders plus the residual of the bisection root.
pub fn kappa_report(tol: f64) -> Result<KappaReport> {
    let kappa = solve_kappa(tol)?;
    let kappa_secant = solve_kappa_secant(tol)?;
    let residual = (eta_mid(1.0 / kappa)? - 0.25).abs();
    Ok(KappaReport { kappa, residual, kappa_secant, solver_gap: (kappa - kappa_secant).abs() })
}

/// Closed form `d/dt X_k(t) = X_1...X_{k-1} X_k^2 / t`.
pub fn dx_closed(k: usize, t: f64) -> Result<f64> {
    let xs = x_family(k, t)?;
    let head: f64 = xs[..k - 1].iter().product();
    Ok(head * xs[k - 1] * xs[k - 1] / t)
}

/// Closed form `eta'(t) = (eta^2 + B) / (2t)`.
pub fn deta_closed(t: f64) -> Result<f64> {
    let e = eta_mid(t)?;
    let b = big_b_mid(t)?;
    Ok((e * e + b) / (2.0 * t))
}

/// Central difference with two Richardson levels (error `O(h^6)`).
pub fn richardson_derivative<F: FnMut(f64) -> Result<f64>>(mut f: F, t: f64, h: f64) -> Result<f64> {
    let mut d = |h: f64| -> Result<f64> {
        // Use the representable step so the quotient matches the samples.
        let hp = (t + h) - t;
        let hm = t - (t - h);
        Ok((f(t + hp)? - f(t - hm)?) / (hp + hm))
    };
    let d1 = d(h)?;
    let d2 = d(0.5 * h)?;
    let d4 = d(0.25 * h)?;
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d4 - d2) / 3.0;
    Ok((16.0 * r2 - r1) / 15.0)
}

/// Which derivative identity to probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Probe {
    X { k: usize, t: f64 },
    Eta { t: f64 },
}

fn fd_step(t: f64) -> f64 {
    0.02 * t.min(1.0 - t)
}

/// Relative error between closed form and finite differences at one probe.
pub fn derivative_identity_error(p: Probe) -> Result<f64> {
    let (closed, numeric) = match p {
        Probe::X { k, t } => {
            check_interior(t)?;
            (dx_closed(k, t)?, richardson_derivative(|s| eval_x(k, s), t, fd_step(t))?)
        }
        Probe::Eta { t } => {
            check_interior(t)?;
            (deta_closed(t)?, richardson_derivative(eta_mid, t, fd_step(t))?)
        }
    };
    Ok(((numeric - closed) / closed).abs())
}

fn check_interior(t: f64) -> Result<()> {
    if !(1e-6 - 1e-18..=1.0 - 1e-6 + 1e-18).contains(&t) {
        return Err(LabError::domain(format!("derivative probes need t in [1e-6, 1 - 1e-6], got {t}")));
    }
    Ok(())
}

/// Worst relative error over a list of probes.
pub fn derivative_identity_report(probes: &[Probe]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &p in probes {
        worst = worst.max(derivative_identity_error(p)?);
    }
    Ok(worst)
}

/// `n` log-spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| if n == 1 { lo } else { (a + (b - a) * i as f64 / (n - 1) as f64).exp() }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x_values() {
        assert_eq!(eval_x(1, 1.0).unwrap(), 1.0);
        assert!((eval_x(1, (-1.0f64).exp()).unwrap() - 0.5).abs() < 1e-16);
        let want = 1.0 / (1.0 + 2f64.ln());
        assert!((eval_x(2, (-1.0f64).exp()).unwrap() - want).abs() < 1e-15);
        assert_eq!(prod_x(3, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors() {
        assert!(eval_x(1, 0.0).is_err());
        assert!(eval_x(1, 1.5).is_err());
        assert!(eval_x(0, 0.5).is_err());
        assert!(eta(1.0).is_err());
    }

    #[test]
    fn tail_enclosure_is_sub_and_super_solution() {
        // F_hi(e) >= (1-g)^q (1 + F_hi(g)) and the reverse for F_lo.
        for q in [1u32, 2] {
            for i in 0..400 {
                let e = 0.02 + 0.08 * i as f64 / 399.0;
                let l = -(-e).ln_1p();
                let g = l / (1.0 + l);
                let (lo, hi) = tail_enclosure(q, e);
                let (lo_g, hi_g) = tail_enclosure(q, g);
                let f = (1.0 - g).powi(q as i32);
                assert!(hi > f * (1.0 + hi_g), "super fails q={q} e={e}");
                assert!(lo < f * (1.0 + lo_g), "sub fails q={q} e={e}");
            }
        }
    }

    #[test]
    fn neg_log_entry_points_agree() {
        for &t in &[1e-9, 1e-3, 0.2, 0.9] {
            let l = -f64::ln(t);
            assert!((prod_x_neg_log(3, l).unwrap() - prod_x(3, t).unwrap()).abs() < 1e-15);
            assert!((eta_neg_log(l).unwrap() - eta_mid(t).unwrap()).abs() < 1e-14);
            assert!((big_b_neg_log(l).unwrap().value - big_b(t).unwrap().value).abs() < 1e-14);
        }
        // t = e^{-2000} underflows, the log form does not.
        assert!((prod_x_neg_log(1, 2000.0).unwrap() - 1.0 / 2001.0).abs() < 1e-18);
    }
}
