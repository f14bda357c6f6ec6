//! Sphere areas and the Sobolev constant.

use statrs::function::gamma::{gamma, ln_gamma};

/// Surface area of the unit sphere `S^k` in `R^{k+1}`: `2 pi^{(k+1)/2} / Gamma((k+1)/2)`.
///
/// `sphere_area(0) = 2` counts the two points of `S^0`.
pub fn sphere_area(k: usize) -> f64 {
    let h = 0.5 * (k as f64 + 1.0);
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

/// `S_n = pi n (n - 2) (Gamma(n/2) / Gamma(n))^{2/n}` for `n >= 3`.
pub fn sobolev_constant(n: usize) -> f64 {
    let nf = n as f64;
    let ratio = (ln_gamma(0.5 * nf) - ln_gamma(nf)).exp();
    std::f64::consts::PI * nf * (nf - 2.0) * ratio.powf(2.0 / nf)
}
