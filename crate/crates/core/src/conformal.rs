//! Kelvin transform and the maps `S`, `T` between the half-space, the unit
//! ball and its exterior.
//!
//! `S(v) = (2v', 1 - |v|^2) / |v + e_n|^2`, `T = K S` with `K` the Kelvin
//! transform, so `T(v) = (2v', 1 - |v|^2) / |v - e_n|^2`.

use crate::error::{LabError, Result};
use crate::quad::GaussRule;
use crate::types::PointN;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Points closer than this to an excluded point raise a domain error.
pub const SINGULAR_GUARD: f64 = 1e-12;

/// Finite-difference step for numerical Jacobians.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: PointN,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Kelvin,
    S,
    T,
}

fn check_dim(x: &PointN) -> Result<()> {
    if x.dim() < 2 {
        return Err(LabError::domain("points need dimension n >= 2"));
    }
    Ok(())
}

fn guard(x: &PointN, c: f64, name: &str) -> Result<f64> {
    let d2 = x.shift_axis(-c).norm_sq();
    if d2.sqrt() <= SINGULAR_GUARD {
        return Err(LabError::domain(format!("point is at the excluded point {name}")));
    }
    Ok(d2)
}

/// `x / |x|^2`.
pub fn kelvin(x: &PointN) -> Result<PointN> {
    check_dim(x)?;
    let r2 = guard(x, 0.0, "0")?;
    Ok(x.scale(1.0 / r2))
}

fn stereo(v: &PointN, d2: f64) -> PointN {
    let n = v.dim();
    let mut out = v.scale(2.0 / d2);
    out.coords[n - 1] = (1.0 - v.norm_sq()) / d2;
    out
}

/// Half-space to unit ball; an involution.
pub fn map_s(v: &PointN) -> Result<PointN> {
    check_dim(v)?;
    let d2 = guard(v, -1.0, "-e_n")?;
    Ok(stereo(v, d2))
}

/// Half-space to the exterior of the unit ball.
pub fn map_t(v: &PointN) -> Result<PointN> {
    check_dim(v)?;
    guard(v, -1.0, "-e_n")?;
    let d2 = guard(v, 1.0, "e_n")?;
    Ok(stereo(v, d2))
}

/// `T^{-1}(x) = (2x', |x|^2 - 1) / (|x'|^2 + (x_n + 1)^2)`.
pub fn inv_t(x: &PointN) -> Result<PointN> {
    check_dim(x)?;
    let d2 = guard(x, -1.0, "-e_n")?;
    let n = x.dim();
    let mut out = x.scale(2.0 / d2);
    out.coords[n - 1] = (x.norm_sq() - 1.0) / d2;
    Ok(out)
}

/// `|det DT(v)| = 2^n / |v - e_n|^{2n}`.
pub fn jac_t(v: &PointN) -> Result<f64> {
    check_dim(v)?;
    let d2 = guard(v, 1.0, "e_n")?;
    let n = v.dim() as i32;
    Ok(2f64.powi(n) / d2.powi(n))
}

/// `|det DS(v)| = 2^n / |v + e_n|^{2n}`.
pub fn jac_s(v: &PointN) -> Result<f64> {
    check_dim(v)?;
    let d2 = guard(v, -1.0, "-e_n")?;
    let n = v.dim() as i32;
    Ok(2f64.powi(n) / d2.powi(n))
}

/// `|det DK(x)| = |x|^{-2n}`.
pub fn jac_kelvin(x: &PointN) -> Result<f64> {
    check_dim(x)?;
    let r2 = guard(x, 0.0, "0")?;
    Ok(r2.powi(-(x.dim() as i32)))
}

/// `T(B(r)) = B(((1 + r^2)/(1 - r^2)) e_n, 2r/(1 - r^2))`.
pub fn image_ball(n: usize, r: f64) -> Result<BallSpec> {
    if !(r > 0.0 && r < 1.0) {
        return Err(LabError::domain(format!("radius r = {r} must lie in (0, 1)")));
    }
    let q = 1.0 - r * r;
    Ok(BallSpec { center: PointN::axis(n, (1.0 + r * r) / q), radius: 2.0 * r / q })
}

/// `sigma_n = 1 / (sqrt(75) n^2)`.
pub fn sigma_n(n: usize) -> f64 {
    1.0 / (75f64.sqrt() * (n * n) as f64)
}

pub fn apply(kind: MapKind, v: &PointN) -> Result<PointN> {
    match kind {
        MapKind::Kelvin => kelvin(v),
        MapKind::S => map_s(v),
        MapKind::T => map_t(v),
    }
}

pub fn jacobian_det(kind: MapKind, v: &PointN) -> Result<f64> {
    match kind {
        MapKind::Kelvin => jac_kelvin(v),
        MapKind::S => jac_s(v),
        MapKind::T => jac_t(v),
    }
}

/// Exact Jacobian matrix, row-major: `out[i * n + j] = d M_i / d v_j`.
pub fn jacobian_matrix(kind: MapKind, v: &PointN) -> Result<Vec<f64>> {
    let n = v.dim();
    let mut out = vec![0.0; n * n];
    match kind {
        MapKind::Kelvin => {
            let r2 = guard(v, 0.0, "0")?;
            for i in 0..n {
                for j in 0..n {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    out[i * n + j] = delta / r2 - 2.0 * v.coords[i] * v.coords[j] / (r2 * r2);
                }
            }
        }
        MapKind::S | MapKind::T => {
            let c = if kind == MapKind::S { -1.0 } else { 1.0 };
            if kind == MapKind::T {
                guard(v, -1.0, "-e_n")?;
            }
            let d2 = guard(v, c, if c < 0.0 { "-e_n" } else { "e_n" })?;
            let w = v.shift_axis(-c);
            let mut num = v.scale(2.0);
            num.coords[n - 1] = 1.0 - v.norm_sq();
            for i in 0..n {
                for j in 0..n {
                    let dn = if i < n - 1 {
                        if i == j {
                            2.0
                        } else {
                            0.0
                        }
                    } else {
                        -2.0 * v.coords[j]
                    };
                    out[i * n + j] = dn / d2 - num.coords[i] * 2.0 * w.coords[j] / (d2 * d2);
                }
            }
        }
    }
    Ok(out)
}

/// Determinant by LU with partial pivoting; `a` is row-major `n x n`.
pub fn determinant(mut a: Vec<f64>, n: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| a[p * n + col].abs().total_cmp(&a[q * n + col].abs())).unwrap();
        if a[piv * n + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            det = -det;
        }
        let d = a[col * n + col];
        det *= d;
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
        }
    }
    det
}

/// Central-difference Jacobian with one Richardson level.
pub fn fd_jacobian(kind: MapKind, v: &PointN, h: f64) -> Result<Vec<f64>> {
    let n = v.dim();
    let col = |j: usize, h: f64| -> Result<Vec<f64>> {
        let mut p = v.clone();
        let mut m = v.clone();
        p.coords[j] += h;
        m.coords[j] -= h;
        let (fp, fm) = (apply(kind, &p)?, apply(kind, &m)?);
        Ok((0..n).map(|i| (fp.coords[i] - fm.coords[i]) / (2.0 * h)).collect())
    };
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        let c1 = col(j, h)?;
        let c2 = col(j, 0.5 * h)?;
        for i in 0..n {
            out[i * n + j] = (4.0 * c2[i] - c1[i]) / 3.0;
        }
    }
    Ok(out)
}

/// Weight `|J(v)|^{(n-2)/(2n)}` multiplying the pulled-back function.
fn pullback_weight(kind: MapKind, v: &PointN) -> Result<(f64, Vec<f64>)> {
    let n = v.dim();
    let e = n as f64 - 2.0;
    let (w, diff, d2) = match kind {
        MapKind::Kelvin => {
            let r2 = guard(v, 0.0, "0")?;
            (r2.powf(-0.5 * e), v.clone(), r2)
        }
        MapKind::S => {
            let d2 = guard(v, -1.0, "-e_n")?;
            ((2.0 / d2).powf(0.5 * e), v.shift_axis(1.0), d2)
        }
        MapKind::T => {
            let d2 = guard(v, 1.0, "e_n")?;
            ((2.0 / d2).powf(0.5 * e), v.shift_axis(-1.0), d2)
        }
    };
    let grad = diff.coords.iter().map(|c| -e * w * c / d2).collect();
    Ok((w, grad))
}

/// A smooth compactly supported function on the image side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ImageFunction {
    Zero,
    /// `psi(|x - center|)` supported in `a < |x - center| < b`, or in the
    /// ball of radius `b` when `a = 0`.
    Radial {
        center: PointN,
        a: f64,
        b: f64,
        power: i32,
    },
    /// Product of one-dimensional bumps `(1 - s^2)^power`.
    Tensor {
        center: PointN,
        half_widths: Vec<f64>,
        power: i32,
    },
}

fn bump1(s: f64, p: i32) -> (f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let q = 1.0 - s * s;
    (q.powi(p), -2.0 * p as f64 * s * q.powi(p - 1))
}

impl ImageFunction {
    pub fn value_grad(&self, x: &PointN) -> (f64, Vec<f64>) {
        let n = x.dim();
        match self {
            ImageFunction::Zero => (0.0, vec![0.0; n]),
            ImageFunction::Radial { center, a, b, power } => {
                let r = x.dist(center);
                let (psi, dpsi) = if *a == 0.0 {
                    let (v, d) = bump1(r / b, *power);
                    (v, d / b)
                } else {
                    let half = 0.5 * (b - a);
                    let (v, d) = bump1((r - 0.5 * (a + b)) / half, *power);
                    (v, d / half)
                };
                if psi == 0.0 && dpsi == 0.0 || r == 0.0 {
                    return (psi, vec![0.0; n]);
                }
                let g = (0..n).map(|i| dpsi * (x.coords[i] - center.coords[i]) / r).collect();
                (psi, g)
            }
            ImageFunction::Tensor { center, half_widths, power } => {
                let parts: Vec<(f64, f64)> = (0..n)
                    .map(|i| {
                        let h = half_widths[i];
                        let (v, d) = bump1((x.coords[i] - center.coords[i]) / h, *power);
                        (v, d / h)
                    })
                    .collect();
                let val: f64 = parts.iter().map(|p| p.0).product();
                let g = (0..n)
                    .map(|i| parts.iter().enumerate().map(|(j, p)| if i == j { p.1 } else { p.0 }).product())
                    .collect();
                (val, g)
            }
        }
    }

    /// A ball containing the support, if any.
    pub fn support(&self) -> Option<BallSpec> {
        match self {
            ImageFunction::Zero => None,
            ImageFunction::Radial { center, b, .. } => Some(BallSpec { center: center.clone(), radius: *b }),
            ImageFunction::Tensor { center, half_widths, .. } => {
                Some(BallSpec { center: center.clone(), radius: half_widths.iter().map(|h| h * h).sum::<f64>().sqrt() })
            }
        }
    }
}

/// Inverse of each map (all three are involutions up to `T^{-1}`).
pub fn apply_inverse(kind: MapKind, x: &PointN) -> Result<PointN> {
    match kind {
        MapKind::Kelvin => kelvin(x),
        MapKind::S => map_s(x),
        MapKind::T => inv_t(x),
    }
}

fn pole_of_inverse(kind: MapKind, n: usize) -> PointN {
    match kind {
        MapKind::Kelvin => PointN::zeros(n),
        MapKind::S | MapKind::T => PointN::axis(n, -1.0),
    }
}

/// Preimage of a ball under the map; Möbius maps send balls to balls, and
/// the preimage diameter lies on the line through the inverse map's pole.
pub fn preimage_ball(kind: MapKind, ball: &BallSpec) -> Result<BallSpec> {
    let n = ball.center.dim();
    let pole = pole_of_inverse(kind, n);
    let dist = ball.center.dist(&pole);
    if dist <= ball.radius * (1.0 + 1e-9) {
        return Err(LabError::SupportViolation("support contains the pole of the inverse map".into()));
    }
    let u: Vec<f64> = (0..n).map(|i| (ball.center.coords[i] - pole.coords[i]) / dist).collect();
    let a = PointN::new((0..n).map(|i| ball.center.coords[i] - ball.radius * u[i]).collect());
    let b = PointN::new((0..n).map(|i| ball.center.coords[i] + ball.radius * u[i]).collect());
    let (pa, pb) = (apply_inverse(kind, &a)?, apply_inverse(kind, &b)?);
    let center = PointN::new((0..n).map(|i| 0.5 * (pa.coords[i] + pb.coords[i])).collect());
    Ok(BallSpec { radius: 0.5 * pa.dist(&pb), center })
}

/// Tensor-product composite Gauss–Legendre rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub panels: usize,
    pub order: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { panels: 10, order: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyPair {
    pub source: f64,
    pub image: f64,
}

impl EnergyPair {
    pub fn rel_gap(&self) -> f64 {
        if self.image == 0.0 {
            self.source.abs()
        } else {
            ((self.source - self.image) / self.image).abs()
        }
    }
}

/// Dirichlet energies of `G = F(M v) |J(v)|^{(n-2)/(2n)}` on the source side
/// and of `F` on the image side, the latter through the change of variables
/// `x = M(v)` on the same quadrature nodes.
///
/// For `S` and `T` the preimage of the support must lie in the upper
/// half-space, i.e. `F` must vanish near the image of its boundary.
pub fn pullback_energy_pair(f: &ImageFunction, kind: MapKind, n: usize, quad: QuadSpec) -> Result<EnergyPair> {
    let Some(support) = f.support() else {
        return Ok(EnergyPair { source: 0.0, image: 0.0 });
    };
    if support.center.dim() != n {
        return Err(LabError::invalid("n", "does not match the function's dimension"));
    }
    let pre = preimage_ball(kind, &support)?;
    if matches!(kind, MapKind::S | MapKind::T) && pre.center.last() - pre.radius <= 0.0 {
        return Err(LabError::SupportViolation("pulled-back support leaves the upper half-space".into()));
    }
    let rule = GaussRule::new(quad.order);
    let m = quad.panels * quad.order;
    let h = 2.0 * pre.radius / quad.panels as f64;
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for p in 0..quad.panels {
        let lo = -pre.radius + h * p as f64;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            nodes.push(lo + 0.5 * h * (x + 1.0));
            weights.push(0.5 * h * w);
        }
    }
    let mut idx = vec![0usize; n];
    let mut es = 0.0;
    let mut ei = 0.0;
    let mut v = PointN::zeros(n);
    let r2max = pre.radius * pre.radius;
    loop {
        let mut w = 1.0;
        let mut off2 = 0.0;
        for k in 0..n {
            let o = nodes[idx[k]];
            off2 += o * o;
            v.coords[k] = pre.center.coords[k] + o;
            w *= weights[idx[k]];
        }
        if off2 < r2max {
            let x = apply(kind, &v)?;
            let (fv, gf) = f.value_grad(&x);
            if fv != 0.0 || gf.iter().any(|g| *g != 0.0) {
                let jm = jacobian_matrix(kind, &v)?;
                let jd = jacobian_det(kind, &v)?;
                let (pw, gpw) = pullback_weight(kind, &v)?;
                let mut gg = 0.0;
                for j in 0..n {
                    let mut s = 0.0;
                    for i in 0..n {
                        s += jm[i * n + j] * gf[i];
                    }
                    let c = pw * s + fv * gpw[j];
                    gg += c * c;
                }
                let gf2: f64 = gf.iter().map(|g| g * g).sum();
                es += w * gg;
                ei += w * gf2 * jd;
            }
        }
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == n {
                return Ok(EnergyPair { source: es, image: ei });
            }
        }
    }
}

/// Worst-case errors of the map identities on random samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalReport {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub kelvin_involution: f64,
    pub s_involution: f64,
    pub s_norm_identity: f64,
    pub t_inverse_roundtrip: f64,
    pub t_inverse_norm_identity: f64,
    pub t_exterior_mismatches: usize,
    pub jacobian_t_vs_fd: f64,
    pub jacobian_s_vs_fd: f64,
    pub image_ball_radius: f64,
}

impl ConformalReport {
    pub fn passes(&self) -> bool {
        self.kelvin_involution < 1e-12
            && self.s_involution < 1e-12
            && self.s_norm_identity < 1e-12
            && self.t_inverse_roundtrip < 1e-10
            && self.t_inverse_norm_identity < 1e-12
            && self.t_exterior_mismatches == 0
            && self.jacobian_t_vs_fd < 1e-6
            && self.jacobian_s_vs_fd < 1e-6
            && self.image_ball_radius < 1e-10
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn rel_vec(a: &PointN, b: &PointN) -> f64 {
    a.dist(b) / b.norm().max(1e-300)
}

/// Samples `v` in the upper half-space with `0.05 < v_n < 3` and
/// `|v'_i| < 2`, away from `e_n` by at least 0.2.
pub fn sample_upper(rng: &mut impl Rng, n: usize) -> PointN {
    loop {
        let mut c: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-2.0..2.0)).collect();
        c.push(rng.random_range(0.05..3.0));
        let p = PointN::new(c);
        if p.shift_axis(-1.0).norm() > 0.2 {
            return p;
        }
    }
}

/// Randomized check of every identity of this module.
pub fn conformal_suite(n: usize, samples: usize, seed: u64) -> Result<ConformalReport> {
    if n < 2 {
        return Err(LabError::invalid("n", "must be at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ConformalReport {
        n,
        samples,
        seed,
        kelvin_involution: 0.0,
        s_involution: 0.0,
        s_norm_identity: 0.0,
        t_inverse_roundtrip: 0.0,
        t_inverse_norm_identity: 0.0,
        t_exterior_mismatches: 0,
        jacobian_t_vs_fd: 0.0,
        jacobian_s_vs_fd: 0.0,
        image_ball_radius: 0.0,
    };
    for _ in 0..samples {
        let v = sample_upper(&mut rng, n);
        let x = PointN::new((0..n).map(|_| rng.random_range(-3.0..3.0)).collect());
        if x.norm() > 1e-3 {
            rep.kelvin_involution = rep.kelvin_involution.max(rel_vec(&kelvin(&kelvin(&x)?)?, &x));
        }
        rep.s_involution = rep.s_involution.max(rel_vec(&map_s(&map_s(&v)?)?, &v));
        let sv = map_s(&v)?;
        let want = v.shift_axis(-1.0).norm() / v.shift_axis(1.0).norm();
        rep.s_norm_identity = rep.s_norm_identity.max(rel(sv.norm(), want));
        let tv = map_t(&v)?;
        rep.t_inverse_roundtrip = rep.t_inverse_roundtrip.max(rel_vec(&inv_t(&tv)?, &v));
        if (tv.norm() > 1.0) != (v.last() > 0.0) {
            rep.t_exterior_mismatches += 1;
        }
        // Lower half-space points must land inside the ball.
        let mut vl = v.clone();
        let nn = vl.dim();
        vl.coords[nn - 1] = -vl.coords[nn - 1];
        if vl.shift_axis(1.0).norm() > 0.2 && map_t(&vl)?.norm() >= 1.0 {
            rep.t_exterior_mismatches += 1;
        }
        if x.shift_axis(1.0).norm() > 1e-3 {
            let want = x.shift_axis(-1.0).norm() / x.shift_axis(1.0).norm();
            rep.t_inverse_norm_identity = rep.t_inverse_norm_identity.max(rel(inv_t(&x)?.norm(), want));
        }
        let fd_t = determinant(fd_jacobian(MapKind::T, &v, FD_STEP)?, n).abs();
        rep.jacobian_t_vs_fd = rep.jacobian_t_vs_fd.max(rel(fd_t, jac_t(&v)?));
        let fd_s = determinant(fd_jacobian(MapKind::S, &v, FD_STEP)?, n).abs();
        rep.jacobian_s_vs_fd = rep.jacobian_s_vs_fd.max(rel(fd_s, jac_s(&v)?));
        // Image of the sphere |v| = r under T.
        let r = rng.random_range(0.05..0.95);
        let ball = image_ball(n, r)?;
        let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dn = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if dn > 1e-3 {
            let p = PointN::new(dir.iter().map(|d| r * d / dn).collect());
            if p.shift_axis(-1.0).norm() > 1e-6 {
                let q = map_t(&p)?;
                rep.image_ball_radius = rep.image_ball_radius.max(rel(q.dist(&ball.center), ball.radius));
            }
        }
    }
    Ok(rep)
}

/// Built-in pullback problems: radial shells for `n = 3` and tensor bumps for
/// `n >= 4`, pushed through each map.
pub fn standard_pullbacks(n: usize) -> Vec<(MapKind, ImageFunction)> {
    let c_ext = PointN::axis(n, 1.6);
    let c_ball = PointN::axis(n, 0.3);
    let c_kel = PointN::axis(n, 1.7);
    if n == 3 {
        vec![
            (MapKind::T, ImageFunction::Radial { center: c_ext, a: 0.1, b: 0.45, power: 6 }),
            (MapKind::S, ImageFunction::Radial { center: c_ball, a: 0.05, b: 0.4, power: 6 }),
            (MapKind::Kelvin, ImageFunction::Radial { center: c_kel, a: 0.1, b: 0.5, power: 6 }),
        ]
    } else {
        vec![
            (MapKind::T, ImageFunction::Tensor { center: c_ext, half_widths: vec![0.25; n], power: 6 }),
            (MapKind::S, ImageFunction::Tensor { center: c_ball, half_widths: vec![0.2; n], power: 6 }),
            (MapKind::Kelvin, ImageFunction::Tensor { center: c_kel, half_widths: vec![0.25; n], power: 6 }),
        ]
    }
}
