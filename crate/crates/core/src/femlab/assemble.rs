//! Linear finite elements for axisymmetric quadratic forms.
//!
//! For `u(x) = U(s, z)` with `s = |x'|`, `z = x_n`, every integral over `R^n`
//! becomes `omega_{n-2} ∬ (...) s^{n-2} ds dz` over the meridian half-plane.

use super::mesh::{dist, tri_area, MeridianMesh};
use super::sparse::CsrMatrix;
use crate::error::{LabError, Result};
use crate::quad::gauss_legendre;
use crate::special::sphere_area;
use crate::speclog::x1;

/// A mass weight on the meridian half-plane, possibly singular at one point.
pub trait MeridianWeight {
    fn value(&self, s: f64, z: f64) -> f64;
    fn pole(&self) -> Option<[f64; 2]>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Unit,
    /// `1 / |x - z0 e_n|^2`.
    Hardy {
        z0: f64,
    },
    /// `|x - z0 e_n|^{-exponent}`.
    Power {
        z0: f64,
        exponent: f64,
    },
    /// `X_1(|x - z0 e_n| / d)^alpha / |x - z0 e_n|^2`.
    LogHardy {
        z0: f64,
        alpha: f64,
        d: f64,
    },
}

impl MeridianWeight for Weight {
    fn value(&self, s: f64, z: f64) -> f64 {
        match *self {
            Weight::Unit => 1.0,
            Weight::Hardy { z0 } => 1.0 / ((z - z0).powi(2) + s * s),
            Weight::Power { z0, exponent } => ((z - z0).powi(2) + s * s).powf(-0.5 * exponent),
            Weight::LogHardy { z0, alpha, d } => {
                let r2 = (z - z0).powi(2) + s * s;
                x1(r2.sqrt() / d).powf(alpha) / r2
            }
        }
    }

    fn pole(&self) -> Option<[f64; 2]> {
        match *self {
            Weight::Unit => None,
            Weight::Hardy { z0 } | Weight::Power { z0, .. } | Weight::LogHardy { z0, .. } => Some([0.0, z0]),
        }
    }
}

/// Closure-backed weight.
pub struct FnWeight<F: Fn(f64, f64) -> f64> {
    pub f: F,
    pub pole: Option<[f64; 2]>,
}

impl<F: Fn(f64, f64) -> f64> MeridianWeight for FnWeight<F> {
    fn value(&self, s: f64, z: f64) -> f64 {
        (self.f)(s, z)
    }

    fn pole(&self) -> Option<[f64; 2]> {
        self.pole
    }
}

/// Stiffness and weighted mass restricted to the free vertices.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub k: CsrMatrix,
    pub m: CsrMatrix,
    /// `free[d]` is the mesh vertex of dof `d`.
    pub free: Vec<usize>,
    /// Dof of each vertex, `None` on Dirichlet vertices.
    pub dof: Vec<Option<usize>>,
    pub n: usize,
}

impl SparseSystem {
    pub fn dofs(&self) -> usize {
        self.free.len()
    }

    /// Restrict a vertex-indexed vector to dofs.
    pub fn restrict(&self, u: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&v| u[v]).collect()
    }

    /// Extend a dof vector by zeros on Dirichlet vertices.
    pub fn extend(&self, x: &[f64]) -> Vec<f64> {
        self.dof.iter().map(|d| d.map_or(0.0, |d| x[d])).collect()
    }
}

/// Collapsed (Duffy) product rule on the reference square, `(xi, t, weight)`.
/// The map from vertex `A` is `A + xi (B - A) + xi t (C - B)` with Jacobian
/// `2 |T| xi`, which cancels a `1/r` factor at `A`.
#[derive(Debug, Clone)]
struct DuffyRule {
    pts: Vec<(f64, f64, f64)>,
}

impl DuffyRule {
    fn new(radial: usize, angular: usize) -> Self {
        let (xr, wr) = gauss_legendre(radial);
        let (xa, wa) = gauss_legendre(angular);
        let mut pts = Vec::with_capacity(radial * angular);
        for (i, &x) in xr.iter().enumerate() {
            for (j, &t) in xa.iter().enumerate() {
                let (xi, tt) = (0.5 * (x + 1.0), 0.5 * (t + 1.0));
                pts.push((xi, tt, 0.25 * wr[i] * wa[j] * xi));
            }
        }
        DuffyRule { pts }
    }
}

struct Rules {
    far: DuffyRule,
    near: DuffyRule,
}

/// Split depth for elements close to, but not touching, the pole.
const MAX_SPLIT: usize = 10;

/// `∫_T s^p dA` exactly, via the complete homogeneous polynomial of the
/// vertex values.
fn int_s_power(area: f64, s: [f64; 3], p: usize) -> f64 {
    let mut h = 0.0;
    for i in 0..=p {
        for j in 0..=(p - i) {
            let k = p - i - j;
            h += s[0].powi(i as i32) * s[1].powi(j as i32) * s[2].powi(k as i32);
        }
    }
    2.0 * area * h / ((p + 1) * (p + 2)) as f64
}

/// Gradients of the barycentric coordinates.
fn bary_grads(p: [[f64; 2]; 3], area: f64) -> [[f64; 2]; 3] {
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (b, c) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        g[i] = [(b[1] - c[1]) / (2.0 * area), (c[0] - b[0]) / (2.0 * area)];
    }
    g
}

struct Element {
    p: [[f64; 2]; 3],
    grads: [[f64; 2]; 3],
}

impl Element {
    fn bary(&self, x: [f64; 2]) -> [f64; 3] {
        let d = [x[0] - self.p[0][0], x[1] - self.p[0][1]];
        let l1 = self.grads[1][0] * d[0] + self.grads[1][1] * d[1];
        let l2 = self.grads[2][0] * d[0] + self.grads[2][1] * d[1];
        [1.0 - l1 - l2, l1, l2]
    }
}

/// Accumulate `∫_sub phi_i phi_j w s^p` into `acc`, with the Duffy apex at
/// vertex `apex` of the sub-triangle.
fn duffy_accumulate(
    el: &Element,
    sub: [[f64; 2]; 3],
    apex: usize,
    rule: &DuffyRule,
    weight: &dyn MeridianWeight,
    p: usize,
    acc: &mut [[f64; 3]; 3],
) -> Result<()> {
    let a = sub[apex];
    let b = sub[(apex + 1) % 3];
    let c = sub[(apex + 2) % 3];
    let area2 = 2.0 * tri_area(sub[0], sub[1], sub[2]).abs();
    for &(xi, t, w) in &rule.pts {
        let x =
            [a[0] + xi * (b[0] - a[0]) + xi * t * (c[0] - b[0]), a[1] + xi * (b[1] - a[1]) + xi * t * (c[1] - b[1])];
        let wv = weight.value(x[0], x[1]);
        if !wv.is_finite() {
            return Err(LabError::Quadrature(format!("weight is not finite at ({}, {})", x[0], x[1])));
        }
        let f = w * area2 * wv * x[0].max(0.0).powi(p as i32);
        let l = el.bary(x);
        for i in 0..3 {
            for j in i..3 {
                acc[i][j] += f * l[i] * l[j];
            }
        }
    }
    Ok(())
}

fn diameter(p: &[[f64; 2]; 3]) -> f64 {
    dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0]))
}

fn pole_distance(p: &[[f64; 2]; 3], pole: [f64; 2]) -> (f64, usize) {
    (0..3).map(|i| (dist(p[i], pole), i)).fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
}

fn mass_recursive(
    el: &Element,
    sub: [[f64; 2]; 3],
    depth: usize,
    rules: &Rules,
    weight: &dyn MeridianWeight,
    p: usize,
    acc: &mut [[f64; 3]; 3],
) -> Result<()> {
    let Some(pole) = weight.pole() else {
        return duffy_accumulate(el, sub, 0, &rules.far, weight, p, acc);
    };
    let diam = diameter(&sub);
    let (d, apex) = pole_distance(&sub, pole);
    if d <= 1e-14 * diam {
        // Touching: the apex is the pole and the Duffy Jacobian absorbs the
        // singularity of the weight against the vanishing basis functions.
        return duffy_accumulate(el, sub, apex, &rules.near, weight, p, acc);
    }
    if d < 2.0 * diam && depth < MAX_SPLIT {
        let m = |a: [f64; 2], b: [f64; 2]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let (ab, bc, ca) = (m(sub[0], sub[1]), m(sub[1], sub[2]), m(sub[2], sub[0]));
        for child in [[sub[0], ab, ca], [ab, sub[1], bc], [ca, bc, sub[2]], [ab, bc, ca]] {
            mass_recursive(el, child, depth + 1, rules, weight, p, acc)?;
        }
        return Ok(());
    }
    let rule = if d < 4.0 * diam { &rules.near } else { &rules.far };
    duffy_accumulate(el, sub, apex, rule, weight, p, acc)
}

type Mat3 = [[f64; 3]; 3];

/// Element stiffness and mass (upper triangles, `omega` not applied).
fn element_matrices(p: [[f64; 2]; 3], n: usize, weight: &dyn MeridianWeight, rules: &Rules) -> Result<(Mat3, Mat3)> {
    let area = tri_area(p[0], p[1], p[2]);
    let grads = bary_grads(p, area);
    let pw = n - 2;
    let is = int_s_power(area, [p[0][0], p[1][0], p[2][0]], pw);
    let mut ke = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            ke[i][j] = is * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
        }
    }
    let el = Element { p, grads };
    let mut me = [[0.0; 3]; 3];
    mass_recursive(&el, p, 0, rules, weight, pw, &mut me)?;
    Ok((ke, me))
}

fn rules() -> Rules {
    Rules { far: DuffyRule::new(6, 6), near: DuffyRule::new(8, 16) }
}

/// Assemble on free vertices (Dirichlet vertices removed).
pub fn assemble(mesh: &MeridianMesh, n: usize, weight: &dyn MeridianWeight) -> Result<SparseSystem> {
    assemble_with(mesh, n, weight, true)
}

/// Assemble on every vertex, ignoring Dirichlet tags.
pub fn assemble_full(mesh: &MeridianMesh, n: usize, weight: &dyn MeridianWeight) -> Result<SparseSystem> {
    assemble_with(mesh, n, weight, false)
}

fn assemble_with(mesh: &MeridianMesh, n: usize, weight: &dyn MeridianWeight, constrain: bool) -> Result<SparseSystem> {
    if n < 2 {
        return Err(LabError::invalid("n", format!("dimension {n} must be at least 2")));
    }
    let mut dof = vec![None; mesh.vertices.len()];
    let mut free = Vec::new();
    for (v, &d) in mesh.dirichlet.iter().enumerate() {
        if !(constrain && d) {
            dof[v] = Some(free.len());
            free.push(v);
        }
    }
    if let Some(pole) = weight.pole() {
        for &v in &free {
            if dist(mesh.vertices[v], pole) == 0.0 {
                return Err(LabError::Quadrature(format!("weight is singular at the free vertex {v}")));
            }
        }
    }
    let omega = sphere_area(n - 2);
    let rules = rules();
    let mut kt = Vec::with_capacity(9 * mesh.triangles.len());
    let mut mt = Vec::with_capacity(9 * mesh.triangles.len());
    for t in &mesh.triangles {
        let p = [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]];
        let (ke, me) = element_matrices(p, n, weight, &rules)?;
        for i in 0..3 {
            let Some(di) = dof[t[i]] else { continue };
            for j in 0..3 {
                let Some(dj) = dof[t[j]] else { continue };
                let (a, b) = (i.min(j), i.max(j));
                kt.push((di, dj, omega * ke[a][b]));
                mt.push((di, dj, omega * me[a][b]));
            }
        }
    }
    let nd = free.len();
    Ok(SparseSystem { k: CsrMatrix::from_triplets(nd, kt), m: CsrMatrix::from_triplets(nd, mt), free, dof, n })
}

fn split_mass(
    p: [[f64; 2]; 3],
    splits: usize,
    rules: &Rules,
    weight: &dyn MeridianWeight,
    pw: usize,
) -> Result<[[f64; 3]; 3]> {
    let area = tri_area(p[0], p[1], p[2]);
    let el = Element { p, grads: bary_grads(p, area) };
    let mut subs = vec![p];
    for _ in 0..splits {
        let mut next = Vec::with_capacity(4 * subs.len());
        let m = |a: [f64; 2], b: [f64; 2]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        for s in subs {
            let (ab, bc, ca) = (m(s[0], s[1]), m(s[1], s[2]), m(s[2], s[0]));
            next.extend([[s[0], ab, ca], [ab, s[1], bc], [ca, bc, s[2]], [ab, bc, ca]]);
        }
        subs = next;
    }
    let mut me = [[0.0; 3]; 3];
    for s in subs {
        mass_recursive(&el, s, 0, rules, weight, pw, &mut me)?;
    }
    Ok(me)
}

/// `omega_{n-2} ∬ U^2 w s^{n-2}` for a vertex-indexed piecewise-linear `U`,
/// with every element split `splits` extra times. Used to estimate the
/// quadrature error of an assembled mass matrix.
pub fn weighted_l2(
    mesh: &MeridianMesh,
    n: usize,
    weight: &dyn MeridianWeight,
    u: &[f64],
    splits: usize,
) -> Result<f64> {
    let rules = rules();
    let mut total = 0.0;
    for t in &mesh.triangles {
        let p = [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]];
        let me = split_mass(p, splits, &rules, weight, n - 2)?;
        let uv = [u[t[0]], u[t[1]], u[t[2]]];
        for i in 0..3 {
            for j in 0..3 {
                let (a, b) = (i.min(j), i.max(j));
                total += me[a][b] * uv[i] * uv[j];
            }
        }
    }
    Ok(sphere_area(n - 2) * total)
}

/// Weighted mass matrix on the free dofs of `sys`, every element split
/// `splits` extra times. With `splits = 0` this equals `assemble(..).m`.
pub fn mass_matrix(
    mesh: &MeridianMesh,
    sys: &SparseSystem,
    weight: &dyn MeridianWeight,
    splits: usize,
) -> Result<CsrMatrix> {
    let n = sys.n;
    let rules = rules();
    let omega = sphere_area(n - 2);
    let mut mt = Vec::with_capacity(9 * mesh.triangles.len());
    for t in &mesh.triangles {
        let p = [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]];
        let me = split_mass(p, splits, &rules, weight, n - 2)?;
        for i in 0..3 {
            let Some(di) = sys.dof[t[i]] else { continue };
            for (j, &tj) in t.iter().enumerate() {
                let Some(dj) = sys.dof[tj] else { continue };
                let (a, b) = (i.min(j), i.max(j));
                mt.push((di, dj, omega * me[a][b]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(sys.dofs(), mt))
}

/// `omega_{n-2} ∬ f(s, z, U) s^{n-2}` for a vertex-indexed piecewise-linear
/// `U` and a bounded integrand, with a collapsed Gauss rule of `order`
/// points per direction on every element.
pub fn integrate_nodal(
    mesh: &MeridianMesh,
    n: usize,
    u: &[f64],
    f: &dyn Fn(f64, f64, f64) -> f64,
    order: usize,
) -> f64 {
    let rule = DuffyRule::new(order, order);
    let mut total = 0.0;
    for t in &mesh.triangles {
        let p = [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]];
        let uv = [u[t[0]], u[t[1]], u[t[2]]];
        let area2 = 2.0 * tri_area(p[0], p[1], p[2]).abs();
        for &(xi, tt, w) in &rule.pts {
            // Barycentric coordinates of the collapsed map from vertex 0.
            let l = [1.0 - xi, xi * (1.0 - tt), xi * tt];
            let s = l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0];
            let z = l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1];
            let uval = l[0] * uv[0] + l[1] * uv[1] + l[2] * uv[2];
            total += w * area2 * f(s, z, uval) * s.max(0.0).powi(n as i32 - 2);
        }
    }
    sphere_area(n - 2) * total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_power_integral_matches_quadrature() {
        let p = [[0.1, 0.0], [0.9, 0.2], [0.3, 0.7]];
        let area = tri_area(p[0], p[1], p[2]);
        let rule = DuffyRule::new(8, 8);
        for pw in 0..5 {
            let mut q = 0.0;
            for &(xi, t, w) in &rule.pts {
                let s = p[0][0] + xi * (p[1][0] - p[0][0]) + xi * t * (p[2][0] - p[1][0]);
                q += w * 2.0 * area * s.powi(pw as i32);
            }
            assert!((q - int_s_power(area, [0.1, 0.9, 0.3], pw)).abs() < 1e-14);
        }
    }
}
