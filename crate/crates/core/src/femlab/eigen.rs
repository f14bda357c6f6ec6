//! Smallest generalized eigenpair by shifted block inverse iteration.

use super::assemble::SparseSystem;
use super::sparse::{dot, norm, CsrMatrix, SkylineLdl};
use crate::error::{LabError, Result};

pub const MAX_ITERATIONS: usize = 3000;
const BLOCK: usize = 6;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub residual: f64,
    /// Dof vector, `M`-normalized.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub shift: f64,
}

/// Row-wise lower estimate `min_i (K_ii - sum_j |K_ij|) / sum_j |M_ij|`.
pub fn gershgorin_lower(k: &CsrMatrix, m: &CsrMatrix) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..k.n {
        let (mut diag, mut off) = (0.0, 0.0);
        for (j, v) in k.row(i) {
            if j == i {
                diag = v;
            } else {
                off += v.abs();
            }
        }
        let mrow: f64 = m.row(i).map(|(_, v)| v.abs()).sum();
        if mrow > 0.0 {
            best = best.min((diag - off) / mrow);
        }
    }
    best
}

/// `‖Kx − λMx‖ / ‖Mx‖`.
pub fn residual(k: &CsrMatrix, m: &CsrMatrix, x: &[f64], lambda: f64) -> f64 {
    let kx = k.mul_vec(x);
    let mx = m.mul_vec(x);
    let r: Vec<f64> = kx.iter().zip(&mx).map(|(a, b)| a - lambda * b).collect();
    norm(&r) / norm(&mx)
}

/// Symmetric Jacobi eigen-decomposition of a small dense matrix (row-major).
/// Returns eigenvalues and column eigenvectors.
fn jacobi(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        let scale: f64 = (0..n).map(|i| a[i * n + i].powi(2)).sum();
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Rayleigh-Ritz on the span of `y`: returns Ritz values (ascending) and the
/// `M`-orthonormal Ritz vectors. Columns that are numerically dependent are
/// dropped during the Cholesky factorization of the Gram matrix.
fn rayleigh_ritz(k: &CsrMatrix, m: &CsrMatrix, y: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let my: Vec<Vec<f64>> = y.iter().map(|v| m.mul_vec(v)).collect();
    let ky: Vec<Vec<f64>> = y.iter().map(|v| k.mul_vec(v)).collect();
    let p0 = y.len();
    let gram = |a: &[Vec<f64>]| -> Vec<f64> {
        let mut g = vec![0.0; p0 * p0];
        for i in 0..p0 {
            for j in i..p0 {
                let v = 0.5 * (dot(&y[i], &a[j]) + dot(&y[j], &a[i]));
                g[i * p0 + j] = v;
                g[j * p0 + i] = v;
            }
        }
        g
    };
    let (gm, gk) = (gram(&my), gram(&ky));
    // Pivoted Cholesky-like elimination: L Lᵀ = Gm on the kept columns.
    let mut keep: Vec<usize> = Vec::with_capacity(p0);
    let mut l = vec![0.0; p0 * p0];
    for i in 0..p0 {
        let mut row = vec![0.0; keep.len()];
        for (a, &ka) in keep.iter().enumerate() {
            let mut v = gm[i * p0 + ka];
            for b in 0..a {
                v -= row[b] * l[a * p0 + b];
            }
            row[a] = v / l[a * p0 + a];
        }
        let d = gm[i * p0 + i] - row.iter().map(|x| x * x).sum::<f64>();
        if d > 1e-12 * gm[i * p0 + i] && d > 0.0 {
            let a = keep.len();
            for (b, r) in row.iter().enumerate() {
                l[a * p0 + b] = *r;
            }
            l[a * p0 + a] = d.sqrt();
            keep.push(i);
        }
    }
    let p = keep.len();
    if p == 0 {
        return Err(LabError::Convergence("iteration block collapsed".into()));
    }
    // C = L^{-1} Gk L^{-T} on kept columns.
    let solve_l = |b: &mut [f64]| {
        for a in 0..p {
            let mut v = b[a];
            for c in 0..a {
                v -= l[a * p0 + c] * b[c];
            }
            b[a] = v / l[a * p0 + a];
        }
    };
    let mut w = vec![0.0; p * p];
    for j in 0..p {
        let mut col: Vec<f64> = keep.iter().map(|&i| gk[i * p0 + keep[j]]).collect();
        solve_l(&mut col);
        for i in 0..p {
            w[i * p + j] = col[i];
        }
    }
    let mut c = vec![0.0; p * p];
    for i in 0..p {
        let mut row: Vec<f64> = (0..p).map(|j| w[i * p + j]).collect();
        solve_l(&mut row);
        for j in 0..p {
            c[i * p + j] = row[j];
        }
    }
    for i in 0..p {
        for j in i + 1..p {
            let v = 0.5 * (c[i * p + j] + c[j * p + i]);
            c[i * p + j] = v;
            c[j * p + i] = v;
        }
    }
    let (vals, vecs) = jacobi(c, p);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let dim = y[0].len();
    let mut out = Vec::with_capacity(p);
    for &col in &order {
        // Coefficients in the y basis: L^{-T} q.
        let mut q: Vec<f64> = (0..p).map(|r| vecs[r * p + col]).collect();
        for a in (0..p).rev() {
            let mut v = q[a];
            for b in a + 1..p {
                v -= l[b * p0 + a] * q[b];
            }
            q[a] = v / l[a * p0 + a];
        }
        let mut x = vec![0.0; dim];
        for (r, &yi) in keep.iter().enumerate() {
            for (xi, yv) in x.iter_mut().zip(&y[yi]) {
                *xi += q[r] * yv;
            }
        }
        out.push(x);
    }
    Ok((order.iter().map(|&i| vals[i]).collect(), out))
}

/// Deterministic start block: all ones, then smooth oscillating vectors.
fn start_block(dim: usize, p: usize) -> Vec<Vec<f64>> {
    (0..p)
        .map(|c| {
            (0..dim).map(|i| if c == 0 { 1.0 } else { ((c * (i + 1)) as f64 * 0.618_033_988_749_895).sin() }).collect()
        })
        .collect()
}

/// Factor `K - σM` and require it to be positive definite.
fn definite_factor(k: &CsrMatrix, m: &CsrMatrix, shift: f64) -> Option<SkylineLdl> {
    match SkylineLdl::factor(&k.lin_comb(1.0, m, -shift)) {
        Ok(f) if f.negative_pivots == 0 => Some(f),
        _ => None,
    }
}

/// Smallest eigenpair of `K x = λ M x`.
///
/// The first shift is `0.9 g` (or `1.1 g` when `g < 0`) for the Gershgorin
/// estimate `g`, lowered until `K − σM` is definite. Once the leading Ritz
/// value settles the shift is raised toward it, keeping `K − σM` definite so
/// the iteration still targets the smallest eigenvalue.
pub fn smallest_eigenpair(k: &CsrMatrix, m: &CsrMatrix, tol: f64) -> Result<EigenPair> {
    let dim = k.n;
    if dim == 0 {
        return Err(LabError::Domain("system has no free degrees of freedom".into()));
    }
    if !(tol > 0.0) {
        return Err(LabError::invalid("tol", "must be positive"));
    }
    let g = gershgorin_lower(k, m);
    let mut shift = if g >= 0.0 { 0.9 * g } else { 1.1 * g };
    let mut fac = None;
    for _ in 0..60 {
        if let Some(f) = definite_factor(k, m, shift) {
            fac = Some(f);
            break;
        }
        shift -= shift.abs().max(1.0);
    }
    let mut fac = fac.ok_or_else(|| LabError::Convergence("no definite shift found".into()))?;
    let p = BLOCK.min(dim);
    let mut block = start_block(dim, p);
    let mut last_res = f64::INFINITY;
    let mut prev = f64::NAN;
    let mut gap = 0.05;
    for it in 1..=MAX_ITERATIONS {
        let y: Vec<Vec<f64>> = block.iter().map(|x| fac.solve(&m.mul_vec(x))).collect();
        let (vals, vecs) = rayleigh_ritz(k, m, &y)?;
        let res = residual(k, m, &vecs[0], vals[0]);
        last_res = res;
        if res <= tol {
            return Ok(EigenPair { value: vals[0], residual: res, vector: vecs[0].clone(), iterations: it, shift });
        }
        let theta = vals[0];
        let settled = ((theta - prev) / theta).abs() < 1e-3;
        let target = theta - gap * theta.abs().max(1e-3);
        if settled && target > shift + 0.05 * (theta - shift) {
            match definite_factor(k, m, target) {
                Some(f) => {
                    fac = f;
                    shift = target;
                }
                None => gap *= 2.0,
            }
        }
        prev = theta;
        block = vecs;
    }
    Err(LabError::NonConvergence { iterations: MAX_ITERATIONS, residual: last_res })
}

/// Smallest eigenvalue of an assembled system.
pub fn smallest_eig(sys: &SparseSystem, tol: f64) -> Result<EigenPair> {
    smallest_eigenpair(&sys.k, &sys.m, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_pencil_gives_one() {
        let a = CsrMatrix::from_triplets(
            5,
            (0..5)
                .flat_map(|i| {
                    let mut v = vec![(i, i, 3.0)];
                    if i + 1 < 5 {
                        v.push((i, i + 1, -1.0));
                        v.push((i + 1, i, -1.0));
                    }
                    v
                })
                .collect(),
        );
        let e = smallest_eigenpair(&a, &a, 1e-12).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tridiagonal_spectrum() {
        let n = 200;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let k = CsrMatrix::from_triplets(n, t);
        let m = CsrMatrix::identity(n);
        let e = smallest_eigenpair(&k, &m, 1e-10).unwrap();
        let want = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert!((e.value - want).abs() < 1e-12);
    }
}
