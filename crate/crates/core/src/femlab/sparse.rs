//! Compressed sparse rows and a skyline LDLᵀ factorization with reverse
//! Cuthill-McKee ordering.

use crate::error::{LabError, Result};
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicates are summed in insertion order, so the result does not
    /// depend on the sort algorithm.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::with_capacity(trip.len());
        let mut val: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            if last == Some((i, j)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, col, val }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col[k], self.val[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = &self.col[self.row_ptr[i]..self.row_ptr[i + 1]];
        match r.binary_search(&j) {
            Ok(k) => self.val[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        let mut trip = Vec::with_capacity(self.val.len() + other.val.len());
        for i in 0..self.n {
            trip.extend(self.row(i).map(|(j, v)| (i, j, a * v)));
        }
        for i in 0..other.n {
            trip.extend(other.row(i).map(|(j, v)| (i, j, b * v)));
        }
        CsrMatrix::from_triplets(self.n, trip)
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Reverse Cuthill-McKee permutation: `perm[new] = old`.
pub fn rcm(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let deg: Vec<usize> = (0..n).map(|i| a.row_ptr[i + 1] - a.row_ptr[i]).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_last = |start: usize, seen: &mut Vec<bool>| -> (usize, usize) {
        // Returns the last node reached and the eccentricity of `start`.
        let mut level = vec![usize::MAX; n];
        let mut q = VecDeque::from([start]);
        level[start] = 0;
        let mut touched = vec![start];
        let mut last = start;
        while let Some(u) = q.pop_front() {
            last = u;
            for (v, _) in a.row(u) {
                if level[v] == usize::MAX && !seen[v] {
                    level[v] = level[u] + 1;
                    touched.push(v);
                    q.push_back(v);
                }
            }
        }
        let ecc = level[last];
        // Among the deepest nodes, pick one of minimal degree.
        let best = touched.iter().copied().filter(|&v| level[v] == ecc).min_by_key(|&v| (deg[v], v)).unwrap_or(last);
        (best, ecc)
    };
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // Pseudo-peripheral start node.
        let mut start = seed;
        let (mut far, mut ecc) = bfs_last(start, &mut visited);
        for _ in 0..5 {
            let (f2, e2) = bfs_last(far, &mut visited);
            if e2 <= ecc {
                break;
            }
            start = far;
            far = f2;
            ecc = e2;
        }
        let mut q = VecDeque::from([start]);
        visited[start] = true;
        while let Some(u) = q.pop_front() {
            order.push(u);
            let mut nb: Vec<usize> = a.row(u).map(|(v, _)| v).filter(|&v| !visited[v]).collect();
            nb.sort_by_key(|&v| (deg[v], v));
            for v in nb {
                visited[v] = true;
                q.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// `A = L D Lᵀ` in skyline (variable band) storage of the permuted matrix.
#[derive(Debug, Clone)]
pub struct SkylineLdl {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    /// Row `i` holds `L[i][first[i]..i]` followed by `D[i]`.
    data: Vec<f64>,
    /// Number of negative pivots (the inertia of `A`).
    pub negative_pivots: usize,
}

impl SkylineLdl {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let perm = rcm(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for (j_old, _) in a.row(old) {
                let j = inv[j_old];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; start[n]];
        for old in 0..n {
            let i = inv[old];
            for (j_old, v) in a.row(old) {
                let j = inv[j_old];
                if j <= i {
                    data[start[i] + j - first[i]] += v;
                }
            }
        }
        let mut negative = 0;
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for i in 0..n {
            let fi = first[i];
            // g_ij = a_ij - sum_k L_jk g_ik over the common profile.
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let (head, tail) = data.split_at_mut(start[i]);
                let rowj = &head[start[j] + k0 - fj..start[j] + j - fj];
                let rowi = &mut tail[..i - fi + 1];
                let s = dot(rowj, &rowi[k0 - fi..j - fi]);
                rowi[j - fi] -= s;
            }
            let mut d = data[start[i] + i - fi];
            for j in fi..i {
                let dj = data[start[j + 1] - 1];
                let g = data[start[i] + j - fi];
                let l = g / dj;
                d -= g * l;
                data[start[i] + j - fi] = l;
            }
            if !(d.abs() > 1e-14 * scale) || !d.is_finite() {
                return Err(LabError::IndefiniteForm(format!("zero pivot at row {i} of {n} in LDLt factorization")));
            }
            if d < 0.0 {
                negative += 1;
            }
            data[start[i] + i - fi] = d;
        }
        Ok(SkylineLdl { n, perm, first, start, data, negative_pivots: negative })
    }

    pub fn profile_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i] + i - fi];
            let s = dot(row, &y[fi..i]);
            y[i] -= s;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi /= self.data[self.start[i + 1] - 1];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let xi = y[i];
            let row = &self.data[self.start[i]..self.start[i] + i - fi];
            for (k, l) in row.iter().enumerate() {
                y[fi + k] -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}
