//! One-dimensional quadrature rules.

use crate::error::{LabError, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_m.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = mf * (z * pm - pm1) / (z * z - 1.0);
            let dz = pm / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

/// Fixed Gauss–Legendre rule mapped to an interval.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(m: usize) -> Self {
        let (nodes, weights) = gauss_legendre(m);
        GaussRule { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
    }

    /// Composite rule over `panels` equal subintervals.
    pub fn composite<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + h * p as f64;
                self.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Adaptive Gauss–Kronrod (7/15) quadrature with a global error target.
///
/// Bisects the interval with the largest local error estimate until the
/// summed estimate is below `max(abs_tol, rel_tol * |value|)`.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Integral> {
    const MAX_INTERVALS: usize = 20_000;
    let (v0, e0) = gk15(&mut f, a, b);
    let mut segs = vec![(a, b, v0, e0)];
    loop {
        let value: f64 = segs.iter().map(|s| s.2).sum();
        let error: f64 = segs.iter().map(|s| s.3).sum();
        if !value.is_finite() {
            return Err(LabError::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
        }
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Integral { value, error });
        }
        if segs.len() >= MAX_INTERVALS {
            return Err(LabError::Quadrature(format!("adaptive rule stalled at error {error:e} on [{a}, {b}]")));
        }
        let (idx, _) = segs.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).unwrap();
        let (lo, hi, _, _) = segs.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (vl, el) = gk15(&mut f, lo, mid);
        let (vr, er) = gk15(&mut f, mid, hi);
        segs.push((lo, mid, vl, el));
        segs.push((mid, hi, vr, er));
    }
}

fn gk15_many<F: FnMut(f64, &mut [f64])>(f: &mut F, k: usize, a: f64, b: f64, buf: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = vec![0.0; k];
    let mut gauss = vec![0.0; k];
    f(c, buf);
    for i in 0..k {
        kron[i] = WGK[7] * buf[i];
        gauss[i] = WG[3] * buf[i];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        f(c - dx, buf);
        let left: Vec<f64> = buf.to_vec();
        f(c + dx, buf);
        for i in 0..k {
            let s = left[i] + buf[i];
            kron[i] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[i] += WG[j / 2] * s;
            }
        }
    }
    let err = (0..k).map(|i| ((kron[i] - gauss[i]) * h).abs()).collect();
    (kron.iter().map(|v| v * h).collect(), err)
}

/// Adaptive Gauss–Kronrod for `k` integrands sharing one set of nodes.
///
/// `f(x, out)` writes the `k` integrand values at `x`. Every component must
/// meet `max(abs_tol, rel_tol * |value|)`; the segment with the largest
/// error relative to its component's target is bisected first.
pub fn adaptive_many<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    k: usize,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Vec<Integral>> {
    const MAX_INTERVALS: usize = 20_000;
    let mut buf = vec![0.0; k];
    let (v0, e0) = gk15_many(&mut f, k, a, b, &mut buf);
    let mut segs = vec![(a, b, v0, e0)];
    loop {
        let mut value = vec![0.0; k];
        let mut error = vec![0.0; k];
        for s in &segs {
            for i in 0..k {
                value[i] += s.2[i];
                error[i] += s.3[i];
            }
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
        }
        let target: Vec<f64> = value.iter().map(|v| abs_tol.max(rel_tol * v.abs())).collect();
        if (0..k).all(|i| error[i] <= target[i]) {
            return Ok((0..k).map(|i| Integral { value: value[i], error: error[i] }).collect());
        }
        if segs.len() >= MAX_INTERVALS {
            let worst = (0..k).map(|i| error[i] / target[i]).fold(0.0, f64::max);
            return Err(LabError::Quadrature(format!(
                "adaptive rule stalled at {worst:e} times the target on [{a}, {b}]"
            )));
        }
        let score = |e: &[f64]| (0..k).map(|i| e[i] / target[i]).fold(0.0, f64::max);
        let (idx, _) = segs.iter().enumerate().max_by(|x, y| score(&x.1 .3).total_cmp(&score(&y.1 .3))).unwrap();
        let (lo, hi, _, _) = segs.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (vl, el) = gk15_many(&mut f, k, lo, mid, &mut buf);
        let (vr, er) = gk15_many(&mut f, k, mid, hi, &mut buf);
        segs.push((lo, mid, vl, el));
        segs.push((mid, hi, vr, er));
    }
}
