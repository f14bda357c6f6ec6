use serde::{Deserialize, Serialize};

/// Dimension and geometric parameters shared by every computation.
///
/// Not every routine reads every field; unused ones keep their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub rho: f64,
    pub tau: f64,
    pub theta: f64,
    /// Diameter-type scale `D` entering the logarithmic weights.
    pub d: f64,
    /// Half-ball radius `R`.
    pub r: f64,
    /// Number of logarithmic correction terms.
    pub m: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params { n: 3, rho: 1.0, tau: 1.0, theta: std::f64::consts::FRAC_PI_4, d: 1.0, r: 1.0, m: 0 }
    }
}

impl Params {
    pub fn with_n(n: usize) -> Self {
        Params { n, ..Params::default() }
    }
}

/// Partial sum of a positive series together with a bound on what was left out.
///
/// The exact sum lies in `[value, value + tail_bound]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms_used: usize,
}

impl SeriesValue {
    pub fn upper(&self) -> f64 {
        self.value + self.tail_bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Grid resolution, or degrees of freedom for mesh problems.
    pub resolution: usize,
    pub value: f64,
}

/// An eigenvalue estimate with its residual and refinement history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenEstimate {
    pub value: f64,
    pub residual: f64,
    pub trace: Vec<TraceEntry>,
}

/// A point of `R^n`; the last coordinate is the `e_n` direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointN {
    pub coords: Vec<f64>,
}

impl PointN {
    pub fn new(coords: Vec<f64>) -> Self {
        PointN { coords }
    }

    pub fn zeros(n: usize) -> Self {
        PointN { coords: vec![0.0; n] }
    }

    /// The unit vector `e_n` scaled by `c`.
    pub fn axis(n: usize, c: f64) -> Self {
        let mut p = PointN::zeros(n);
        p.coords[n - 1] = c;
        p
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Last coordinate.
    pub fn last(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    /// `|x'|^2`, the squared norm of all but the last coordinate.
    pub fn tangential_sq(&self) -> f64 {
        let n = self.coords.len();
        self.coords[..n - 1].iter().map(|c| c * c).sum()
    }

    /// `self + c e_n`
    pub fn shift_axis(&self, c: f64) -> PointN {
        let mut p = self.clone();
        let n = p.coords.len();
        p.coords[n - 1] += c;
        p
    }

    pub fn dist(&self, other: &PointN) -> f64 {
        self.coords.iter().zip(&other.coords).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> PointN {
        PointN::new(self.coords.iter().map(|x| c * x).collect())
    }
}

impl From<Vec<f64>> for PointN {
    fn from(coords: Vec<f64>) -> Self {
        PointN { coords }
    }
}
