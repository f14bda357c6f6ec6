//! Axisymmetric finite elements for Hardy-type Rayleigh quotients.
//!
//! The discrete minimizer on any mesh is an admissible function, so every
//! eigenvalue reported here is an upper bound for the continuous infimum,
//! up to the quadrature error of the weighted mass.

pub mod assemble;
pub mod eigen;
pub mod mesh;
pub mod sparse;

pub use assemble::{
    assemble, assemble_full, integrate_nodal, mass_matrix, weighted_l2, FnWeight, MeridianWeight, SparseSystem, Weight,
};
pub use eigen::{smallest_eig, smallest_eigenpair, EigenPair};
pub use mesh::{
    build_meridian_mesh, build_meridian_mesh_with, refine, DomainKind, MeridianDomain, MeridianMesh, MeshOptions,
};

use crate::error::{LabError, Result};
use crate::types::{EigenEstimate, TraceEntry};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    pub eigenvalue: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemTrace {
    pub levels: Vec<LevelResult>,
}

impl FemTrace {
    /// Finest-level value with the per-level trace.
    pub fn estimate(&self) -> EigenEstimate {
        let last = self.levels.last().expect("trace has at least one level");
        EigenEstimate {
            value: last.eigenvalue,
            residual: last.residual,
            trace: self.levels.iter().map(|l| TraceEntry { resolution: l.dofs, value: l.eigenvalue }).collect(),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.eigenvalue).collect()
    }

    /// True when no level exceeds its predecessor by more than `slack`.
    pub fn is_nonincreasing(&self, slack: f64) -> bool {
        self.levels.windows(2).all(|w| w[1].eigenvalue <= w[0].eigenvalue + slack)
    }

    /// `level,h,dofs,eigenvalue,residual` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,h,dofs,eigenvalue,residual\n");
        for l in &self.levels {
            let _ = writeln!(out, "{},{:.16e},{},{:.16e},{:.16e}", l.level, l.h, l.dofs, l.eigenvalue, l.residual);
        }
        out
    }
}

/// Solve the Hardy eigenproblem at the domain's singularity on `levels`
/// nested meshes (the base mesh and `levels - 1` uniform refinements).
pub fn hardy_trace(d: &MeridianDomain, opts: MeshOptions, levels: usize, tol: f64) -> Result<FemTrace> {
    let weight = match d.singularity() {
        Some(p) => Weight::Hardy { z0: p[1] },
        None => Weight::Unit,
    };
    weighted_trace(d, opts, &weight, levels, tol)
}

pub fn weighted_trace(
    d: &MeridianDomain,
    opts: MeshOptions,
    weight: &dyn MeridianWeight,
    levels: usize,
    tol: f64,
) -> Result<FemTrace> {
    if levels == 0 {
        return Err(LabError::invalid("levels", "must be at least 1"));
    }
    let mut mesh = build_meridian_mesh_with(d, opts)?;
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        if level > 0 {
            mesh = refine(&mesh);
        }
        let sys = assemble(&mesh, d.params.n, weight)?;
        let e = smallest_eig(&sys, tol)?;
        out.push(LevelResult { level, h: mesh.h_max(), dofs: sys.dofs(), eigenvalue: e.value, residual: e.residual });
    }
    Ok(FemTrace { levels: out })
}

/// Base mesh options for the annulus: cells of size at most 0.25 in
/// `(ln r, angle)` with at least two across the radial direction.
pub fn annulus_options(tau: f64) -> MeshOptions {
    MeshOptions { h: (0.5 * (1.0 + tau).ln()).min(0.25), ..MeshOptions::default() }
}

/// Per-level upper bounds for the best Hardy constant of
/// `{1 < |x| < 1 + tau}` with the pole at `e_n`, axisymmetric class.
pub fn lambda_tau_trace(n: usize, tau: f64, levels: usize, tol: f64) -> Result<FemTrace> {
    if levels < 2 {
        return Err(LabError::invalid("levels", "must be at least 2"));
    }
    let d = MeridianDomain::annulus(n, 1.0, tau);
    d.validate()?;
    hardy_trace(&d, annulus_options(tau), levels, tol)
}

pub fn lambda_tau(n: usize, tau: f64, levels: usize) -> Result<EigenEstimate> {
    Ok(lambda_tau_trace(n, tau, levels, DEFAULT_TOL)?.estimate())
}

/// `(Uᵀ K U) / (Uᵀ M U)` for a dof vector `U`.
pub fn hardy_quotient_of(u: &[f64], sys: &SparseSystem) -> Result<f64> {
    if u.len() != sys.dofs() {
        return Err(LabError::invalid("u", format!("length {} != {} dofs", u.len(), sys.dofs())));
    }
    let den = sys.m.quad_form(u);
    if den == 0.0 {
        return Err(LabError::ZeroDenominator);
    }
    Ok(sys.k.quad_form(u) / den)
}

/// A Rayleigh quotient of an explicit mesh function with a quadrature error
/// estimate for its denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedQuotient {
    pub quotient: f64,
    /// Relative change of `Uᵀ M U` when every element is split twice more.
    pub quad_error: f64,
}

impl CertifiedQuotient {
    /// Largest value the true quotient could take given the quadrature error.
    pub fn upper(&self) -> f64 {
        self.quotient / (1.0 - self.quad_error).max(f64::MIN_POSITIVE)
    }
}

/// Certified quotient for a vertex-indexed function that vanishes on the
/// Dirichlet vertices.
pub fn certified_quotient(
    mesh: &MeridianMesh,
    n: usize,
    weight: &dyn MeridianWeight,
    u_full: &[f64],
) -> Result<CertifiedQuotient> {
    for (v, &d) in mesh.dirichlet.iter().enumerate() {
        if d && u_full[v] != 0.0 {
            return Err(LabError::SupportViolation(format!("function is nonzero on Dirichlet vertex {v}")));
        }
    }
    let sys = assemble(mesh, n, weight)?;
    let u = sys.restrict(u_full);
    let quotient = hardy_quotient_of(&u, &sys)?;
    let den = sys.m.quad_form(&u);
    let fine = weighted_l2(mesh, n, weight, u_full, 2)?;
    Ok(CertifiedQuotient { quotient, quad_error: ((den - fine) / fine).abs() })
}

/// The radial shell profile `r^{-(n-2)/2} sin(pi ln(r/2) / ln(tau/2))` in
/// `r = |x - e_n|` on `2 < r < tau`, zero elsewhere, at mesh vertices.
pub fn shell_function(mesh: &MeridianMesh, n: usize, tau: f64) -> Vec<f64> {
    let l = (tau / 2.0).ln();
    mesh.vertices
        .iter()
        .zip(&mesh.dirichlet)
        .map(|(p, &d)| {
            let r = (p[0] * p[0] + (p[1] - 1.0).powi(2)).sqrt();
            if d || r <= 2.0 || r >= tau {
                0.0
            } else {
                r.powf(-0.5 * (n as f64 - 2.0)) * (std::f64::consts::PI * (r / 2.0).ln() / l).sin()
            }
        })
        .collect()
}

/// Closed-form quotient of the shell profile: `((n-2)/2)^2 + (pi / ln(tau/2))^2`.
pub fn shell_bound(n: usize, tau: f64) -> f64 {
    let a = 0.5 * (n as f64 - 2.0);
    a * a + (std::f64::consts::PI / (tau / 2.0).ln()).powi(2)
}

/// Empirical bracket for the threshold beyond which the annulus constant
/// drops below `n^2/4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauBracket {
    /// Largest probed tau whose every level stayed at or above `n^2/4 - slack`.
    pub stays_sharp: Option<f64>,
    /// Smallest probed tau with a finest-level value below `n^2/4`.
    pub drops_below: Option<f64>,
    pub values: Vec<(f64, f64)>,
}

pub fn tau_bracket(n: usize, taus: &[f64], levels: usize, slack: f64) -> Result<TauBracket> {
    let target = (n * n) as f64 / 4.0;
    let mut b = TauBracket { stays_sharp: None, drops_below: None, values: Vec::new() };
    let mut sorted = taus.to_vec();
    sorted.sort_by(f64::total_cmp);
    for tau in sorted {
        let tr = lambda_tau_trace(n, tau, levels, DEFAULT_TOL)?;
        let finest = tr.estimate().value;
        b.values.push((tau, finest));
        if tr.values().iter().all(|&v| v >= target - slack) {
            b.stays_sharp = Some(tau);
        }
        if finest < target && b.drops_below.is_none() {
            b.drops_below = Some(tau);
        }
    }
    Ok(b)
}
