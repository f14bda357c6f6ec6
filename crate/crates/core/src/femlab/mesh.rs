//! Triangulations of the meridian half-plane `{(s, z) : s >= 0}`.
//!
//! Every built-in domain is the image of a parameter rectangle whose corner
//! `(0, 0)` maps to the singular point. The rectangle is split into cells,
//! and the corner cell is replaced by nested L-shaped layers shrinking by the
//! grading factor, each cut into four triangles.

use crate::error::{LabError, Result};
use crate::types::Params;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    /// `B_R^+` with the singularity at the origin.
    HalfBall,
    /// `{rho < |x| < rho (1 + tau)}` with the singularity at `rho e_n`.
    AnnulusOffcenter,
    /// `{x in B_1 : x_n < cot(theta) |x'|, |x - rho e_n| > rho}`, singular at 0.
    CapSector,
    /// `{|x| < R, |x + rho e_n| > rho}` with `R < 2 rho`, singular at 0.
    ExteriorBallComplement,
    /// The full ball `B_R`, no singularity.
    Ball,
    /// Closed polygon in the meridian half-plane, listed counter-clockwise.
    /// Vertices with `s = 0` lie on the axis; all other edges are Dirichlet.
    CustomPolygon(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeridianDomain {
    pub kind: DomainKind,
    pub params: Params,
}

impl MeridianDomain {
    pub fn half_ball(n: usize, r: f64) -> Self {
        MeridianDomain { kind: DomainKind::HalfBall, params: Params { n, r, ..Params::default() } }
    }

    pub fn annulus(n: usize, rho: f64, tau: f64) -> Self {
        MeridianDomain { kind: DomainKind::AnnulusOffcenter, params: Params { n, rho, tau, ..Params::default() } }
    }

    pub fn cap_sector(n: usize, rho: f64, theta: f64) -> Self {
        MeridianDomain { kind: DomainKind::CapSector, params: Params { n, rho, theta, ..Params::default() } }
    }

    pub fn exterior_ball_complement(n: usize, rho: f64, r: f64) -> Self {
        MeridianDomain { kind: DomainKind::ExteriorBallComplement, params: Params { n, rho, r, ..Params::default() } }
    }

    pub fn ball(n: usize, r: f64) -> Self {
        MeridianDomain { kind: DomainKind::Ball, params: Params { n, r, ..Params::default() } }
    }

    /// Singular point on the axis as `(s, z)`, if any.
    pub fn singularity(&self) -> Option<[f64; 2]> {
        match &self.kind {
            DomainKind::HalfBall | DomainKind::CapSector | DomainKind::ExteriorBallComplement => Some([0.0, 0.0]),
            DomainKind::AnnulusOffcenter => Some([0.0, self.params.rho]),
            DomainKind::Ball | DomainKind::CustomPolygon(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        match &self.kind {
            DomainKind::HalfBall | DomainKind::Ball => {
                if !(p.r > 0.0) {
                    return Err(LabError::Geometry(format!("radius R = {} must be positive", p.r)));
                }
            }
            DomainKind::ExteriorBallComplement => {
                if !(p.rho > 0.0 && p.r > 0.0 && p.r < 2.0 * p.rho) {
                    return Err(LabError::Geometry(format!("need 0 < R < 2 rho, got R = {}, rho = {}", p.r, p.rho)));
                }
            }
            DomainKind::AnnulusOffcenter => {
                if !(p.tau > 0.0) {
                    return Err(LabError::Geometry(format!("tau = {} must be positive", p.tau)));
                }
                if !(p.rho > 0.0) {
                    return Err(LabError::Geometry(format!("rho = {} must be positive", p.rho)));
                }
            }
            DomainKind::CapSector => {
                if !(p.theta > 0.0 && p.theta < FRAC_PI_2) {
                    return Err(LabError::Geometry(format!("theta = {} must lie in (0, pi/2)", p.theta)));
                }
                if !(p.rho > 0.0 && p.rho < 0.5) {
                    return Err(LabError::Geometry(format!("rho = {} must lie in (0, 1/2)", p.rho)));
                }
            }
            DomainKind::CustomPolygon(pts) => {
                if pts.len() < 3 {
                    return Err(LabError::Geometry("polygon needs at least 3 vertices".into()));
                }
                if pts.iter().any(|p| p[0] < 0.0) {
                    return Err(LabError::Geometry("polygon leaves the half-plane s >= 0".into()));
                }
                if signed_area(pts) <= 0.0 {
                    return Err(LabError::Geometry("polygon must be counter-clockwise".into()));
                }
            }
        }
        Ok(())
    }
}

/// Mesh construction options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshOptions {
    /// Target cell size in parameter units (about physical units near the singularity).
    pub h: f64,
    /// Ratio between successive corner layers.
    pub grading: f64,
    /// Number of corner layers.
    pub layers: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions { h: 0.1, grading: 1.7, layers: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeridianMesh {
    /// `(s, z)` coordinates.
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub dirichlet: Vec<bool>,
    /// Vertex index of the singular point, if it is a mesh vertex.
    pub singular_vertex: Option<usize>,
    pub grading: f64,
}

fn signed_area(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

pub fn tri_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Mesh of the parameter rectangle `[0, 1]^2` with a graded corner at the origin.
struct ParamMesh {
    pts: Vec<[f64; 2]>,
    tris: Vec<[usize; 3]>,
}

fn param_mesh(nu: usize, nv: usize, grading: f64, layers: usize) -> ParamMesh {
    let mut pts = Vec::with_capacity((nu + 1) * (nv + 1) + 3 * layers + 3);
    for i in 0..=nu {
        for j in 0..=nv {
            pts.push([i as f64 / nu as f64, j as f64 / nv as f64]);
        }
    }
    let id = |i: usize, j: usize| i * (nv + 1) + j;
    let mut tris = Vec::new();
    for i in 0..nu {
        for j in 0..nv {
            if i == 0 && j == 0 {
                continue;
            }
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    let (du, dv) = (1.0 / nu as f64, 1.0 / nv as f64);
    // Outer corners of layer 0 are grid vertices.
    let mut outer = [id(1, 0), id(1, 1), id(0, 1)];
    for k in 1..=layers {
        let f = grading.powi(-(k as i32));
        let base = pts.len();
        pts.push([du * f, 0.0]);
        pts.push([du * f, dv * f]);
        pts.push([0.0, dv * f]);
        let inner = [base, base + 1, base + 2];
        let [b, c, d] = outer;
        let [a, fm, e] = inner;
        tris.push([a, b, fm]);
        tris.push([b, c, fm]);
        tris.push([c, d, fm]);
        tris.push([d, e, fm]);
        outer = inner;
    }
    let origin = id(0, 0);
    tris.push([origin, outer[0], outer[1]]);
    tris.push([origin, outer[1], outer[2]]);
    ParamMesh { pts, tris }
}

/// Maps the unit square onto the quarter disk `{s, z >= 0, s^2 + z^2 <= 1}`
/// by radial rescaling of sup-norm shells onto circles.
fn square_to_quarter_disk(p: [f64; 2]) -> [f64; 2] {
    let (a, b) = (p[0], p[1]);
    let r = (a * a + b * b).sqrt();
    if r == 0.0 {
        return [0.0, 0.0];
    }
    let f = a.max(b) / r;
    [a * f, b * f]
}

fn is_one(x: f64) -> bool {
    (x - 1.0).abs() < 1e-12
}

fn is_zero(x: f64) -> bool {
    x.abs() < 1e-12
}

fn cells_for(len: f64, h: f64) -> usize {
    ((len / h).ceil() as usize).max(1)
}

/// Build the base mesh of a domain with the default number of corner layers.
pub fn build_meridian_mesh(d: &MeridianDomain, h: f64, grading: f64) -> Result<MeridianMesh> {
    build_meridian_mesh_with(d, MeshOptions { h, grading, ..MeshOptions::default() })
}

pub fn build_meridian_mesh_with(d: &MeridianDomain, opts: MeshOptions) -> Result<MeridianMesh> {
    d.validate()?;
    if !(opts.h > 0.0) {
        return Err(LabError::Geometry(format!("mesh size h = {} must be positive", opts.h)));
    }
    if !(opts.grading >= 1.0) {
        return Err(LabError::Geometry(format!("grading = {} must be >= 1", opts.grading)));
    }
    let layers = if opts.grading > 1.0 { opts.layers } else { 0 };
    let p = &d.params;
    let mut mesh = match &d.kind {
        DomainKind::HalfBall => {
            let n = cells_for(1.0, opts.h);
            let pm = param_mesh(n, n, opts.grading, layers);
            let verts = pm.pts.iter().map(|&q| scale(square_to_quarter_disk(q), p.r)).collect();
            // Dirichlet on the flat side (param b = 0) and on the arc.
            let dir = pm.pts.iter().map(|q| is_zero(q[1]) || is_one(q[0]) || is_one(q[1])).collect();
            finish(verts, pm.tris, dir, Some(0))
        }
        DomainKind::ExteriorBallComplement => {
            let n = cells_for(1.0, opts.h);
            let pm = param_mesh(n, n, opts.grading, layers);
            let verts = pm
                .pts
                .iter()
                .map(|&q| {
                    // Bend the quarter disk so its flat side follows the sphere.
                    let [s, z] = square_to_quarter_disk(q);
                    let r = (s * s + z * z).sqrt() * p.r;
                    let phi = z.atan2(s);
                    let amax = (-r / (2.0 * p.rho)).acos();
                    let a = (1.0 - phi / FRAC_PI_2) * amax;
                    [r * a.sin(), r * a.cos()]
                })
                .collect();
            let dir = pm.pts.iter().map(|q| is_zero(q[1]) || is_one(q[0]) || is_one(q[1])).collect();
            let mut m = finish(verts, pm.tris, dir, Some(0));
            push_off_concave_arc(&mut m, [0.0, -p.rho], p.rho);
            m
        }
        DomainKind::Ball => {
            let n = cells_for(1.0, opts.h);
            let pm = param_mesh(n, n, 1.0, 0);
            let mut verts: Vec<[f64; 2]> = pm.pts.iter().map(|&q| scale(square_to_quarter_disk(q), p.r)).collect();
            let mut dir: Vec<bool> = pm.pts.iter().map(|q| is_one(q[0]) || is_one(q[1])).collect();
            let mut tris = pm.tris.clone();
            // Mirror across z = 0, sharing the vertices on that line.
            let mut map = Vec::with_capacity(verts.len());
            for (i, q) in pm.pts.iter().enumerate() {
                if is_zero(q[1]) {
                    map.push(i);
                } else {
                    map.push(verts.len());
                    verts.push([verts[i][0], -verts[i][1]]);
                    dir.push(dir[i]);
                }
            }
            for t in &pm.tris {
                tris.push([map[t[0]], map[t[2]], map[t[1]]]);
            }
            finish(verts, tris, dir, None)
        }
        DomainKind::AnnulusOffcenter => {
            let big = (1.0 + p.tau).ln();
            let nu = cells_for(big, opts.h);
            let nv = cells_for(PI, opts.h);
            let pm = param_mesh(nu, nv, opts.grading, layers);
            let verts = pm
                .pts
                .iter()
                .map(|q| {
                    let (r, a) = (p.rho * (q[0] * big).exp(), q[1] * PI);
                    [r * a.sin(), r * a.cos()]
                })
                .collect();
            let dir = pm.pts.iter().map(|q| is_zero(q[0]) || is_one(q[0])).collect();
            let mut m = finish(verts, pm.tris, dir, Some(0));
            push_off_concave_arc(&mut m, [0.0, 0.0], p.rho);
            m
        }
        DomainKind::CapSector => {
            let n = cells_for(1.0, opts.h);
            let pm = param_mesh(n, n, opts.grading, layers);
            let (rho, theta) = (p.rho, p.theta);
            let verts = pm
                .pts
                .iter()
                .map(|&q| {
                    // Quarter disk in polar form; the angle from the lower
                    // axis is stretched onto (lowest admissible angle, pi].
                    let [s, z] = square_to_quarter_disk(q);
                    let r = (s * s + z * z).sqrt();
                    let phi = z.atan2(s);
                    let amin = theta.max((r / (2.0 * rho)).min(1.0).acos());
                    let a = PI - phi / FRAC_PI_2 * (PI - amin);
                    [r * a.sin(), r * a.cos()]
                })
                .collect();
            let dir = pm.pts.iter().map(|q| is_zero(q[0]) || is_one(q[0]) || is_one(q[1])).collect();
            let mut m = finish(verts, pm.tris, dir, Some(0));
            push_off_concave_arc(&mut m, [0.0, p.rho], p.rho);
            m
        }
        DomainKind::CustomPolygon(pts) => polygon_mesh(pts, opts.h)?,
    };
    mesh.grading = opts.grading;
    orient(&mut mesh)?;
    Ok(mesh)
}

fn scale(p: [f64; 2], r: f64) -> [f64; 2] {
    [p[0] * r, p[1] * r]
}

fn finish(
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    dirichlet: Vec<bool>,
    singular_vertex: Option<usize>,
) -> MeridianMesh {
    MeridianMesh { vertices, triangles, dirichlet, singular_vertex, grading: 1.0 }
}

/// Make every triangle counter-clockwise in `(s, z)`; reject degenerate ones.
fn orient(m: &mut MeridianMesh) -> Result<()> {
    for t in m.triangles.iter_mut() {
        let a = tri_area(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
        if a.abs() < 1e-300 {
            return Err(LabError::Geometry("degenerate triangle in mesh".into()));
        }
        if a < 0.0 {
            t.swap(1, 2);
        }
    }
    Ok(())
}

/// Boundary edges as `(a, b)` with `a < b`.
pub fn boundary_edges(m: &MeridianMesh) -> Vec<(usize, usize)> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &m.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut out: Vec<_> = count.into_iter().filter(|&(_, c)| c == 1).map(|(e, _)| e).collect();
    out.sort_unstable();
    out
}

/// Distance from `c` to the segment `[a, b]`.
fn segment_distance(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 { (((c[0] - a[0]) * d[0] + (c[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    dist([a[0] + t * d[0], a[1] + t * d[1]], c)
}

/// Move vertices on a circle that bounds the domain from inside slightly
/// outward, so every boundary chord stays outside the excluded disk and
/// piecewise-linear functions remain admissible. The singular vertex stays.
fn push_off_concave_arc(m: &mut MeridianMesh, center: [f64; 2], radius: f64) {
    let on_arc = |p: [f64; 2]| (dist(p, center) - radius).abs() < 1e-9 * radius;
    let arc: Vec<(usize, usize)> =
        boundary_edges(m).into_iter().filter(|&(a, b)| on_arc(m.vertices[a]) && on_arc(m.vertices[b])).collect();
    let target = radius * (1.0 + 1e-12);
    for _ in 0..200 {
        let mut moved = false;
        for &(a, b) in &arc {
            let f = if let Some(sv) = m.singular_vertex.filter(|&v| v == a || v == b) {
                // The chord touches the circle at the singular vertex; the
                // other end must lie beyond the tangent line there.
                let q = m.vertices[if sv == a { b } else { a }];
                let ps = m.vertices[sv];
                let proj = (q[0] - center[0]) * (ps[0] - center[0]) + (q[1] - center[1]) * (ps[1] - center[1]);
                if proj >= radius * radius {
                    continue;
                }
                radius * radius / proj * (1.0 + 1e-12)
            } else {
                let d = segment_distance(m.vertices[a], m.vertices[b], center);
                if d >= target {
                    continue;
                }
                target / d
            };
            for v in [a, b] {
                if Some(v) != m.singular_vertex {
                    let p = m.vertices[v];
                    m.vertices[v] = [center[0] + (p[0] - center[0]) * f, center[1] + (p[1] - center[1]) * f];
                }
            }
            moved = true;
        }
        if !moved {
            break;
        }
    }
}

/// Ear-clipping triangulation of a simple polygon, then uniform refinement
/// until every edge is shorter than `h`.
fn polygon_mesh(pts: &[[f64; 2]], h: f64) -> Result<MeridianMesh> {
    let n = pts.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n - 2);
    let inside = |p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        tri_area(a, b, p) >= 0.0 && tri_area(b, c, p) >= 0.0 && tri_area(c, a, p) >= 0.0
    };
    let mut guard = 0;
    while idx.len() > 3 {
        guard += 1;
        if guard > 10 * n * n {
            return Err(LabError::Geometry("polygon is not simple".into()));
        }
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (pts[ia], pts[ib], pts[ic]);
            if tri_area(a, b, c) <= 0.0 {
                continue;
            }
            let blocked = idx.iter().any(|&j| j != ia && j != ib && j != ic && inside(pts[j], a, b, c));
            if !blocked {
                tris.push([ia, ib, ic]);
                idx.remove(k);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return Err(LabError::Geometry("polygon is not simple".into()));
        }
    }
    tris.push([idx[0], idx[1], idx[2]]);
    let dir = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            // A vertex is free only if it is on the axis and both incident
            // polygon edges run along the axis or it is an interior axis point.
            let prev = pts[(i + n - 1) % n];
            let next = pts[(i + 1) % n];
            !(is_zero(p[0]) && is_zero(prev[0]) && is_zero(next[0]))
        })
        .collect();
    let mut mesh = finish(pts.to_vec(), tris, dir, None);
    orient(&mut mesh)?;
    while max_edge(&mesh) > h {
        mesh = refine(&mesh);
    }
    Ok(mesh)
}

fn max_edge(m: &MeridianMesh) -> f64 {
    m.triangles
        .iter()
        .flat_map(|t| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
        .map(|(a, b)| dist(m.vertices[a], m.vertices[b]))
        .fold(0.0, f64::max)
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Uniform red refinement: each triangle splits into four at edge midpoints.
///
/// New vertices lie on the old edges, so the finite-element spaces are nested.
pub fn refine(m: &MeridianMesh) -> MeridianMesh {
    let bset: std::collections::HashSet<(usize, usize)> = boundary_edges(m).into_iter().collect();
    let mut vertices = m.vertices.clone();
    let mut dirichlet = m.dirichlet.clone();
    let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>, dirichlet: &mut Vec<bool>| {
        let key = (a.min(b), a.max(b));
        *mid.entry(key).or_insert_with(|| {
            let (pa, pb) = (vertices[a], vertices[b]);
            let p = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            let on_dirichlet = bset.contains(&key) && m.dirichlet[a] && m.dirichlet[b] && !is_zero(p[0]);
            vertices.push(p);
            dirichlet.push(on_dirichlet);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * m.triangles.len());
    for t in &m.triangles {
        let ab = midpoint(t[0], t[1], &mut vertices, &mut dirichlet);
        let bc = midpoint(t[1], t[2], &mut vertices, &mut dirichlet);
        let ca = midpoint(t[2], t[0], &mut vertices, &mut dirichlet);
        triangles.push([t[0], ab, ca]);
        triangles.push([ab, t[1], bc]);
        triangles.push([ca, bc, t[2]]);
        triangles.push([ab, bc, ca]);
    }
    MeridianMesh { vertices, triangles, dirichlet, singular_vertex: m.singular_vertex, grading: m.grading }
}

impl MeridianMesh {
    pub fn free_count(&self) -> usize {
        self.dirichlet.iter().filter(|d| !**d).count()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut best = 180.0f64;
        for t in &self.triangles {
            let p = [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]];
            for k in 0..3 {
                let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - a[0], c[1] - a[1]];
                let cos = (u[0] * v[0] + u[1] * v[1])
                    / ((u[0] * u[0] + u[1] * u[1]).sqrt() * (v[0] * v[0] + v[1] * v[1]).sqrt());
                best = best.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        best
    }

    /// Longest edge; the nominal mesh size.
    pub fn h_max(&self) -> f64 {
        max_edge(self)
    }

    /// Plain-text dump: `v s z` lines, then `t i j k tag` lines where the tag
    /// is 2 for triangles touching the singular vertex, 1 for triangles with a
    /// Dirichlet vertex and 0 otherwise.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {:.17e} {:.17e}", v[0], v[1]);
        }
        for t in &self.triangles {
            let tag = if t.iter().any(|&i| Some(i) == self.singular_vertex) {
                2
            } else if t.iter().any(|&i| self.dirichlet[i]) {
                1
            } else {
                0
            };
            let _ = writeln!(out, "t {} {} {} {}", t[0], t[1], t[2], tag);
        }
        out
    }
}
