use hardylab::femlab::mesh::{boundary_edges, tri_area};
use hardylab::femlab::*;
use hardylab::quad::adaptive;
use hardylab::special::sphere_area;
use proptest::prelude::*;
use std::f64::consts::PI;

fn mesh(d: &MeridianDomain, h: f64) -> MeridianMesh {
    build_meridian_mesh(d, h, 1.7).unwrap()
}

#[test]
fn half_ball_boundary_vertices_lie_on_the_boundary() {
    let m = mesh(&MeridianDomain::half_ball(3, 1.0), 0.1);
    for (a, b) in boundary_edges(&m) {
        for v in [a, b] {
            let p = m.vertices[v];
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let off = p[0].abs().min(p[1].abs()).min((r - 1.0).abs());
            assert!(off < 1e-3, "vertex {v} at {p:?}");
        }
    }
}

#[test]
fn annulus_mesh_quality() {
    let m = mesh(&MeridianDomain::annulus(3, 1.0, 1.0), 0.1);
    assert!(m.min_angle_deg() > 20.0, "{}", m.min_angle_deg());
    // Inner boundary chords stay outside the unit ball.
    for (a, b) in boundary_edges(&m) {
        let (p, q) = (m.vertices[a], m.vertices[b]);
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            let x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
            assert!((x[0] * x[0] + x[1] * x[1]).sqrt() >= 1.0 - 1e-12);
        }
    }
}

#[test]
fn halving_h_quadruples_vertices() {
    for d in [
        MeridianDomain::half_ball(3, 1.0),
        MeridianDomain::annulus(3, 1.0, 1.0),
        MeridianDomain::cap_sector(3, 0.2, 1.0),
    ] {
        let a = mesh(&d, 0.1).vertices.len() as f64;
        let b = mesh(&d, 0.05).vertices.len() as f64;
        let r = b / a;
        assert!((3.0..=5.0).contains(&r), "{:?}: ratio {r}", d.kind);
    }
}

#[test]
fn cap_sector_and_exterior_domains_are_valid() {
    for d in [
        MeridianDomain::cap_sector(3, 0.2, 1.0),
        MeridianDomain::cap_sector(4, 0.05, 1.4),
        MeridianDomain::exterior_ball_complement(3, 1.0, 0.3),
    ] {
        let m = mesh(&d, 0.1);
        for t in &m.triangles {
            assert!(tri_area(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]) > 0.0);
        }
        assert!(m.min_angle_deg() > 5.0, "{:?}: {}", d.kind, m.min_angle_deg());
    }
}

/// `omega ∬ s^{n-2}` by tensor Gauss on each triangle.
fn meridian_volume(m: &MeridianMesh, n: usize) -> f64 {
    let (x, w) = hardylab::quad::gauss_legendre(6);
    let mut total = 0.0;
    for t in &m.triangles {
        let (a, b, c) = (m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
        let area = tri_area(a, b, c);
        for i in 0..6 {
            for j in 0..6 {
                let (u, v) = (0.5 * (x[i] + 1.0), 0.5 * (x[j] + 1.0));
                // Square to triangle: (u, v) -> (u (1 - v), u v).
                let (l1, l2) = (u * (1.0 - v), u * v);
                let s = a[0] + l1 * (b[0] - a[0]) + l2 * (c[0] - a[0]);
                total += 0.25 * w[i] * w[j] * u * 2.0 * area * s.powi(n as i32 - 2);
            }
        }
    }
    sphere_area(n - 2) * total
}

#[test]
fn linear_patch_test() {
    for n in [2, 3, 5] {
        let m = mesh(&MeridianDomain::half_ball(n, 1.0), 0.2);
        let sys = assemble_full(&m, n, &Weight::Unit).unwrap();
        let u: Vec<f64> = m.vertices.iter().map(|p| p[1]).collect();
        let vol = meridian_volume(&m, n);
        let ku = sys.k.quad_form(&u);
        assert!(((ku - vol) / vol).abs() < 1e-10, "n={n}: {ku} vs {vol}");
        // Unit-weight mass partitions the same volume.
        let ones = vec![1.0; u.len()];
        let mv = sys.m.quad_form(&ones);
        assert!(((mv - vol) / vol).abs() < 1e-10);
    }
    // Polygonal half ball approaches the exact volume 2 pi / 3.
    let m = mesh(&MeridianDomain::half_ball(3, 1.0), 0.05);
    assert!((meridian_volume(&m, 3) - 2.0 * PI / 3.0).abs() < 2e-3);
}

#[test]
fn matrices_are_exactly_symmetric_and_order_independent() {
    let m = mesh(&MeridianDomain::annulus(3, 1.0, 2.0), 0.2);
    let w = Weight::Hardy { z0: 1.0 };
    let sys = assemble(&m, 3, &w).unwrap();
    assert_eq!(sys.k.max_asymmetry(), 0.0);
    assert_eq!(sys.m.max_asymmetry(), 0.0);
    let mut rev = m.clone();
    rev.triangles.reverse();
    let sys2 = assemble(&rev, 3, &w).unwrap();
    for i in 0..sys.dofs() {
        for (j, v) in sys.k.row(i) {
            assert!((v - sys2.k.get(i, j)).abs() <= 1e-13 * v.abs().max(1.0));
        }
        for (j, v) in sys.m.row(i) {
            assert!((v - sys2.m.get(i, j)).abs() <= 1e-13 * v.abs().max(1e-3));
        }
    }
}

/// Reference `omega ∬ U^2 w s^{n-2}` for a piecewise-linear `U`: nested
/// adaptive Gauss-Kronrod on each triangle in collapsed coordinates centred
/// at the vertex nearest the pole.
fn reference_weighted_l2(m: &MeridianMesh, n: usize, pole: [f64; 2], u: &[f64]) -> f64 {
    let mut total = 0.0;
    for t in &m.triangles {
        let d = |k: usize| {
            let p = m.vertices[t[k]];
            (p[0] - pole[0]).hypot(p[1] - pole[1])
        };
        let apex = (0..3).min_by(|&a, &b| d(a).total_cmp(&d(b))).unwrap();
        let ids = [t[apex], t[(apex + 1) % 3], t[(apex + 2) % 3]];
        let (a, b, c) = (m.vertices[ids[0]], m.vertices[ids[1]], m.vertices[ids[2]]);
        let (ua, ub, uc) = (u[ids[0]], u[ids[1]], u[ids[2]]);
        let area2 = 2.0 * tri_area(a, b, c).abs();
        let inner = |xi: f64| {
            adaptive(
                |th: f64| {
                    let (l1, l2) = (xi * (1.0 - th), xi * th);
                    let x = [
                        a[0] + l1 * (b[0] - a[0]) + l2 * (c[0] - a[0]),
                        a[1] + l1 * (b[1] - a[1]) + l2 * (c[1] - a[1]),
                    ];
                    let uv = ua * (1.0 - xi) + ub * l1 + uc * l2;
                    let w = 1.0 / ((x[0] - pole[0]).powi(2) + (x[1] - pole[1]).powi(2));
                    uv * uv * w * x[0].powi(n as i32 - 2) * xi * area2
                },
                0.0,
                1.0,
                1e-15,
                1e-10,
            )
            .unwrap()
            .value
        };
        total += adaptive(inner, 0.0, 1.0, 1e-15, 1e-9).unwrap().value;
    }
    sphere_area(n - 2) * total
}

#[test]
fn hardy_mass_matches_adaptive_reference() {
    let m = mesh(&MeridianDomain::half_ball(3, 1.0), 0.2);
    let u: Vec<f64> =
        m.vertices.iter().zip(&m.dirichlet).map(|(p, &d)| if d { 0.0 } else { p[0].hypot(p[1]) }).collect();
    let sys = assemble(&m, 3, &Weight::Hardy { z0: 0.0 }).unwrap();
    let got = sys.m.quad_form(&sys.restrict(&u));
    let want = reference_weighted_l2(&m, 3, [0.0, 0.0], &u);
    assert!(((got - want) / want).abs() < 1e-4, "{got} vs {want}");
}

#[test]
fn free_vertex_at_pole_is_a_quadrature_error() {
    let m = mesh(&MeridianDomain::ball(3, 1.0), 0.25);
    assert!(assemble(&m, 3, &Weight::Hardy { z0: 0.0 }).is_err());
}

#[test]
fn ball_laplacian_first_eigenvalue() {
    // Separate reference: radial Sturm-Liouville solve on [0, 1] with weight
    // r^2, natural at 0 and Dirichlet at 1. Exact value pi^2.
    use hardylab::sturm1d::{solve_weighted, EndCondition, WeightedProblem};
    let w = |r: f64| r * r;
    let p = WeightedProblem { a: 0.0, b: 1.0, weight: &w, left: EndCondition::Natural, right: EndCondition::Dirichlet };
    let reference = solve_weighted(&p, 1, 256).unwrap().estimate.value;
    assert!((reference - PI * PI).abs() < 1e-6);
    // The limit of nested refinement is the inscribed polygon, so the base
    // mesh must already resolve the circle.
    let d = MeridianDomain::ball(3, 1.0);
    let tr = weighted_trace(&d, MeshOptions { h: 0.025, grading: 1.0, layers: 0 }, &Weight::Unit, 2, 1e-10).unwrap();
    let v = tr.values();
    let extrap = (4.0 * v[1] - v[0]) / 3.0;
    assert!((extrap - reference).abs() < 1e-3, "{v:?} -> {extrap} vs {reference}");
    assert!(v[1] < v[0]);
}

#[test]
fn half_ball_trace_decreases_toward_sharp_constant() {
    let tr = hardy_trace(&MeridianDomain::half_ball(3, 1.0), MeshOptions::default(), 4, 1e-8).unwrap();
    let v = tr.values();
    assert!(v.iter().all(|&x| x >= 2.25 - 1e-3), "{v:?}");
    assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
    assert!(tr.levels.iter().all(|l| l.residual <= 1e-8));
}

#[test]
fn centered_annulus_never_beats_closed_form() {
    // Pole at the centre of {1 < |x| < e^pi}: constant 1/4 + 1.
    let tau = PI.exp() - 1.0;
    let d = MeridianDomain::annulus(3, 1.0, tau);
    let opts = MeshOptions { h: 0.1, ..annulus_options(tau) };
    let tr = weighted_trace(&d, opts, &Weight::Hardy { z0: 0.0 }, 3, 1e-9).unwrap();
    let want = 1.25;
    for v in tr.values() {
        assert!(v >= want - 1e-9, "{v}");
    }
    assert!(tr.is_nonincreasing(0.0));
    assert!(tr.estimate().value < want * 1.01, "{:?}", tr.values());
}

#[test]
fn shell_function_quotient() {
    let tau = 100.0;
    let d = MeridianDomain::annulus(3, 1.0, tau);
    let m = refine(&refine(&build_meridian_mesh_with(&d, annulus_options(tau)).unwrap()));
    let u = shell_function(&m, 3, tau);
    let w = Weight::Hardy { z0: 1.0 };
    let q = certified_quotient(&m, 3, &w, &u).unwrap();
    let bound = shell_bound(3, tau);
    assert!(((q.quotient - bound) / bound).abs() < 0.1, "{q:?} vs {bound}");
    assert!(q.upper() < 2.25);
    assert!(q.quad_error < 1e-6);
}

#[test]
fn eigenvector_quotient_and_scaling() {
    let d = MeridianDomain::annulus(3, 1.0, 10.0);
    let m = build_meridian_mesh_with(&d, annulus_options(10.0)).unwrap();
    let sys = assemble(&m, 3, &Weight::Hardy { z0: 1.0 }).unwrap();
    let e = smallest_eig(&sys, 1e-10).unwrap();
    let q = hardy_quotient_of(&e.vector, &sys).unwrap();
    assert!((q - e.value).abs() < 1e-9);
    let zero = vec![0.0; sys.dofs()];
    assert!(hardy_quotient_of(&zero, &sys).is_err());
}

#[test]
fn lambda_tau_requirements() {
    let big = lambda_tau(3, 100.0, 4).unwrap();
    assert!(big.value < 2.25 && big.value <= 1.05 * shell_bound(3, 100.0));
    let thin = lambda_tau_trace(3, 0.05, 4, 1e-8).unwrap();
    assert!(thin.values().iter().all(|&v| v >= 2.25 - 1e-3), "{:?}", thin.values());
    assert!(thin.is_nonincreasing(0.0));
    let vals: Vec<f64> = [30.0, 50.0, 100.0].iter().map(|&t| lambda_tau(3, t, 3).unwrap().value).collect();
    assert!(vals[0] > vals[1] && vals[1] > vals[2], "{vals:?}");
}

#[test]
fn lambda_tau_rejects_bad_input() {
    assert!(lambda_tau(3, -1.0, 3).is_err());
    assert!(lambda_tau(3, 1.0, 1).is_err());
}

#[test]
fn mesh_dump_and_csv_shapes() {
    let m = mesh(&MeridianDomain::half_ball(3, 1.0), 0.25);
    let dump = m.dump();
    let nv = dump.lines().filter(|l| l.starts_with("v ")).count();
    let nt = dump.lines().filter(|l| l.starts_with("t ")).count();
    assert_eq!((nv, nt), (m.vertices.len(), m.triangles.len()));
    assert!(dump.lines().any(|l| l.starts_with("t ") && l.ends_with(" 2")));
    let tr = hardy_trace(&MeridianDomain::half_ball(3, 1.0), MeshOptions { h: 0.25, ..Default::default() }, 2, 1e-8)
        .unwrap();
    let csv = tr.to_csv();
    assert!(csv.starts_with("level,h,dofs,eigenvalue,residual\n"));
    assert_eq!(csv.lines().count(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn quotient_is_scale_invariant(c in prop::sample::select(vec![-3.0, -0.5, 1e-3, 2.0, 7.5]), seed in 0u64..1000) {
        let m = mesh(&MeridianDomain::half_ball(3, 1.0), 0.25);
        let sys = assemble(&m, 3, &Weight::Hardy { z0: 0.0 }).unwrap();
        let u: Vec<f64> = (0..sys.dofs()).map(|i| ((i as u64 * 7919 + seed) % 101) as f64 / 50.0 - 1.0).collect();
        prop_assume!(u.iter().any(|&x| x != 0.0));
        let q1 = hardy_quotient_of(&u, &sys).unwrap();
        let v: Vec<f64> = u.iter().map(|x| c * x).collect();
        let q2 = hardy_quotient_of(&v, &sys).unwrap();
        prop_assert!(((q1 - q2) / q1).abs() < 1e-14);
        prop_assert!(q1 >= 2.25 - 1e-9);
    }
}
