use hardylab::conformal::*;
use hardylab::PointN;
use proptest::prelude::*;

#[test]
fn random_identity_suite_n3_n4() {
    for n in [3, 4] {
        let rep = conformal_suite(n, 1000, 11).unwrap();
        assert!(rep.passes(), "{rep:?}");
    }
}

#[test]
fn energy_invariance_for_standard_pullbacks() {
    for n in [3, 4] {
        for (kind, f) in standard_pullbacks(n) {
            let quad = QuadSpec::default();
            let e = pullback_energy_pair(&f, kind, n, quad).unwrap();
            assert!(e.image > 0.0);
            assert!(e.rel_gap() < 1e-6, "n={n} {kind:?}: {e:?}");
        }
    }
}

#[test]
fn energy_quadrature_self_converges() {
    let (kind, f) = standard_pullbacks(3).remove(0);
    let a = pullback_energy_pair(&f, kind, 3, QuadSpec { panels: 10, order: 8 }).unwrap();
    let b = pullback_energy_pair(&f, kind, 3, QuadSpec { panels: 14, order: 8 }).unwrap();
    assert!(((a.image - b.image) / b.image).abs() < 1e-8);
}

#[test]
fn support_outside_half_space_is_rejected() {
    // A bump straddling the unit sphere pulls back across {v_n = 0}.
    let f = ImageFunction::Radial { center: PointN::axis(3, 1.0), a: 0.0, b: 0.3, power: 4 };
    assert!(pullback_energy_pair(&f, MapKind::T, 3, QuadSpec::default()).is_err());
}

#[test]
fn image_sphere_sampling() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let r = 0.4;
    let ball = image_ball(3, r).unwrap();
    for _ in 0..200 {
        let d: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        let p = PointN::new(d.iter().map(|x| r * x / s).collect());
        let q = map_t(&p).unwrap();
        assert!(((q.dist(&ball.center) - ball.radius) / ball.radius).abs() < 1e-10);
    }
}

fn upper_point(n: usize) -> impl Strategy<Value = PointN> {
    (prop::collection::vec(-3.0f64..3.0, n - 1), 0.01f64..4.0).prop_map(|(mut c, z)| {
        c.push(z);
        PointN::new(c)
    })
}

proptest! {
    #[test]
    fn s_is_an_involution(v in upper_point(3)) {
        let back = map_s(&map_s(&v).unwrap()).unwrap();
        prop_assert!(back.dist(&v) <= 1e-12 * v.norm().max(1.0));
    }

    #[test]
    fn s_maps_half_space_into_unit_ball(v in upper_point(4)) {
        prop_assert!(map_s(&v).unwrap().norm() < 1.0);
    }

    #[test]
    fn kelvin_is_an_involution(c in prop::collection::vec(-5.0f64..5.0, 3)) {
        let x = PointN::new(c);
        prop_assume!(x.norm() > 1e-3);
        let back = kelvin(&kelvin(&x).unwrap()).unwrap();
        prop_assert!(back.dist(&x) <= 1e-14 * x.norm() * 4.0);
    }

    #[test]
    fn inverse_t_norm_identity(c in prop::collection::vec(-5.0f64..5.0, 3)) {
        let x = PointN::new(c);
        prop_assume!(x.shift_axis(1.0).norm() > 1e-3);
        let want = x.shift_axis(-1.0).norm() / x.shift_axis(1.0).norm();
        let got = inv_t(&x).unwrap().norm();
        prop_assert!(((got - want) / want).abs() < 1e-12);
    }
}
