use std::f64::consts::FRAC_PI_2;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hardylab::certificates::{random_trial_suite, InequalityId, InequalitySpec, TrialFamily};
use hardylab::femlab::{assemble, build_meridian_mesh_with, smallest_eig, MeridianDomain, MeshOptions, Weight};
use hardylab::potentials::{groundstate_identity_check, AxialBump, GroundStateTrial, GroundStateWeights, IdentityQuad};
use hardylab::speclog;
use hardylab::sturm1d::{cap_eigenpair, CapProblem, CapVariant};
use hardylab::Params;

fn special(c: &mut Criterion) {
    c.bench_function("eta_t0.3", |b| b.iter(|| speclog::eta(black_box(0.3)).unwrap()));
    c.bench_function("kappa_secant", |b| b.iter(|| speclog::solve_kappa_secant(black_box(1e-14)).unwrap()));
}

fn sturm(c: &mut Criterion) {
    let p = CapProblem { n: 3, angle: FRAC_PI_2, variant: CapVariant::Example, k: 1 };
    c.bench_function("cap_eigenpair_n3", |b| b.iter(|| cap_eigenpair(black_box(&p), 64).unwrap()));
}

fn fem(c: &mut Criterion) {
    let d = MeridianDomain::half_ball(3, 1.0);
    let mesh = build_meridian_mesh_with(&d, MeshOptions::default()).unwrap();
    let w = Weight::Hardy { z0: 0.0 };
    c.bench_function("halfball_assemble", |b| b.iter(|| assemble(black_box(&mesh), 3, &w).unwrap()));
    let sys = assemble(&mesh, 3, &w).unwrap();
    c.bench_function("halfball_smallest_eig", |b| b.iter(|| smallest_eig(black_box(&sys), 1e-8).unwrap()));
}

fn trials(c: &mut Criterion) {
    let spec = InequalitySpec::new(InequalityId::HalfballLogseries, Params { n: 3, r: 1.0, ..Params::default() });
    let mut g = c.benchmark_group("suites");
    g.sample_size(10);
    g.bench_function("halfball_logseries_100", |b| {
        b.iter(|| random_trial_suite(&spec, TrialFamily::Random, 100, black_box(1), false).unwrap())
    });
    let dom = InequalitySpec::domain(InequalityId::DomainLogseries, 3, 1.0).unwrap();
    g.bench_function("domain_logseries_100", |b| {
        b.iter(|| random_trial_suite(&dom, TrialFamily::Random, 100, black_box(1), false).unwrap())
    });
    g.finish();
}

fn identity(c: &mut Criterion) {
    let w = GroundStateWeights::new(3, 1.0).with_logs(2, 1.0);
    let bump = GroundStateTrial::Bump(AxialBump { center: 0.5, inner: 0.05, outer: 0.3, amplitude: 1.0 });
    c.bench_function("groundstate_identity", |b| {
        b.iter(|| groundstate_identity_check(black_box(&bump), &w, 1.0, &IdentityQuad::default()).unwrap())
    });
}

criterion_group!(benches, special, sturm, fem, trials, identity);
criterion_main!(benches);
