use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fracstep::strategies::{solve_by_shifting, solve_by_splitting};
use fracstep::*;

fn special(c: &mut Criterion) {
    c.bench_function("gamma", |b| b.iter(|| gamma(black_box(3.7))));
    let mut g = c.benchmark_group("mittag_leffler");
    let p = MLParams::new(0.4, 1.4).unwrap();
    for z in [-0.5, -5.0, -50.0] {
        g.bench_with_input(BenchmarkId::from_parameter(z), &z, |b, &z| {
            b.iter(|| mittag_leffler(p, black_box(z)))
        });
    }
    g.finish();
}

fn caputo(c: &mut Criterion) {
    let spec = make_problem(ProblemId::Ex1, 0.4, None).unwrap();
    let op = assemble(&spec.spatial).unwrap();
    let rule = CollocationRule::new(4).unwrap();
    let (sol, _) = run_adaptive(
        &spec,
        &barrier_for(&spec, BarrierKind::Generalized).unwrap(),
        &rule,
        &op,
        &AdaptiveParams::default().with_tol(1e-3),
    )
    .unwrap();
    let sys = SemiDiscreteSystem::new(&spec, &op, &rule).unwrap();
    c.bench_function("caputo_eval_ex1_mesh", |b| {
        b.iter(|| sys.caputo_eval(Frame::single(&sol), black_box(0.9)))
    });
}

fn runs(c: &mut Criterion) {
    let mut g = c.benchmark_group("ex1");
    g.sample_size(10);
    let spec = make_problem(ProblemId::Ex1, 0.4, None).unwrap();
    let op = assemble(&spec.spatial).unwrap();
    let rule = CollocationRule::new(4).unwrap();
    for tol in [1e-2, 1e-3] {
        let params = AdaptiveParams::default().with_tol(tol);
        g.bench_with_input(BenchmarkId::new("generalized", tol), &params, |b, p| {
            b.iter(|| solve(&spec, BarrierKind::Generalized, p).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("splitting", tol), &params, |b, p| {
            b.iter(|| solve_by_splitting(&spec, &rule, &op, p).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("shifting", tol), &params, |b, p| {
            b.iter(|| solve_by_shifting(&spec, &rule, &op, p).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, special, caputo, runs);
criterion_main!(benches);
