use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use trijunction::field::{energy_and_gradient, Field2D, Grid};
use trijunction::par::{self, Mode};
use trijunction::potential::canonical_wellsystem;
use trijunction::vec2::Vec2;

fn seed(radius: f64, h: f64) -> Field2D {
    let grid = Grid::new(radius, h).unwrap();
    Field2D::from_global_fn(grid, |z| {
        let t = z.angle();
        let s = (z.norm() / radius).min(1.0);
        Vec2::polar(s, t) * 0.9
    })
}

fn energy_gradient(c: &mut Criterion) {
    let ws = canonical_wellsystem(1.0).unwrap();
    let mut group = c.benchmark_group("energy_and_gradient");
    group.sample_size(20);
    for radius in [16.0, 32.0] {
        let f = seed(radius, 0.125);
        let mut g = vec![Vec2::ZERO; f.grid.len()];
        for (name, mode) in [("sequential", Mode::Sequential), ("parallel", Mode::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, radius), &radius, |b, _| {
                par::set_mode(mode);
                b.iter(|| energy_and_gradient(&f, &ws, Some(&mut g)));
            });
        }
    }
    group.finish();
    par::set_mode(Mode::Parallel);
}

fn vector_ops(c: &mut Criterion) {
    let n = 1 << 20;
    let x: Vec<f64> = (0..n).map(|k| (k as f64).sin()).collect();
    let mut y: Vec<f64> = (0..n).map(|k| (k as f64).cos()).collect();
    let mut group = c.benchmark_group("vector_ops");
    for (name, mode) in [("sequential", Mode::Sequential), ("parallel", Mode::Parallel)] {
        group.bench_function(BenchmarkId::new("dot", name), |b| {
            par::set_mode(mode);
            b.iter(|| par::dot(&x, &y));
        });
        group.bench_function(BenchmarkId::new("axpy", name), |b| {
            par::set_mode(mode);
            b.iter(|| par::axpy(1e-9, &x, &mut y));
        });
    }
    group.finish();
    par::set_mode(Mode::Parallel);
}

criterion_group!(benches, energy_gradient, vector_ops);
criterion_main!(benches);
