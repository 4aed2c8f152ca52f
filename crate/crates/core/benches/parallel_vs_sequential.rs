use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::f64::consts::PI;
use std::hint::black_box;
use torus_phase::critical::{find_minimizer, standard_seeds, SolveOptions};
use torus_phase::fft;
use torus_phase::inequality::{gap_suite, SuiteOptions};
use torus_phase::particles::{drift, ForceMode, ParticleState};
use torus_phase::potentials::{make_potential, ModelParams};
use torus_phase::spectral::Density;
use torus_phase::Exec;

const MODES: [Exec; 2] = [Exec::Sequential, Exec::Parallel];

fn particle_drift(c: &mut Criterion) {
    let w = make_potential(&ModelParams::DoiOnsager, 128).unwrap();
    let q0 = Density::from_grid(fft::grid_nodes(256).iter().map(|t| 1.0 + 0.3 * (4.0 * PI * t).cos()).collect()).unwrap();
    let state = ParticleState::sample(&q0, 5000, 1).unwrap();
    let mut g = c.benchmark_group("drift_n5000");
    for force in [ForceMode::FourierTruncated, ForceMode::FourierGridded] {
        for exec in MODES {
            g.bench_with_input(BenchmarkId::new(format!("{force:?}"), format!("{exec:?}")), &exec, |b, &exec| {
                b.iter(|| drift(black_box(state.positions()), &w, 2.8, force, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn minimizer_seeds(c: &mut Criterion) {
    let w = make_potential(&ModelParams::Transformer { beta: 3.0 }, 128).unwrap();
    let seeds = standard_seeds(0, 256, true).unwrap();
    let mut g = c.benchmark_group("find_minimizer_15_seeds");
    g.sample_size(10);
    for exec in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| find_minimizer(&w, 0.4, &seeds, &SolveOptions::default(), 1, exec).unwrap())
        });
    }
    g.finish();
}

fn inequality_suite(c: &mut Criterion) {
    let opts = SuiteOptions { samples: 50, ..Default::default() };
    let mut g = c.benchmark_group("gap_suite_150");
    g.sample_size(10);
    for exec in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| gap_suite(&opts, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, particle_drift, minimizer_seeds, inequality_suite);
criterion_main!(benches);
