//! Sequential vs parallel timings of the data-parallel kernels.
//!
//! "sequential" runs inside a one-thread rayon pool, "parallel" in a pool with
//! every core. Without the `parallel` feature only the sequential group runs.

use std::f64::consts::PI;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num::complex::Complex64;
use tree_carleman::carleman::{auto_clip, ratio_sweep, CarlemanInputs, TimeWindow};
use tree_carleman::inverse::{stability_sweep, Parametrization, StabilityConfig, StabilitySetup};
use tree_carleman::solver::{solve_modal, GridFunction, GridSpec, ModeSpec, RealField};
use tree_carleman::tree::five_edge_example;
use tree_carleman::weights::{construct_weights, default_root_poly, ratio};

const HORIZON: f64 = 2.0;

fn modes(grid: &GridSpec, count: u32) -> Vec<ModeSpec> {
    let tree = five_edge_example();
    (0..count)
        .map(|m| {
            let w = if m == 0 { 1.0 } else { m as f64 * PI / HORIZON };
            ModeSpec {
                m,
                phase: 0.0,
                boundary: tree.boundary_vertices().iter().map(|&k| (k, Complex64::new(0.2 / w, 0.0))).collect(),
                source: GridFunction::zeros(grid),
            }
        })
        .collect()
}

fn stability_modes(grid: &GridSpec) -> Vec<ModeSpec> {
    let mut specs = modes(grid, 6);
    specs.remove(1);
    for b in specs[0].boundary.values_mut() {
        *b = Complex64::new(1.0, 0.0);
    }
    specs
}

/// Runs `work` under the given thread count, or directly without rayon.
fn run_with<R>(threads: usize, work: impl FnOnce() -> R + Send) -> R
where
    R: Send,
{
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(work)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        work()
    }
}

fn thread_counts() -> Vec<(&'static str, usize)> {
    let mut v = vec![("sequential", 1)];
    #[cfg(feature = "parallel")]
    v.push(("parallel", std::thread::available_parallelism().map_or(1, |n| n.get())));
    v
}

fn bench_ratio_sweep(c: &mut Criterion) {
    let tree = five_edge_example();
    let family = construct_weights(&tree, &default_root_poly(), &ratio(0, 1), HORIZON).unwrap();
    let grid = GridSpec::uniform(&tree, 41).unwrap();
    let spec = ModeSpec {
        m: 1,
        phase: 0.0,
        boundary: Default::default(),
        source: GridFunction::from_fn(&grid, |_, x| Complex64::new(x.sin() + 0.5, 0.0)),
    };
    let modal = solve_modal(&tree, &grid, &RealField::filled(&grid, 1.0), HORIZON, &[spec]).unwrap();
    let window = TimeWindow { clip: auto_clip(&family, 1.0).unwrap(), n_time: 801 };
    let inputs = CarlemanInputs::from_modal(&family, &grid, &modal, window).unwrap();
    let s_grid: Vec<f64> = (1..=40).map(f64::from).collect();
    let mut group = c.benchmark_group("ratio_sweep");
    for (name, threads) in thread_counts() {
        group.bench_function(BenchmarkId::new(name, threads), |b| {
            b.iter(|| run_with(threads, || ratio_sweep(&inputs, &s_grid).unwrap()))
        });
    }
    group.finish();
}

fn bench_stability_sweep(c: &mut Criterion) {
    let tree = five_edge_example();
    let grid = GridSpec::uniform(&tree, 21).unwrap();
    let setup = StabilitySetup {
        modes: stability_modes(&grid),
        tree,
        grid,
        horizon: HORIZON,
        n_time: 81,
        param: Parametrization::new(1).unwrap(),
        min_abs_z: 0.5,
    };
    let config = StabilityConfig { n_pairs: 20, bound: 0.5, seed: 8, max_retries: 5 };
    let mut group = c.benchmark_group("stability_sweep");
    group.sample_size(20);
    for (name, threads) in thread_counts() {
        group.bench_function(BenchmarkId::new(name, threads), |b| {
            b.iter(|| run_with(threads, || stability_sweep(&setup, &config).unwrap()))
        });
    }
    group.finish();
}

fn bench_modal_solve(c: &mut Criterion) {
    let tree = five_edge_example();
    let grid = GridSpec::uniform(&tree, 401).unwrap();
    let specs = modes(&grid, 16);
    let potential = RealField::filled(&grid, 0.1);
    let mut group = c.benchmark_group("modal_solve");
    for (name, threads) in thread_counts() {
        group.bench_function(BenchmarkId::new(name, threads), |b| {
            b.iter(|| run_with(threads, || solve_modal(&tree, &grid, &potential, HORIZON, &specs).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_ratio_sweep, bench_stability_sweep, bench_modal_solve);
criterion_main!(benches);
