use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use falsitav::covering::{generate_with, GenerateOptions};
use falsitav::falsify::{SimSut, SystemUnderTest};
use falsitav::par::Execution;
use falsitav::sim::perception::PerceptionParams;
use falsitav::sim::scenario::{urban_parameter_space, urban_scenario, urban_spec};
use falsitav::sim::simulate;
use falsitav::stl::Monitor;
use falsitav::trace::ParamValuation;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn valuations(n: usize) -> Vec<ParamValuation> {
    let space = urban_parameter_space();
    let sizes = space.discrete_sizes();
    let bounds = space.continuous_bounds();
    (0..n)
        .map(|k| {
            let levels: Vec<usize> = sizes.iter().enumerate().map(|(j, &s)| (k + j) % s).collect();
            let f = (k as f64 + 0.5) / n as f64;
            let values: Vec<f64> = bounds.iter().map(|&(lo, hi)| lo + f * (hi - lo)).collect();
            space.valuation(&levels, &values).unwrap()
        })
        .collect()
}

fn simulation_batch(c: &mut Criterion) {
    let sut = SimSut::new(
        urban_scenario(),
        urban_parameter_space(),
        PerceptionParams::default(),
        &urban_spec(),
        0.05,
        30.0,
        0,
    )
    .unwrap();
    let batch = valuations(16);
    let mut g = c.benchmark_group("simulation_batch_16");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exec.map_slice(&batch, |v| sut.evaluate(black_box(v)).unwrap()))
        });
    }
    g.finish();
}

fn covering_generation(c: &mut Criterion) {
    let domains = [5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 2, 4, 4, 4];
    let mut g = c.benchmark_group("covering_array_2way");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = GenerateOptions { candidates: 50, execution: exec };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| generate_with(2, black_box(&domains), 0, opts).unwrap())
        });
    }
    g.finish();
}

fn robustness_batch(c: &mut Criterion) {
    let cfg = urban_scenario();
    let traces: Vec<_> = (0..32)
        .map(|seed| simulate(&cfg, &PerceptionParams::default(), 0.05, 30.0, seed).unwrap().trace)
        .collect();
    let monitor = Monitor::new(&urban_spec());
    let mut g = c.benchmark_group("robustness_batch_32");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exec.map_slice(&traces, |t| monitor.robustness_at(black_box(t), 0).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, simulation_batch, covering_generation, robustness_batch);
criterion_main!(benches);
