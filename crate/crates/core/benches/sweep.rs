use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use crane_guide::eval::{evaluate_sweep, Thresholds};
use crane_guide::par::Execution;
use crane_guide::pipeline::PipelineParams;
use crane_guide::synth::{sweep, SweepSpec};

const DISTANCES: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];
const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn render(c: &mut Criterion) {
    let spec = SweepSpec::default();
    let distances: Vec<f64> = DISTANCES.iter().cycle().take(20).copied().collect();
    let mut g = c.benchmark_group("render_sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| sweep(&spec, &distances, 7, exec).unwrap())
        });
    }
    g.finish();
}

fn evaluate(c: &mut Criterion) {
    let spec = SweepSpec::default();
    let params = PipelineParams::default();
    let mut g = c.benchmark_group("evaluate_sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| evaluate_sweep(&spec, &params, &DISTANCES, 4, 7, Thresholds::default(), exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, render, evaluate);
criterion_main!(benches);
