use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use leafkit::audio_io::{white_noise, AudioClip};
use leafkit::diffengine::{backward_with, BackendModel, BackwardOptions, Model};
use leafkit::exec::ExecMode;
use leafkit::filterbank::GaborFilterbank;
use leafkit::frontend::{forward_with_plan, ConvPlan, FrontendParams};
use leafkit::initializers::{build_filterbank, InitKind, InitStrategy};
use leafkit::sensitivity::{trajectory_with, ResponseKind};

const FS: u32 = 16_000;

fn modes() -> Vec<(&'static str, ExecMode)> {
    let mut v = vec![("sequential", ExecMode::Sequential)];
    #[cfg(feature = "parallel")]
    v.push(("parallel", ExecMode::Parallel));
    v
}

fn frontend_params() -> FrontendParams {
    let fb = build_filterbank(&InitStrategy::new(InitKind::Mel), FS, 401).unwrap();
    FrontendParams::with_defaults(fb, 160, 401).unwrap()
}

fn clip(seed: u64) -> AudioClip {
    white_noise(FS as usize / 2, seed, FS)
}

fn bench_forward(c: &mut Criterion) {
    let fp = frontend_params();
    let x = clip(1);
    let plan = ConvPlan::new(x.len(), 401);
    let mut group = c.benchmark_group("frontend_forward");
    for (name, mode) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| forward_with_plan(black_box(&x), &fp, &plan, mode).unwrap())
        });
    }
    group.finish();
}

fn bench_backward(c: &mut Criterion) {
    let fp = frontend_params();
    let backend = BackendModel::random(fp.n_channels(), 64, 4, 0).unwrap();
    let model = Model::new(fp, backend, FS).unwrap();
    let clips: Vec<AudioClip> = (0..8).map(clip).collect();
    let refs: Vec<&AudioClip> = clips.iter().collect();
    let labels: Vec<usize> = (0..8).map(|i| i % 4).collect();
    let mut group = c.benchmark_group("batch_backward");
    group.sample_size(10);
    for (name, mode) in modes() {
        let opts = BackwardOptions { mode, ..Default::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| backward_with(black_box(&model), &refs, &labels, &opts).unwrap())
        });
    }
    group.finish();
}

fn bench_trajectory(c: &mut Criterion) {
    let base = build_filterbank(&InitStrategy::new(InitKind::Mel), FS, 401).unwrap();
    let snapshots: Vec<GaborFilterbank> = (0..31)
        .map(|k| {
            let eta = base.eta.iter().map(|e| (e + 1e-3 * k as f64).min(1.0)).collect();
            GaborFilterbank::new(eta, base.sigma_bw.clone(), 401).unwrap()
        })
        .collect();
    let mut group = c.benchmark_group("jsd_trajectory");
    for (name, mode) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| trajectory_with(black_box(&snapshots), 1024, ResponseKind::Magnitude, mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_forward, bench_backward, bench_trajectory);
criterion_main!(benches);
