//! Single-thread versus full-pool execution of the data-parallel paths.
//!
//! Built without the `parallel` feature both variants run sequentially,
//! which gives the baseline for the fallback build.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use evr_core::frame_cache::{
    batch_preprocess, FrameDType, ManifestItem, PreprocessParams, SyntheticDecoder,
    SyntheticVideoSpec,
};
use evr_core::reward::{GroundTruth, RewardConfig, RewardDispatcher, Sample, TaskType};
use evr_core::rollout::{pass_rate_filter, MockPolicy, PolicyConfig};

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

fn preprocess(c: &mut Criterion) {
    let params = PreprocessParams { max_frames: 16, max_pixels: 50_176, ..Default::default() };
    let items: Vec<ManifestItem> = (0..24)
        .map(|seed| ManifestItem {
            path: SyntheticVideoSpec { seed, duration_sec: 8.0, source_fps: 10.0, width: 320, height: 240 }
                .to_string(),
            params,
        })
        .collect();
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get()).max(2);
    let mut g = c.benchmark_group("batch_preprocess");
    g.sample_size(10);
    for (label, workers, delay) in [
        ("cpu", 1, Duration::ZERO),
        ("cpu", threads, Duration::ZERO),
        ("io_bound", 1, Duration::from_micros(200)),
        ("io_bound", threads, Duration::from_micros(200)),
    ] {
        let dec = SyntheticDecoder::with_frame_delay(delay);
        g.bench_with_input(BenchmarkId::new(label, workers), &workers, |b, &w| {
            b.iter_with_setup(
                || tempfile::tempdir().unwrap(),
                |dir| batch_preprocess(&items, w, dir.path(), &dec, FrameDType::F32).unwrap(),
            )
        });
    }
    g.finish();
}

fn filter(c: &mut Criterion) {
    let samples: Vec<Sample> = (0..512)
        .map(|i| Sample {
            id: format!("s{i}"),
            problem_type: TaskType::TemporalGrounding,
            data_type: Default::default(),
            prompt: String::new(),
            media_ref: None,
            ground_truth: GroundTruth::Interval([i as f64 % 30.0, i as f64 % 30.0 + 5.0].into()),
        })
        .collect();
    let policy = MockPolicy::for_samples(PolicyConfig::default(), &samples).unwrap();
    let rewards = RewardDispatcher::new(RewardConfig::default()).unwrap();
    let mut g = c.benchmark_group("pass_rate_filter");
    let single = pool(1);
    g.bench_function("one_thread", |b| {
        b.iter(|| single.install(|| pass_rate_filter(&samples, &policy, 8, &rewards).unwrap()))
    });
    g.bench_function("global_pool", |b| b.iter(|| pass_rate_filter(&samples, &policy, 8, &rewards).unwrap()));
    g.finish();
}

criterion_group!(benches, preprocess, filter);
criterion_main!(benches);
