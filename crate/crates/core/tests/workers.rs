use std::path::Path;

use evr_core::frame_cache::{
    batch_preprocess, FrameDType, ManifestItem, PreprocessParams, SyntheticDecoder,
    SyntheticVideoSpec,
};

fn manifest(videos: u64) -> Vec<ManifestItem> {
    let params = PreprocessParams { max_frames: 8, max_pixels: 12_544, ..Default::default() };
    (0..videos)
        .map(|seed| ManifestItem {
            path: SyntheticVideoSpec { seed, duration_sec: 4.0, source_fps: 4.0, width: 64, height: 48 }.to_string(),
            params,
        })
        .collect()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .flatten()
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn worker_count_does_not_change_the_cache() {
    let mut items = manifest(12);
    items.extend(manifest(5));
    let (one, eight) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let dec = SyntheticDecoder::new();
    let a = batch_preprocess(&items, 1, one.path(), &dec, FrameDType::F32).unwrap();
    let b = batch_preprocess(&items, 8, eight.path(), &dec, FrameDType::F32).unwrap();
    assert_eq!((a.processed, a.deduplicated), (12, 5));
    assert_eq!(a, b);
    assert_eq!(files(one.path()), files(eight.path()));
}

// Decoding is simulated as latency-bound (a fixed sleep per frame), so the
// comparison holds even on a single core.
#[cfg(feature = "parallel")]
#[test]
fn four_workers_beat_one() {
    use std::time::{Duration, Instant};

    let dec = SyntheticDecoder::with_frame_delay(Duration::from_millis(5));
    let items = manifest(16);
    let time = |workers| {
        let dir = tempfile::tempdir().unwrap();
        let t = Instant::now();
        let r = batch_preprocess(&items, workers, dir.path(), &dec, FrameDType::U8).unwrap();
        assert_eq!(r.processed, 16);
        t.elapsed()
    };
    let (t1, t4) = (time(1), time(4));
    assert!(t4 * 2 < t1, "workers=4 {t4:?} vs workers=1 {t1:?}");
}
