use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;

use super::{
    cache_lookup, cache_store, preprocess_video, CacheError, CacheKey, Decoder, FrameDType,
    PreprocessParams,
};
use crate::par::*;

/// One video to preprocess.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestItem {
    pub path: String,
    pub params: PreprocessParams,
}

impl ManifestItem {
    pub fn key(&self) -> CacheKey {
        CacheKey::new(&self.path, &self.params)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestLine {
    path: String,
    #[serde(alias = "target_fps")]
    fps: Option<f64>,
    max_frames: Option<usize>,
    max_pixels: Option<usize>,
}

/// Parses a preprocessing manifest.
///
/// Each non-blank, non-`#` line is either a bare path or a JSON object
/// `{"path": ..., "fps": ..., "max_frames": ..., "max_pixels": ...}` whose
/// optional fields override `base`.
pub fn parse_manifest(text: &str, base: &PreprocessParams) -> Vec<Result<ManifestItem, CacheError>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, line)| {
            let line = line.trim();
            let err = |message: String| CacheError::Manifest {
                line: i + 1,
                message,
            };
            let item = if line.starts_with('{') {
                let rec: ManifestLine = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
                ManifestItem {
                    path: rec.path,
                    params: PreprocessParams {
                        target_fps: rec.fps.unwrap_or(base.target_fps),
                        max_frames: rec.max_frames.unwrap_or(base.max_frames),
                        max_pixels: rec.max_pixels.unwrap_or(base.max_pixels),
                        ..*base
                    },
                }
            } else {
                ManifestItem {
                    path: line.to_string(),
                    params: *base,
                }
            };
            item.params.validate().map_err(|e| err(e.to_string()))?;
            Ok(item)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchFailure {
    pub path: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BatchReport {
    /// Unique keys decoded and written in this run.
    pub processed: usize,
    /// Manifest items whose key repeated an earlier item.
    pub deduplicated: usize,
    /// Unique keys that already had a valid cache file.
    pub already_cached: usize,
    pub failed: Vec<BatchFailure>,
    /// Hex digests of every cache file that exists for this manifest, in manifest order.
    pub keys: Vec<String>,
}

enum Outcome {
    Processed(String),
    Cached(String),
    Failed(BatchFailure),
}

/// Preprocesses every unique key in `items` into `root` using `workers` threads.
///
/// Deduplication happens up front in manifest order (first occurrence wins),
/// so the set of files written does not depend on the worker count or on
/// scheduling. Per-item failures are collected, never fatal.
pub fn batch_preprocess(
    items: &[ManifestItem],
    workers: usize,
    root: &Path,
    decoder: &dyn Decoder,
    dtype: FrameDType,
) -> Result<BatchReport, CacheError> {
    if workers == 0 {
        return Err(CacheError::InvalidInput("workers must be at least 1".into()));
    }
    std::fs::create_dir_all(root).map_err(|source| CacheError::Storage {
        path: root.to_path_buf(),
        source,
    })?;

    let mut seen = HashSet::new();
    let mut unique = Vec::new();
    for item in items {
        if seen.insert(item.key()) {
            unique.push(item);
        }
    }
    let deduplicated = items.len() - unique.len();

    let outcomes: Vec<Outcome> = crate::par::with_workers(workers, || {
        unique
            .par_iter()
            .map(|item| process_one(item, root, decoder, dtype))
            .collect()
    });

    let mut report = BatchReport {
        deduplicated,
        ..Default::default()
    };
    for o in outcomes {
        match o {
            Outcome::Processed(k) => {
                report.processed += 1;
                report.keys.push(k);
            }
            Outcome::Cached(k) => {
                report.already_cached += 1;
                report.keys.push(k);
            }
            Outcome::Failed(f) => report.failed.push(f),
        }
    }
    Ok(report)
}

fn process_one(item: &ManifestItem, root: &Path, decoder: &dyn Decoder, dtype: FrameDType) -> Outcome {
    if let Some(entry) = cache_lookup(&item.path, &item.params, root).into_entry() {
        return Outcome::Cached(entry.key.to_hex());
    }
    let result = decoder
        .open(&item.path)
        .and_then(|src| preprocess_video(src.as_ref(), &item.path, &item.params, dtype))
        .and_then(|entry| cache_store(&entry, root).map(|_| entry.key.to_hex()));
    match result {
        Ok(k) => Outcome::Processed(k),
        Err(e) => Outcome::Failed(BatchFailure {
            path: item.path.clone(),
            error: e.to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame_cache::{SyntheticDecoder, SyntheticVideoSpec};

    fn spec(seed: u64) -> String {
        SyntheticVideoSpec {
            seed,
            duration_sec: 2.0,
            source_fps: 4.0,
            width: 56,
            height: 56,
        }
        .to_string()
    }

    #[test]
    fn manifest_overrides_and_errors() {
        let base = PreprocessParams::default();
        let text = format!(
            "# comment\n{}\n\n{{\"path\": \"{}\", \"fps\": 4, \"max_pixels\": 10000}}\n{{\"path\": 3}}\n{{\"path\":\"x\",\"max_frames\":1}}\n",
            spec(1),
            spec(2)
        );
        let parsed = parse_manifest(&text, &base);
        assert_eq!(parsed.len(), 4);
        assert_eq!(parsed[0].as_ref().unwrap().params, base);
        let second = parsed[1].as_ref().unwrap();
        assert_eq!(second.params.target_fps, 4.0);
        assert_eq!(second.params.max_pixels, 10_000);
        assert!(matches!(parsed[2], Err(CacheError::Manifest { line: 5, .. })));
        assert!(parsed[3].is_err());
    }

    #[test]
    fn duplicates_processed_once_and_failures_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let p = PreprocessParams::default();
        let mut items: Vec<ManifestItem> = (0..6)
            .map(|s| ManifestItem {
                path: spec(s),
                params: p,
            })
            .collect();
        for s in [0, 1, 1, 5] {
            items.push(ManifestItem {
                path: spec(s),
                params: p,
            });
        }
        items.push(ManifestItem {
            path: "synth:seed=1".into(),
            params: p,
        });
        let report =
            batch_preprocess(&items, 4, dir.path(), &SyntheticDecoder::new(), FrameDType::U8).unwrap();
        assert_eq!(report.processed, 6);
        assert_eq!(report.deduplicated, 4);
        assert_eq!(report.failed.len(), 1);

        let again =
            batch_preprocess(&items, 2, dir.path(), &SyntheticDecoder::new(), FrameDType::U8).unwrap();
        assert_eq!(again.processed, 0);
        assert_eq!(again.already_cached, 6);
        assert_eq!(again.keys, report.keys);
    }

    #[test]
    fn zero_workers_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(batch_preprocess(&[], 0, dir.path(), &SyntheticDecoder::new(), FrameDType::U8).is_err());
    }
}
