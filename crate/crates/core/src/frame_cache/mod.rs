//! Offline video preprocessing and the content-keyed frame cache.
//!
//! A video is sampled in time ([`sample_frame_indices`]), resized to a
//! factor-aligned pixel budget ([`smart_resize`]) and written as an
//! immutable cache file named after its [`CacheKey`]. Loading a cache file
//! and decoding on the fly go through the same math, so both paths yield
//! bit-identical frames, [`VideoMetadata`] and [`GridTHW`].

mod batch;
mod entry;
mod estimate;
mod key;
mod params;
mod resize;
mod sampling;
mod source;
mod store;
mod tensor;

pub use batch::{batch_preprocess, parse_manifest, BatchFailure, BatchReport, ManifestItem};
pub use entry::{decode_on_the_fly, load_or_decode, preprocess_video, CacheEntry, LoadOrigin, VideoMetadata};
pub use estimate::{estimate_cache_size, planned_frame_count};
pub use key::CacheKey;
pub use params::PreprocessParams;
pub use resize::{resize_nearest, smart_resize};
pub use sampling::sample_frame_indices;
pub use source::{Decoder, SourceInfo, SyntheticDecoder, SyntheticVideoSpec, VideoSource};
pub use store::{
    cache_file_path, cache_lookup, cache_store, decode_entry, encode_entry, CacheWarning, Lookup,
    CACHE_MAGIC, CACHE_VERSION, FIXED_HEADER_BYTES,
};
pub use tensor::{compute_grid_thw, FrameData, FrameDType, FrameTensor, GridTHW};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("frame size {height}x{width} is not a multiple of {factor}")]
    Alignment {
        height: usize,
        width: usize,
        factor: usize,
    },
    #[error("video source error for {path}: {message}")]
    Source { path: String, message: String },
    #[error("cache storage error at {path}: {source}")]
    Storage {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
}
