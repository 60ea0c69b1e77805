use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    cache_lookup, compute_grid_thw, resize_nearest, sample_frame_indices, smart_resize, CacheError,
    CacheKey, Decoder, FrameDType, FrameTensor, GridTHW, Lookup, PreprocessParams, VideoSource,
};
use crate::par::*;

/// Provenance that travels with preprocessed frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMetadata {
    pub source_fps: f64,
    pub total_source_frames: u64,
    pub sampled_indices: Vec<u64>,
    pub effective_fps: f64,
    pub height: usize,
    pub width: usize,
    /// Set once frames are sampled and resized; later stages must not redo either.
    pub resize_applied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub params: PreprocessParams,
    pub metadata: VideoMetadata,
    pub frames: FrameTensor,
    pub grid: GridTHW,
    pub checksum: [u8; 32],
}

impl CacheEntry {
    pub fn verify_checksum(&self) -> bool {
        buffer_checksum(&self.frames) == self.checksum
    }
}

pub(crate) fn buffer_checksum(frames: &FrameTensor) -> [u8; 32] {
    Sha256::digest(frames.data.to_le_bytes()).into()
}

/// Samples, resizes and converts a video without touching the cache.
pub fn decode_on_the_fly(
    source: &dyn VideoSource,
    path: &str,
    params: &PreprocessParams,
    dtype: FrameDType,
) -> Result<(FrameTensor, VideoMetadata, GridTHW), CacheError> {
    params.validate()?;
    let info = source.info();
    if info.width == 0 || info.height == 0 {
        return Err(CacheError::Source {
            path: path.to_string(),
            message: "zero-sized frames".into(),
        });
    }
    let indices = sample_frame_indices(info.total_frames, info.fps, params)?;
    let (out_h, out_w) = smart_resize(info.height, info.width, params.max_pixels, params.factor());

    let frames: Vec<Vec<u8>> = indices
        .par_iter()
        .map(|&i| {
            let raw = source.decode_frame(i)?;
            if raw.len() != info.height * info.width * 3 {
                return Err(CacheError::Source {
                    path: path.to_string(),
                    message: format!("frame {i} has {} bytes", raw.len()),
                });
            }
            Ok(resize_nearest(&raw, info.height, info.width, out_h, out_w, 3))
        })
        .collect::<Result<_, _>>()?;

    let dims = [indices.len(), out_h, out_w, 3];
    let tensor = FrameTensor::from_u8(dims, frames.concat(), dtype);
    let grid = compute_grid_thw(indices.len(), out_h, out_w, params)?;
    let metadata = VideoMetadata {
        source_fps: info.fps,
        total_source_frames: info.total_frames,
        effective_fps: indices.len() as f64 * info.fps / info.total_frames as f64,
        sampled_indices: indices,
        height: out_h,
        width: out_w,
        resize_applied: true,
    };
    Ok((tensor, metadata, grid))
}

/// Decodes, samples and resizes a video into a cache entry.
pub fn preprocess_video(
    source: &dyn VideoSource,
    path: &str,
    params: &PreprocessParams,
    dtype: FrameDType,
) -> Result<CacheEntry, CacheError> {
    let (frames, metadata, grid) = decode_on_the_fly(source, path, params, dtype)?;
    Ok(CacheEntry {
        key: CacheKey::new(path, params),
        params: *params,
        checksum: buffer_checksum(&frames),
        metadata,
        frames,
        grid,
    })
}

/// Where a loaded video came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadOrigin {
    Cache,
    Decoded,
}

/// Cache-first load with transparent fallback to decoding.
pub fn load_or_decode(
    path: &str,
    params: &PreprocessParams,
    decoder: &dyn Decoder,
    cache_root: Option<&Path>,
    dtype: FrameDType,
) -> Result<(CacheEntry, LoadOrigin), CacheError> {
    if let Some(root) = cache_root {
        if let Lookup::Hit(entry) = cache_lookup(path, params, root) {
            return Ok((entry, LoadOrigin::Cache));
        }
    }
    let source = decoder.open(path)?;
    let entry = preprocess_video(source.as_ref(), path, params, dtype)?;
    Ok((entry, LoadOrigin::Decoded))
}
