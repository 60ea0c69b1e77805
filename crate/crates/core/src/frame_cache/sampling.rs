use super::{CacheError, PreprocessParams};

/// Picks which source frames to keep.
///
/// The frame count is `floor(duration * target_fps)` clamped to
/// `[temporal_patch_size, max_frames]` and rounded down to a multiple of
/// `temporal_patch_size`. It never exceeds the number of source frames, so
/// the returned indices are always strictly increasing; a source shorter
/// than one temporal patch keeps every frame. Frame `i` of `n` is taken from
/// the centre of its bin, `floor((i + 0.5) * total / n)`.
pub fn sample_frame_indices(
    total_source_frames: u64,
    source_fps: f64,
    params: &PreprocessParams,
) -> Result<Vec<u64>, CacheError> {
    if total_source_frames == 0 {
        return Err(CacheError::InvalidInput("video has no frames".into()));
    }
    if !(source_fps.is_finite() && source_fps > 0.0) {
        return Err(CacheError::InvalidInput(format!(
            "source fps must be positive, got {source_fps}"
        )));
    }
    params.validate()?;

    let tp = params.temporal_patch_size as u64;
    let duration = total_source_frames as f64 / source_fps;
    let raw = (duration * params.target_fps).floor();
    if !raw.is_finite() {
        return Err(CacheError::InvalidInput("frame count overflow".into()));
    }
    let max_frames = params.max_frames as u64;
    let clamped = if raw >= max_frames as f64 {
        max_frames
    } else {
        (raw as u64).max(tp)
    };
    let mut n = (clamped / tp * tp).max(tp);
    if total_source_frames < tp {
        n = total_source_frames;
    } else {
        n = n.min(total_source_frames / tp * tp);
    }

    let total = total_source_frames as u128;
    let n128 = n as u128;
    Ok((0..n128)
        .map(|i| {
            let idx = ((2 * i + 1) * total) / (2 * n128);
            (idx as u64).min(total_source_frames - 1)
        })
        .collect())
}
