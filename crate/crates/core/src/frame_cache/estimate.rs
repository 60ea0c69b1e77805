use super::{PreprocessParams, FIXED_HEADER_BYTES};

/// Frame count the sampling rule yields for a clip of `duration_sec`,
/// assuming the source has at least that many frames.
pub fn planned_frame_count(params: &PreprocessParams, duration_sec: f64) -> u64 {
    let tp = params.temporal_patch_size.max(1) as u64;
    let max_frames = params.max_frames as u64;
    let raw = (duration_sec.max(0.0) * params.target_fps).floor();
    let clamped = if !raw.is_finite() || raw >= max_frames as f64 {
        max_frames
    } else {
        (raw as u64).max(tp)
    };
    (clamped / tp * tp).max(tp)
}

/// Upper bound on the cache file size for a clip of `duration_sec`.
///
/// Every sampled frame is charged the full `max_pixels` budget, so real
/// files are never larger. Once the frame cap binds, the bound no longer
/// grows with duration.
pub fn estimate_cache_size(params: &PreprocessParams, duration_sec: f64, bytes_per_channel: u64) -> u64 {
    let n = planned_frame_count(params, duration_sec);
    let frames = n * params.max_pixels as u64 * 3 * bytes_per_channel;
    FIXED_HEADER_BYTES + 8 * n + frames + 32
}
