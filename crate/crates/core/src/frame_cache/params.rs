use serde::{Deserialize, Serialize};

use super::CacheError;

/// Temporal and spatial preprocessing budget for one modality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessParams {
    pub target_fps: f64,
    pub max_frames: usize,
    /// Per-frame pixel budget for video.
    pub max_pixels: usize,
    /// Pixel budget for still images; independent of the video budget.
    pub image_max_pixels: usize,
    pub patch_size: usize,
    pub merge_size: usize,
    pub temporal_patch_size: usize,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            target_fps: 2.0,
            max_frames: 128,
            max_pixels: 262_144,
            image_max_pixels: 1_048_576,
            patch_size: 14,
            merge_size: 2,
            temporal_patch_size: 2,
        }
    }
}

impl PreprocessParams {
    /// Spatial alignment factor: every output side is a multiple of this.
    pub fn factor(&self) -> usize {
        self.patch_size.saturating_mul(self.merge_size)
    }

    pub fn validate(&self) -> Result<(), CacheError> {
        let bad = |m: String| Err(CacheError::InvalidInput(m));
        if !(self.target_fps.is_finite() && self.target_fps > 0.0) {
            return bad(format!("target_fps must be positive, got {}", self.target_fps));
        }
        if self.patch_size == 0 || self.merge_size == 0 || self.temporal_patch_size == 0 {
            return bad("patch_size, merge_size and temporal_patch_size must be positive".into());
        }
        if self.max_frames < self.temporal_patch_size {
            return bad(format!(
                "max_frames {} is below temporal_patch_size {}",
                self.max_frames, self.temporal_patch_size
            ));
        }
        let min_area = self.factor().saturating_mul(self.factor());
        if self.max_pixels < min_area {
            return bad(format!("max_pixels {} is below {min_area}", self.max_pixels));
        }
        if self.image_max_pixels < min_area {
            return bad(format!(
                "image_max_pixels {} is below {min_area}",
                self.image_max_pixels
            ));
        }
        Ok(())
    }
}
