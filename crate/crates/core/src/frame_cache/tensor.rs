use serde::{Deserialize, Serialize};

use super::{CacheError, PreprocessParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FrameDType {
    /// Raw 0..=255 samples.
    U8,
    /// Samples divided by 255.
    #[default]
    F32,
}

impl FrameDType {
    pub fn tag(self) -> u8 {
        match self {
            FrameDType::U8 => 0,
            FrameDType::F32 => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(FrameDType::U8),
            1 => Some(FrameDType::F32),
            _ => None,
        }
    }

    pub fn bytes_per_channel(self) -> usize {
        match self {
            FrameDType::U8 => 1,
            FrameDType::F32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrameData {
    U8(Vec<u8>),
    F32(Vec<f32>),
}

impl FrameData {
    pub fn dtype(&self) -> FrameDType {
        match self {
            FrameData::U8(_) => FrameDType::U8,
            FrameData::F32(_) => FrameDType::F32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            FrameData::U8(v) => v.len(),
            FrameData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Little-endian byte image of the buffer, as stored on disk.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        match self {
            FrameData::U8(v) => v.clone(),
            FrameData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }
}

/// `(T, H, W, C)` frame stack, row-major, `C = 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTensor {
    pub dims: [usize; 4],
    pub data: FrameData,
}

impl FrameTensor {
    pub fn num_frames(&self) -> usize {
        self.dims[0]
    }

    pub fn height(&self) -> usize {
        self.dims[1]
    }

    pub fn width(&self) -> usize {
        self.dims[2]
    }

    pub fn dtype(&self) -> FrameDType {
        self.data.dtype()
    }

    /// Builds a tensor from raw `u8` frames, converting to the requested dtype.
    pub fn from_u8(dims: [usize; 4], raw: Vec<u8>, dtype: FrameDType) -> Self {
        debug_assert_eq!(raw.len(), dims.iter().product::<usize>());
        let data = match dtype {
            FrameDType::U8 => FrameData::U8(raw),
            FrameDType::F32 => FrameData::F32(raw.into_iter().map(|v| v as f32 / 255.0).collect()),
        };
        Self { dims, data }
    }
}

/// Patch-grid shape of a frame stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridTHW {
    pub t: usize,
    pub h: usize,
    pub w: usize,
}

impl GridTHW {
    /// Number of visual features after spatial merging: `t*h*w / merge^2`.
    pub fn feature_count(&self, merge_size: usize) -> Option<usize> {
        let cells = self.t * self.h * self.w;
        let merge = merge_size * merge_size;
        (merge > 0 && cells % merge == 0).then(|| cells / merge)
    }
}

pub fn compute_grid_thw(
    frames: usize,
    height: usize,
    width: usize,
    params: &PreprocessParams,
) -> Result<GridTHW, CacheError> {
    let factor = params.factor();
    if frames == 0 {
        return Err(CacheError::InvalidInput("frame stack is empty".into()));
    }
    if factor == 0 || height == 0 || width == 0 || height % factor != 0 || width % factor != 0 {
        return Err(CacheError::Alignment {
            height,
            width,
            factor,
        });
    }
    Ok(GridTHW {
        t: frames.div_ceil(params.temporal_patch_size),
        h: height / params.patch_size,
        w: width / params.patch_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let p = PreprocessParams::default();
        assert_eq!(
            compute_grid_thw(20, 420, 588, &p).unwrap(),
            GridTHW { t: 10, h: 30, w: 42 }
        );
        assert_eq!(compute_grid_thw(2, 28, 28, &p).unwrap(), GridTHW { t: 1, h: 2, w: 2 });
        assert_eq!(compute_grid_thw(3, 28, 28, &p).unwrap(), GridTHW { t: 2, h: 2, w: 2 });
    }

    #[test]
    fn misaligned_frames_are_rejected() {
        let p = PreprocessParams::default();
        assert!(matches!(
            compute_grid_thw(2, 30, 28, &p),
            Err(CacheError::Alignment { height: 30, .. })
        ));
        assert!(matches!(
            compute_grid_thw(2, 28, 14, &p),
            Err(CacheError::Alignment { .. })
        ));
        assert!(compute_grid_thw(0, 28, 28, &p).is_err());
    }

    #[test]
    fn feature_count_divides_by_merge_area() {
        let g = GridTHW { t: 10, h: 30, w: 42 };
        assert_eq!(g.feature_count(2), Some(3150));
        assert_eq!(GridTHW { t: 1, h: 3, w: 3 }.feature_count(2), None);
    }

    #[test]
    fn f32_conversion_normalizes() {
        let t = FrameTensor::from_u8([1, 1, 1, 3], vec![0, 255, 51], FrameDType::F32);
        assert_eq!(t.data, FrameData::F32(vec![0.0, 1.0, 0.2]));
        assert_eq!(t.data.to_le_bytes().len(), 12);
    }
}
