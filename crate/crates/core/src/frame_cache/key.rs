use std::fmt;

use sha2::{Digest, Sha256};

use super::PreprocessParams;

const KEY_DOMAIN: &[u8] = b"evr1.cache-key";

/// SHA-256 over the length-prefixed encoding of
/// `(video_path, target_fps, max_frames, max_pixels)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey([u8; 32]);

impl CacheKey {
    pub fn new(video_path: &str, params: &PreprocessParams) -> Self {
        Self::from_fields(
            video_path,
            params.target_fps,
            params.max_frames as u64,
            params.max_pixels as u64,
        )
    }

    pub fn from_fields(video_path: &str, target_fps: f64, max_frames: u64, max_pixels: u64) -> Self {
        let mut h = Sha256::new();
        field(&mut h, KEY_DOMAIN);
        field(&mut h, video_path.as_bytes());
        field(&mut h, &target_fps.to_bits().to_le_bytes());
        field(&mut h, &max_frames.to_le_bytes());
        field(&mut h, &max_pixels.to_le_bytes());
        Self(h.finalize().into())
    }

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Lowercase hex; also the cache file name.
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

fn field(h: &mut Sha256, bytes: &[u8]) {
    h.update((bytes.len() as u64).to_le_bytes());
    h.update(bytes);
}

impl fmt::Debug for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CacheKey({})", self.to_hex())
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}
