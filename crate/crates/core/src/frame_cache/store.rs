//! On-disk cache file format.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "EVR1CACH"                          8 bytes
//! format version                            u32
//! key digest                                32 bytes
//! params: target_fps f64, max_frames, max_pixels, image_max_pixels,
//!         patch_size, merge_size, temporal_patch_size (u64 each)
//! metadata: source_fps f64, total_source_frames u64, index count u64,
//!           indices u64[count], effective_fps f64, height u64, width u64
//! dtype tag u8 (0 = u8, 1 = f32)
//! dims 4 x u64 (T, H, W, C)
//! frame buffer
//! SHA-256 of the frame buffer               32 bytes
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use super::entry::buffer_checksum;
use super::{
    compute_grid_thw, CacheEntry, CacheError, CacheKey, FrameDType, FrameData, FrameTensor,
    PreprocessParams, VideoMetadata,
};

pub const CACHE_MAGIC: &[u8; 8] = b"EVR1CACH";
pub const CACHE_VERSION: u32 = 1;
/// Header bytes that do not depend on the frame count.
pub const FIXED_HEADER_BYTES: u64 = 8 + 4 + 32 + 7 * 8 + 6 * 8 + 1 + 4 * 8;

/// Result of a cache probe.
#[derive(Debug, Clone, PartialEq)]
pub enum Lookup {
    Hit(CacheEntry),
    /// Nothing usable was found. `warning` is set when a file existed but was rejected.
    Miss { warning: Option<CacheWarning> },
}

impl Lookup {
    pub fn is_hit(&self) -> bool {
        matches!(self, Lookup::Hit(_))
    }

    pub fn into_entry(self) -> Option<CacheEntry> {
        match self {
            Lookup::Hit(e) => Some(e),
            Lookup::Miss { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheWarning {
    pub file: PathBuf,
    pub reason: String,
}

pub fn cache_file_path(root: &Path, key: &CacheKey) -> PathBuf {
    root.join(key.to_hex())
}

pub fn encode_entry(entry: &CacheEntry) -> Vec<u8> {
    let buffer = entry.frames.data.to_le_bytes();
    let m = &entry.metadata;
    let mut out = Vec::with_capacity(
        FIXED_HEADER_BYTES as usize + 8 * m.sampled_indices.len() + buffer.len() + 32,
    );
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(entry.key.as_bytes());

    let p = &entry.params;
    out.extend_from_slice(&p.target_fps.to_le_bytes());
    for v in [
        p.max_frames,
        p.max_pixels,
        p.image_max_pixels,
        p.patch_size,
        p.merge_size,
        p.temporal_patch_size,
    ] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }

    out.extend_from_slice(&m.source_fps.to_le_bytes());
    out.extend_from_slice(&m.total_source_frames.to_le_bytes());
    out.extend_from_slice(&(m.sampled_indices.len() as u64).to_le_bytes());
    for i in &m.sampled_indices {
        out.extend_from_slice(&i.to_le_bytes());
    }
    out.extend_from_slice(&m.effective_fps.to_le_bytes());
    out.extend_from_slice(&(m.height as u64).to_le_bytes());
    out.extend_from_slice(&(m.width as u64).to_le_bytes());

    out.push(entry.frames.dtype().tag());
    for d in entry.frames.dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.extend_from_slice(&buffer);
    out.extend_from_slice(&entry.checksum);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize, String> {
        usize::try_from(self.u64()?).map_err(|e| e.to_string())
    }

    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn digest(&mut self) -> Result<[u8; 32], String> {
        Ok(self.take(32)?.try_into().unwrap())
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Parses and verifies a cache file image. Errors are human-readable reasons.
pub fn decode_entry(bytes: &[u8]) -> Result<CacheEntry, String> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != CACHE_MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != CACHE_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let key = CacheKey::from_bytes(r.digest()?);
    let params = PreprocessParams {
        target_fps: r.f64()?,
        max_frames: r.usize()?,
        max_pixels: r.usize()?,
        image_max_pixels: r.usize()?,
        patch_size: r.usize()?,
        merge_size: r.usize()?,
        temporal_patch_size: r.usize()?,
    };
    params.validate().map_err(|e| e.to_string())?;

    let source_fps = r.f64()?;
    let total_source_frames = r.u64()?;
    let count = r.usize()?;
    if count > r.remaining() / 8 {
        return Err(format!("index count {count} exceeds file size"));
    }
    let sampled_indices = (0..count).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
    let effective_fps = r.f64()?;
    let height = r.usize()?;
    let width = r.usize()?;

    let dtype = FrameDType::from_tag(r.u8()?).ok_or("unknown dtype tag")?;
    let dims = [r.usize()?, r.usize()?, r.usize()?, r.usize()?];
    if dims != [count, height, width, 3] {
        return Err(format!("dims {dims:?} disagree with metadata"));
    }
    let elems = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or("dims overflow")?;
    let nbytes = elems
        .checked_mul(dtype.bytes_per_channel())
        .ok_or("dims overflow")?;
    let raw = r.take(nbytes)?;
    let checksum = r.digest()?;
    if r.remaining() != 0 {
        return Err(format!("{} trailing bytes", r.remaining()));
    }

    let data = match dtype {
        FrameDType::U8 => FrameData::U8(raw.to_vec()),
        FrameDType::F32 => FrameData::F32(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
    };
    let frames = FrameTensor { dims, data };
    if buffer_checksum(&frames) != checksum {
        return Err("frame checksum mismatch".into());
    }
    let grid = compute_grid_thw(count, height, width, &params).map_err(|e| e.to_string())?;

    Ok(CacheEntry {
        key,
        params,
        metadata: VideoMetadata {
            source_fps,
            total_source_frames,
            sampled_indices,
            effective_fps,
            height,
            width,
            resize_applied: true,
        },
        frames,
        grid,
        checksum,
    })
}

/// Writes `entry` under `root` via a temporary file and an atomic rename.
pub fn cache_store(entry: &CacheEntry, root: &Path) -> Result<PathBuf, CacheError> {
    let storage = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CacheError::Storage { path, source }
    };
    std::fs::create_dir_all(root).map_err(storage(root))?;
    let target = cache_file_path(root, &entry.key);
    let mut tmp = tempfile::Builder::new()
        .prefix(".evr-partial-")
        .tempfile_in(root)
        .map_err(storage(root))?;
    tmp.write_all(&encode_entry(entry)).map_err(storage(tmp.path()))?;
    tmp.as_file().sync_all().map_err(storage(tmp.path()))?;
    tmp.persist(&target)
        .map_err(|e| CacheError::Storage {
            path: target.clone(),
            source: e.error,
        })?;
    Ok(target)
}

/// Looks up the entry for `(path, params)`. Unreadable, corrupt or stale
/// files degrade to a miss carrying a warning.
pub fn cache_lookup(path: &str, params: &PreprocessParams, root: &Path) -> Lookup {
    let key = CacheKey::new(path, params);
    let file = cache_file_path(root, &key);
    let bytes = match std::fs::read(&file) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Lookup::Miss { warning: None },
        Err(e) => return miss(file, e.to_string()),
    };
    match decode_entry(&bytes) {
        Ok(entry) if entry.key != key => miss(file, "digest does not match file name".into()),
        Ok(entry) if entry.params != *params => {
            miss(file, "stored preprocessing parameters differ".into())
        }
        Ok(entry) => Lookup::Hit(entry),
        Err(reason) => miss(file, reason),
    }
}

fn miss(file: PathBuf, reason: String) -> Lookup {
    log::warn!("ignoring cache file {}: {reason}", file.display());
    Lookup::Miss {
        warning: Some(CacheWarning { file, reason }),
    }
}
