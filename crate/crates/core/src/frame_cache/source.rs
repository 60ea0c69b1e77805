use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use super::CacheError;

/// Stream properties reported by a decoder before any frame is read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceInfo {
    pub fps: f64,
    pub total_frames: u64,
    pub width: usize,
    pub height: usize,
}

/// An opened video stream producing interleaved RGB `u8` frames.
pub trait VideoSource: Send + Sync {
    fn info(&self) -> SourceInfo;
    /// Returns frame `index` as `height * width * 3` bytes.
    fn decode_frame(&self, index: u64) -> Result<Vec<u8>, CacheError>;
}

/// Opens a video by path.
pub trait Decoder: Send + Sync {
    fn open(&self, path: &str) -> Result<Box<dyn VideoSource>, CacheError>;
}

/// Deterministic stand-in for a real video file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticVideoSpec {
    pub seed: u64,
    pub duration_sec: f64,
    pub source_fps: f64,
    pub width: usize,
    pub height: usize,
}

const SEED_MUL: u64 = 2_654_435_761;

impl SyntheticVideoSpec {
    pub fn total_frames(&self) -> u64 {
        (self.duration_sec * self.source_fps).round() as u64
    }

    /// Pixel value at (frame, row, col, channel).
    pub fn pixel(&self, frame: u64, y: usize, x: usize, c: usize) -> u8 {
        self.seed
            .wrapping_mul(SEED_MUL)
            .wrapping_add(frame.wrapping_mul(97))
            .wrapping_add((y as u64).wrapping_mul(31))
            .wrapping_add((x as u64).wrapping_mul(7))
            .wrapping_add(c as u64) as u8
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.duration_sec.is_finite() && self.duration_sec > 0.0) {
            return Err(format!("duration must be positive, got {}", self.duration_sec));
        }
        if !(self.source_fps.is_finite() && self.source_fps > 0.0) {
            return Err(format!("fps must be positive, got {}", self.source_fps));
        }
        if self.width == 0 || self.height == 0 {
            return Err("width and height must be positive".into());
        }
        if self.total_frames() == 0 {
            return Err("video has no frames".into());
        }
        Ok(())
    }
}

/// `synth:seed=7,duration=10,fps=10,width=640,height=480`
impl fmt::Display for SyntheticVideoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "synth:seed={},duration={},fps={},width={},height={}",
            self.seed, self.duration_sec, self.source_fps, self.width, self.height
        )
    }
}

impl FromStr for SyntheticVideoSpec {
    type Err = String;

    /// Accepts the `synth:` form above, or the same `key=value` pairs
    /// separated by commas or newlines (the contents of a `.synth` file).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.trim().strip_prefix("synth:").unwrap_or(s.trim());
        let mut seed = None;
        let mut duration = None;
        let mut fps = None;
        let mut width = None;
        let mut height = None;
        for part in body.split(|c| c == ',' || c == '\n') {
            let part = part.trim();
            if part.is_empty() || part.starts_with('#') {
                continue;
            }
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
            let (k, v) = (k.trim(), v.trim());
            let num_err = |e: &dyn fmt::Display| format!("bad value for {k}: {e}");
            match k {
                "seed" => seed = Some(v.parse::<u64>().map_err(|e| num_err(&e))?),
                "duration" => duration = Some(v.parse::<f64>().map_err(|e| num_err(&e))?),
                "fps" => fps = Some(v.parse::<f64>().map_err(|e| num_err(&e))?),
                "width" => width = Some(v.parse::<usize>().map_err(|e| num_err(&e))?),
                "height" => height = Some(v.parse::<usize>().map_err(|e| num_err(&e))?),
                other => return Err(format!("unknown key {other:?}")),
            }
        }
        let spec = Self {
            seed: seed.ok_or("missing seed")?,
            duration_sec: duration.ok_or("missing duration")?,
            source_fps: fps.ok_or("missing fps")?,
            width: width.ok_or("missing width")?,
            height: height.ok_or("missing height")?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

struct SyntheticSource {
    spec: SyntheticVideoSpec,
    path: String,
    delay: Duration,
}

impl VideoSource for SyntheticSource {
    fn info(&self) -> SourceInfo {
        SourceInfo {
            fps: self.spec.source_fps,
            total_frames: self.spec.total_frames(),
            width: self.spec.width,
            height: self.spec.height,
        }
    }

    fn decode_frame(&self, index: u64) -> Result<Vec<u8>, CacheError> {
        if index >= self.spec.total_frames() {
            return Err(CacheError::Source {
                path: self.path.clone(),
                message: format!("frame {index} out of range"),
            });
        }
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let (w, h) = (self.spec.width, self.spec.height);
        let mut buf = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    buf.push(self.spec.pixel(index, y, x, c));
                }
            }
        }
        Ok(buf)
    }
}

/// Decoder for synthetic videos.
///
/// A path starting with `synth:` is parsed inline; any other path is read as
/// a text file holding the same `key=value` pairs. `frame_delay` adds a fixed
/// sleep per decoded frame to mimic codec latency.
#[derive(Debug, Clone, Default)]
pub struct SyntheticDecoder {
    pub frame_delay: Duration,
}

impl SyntheticDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_frame_delay(frame_delay: Duration) -> Self {
        Self { frame_delay }
    }
}

impl Decoder for SyntheticDecoder {
    fn open(&self, path: &str) -> Result<Box<dyn VideoSource>, CacheError> {
        let err = |message: String| CacheError::Source {
            path: path.to_string(),
            message,
        };
        let spec: SyntheticVideoSpec = if path.trim_start().starts_with("synth:") {
            path.parse().map_err(err)?
        } else {
            let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
            text.parse().map_err(err)?
        };
        Ok(Box::new(SyntheticSource {
            spec,
            path: path.to_string(),
            delay: self.frame_delay,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_formula() {
        let spec = SyntheticVideoSpec {
            seed: 7,
            duration_sec: 1.0,
            source_fps: 1.0,
            width: 4,
            height: 4,
        };
        let expected = (7u64 * 2_654_435_761 + 3 * 97 + 2 * 31 + 1 * 7 + 2) % 256;
        assert_eq!(spec.pixel(3, 2, 1, 2) as u64, expected);
    }

    #[test]
    fn huge_seed_wraps_consistently_with_mod_256() {
        let spec = SyntheticVideoSpec {
            seed: u64::MAX,
            duration_sec: 1.0,
            source_fps: 1.0,
            width: 1,
            height: 1,
        };
        let exact = (u64::MAX as u128 * 2_654_435_761u128 + 5) % 256;
        assert_eq!(spec.pixel(0, 0, 0, 5) as u128, exact);
    }

    #[test]
    fn spec_round_trips_through_path_form() {
        let spec = SyntheticVideoSpec {
            seed: 7,
            duration_sec: 10.0,
            source_fps: 10.0,
            width: 640,
            height: 480,
        };
        let parsed: SyntheticVideoSpec = spec.to_string().parse().unwrap();
        assert_eq!(parsed, spec);
        let from_file: SyntheticVideoSpec =
            "seed=7\nduration=10\nfps=10\nwidth=640\nheight=480\n".parse().unwrap();
        assert_eq!(from_file, spec);
    }

    #[test]
    fn decoder_reports_bad_specs_as_source_errors() {
        let d = SyntheticDecoder::new();
        assert!(matches!(
            d.open("synth:seed=1,duration=0,fps=10,width=4,height=4"),
            Err(CacheError::Source { .. })
        ));
        assert!(matches!(
            d.open("/definitely/not/here.synth"),
            Err(CacheError::Source { .. })
        ));
        let src = d.open("synth:seed=1,duration=1,fps=10,width=4,height=2").unwrap();
        assert_eq!(src.info().total_frames, 10);
        assert_eq!(src.decode_frame(0).unwrap().len(), 4 * 2 * 3);
        assert!(src.decode_frame(10).is_err());
    }
}
