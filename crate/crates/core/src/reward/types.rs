use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Accuracy scoring family of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    MultipleChoice,
    Numerical,
    Regression,
    TemporalGrounding,
    SpatioTemporalGrounding,
    SpatialGrounding,
    OpenEnded,
    Math,
    Ocr,
    Boolean,
    Code,
    Preference,
}

impl TaskType {
    pub const ALL: [TaskType; 12] = [
        TaskType::MultipleChoice,
        TaskType::Numerical,
        TaskType::Regression,
        TaskType::TemporalGrounding,
        TaskType::SpatioTemporalGrounding,
        TaskType::SpatialGrounding,
        TaskType::OpenEnded,
        TaskType::Math,
        TaskType::Ocr,
        TaskType::Boolean,
        TaskType::Code,
        TaskType::Preference,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::MultipleChoice => "multiple_choice",
            TaskType::Numerical => "numerical",
            TaskType::Regression => "regression",
            TaskType::TemporalGrounding => "temporal_grounding",
            TaskType::SpatioTemporalGrounding => "spatio_temporal_grounding",
            TaskType::SpatialGrounding => "spatial_grounding",
            TaskType::OpenEnded => "open_ended",
            TaskType::Math => "math",
            TaskType::Ocr => "ocr",
            TaskType::Boolean => "boolean",
            TaskType::Code => "code",
            TaskType::Preference => "preference",
        }
    }

    /// Name of the ground-truth variant this task expects.
    pub fn expected_truth(self) -> &'static str {
        match self {
            TaskType::MultipleChoice => "choice",
            TaskType::Numerical | TaskType::Regression => "number",
            TaskType::TemporalGrounding => "interval",
            TaskType::SpatioTemporalGrounding => "trajectory",
            TaskType::SpatialGrounding => "box",
            TaskType::Boolean => "boolean",
            TaskType::OpenEnded
            | TaskType::Math
            | TaskType::Ocr
            | TaskType::Code
            | TaskType::Preference => "text",
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        let alias = match norm.as_str() {
            "mc" | "multiple_choice" => "multiple_choice",
            "st_grounding" | "spatial_temporal_grounding" => "spatio_temporal_grounding",
            "open_ended" | "video_qa" => "open_ended",
            "bool" => "boolean",
            other => other,
        };
        TaskType::ALL
            .into_iter()
            .find(|t| t.as_str() == alias)
            .ok_or_else(|| format!("unknown task type {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Image,
    #[default]
    Video,
}

/// Closed interval `[start, end]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_valid(&self) -> bool {
        self.start.is_finite() && self.end.is_finite() && self.start <= self.end
    }
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.start, i.end]
    }
}

/// Axis-aligned box `(x1, y1, x2, y2)`, serialized as a four-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }

    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite())
            && self.x1 <= self.x2
            && self.y1 <= self.y2
    }
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

/// A tracked object: the time span it is visible in plus per-frame boxes.
///
/// The interval is measured in frame-index units, so frame `f` lies in the
/// span when `start <= f <= end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub interval: Interval,
    pub boxes: BTreeMap<u64, BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    Choice(char),
    Number(f64),
    Interval(Interval),
    Box(BBox),
    Trajectory(Trajectory),
    Text(String),
    Boolean(bool),
}

impl GroundTruth {
    pub fn variant_name(&self) -> &'static str {
        match self {
            GroundTruth::Choice(_) => "choice",
            GroundTruth::Number(_) => "number",
            GroundTruth::Interval(_) => "interval",
            GroundTruth::Box(_) => "box",
            GroundTruth::Trajectory(_) => "trajectory",
            GroundTruth::Text(_) => "text",
            GroundTruth::Boolean(_) => "boolean",
        }
    }

    /// Canonical answer string, as a perfect response would put it in `<answer>`.
    pub fn answer_text(&self) -> String {
        match self {
            GroundTruth::Choice(c) => c.to_string(),
            GroundTruth::Number(v) => v.to_string(),
            GroundTruth::Interval(i) => format!("{} {}", i.start, i.end),
            GroundTruth::Box(b) => format!("{} {} {} {}", b.x1, b.y1, b.x2, b.y2),
            GroundTruth::Trajectory(t) => {
                let mut s = format!("{} {}", t.interval.start, t.interval.end);
                for (f, b) in &t.boxes {
                    s.push_str(&format!("; {f}: {} {} {} {}", b.x1, b.y1, b.x2, b.y2));
                }
                s
            }
            GroundTruth::Text(t) => t.clone(),
            GroundTruth::Boolean(b) => b.to_string(),
        }
    }
}

/// A training or evaluation instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub problem_type: TaskType,
    #[serde(default)]
    pub data_type: DataType,
    #[serde(default)]
    pub prompt: String,
    /// Video/image path or cache key.
    #[serde(default, alias = "media")]
    pub media_ref: Option<String>,
    pub ground_truth: GroundTruth,
}

/// Reward for one response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardScore {
    /// Task accuracy in `[0, 1]`.
    pub accuracy: f64,
    /// Template conformance, 0 or 1.
    pub format: f64,
    pub overall: f64,
    /// True when the task needs an external handler that is not registered.
    #[serde(default)]
    pub handler_unavailable: bool,
    /// Parsed answer, if any.
    #[serde(default)]
    pub extracted: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_names_round_trip() {
        for t in TaskType::ALL {
            assert_eq!(t.as_str().parse::<TaskType>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.as_str()));
        }
        assert_eq!("st-grounding".parse::<TaskType>().unwrap(), TaskType::SpatioTemporalGrounding);
        assert!("poetry".parse::<TaskType>().is_err());
    }

    #[test]
    fn sample_json_shape() {
        let json = r#"{"id":"s1","problem_type":"spatio_temporal_grounding","data_type":"video",
            "prompt":"track it","media":"synth:seed=1",
            "ground_truth":{"trajectory":{"interval":[2,5],"boxes":{"2":[0,0,1,1],"3":[0,0,2,2]}}}}"#;
        let s: Sample = serde_json::from_str(json).unwrap();
        assert_eq!(s.media_ref.as_deref(), Some("synth:seed=1"));
        let GroundTruth::Trajectory(t) = &s.ground_truth else { panic!() };
        assert_eq!(t.interval, Interval::new(2.0, 5.0));
        assert_eq!(t.boxes[&3], BBox::new(0.0, 0.0, 2.0, 2.0));
        let back: Sample = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
