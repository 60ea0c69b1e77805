use std::collections::BTreeMap;
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;

use super::{BBox, GroundTruth, Interval, TaskType, Trajectory};

static ANSWER_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<answer>(.*?)</answer>").unwrap());
static SIGNED_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?").unwrap());
static UNSIGNED_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?").unwrap());

/// A task-specific answer parsed out of a response.
#[derive(Debug, Clone, PartialEq)]
pub enum Extracted {
    Choice(char),
    Number(f64),
    Interval(Interval),
    Box(BBox),
    Trajectory(Trajectory),
    Text(String),
}

impl fmt::Display for Extracted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extracted::Choice(c) => write!(f, "{c}"),
            Extracted::Number(v) => write!(f, "{v}"),
            Extracted::Interval(i) => write!(f, "{} {}", i.start, i.end),
            Extracted::Box(b) => write!(f, "{} {} {} {}", b.x1, b.y1, b.x2, b.y2),
            Extracted::Trajectory(t) => {
                write!(f, "{} {}", t.interval.start, t.interval.end)?;
                for (k, b) in &t.boxes {
                    write!(f, "; {k}: {} {} {} {}", b.x1, b.y1, b.x2, b.y2)?;
                }
                Ok(())
            }
            Extracted::Text(s) => f.write_str(s),
        }
    }
}

/// Content of the last `<answer>` span, else the last non-empty line.
pub fn answer_span(response: &str) -> Option<&str> {
    if let Some(m) = ANSWER_TAG.captures_iter(response).last() {
        return m.get(1).map(|g| g.as_str().trim());
    }
    response.lines().rev().map(str::trim).find(|l| !l.is_empty())
}

pub fn extract_answer(response: &str, task: TaskType) -> Option<Extracted> {
    let span = answer_span(response)?;
    match task {
        TaskType::MultipleChoice => parse_choice(span).map(Extracted::Choice),
        TaskType::Numerical | TaskType::Regression => last_number(span).map(Extracted::Number),
        TaskType::TemporalGrounding => parse_interval(span).map(Extracted::Interval),
        TaskType::SpatialGrounding => parse_box(span).map(Extracted::Box),
        TaskType::SpatioTemporalGrounding => parse_trajectory(span).map(Extracted::Trajectory),
        TaskType::OpenEnded
        | TaskType::Math
        | TaskType::Ocr
        | TaskType::Boolean
        | TaskType::Code
        | TaskType::Preference => Some(Extracted::Text(span.to_string())),
    }
}

/// Parses a bare ground-truth string written in the answer format of `task`.
pub fn parse_ground_truth(text: &str, task: TaskType) -> Option<GroundTruth> {
    if task == TaskType::Boolean {
        return match text.trim().to_lowercase().as_str() {
            "true" | "yes" => Some(GroundTruth::Boolean(true)),
            "false" | "no" => Some(GroundTruth::Boolean(false)),
            _ => None,
        };
    }
    let wrapped = format!("<answer>{text}</answer>");
    Some(match extract_answer(&wrapped, task)? {
        Extracted::Choice(c) => GroundTruth::Choice(c.to_ascii_uppercase()),
        Extracted::Number(v) => GroundTruth::Number(v),
        Extracted::Interval(i) => GroundTruth::Interval(i),
        Extracted::Box(b) => GroundTruth::Box(b),
        Extracted::Trajectory(t) => GroundTruth::Trajectory(t),
        Extracted::Text(t) => GroundTruth::Text(t.trim().to_string()),
    })
}

fn parse_choice(span: &str) -> Option<char> {
    let token = |t: &str| -> String {
        t.trim_matches(|c: char| !c.is_ascii_alphanumeric()).to_string()
    };
    for raw in span.split_whitespace() {
        let t = token(raw);
        let mut chars = t.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if c.is_ascii_uppercase() {
                return Some(c);
            }
        }
    }
    // a lone lowercase letter is still an answer
    let whole = token(span);
    let mut chars = whole.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_alphabetic() => Some(c.to_ascii_uppercase()),
        _ => None,
    }
}

fn numbers(re: &Regex, s: &str) -> Vec<f64> {
    re.find_iter(s)
        .filter_map(|m| m.as_str().parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .collect()
}

fn last_number(span: &str) -> Option<f64> {
    numbers(&SIGNED_NUMBER, span).pop()
}

fn parse_interval(span: &str) -> Option<Interval> {
    let v = numbers(&UNSIGNED_NUMBER, span);
    let i = Interval::new(*v.first()?, *v.get(1)?);
    i.is_valid().then_some(i)
}

fn parse_box(span: &str) -> Option<BBox> {
    let v = numbers(&UNSIGNED_NUMBER, span);
    if v.len() < 4 {
        return None;
    }
    let b = BBox::new(v[0], v[1], v[2], v[3]);
    b.is_valid().then_some(b)
}

/// `start end; frame: x1 y1 x2 y2; frame: x1 y1 x2 y2; ...`
fn parse_trajectory(span: &str) -> Option<Trajectory> {
    let mut parts = span.split(';');
    let interval = parse_interval(parts.next()?)?;
    let mut boxes = BTreeMap::new();
    for part in parts {
        if part.trim().is_empty() {
            continue;
        }
        let v = numbers(&UNSIGNED_NUMBER, part);
        if v.len() != 5 || v[0].fract() != 0.0 {
            return None;
        }
        let b = BBox::new(v[1], v[2], v[3], v[4]);
        if !b.is_valid() {
            return None;
        }
        boxes.insert(v[0] as u64, b);
    }
    Some(Trajectory { interval, boxes })
}
