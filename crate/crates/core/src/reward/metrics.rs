//! Accuracy scorers. Every function here returns a value in `[0, 1]`.

use std::sync::LazyLock;

use regex::Regex;

use super::{BBox, Interval, RewardError, Trajectory};

/// 1 iff the trimmed strings match case-insensitively.
pub fn score_exact_match(pred: &str, gt: &str) -> f64 {
    indicator(pred.trim().to_lowercase() == gt.trim().to_lowercase())
}

/// Exact match with `yes`/`no` accepted for `true`/`false`.
pub fn score_boolean(pred: &str, gt: bool) -> f64 {
    let p = pred.trim().to_lowercase();
    let p = match p.trim_end_matches('.') {
        "yes" => "true",
        "no" => "false",
        other => other,
    };
    indicator(p == if gt { "true" } else { "false" })
}

/// 1 iff `|pred - gt| <= rel_tol * |gt|`; a zero target uses `rel_tol` as an
/// absolute tolerance.
pub fn score_numerical(pred: f64, gt: f64, rel_tol: f64) -> f64 {
    if !pred.is_finite() || !gt.is_finite() {
        return 0.0;
    }
    let tol = if gt == 0.0 {
        rel_tol
    } else {
        rel_tol * gt.abs().max(1e-9)
    };
    indicator((pred - gt).abs() <= tol)
}

/// Intersection over union of two time spans; 0 when the union is empty.
pub fn temporal_iou(pred: &Interval, gt: &Interval) -> f64 {
    let inter = (pred.end.min(gt.end) - pred.start.max(gt.start)).max(0.0);
    let union = pred.length() + gt.length() - inter;
    if !(union > 0.0) || !inter.is_finite() {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Area intersection over union of two boxes; 0 when the union is empty.
pub fn bbox_iou(pred: &BBox, gt: &BBox) -> f64 {
    let iw = (pred.x2.min(gt.x2) - pred.x1.max(gt.x1)).max(0.0);
    let ih = (pred.y2.min(gt.y2) - pred.y1.max(gt.y1)).max(0.0);
    let inter = iw * ih;
    let union = pred.area() + gt.area() - inter;
    if !(union > 0.0) || !inter.is_finite() {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// `0.5 * tIoU + 0.5 * mIoU`.
pub fn st_combine(t_iou: f64, m_iou: f64) -> f64 {
    0.5 * t_iou + 0.5 * m_iou
}

/// Spatio-temporal grounding score.
///
/// mIoU averages box IoU over frames that fall inside the temporal
/// intersection and carry a box in both trajectories; it is 0 when there is
/// no such frame.
pub fn st_grounding_score(pred: &Trajectory, gt: &Trajectory) -> f64 {
    let t_iou = temporal_iou(&pred.interval, &gt.interval);
    let lo = pred.interval.start.max(gt.interval.start);
    let hi = pred.interval.end.min(gt.interval.end);
    let mut sum = 0.0;
    let mut count = 0usize;
    if lo <= hi {
        for (frame, g) in &gt.boxes {
            let f = *frame as f64;
            if f < lo || f > hi {
                continue;
            }
            if let Some(p) = pred.boxes.get(frame) {
                sum += bbox_iou(p, g);
                count += 1;
            }
        }
    }
    let m_iou = if count == 0 { 0.0 } else { sum / count as f64 };
    st_combine(t_iou, m_iou).clamp(0.0, 1.0)
}

/// Lowercased whitespace tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1. Written as `2L / (|pred| + |ref|)`, which equals `2PR/(P+R)`.
pub fn rouge_l_f1<T: PartialEq>(pred: &[T], reference: &[T]) -> f64 {
    if pred.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let l = lcs_len(pred, reference);
    if l == 0 {
        return 0.0;
    }
    (2 * l) as f64 / (pred.len() + reference.len()) as f64
}

/// Word-level Levenshtein distance.
pub fn word_edit_distance<T: PartialEq>(pred: &[T], reference: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=pred.len()).collect();
    let mut cur = vec![0usize; pred.len() + 1];
    for (i, r) in reference.iter().enumerate() {
        cur[0] = i + 1;
        for (j, p) in pred.iter().enumerate() {
            let sub = prev[j] + usize::from(p != r);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[pred.len()]
}

/// `max(0, 1 - WER)` computed as `(|ref| - distance) / |ref|`.
pub fn wer_accuracy<T: PartialEq>(pred: &[T], reference: &[T]) -> Result<f64, RewardError> {
    if reference.is_empty() {
        return Err(RewardError::InvalidInput("WER needs a non-empty reference".into()));
    }
    let d = word_edit_distance(pred, reference);
    let n = reference.len();
    Ok(if d >= n { 0.0 } else { (n - d) as f64 / n as f64 })
}

static DECIMAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+\.\d+").unwrap());

fn normalize_math(s: &str) -> String {
    let mut t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    loop {
        let before = t.len();
        if let Some(inner) = t.strip_prefix("\\boxed{").and_then(|r| r.strip_suffix('}')) {
            t = inner.to_string();
        }
        if let Some(inner) = t.strip_prefix('$').and_then(|r| r.strip_suffix('$')) {
            t = inner.to_string();
        }
        if t.starts_with('{') && t.ends_with('}') && outer_braces_match(&t) {
            t = t[1..t.len() - 1].to_string();
        }
        if t.len() == before {
            break;
        }
    }
    DECIMAL
        .replace_all(&t, |c: &regex::Captures| {
            c[0].trim_end_matches('0').trim_end_matches('.').to_string()
        })
        .into_owned()
}

fn outer_braces_match(t: &str) -> bool {
    let mut depth = 0i32;
    for (i, c) in t.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 && i != t.len() - 1 {
                    return false;
                }
            }
            _ => {}
        }
    }
    depth == 0
}

fn parse_math_number(s: &str) -> Option<f64> {
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let (n, d) = s.split_once('/')?;
    let (n, d) = (n.parse::<f64>().ok()?, d.parse::<f64>().ok()?);
    let v = n / d;
    (d != 0.0 && v.is_finite()).then_some(v)
}

/// Normalized string equality, or numeric equality within `rel_tol`.
/// No algebraic equivalence: `x+1` and `1+x` do not match.
pub fn score_math(pred: &str, gt: &str, rel_tol: f64) -> f64 {
    let (p, g) = (normalize_math(pred), normalize_math(gt));
    if p.is_empty() {
        return 0.0;
    }
    if p == g {
        return 1.0;
    }
    match (parse_math_number(&p), parse_math_number(&g)) {
        (Some(a), Some(b)) => indicator((a - b).abs() <= rel_tol * b.abs().max(1e-12)),
        _ => 0.0,
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}
