use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::RolloutError;
use crate::reward::{answer_span, GroundTruth, Sample};
use crate::seed;

pub(crate) const STREAM_INIT: u64 = 0x1217;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub vocab: usize,
    pub temperature: f64,
    pub seed: u64,
    /// Standard deviation of the initial logits.
    pub init_scale: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            vocab: 8,
            temperature: 1.0,
            seed: 0,
            init_scale: 1.0,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), RolloutError> {
        if self.vocab < 2 {
            return Err(RolloutError::InvalidInput("vocab must be at least 2".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(RolloutError::InvalidInput(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(RolloutError::InvalidInput("init_scale must be >= 0".into()));
        }
        Ok(())
    }
}

/// Categorical distribution over a sample's candidate answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyHead {
    pub answers: Vec<String>,
    pub logits: Vec<f64>,
}

impl PolicyHead {
    pub fn new(answers: Vec<String>, logits: Vec<f64>) -> Result<Self, RolloutError> {
        if answers.is_empty() || answers.len() != logits.len() {
            return Err(RolloutError::InvalidInput(format!(
                "head needs matching non-empty answers/logits ({} vs {})",
                answers.len(),
                logits.len()
            )));
        }
        if logits.iter().any(|z| z.is_nan() || *z == f64::INFINITY)
            || logits.iter().all(|z| *z == f64::NEG_INFINITY)
        {
            return Err(RolloutError::InvalidInput("logits must be finite or -inf".into()));
        }
        Ok(Self { answers, logits })
    }

    /// Head whose answer `correct` has probability `p` at temperature 1 and
    /// the remaining mass spread evenly. `p` of 0 or 1 uses `-inf` logits.
    pub fn with_probability(answers: Vec<String>, correct: usize, p: f64) -> Result<Self, RolloutError> {
        let v = answers.len();
        if correct >= v || !(0.0..=1.0).contains(&p) || v < 2 {
            return Err(RolloutError::InvalidInput(format!(
                "bad head spec: correct={correct}, p={p}, vocab={v}"
            )));
        }
        let rest = (1.0 - p) / (v - 1) as f64;
        let logits = (0..v)
            .map(|i| if i == correct { p.ln() } else { rest.ln() })
            .collect();
        Self::new(answers, logits)
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn position(&self, answer: &str) -> Option<usize> {
        let answer = answer.trim();
        self.answers.iter().position(|a| a == answer)
    }
}

pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .iter()
        .map(|z| ((z - max) / temperature).exp())
        .collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = logits.iter().map(|z| (z - max) / temperature).collect();
    let lse = shifted.iter().map(|s| s.exp()).sum::<f64>().ln();
    shifted.into_iter().map(|s| s - lse).collect()
}

/// Inverse-CDF draw; zero-probability entries are never returned.
pub(crate) fn draw(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Mock response for an answer string.
pub fn response_text(answer: &str) -> String {
    format!("<think>mock</think><answer>{answer}</answer>")
}

/// `vocab` distinct candidate answers with the ground truth first.
///
/// Distractors are built to score zero under the task's metric. Boolean
/// tasks only have two candidates.
pub fn candidate_answers(gt: &GroundTruth, vocab: usize) -> Vec<String> {
    let correct = gt.answer_text();
    let mut out = vec![correct];
    let push = |s: String, out: &mut Vec<String>| {
        if !out.contains(&s) {
            out.push(s);
        }
    };
    let mut j = 1usize;
    while out.len() < vocab && j <= 4 * vocab + 32 {
        let jf = j as f64;
        let cand = match gt {
            GroundTruth::Choice(c) => (b'A'..=b'Z')
                .map(char::from)
                .filter(|l| l != c)
                .nth(j - 1)
                .map(|l| l.to_string()),
            GroundTruth::Number(v) => {
                let step = v.abs().max(1.0) * 0.5 * ((j + 1) / 2) as f64;
                Some(if j % 2 == 1 { v + step } else { v - step }.to_string())
            }
            GroundTruth::Interval(i) => {
                let shift = (i.length() + 1.0) * jf;
                Some(format!("{} {}", i.start + shift, i.end + shift))
            }
            GroundTruth::Box(b) => {
                let shift = (b.x2 - b.x1 + 1.0) * jf;
                Some(format!("{} {} {} {}", b.x1 + shift, b.y1, b.x2 + shift, b.y2))
            }
            GroundTruth::Trajectory(t) => {
                let shift = (t.interval.length() + 1.0).ceil() * jf;
                let mut s = format!("{} {}", t.interval.start + shift, t.interval.end + shift);
                for (f, b) in &t.boxes {
                    let f = f + shift as u64;
                    s.push_str(&format!("; {f}: {} {} {} {}", b.x1, b.y1, b.x2, b.y2));
                }
                Some(s)
            }
            GroundTruth::Boolean(b) => (j == 1).then(|| (!b).to_string()),
            GroundTruth::Text(t) => {
                let n = t.split_whitespace().count().max(1);
                Some(vec![format!("w{j}"); n].join(" "))
            }
        };
        match cand {
            Some(c) => push(c, &mut out),
            None => break,
        }
        j += 1;
    }
    out
}

/// Differentiable stand-in for the actor: one categorical head per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockPolicy {
    pub config: PolicyConfig,
    heads: BTreeMap<String, PolicyHead>,
}

impl MockPolicy {
    pub fn new(config: PolicyConfig) -> Result<Self, RolloutError> {
        config.validate()?;
        Ok(Self {
            config,
            heads: BTreeMap::new(),
        })
    }

    /// Policy with a seeded head for each sample.
    pub fn for_samples<'a>(
        config: PolicyConfig,
        samples: impl IntoIterator<Item = &'a Sample>,
    ) -> Result<Self, RolloutError> {
        let mut policy = Self::new(config)?;
        for s in samples {
            policy.add_sample(s);
        }
        Ok(policy)
    }

    /// Creates the sample's head if it does not exist yet.
    pub fn add_sample(&mut self, sample: &Sample) {
        if self.heads.contains_key(&sample.id) {
            return;
        }
        let answers = candidate_answers(&sample.ground_truth, self.config.vocab);
        let mut rng = seed::rng_for(self.config.seed, &sample.id, 0, STREAM_INIT);
        let logits = answers
            .iter()
            .map(|_| self.config.init_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        self.heads
            .insert(sample.id.clone(), PolicyHead { answers, logits });
    }

    pub fn insert_head(&mut self, id: impl Into<String>, head: PolicyHead) {
        self.heads.insert(id.into(), head);
    }

    pub fn head(&self, id: &str) -> Result<&PolicyHead, RolloutError> {
        self.heads
            .get(id)
            .ok_or_else(|| RolloutError::UnknownSample(id.to_string()))
    }

    pub(crate) fn head_mut(&mut self, id: &str) -> Result<&mut PolicyHead, RolloutError> {
        self.heads
            .get_mut(id)
            .ok_or_else(|| RolloutError::UnknownSample(id.to_string()))
    }

    pub fn heads(&self) -> impl Iterator<Item = (&str, &PolicyHead)> {
        self.heads.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn probs(&self, id: &str) -> Result<Vec<f64>, RolloutError> {
        Ok(softmax(&self.head(id)?.logits, self.config.temperature))
    }

    pub fn log_prob(&self, id: &str, action: usize) -> Result<f64, RolloutError> {
        let head = self.head(id)?;
        log_softmax(&head.logits, self.config.temperature)
            .get(action)
            .copied()
            .ok_or_else(|| RolloutError::InvalidInput(format!("action {action} outside head of {id}")))
    }

    /// Draws an answer index; reproducible from `(seed, id, slot, stream)`.
    pub fn sample_action(&self, id: &str, slot: u64, stream: u64) -> Result<usize, RolloutError> {
        let probs = self.probs(id)?;
        let u: f64 = seed::rng_for(self.config.seed, id, slot, stream).gen();
        Ok(draw(&probs, u))
    }

    /// Vocabulary index of a full response, matched on its answer span.
    pub fn action_of_response(&self, id: &str, response: &str) -> Result<Option<usize>, RolloutError> {
        let head = self.head(id)?;
        Ok(answer_span(response).and_then(|a| head.position(a)))
    }
}
