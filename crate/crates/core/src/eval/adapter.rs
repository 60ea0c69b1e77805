use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::Deserialize;

use super::EvalError;
use crate::reward::{GroundTruth, Interval, Sample, TaskType};
use crate::seed;

/// A parsed benchmark item plus optional request sizing.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchItem {
    pub sample: Sample,
    pub prompt_tokens: Option<usize>,
    pub max_new_tokens: Option<usize>,
}

#[derive(Deserialize)]
struct Line {
    #[serde(flatten)]
    sample: Sample,
    #[serde(default)]
    prompt_tokens: Option<usize>,
    #[serde(default)]
    max_new_tokens: Option<usize>,
}

/// Plug-in description of one benchmark. The pipeline only talks to this
/// trait, so new benchmarks need no pipeline changes.
pub trait BenchmarkAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn task(&self) -> TaskType;
    /// Template with a `{question}` slot.
    fn prompt_template(&self) -> &str;
    fn metric_name(&self) -> &str;

    /// Generates `count` items with known answers.
    fn generate(&self, count: usize, seed: u64) -> Vec<BenchItem>;

    /// Parses one manifest line. `problem_type` defaults to the adapter's task.
    fn parse_line(&self, line: &str) -> Result<BenchItem, String> {
        let mut v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let obj = v.as_object_mut().ok_or("expected a JSON object")?;
        obj.entry("problem_type")
            .or_insert_with(|| self.task().as_str().into());
        let l: Line = serde_json::from_value(v).map_err(|e| e.to_string())?;
        if l.sample.problem_type != self.task() {
            return Err(format!(
                "problem_type {} does not match benchmark task {}",
                l.sample.problem_type,
                self.task()
            ));
        }
        Ok(BenchItem {
            sample: l.sample,
            prompt_tokens: l.prompt_tokens,
            max_new_tokens: l.max_new_tokens,
        })
    }

    fn format_prompt(&self, sample: &Sample) -> String {
        self.prompt_template().replace("{question}", &sample.prompt)
    }

    fn aggregate(&self, scores: &[f64]) -> f64 {
        if scores.is_empty() {
            0.0
        } else {
            scores.iter().sum::<f64>() / scores.len() as f64
        }
    }
}

/// Built-in adapter over generated data.
#[derive(Debug, Clone)]
pub struct SyntheticAdapter {
    name: String,
    task: TaskType,
    template: String,
    metric: String,
}

impl SyntheticAdapter {
    /// Four-option multiple choice with uniform answers.
    pub fn multiple_choice() -> Self {
        Self {
            name: "synthetic_mc".into(),
            task: TaskType::MultipleChoice,
            template: "{question}\nAnswer with the option letter.".into(),
            metric: "accuracy".into(),
        }
    }

    /// Temporal grounding scored by mean tIoU.
    pub fn temporal_grounding() -> Self {
        Self {
            name: "synthetic_tg".into(),
            task: TaskType::TemporalGrounding,
            template: "{question}\nGive the start and end time in seconds.".into(),
            metric: "mean_tiou".into(),
        }
    }
}

impl BenchmarkAdapter for SyntheticAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn task(&self) -> TaskType {
        self.task
    }

    fn prompt_template(&self) -> &str {
        &self.template
    }

    fn metric_name(&self) -> &str {
        &self.metric
    }

    fn generate(&self, count: usize, seed_value: u64) -> Vec<BenchItem> {
        (0..count)
            .map(|i| {
                let id = format!("{}-{i:05}", self.name);
                let mut rng = seed::rng_for(seed_value, &self.name, i as u64, 0);
                let (prompt, gt) = match self.task {
                    TaskType::TemporalGrounding => {
                        let start = rng.gen_range(0..120) as f64;
                        let len = rng.gen_range(4..40) as f64;
                        (
                            format!("When does event {i} happen?"),
                            GroundTruth::Interval(Interval::new(start, start + len)),
                        )
                    }
                    _ => (
                        format!("Question {i}: which option is correct? A, B, C or D."),
                        GroundTruth::Choice(char::from(b'A' + rng.gen_range(0..4u8))),
                    ),
                };
                BenchItem {
                    sample: Sample {
                        media_ref: Some(format!("synth:seed={i},duration=600,fps=30,width=64,height=48")),
                        id,
                        problem_type: self.task,
                        data_type: Default::default(),
                        prompt,
                        ground_truth: gt,
                    },
                    prompt_tokens: None,
                    max_new_tokens: None,
                }
            })
            .collect()
    }
}

/// Name-keyed set of adapters.
#[derive(Clone, Default)]
pub struct AdapterRegistry {
    adapters: BTreeMap<String, Arc<dyn BenchmarkAdapter>>,
}

impl AdapterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding the two synthetic adapters.
    pub fn builtin() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(SyntheticAdapter::multiple_choice())).unwrap();
        r.register(Arc::new(SyntheticAdapter::temporal_grounding())).unwrap();
        r
    }

    pub fn register(&mut self, adapter: Arc<dyn BenchmarkAdapter>) -> Result<(), EvalError> {
        let name = adapter.name().to_string();
        if self.adapters.contains_key(&name) {
            return Err(EvalError::DuplicateAdapter(name));
        }
        self.adapters.insert(name, adapter);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn BenchmarkAdapter>, EvalError> {
        self.adapters
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::UnknownBenchmark(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.adapters.keys().map(String::as_str)
    }
}
