use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::metrics::*;
use super::{
    extract_answer, format_reward, Extracted, GroundTruth, RewardError, RewardScore, Sample,
    TaskType,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OcrMode {
    #[default]
    Wer,
    ExactMatch,
}

/// Per-task overrides of the global reward settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskOverride {
    pub accuracy_weight: Option<f64>,
    pub format_weight: Option<f64>,
    pub numerical_rel_tol: Option<f64>,
}

/// The `[reward]` configuration section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub accuracy_weight: f64,
    pub format_weight: f64,
    pub numerical_rel_tol: f64,
    pub math_rel_tol: f64,
    pub ocr_mode: OcrMode,
    pub overrides: BTreeMap<TaskType, TaskOverride>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            accuracy_weight: 0.9,
            format_weight: 0.1,
            numerical_rel_tol: 0.05,
            math_rel_tol: 1e-6,
            ocr_mode: OcrMode::Wer,
            overrides: BTreeMap::new(),
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        let mut weights = vec![(self.accuracy_weight, self.format_weight, self.numerical_rel_tol)];
        for o in self.overrides.values() {
            weights.push((
                o.accuracy_weight.unwrap_or(self.accuracy_weight),
                o.format_weight.unwrap_or(self.format_weight),
                o.numerical_rel_tol.unwrap_or(self.numerical_rel_tol),
            ));
        }
        for (a, f, tol) in weights {
            if !(a >= 0.0 && f >= 0.0 && a + f <= 1.0 + 1e-12) {
                return Err(RewardError::InvalidInput(format!(
                    "reward weights must be non-negative and sum to at most 1 (got {a} + {f})"
                )));
            }
            if !(tol >= 0.0) {
                return Err(RewardError::InvalidInput(format!("negative tolerance {tol}")));
            }
        }
        if !(self.math_rel_tol >= 0.0) {
            return Err(RewardError::InvalidInput("negative math tolerance".into()));
        }
        Ok(())
    }

    fn weights(&self, task: TaskType) -> (f64, f64) {
        let o = self.overrides.get(&task);
        (
            o.and_then(|o| o.accuracy_weight).unwrap_or(self.accuracy_weight),
            o.and_then(|o| o.format_weight).unwrap_or(self.format_weight),
        )
    }

    fn numerical_tol(&self, task: TaskType) -> f64 {
        self.overrides
            .get(&task)
            .and_then(|o| o.numerical_rel_tol)
            .unwrap_or(self.numerical_rel_tol)
    }
}

/// Scorer for tasks whose verification lives outside this process
/// (code execution, LLM judges).
pub trait ExternalHandler: Send + Sync {
    fn evaluate(&self, sample: &Sample, response: &str) -> Result<f64, RewardError>;
}

#[derive(Clone)]
enum Route {
    Builtin,
    External(Option<Arc<dyn ExternalHandler>>),
}

struct Outcome {
    accuracy: f64,
    unavailable: bool,
}

/// Collects routes before freezing them into a [`RewardDispatcher`].
pub struct DispatcherBuilder {
    config: RewardConfig,
    routes: HashMap<TaskType, Route>,
}

impl DispatcherBuilder {
    /// Registers a handler for an externally verified task.
    pub fn external(mut self, task: TaskType, handler: Arc<dyn ExternalHandler>) -> Self {
        self.routes.insert(task, Route::External(Some(handler)));
        self
    }

    /// Drops the route for `task`; `build` will then refuse to start.
    pub fn without_route(mut self, task: TaskType) -> Self {
        self.routes.remove(&task);
        self
    }

    pub fn build(self) -> Result<RewardDispatcher, RewardError> {
        self.config.validate()?;
        if let Some(missing) = TaskType::ALL.into_iter().find(|t| !self.routes.contains_key(t)) {
            return Err(RewardError::MissingRoute(missing));
        }
        Ok(RewardDispatcher {
            config: self.config,
            routes: self.routes,
        })
    }
}

/// Immutable route table from task type to scorer.
pub struct RewardDispatcher {
    config: RewardConfig,
    routes: HashMap<TaskType, Route>,
}

impl std::fmt::Debug for RewardDispatcher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RewardDispatcher")
            .field("config", &self.config)
            .field("routes", &self.routes.len())
            .finish()
    }
}

impl RewardDispatcher {
    pub fn builder(config: RewardConfig) -> DispatcherBuilder {
        let routes = TaskType::ALL
            .into_iter()
            .map(|t| {
                let route = match t {
                    TaskType::Code | TaskType::Preference => Route::External(None),
                    _ => Route::Builtin,
                };
                (t, route)
            })
            .collect();
        DispatcherBuilder { config, routes }
    }

    /// Dispatcher with every built-in route and no external handlers.
    pub fn new(config: RewardConfig) -> Result<Self, RewardError> {
        Self::builder(config).build()
    }

    pub fn config(&self) -> &RewardConfig {
        &self.config
    }

    /// Checks that the sample's ground truth fits its task type.
    pub fn validate_sample(&self, sample: &Sample) -> Result<(), RewardError> {
        let expected = sample.problem_type.expected_truth();
        let found = sample.ground_truth.variant_name();
        let mismatch = || RewardError::VariantMismatch {
            sample_id: sample.id.clone(),
            task: sample.problem_type,
            expected,
            found,
        };
        if expected != found {
            return Err(mismatch());
        }
        let bad = |m: &str| RewardError::InvalidInput(format!("sample {}: {m}", sample.id));
        match &sample.ground_truth {
            GroundTruth::Choice(c) if !c.is_ascii_uppercase() => {
                Err(bad("choice must be a letter A-Z"))
            }
            GroundTruth::Number(v) if !v.is_finite() => Err(bad("number must be finite")),
            GroundTruth::Interval(i) if !i.is_valid() => Err(bad("interval needs start <= end")),
            GroundTruth::Box(b) if !b.is_valid() => Err(bad("box needs x1 <= x2 and y1 <= y2")),
            GroundTruth::Trajectory(t)
                if !t.interval.is_valid() || t.boxes.values().any(|b| !b.is_valid()) =>
            {
                Err(bad("malformed trajectory"))
            }
            GroundTruth::Text(t)
                if sample.problem_type == TaskType::Ocr
                    && self.config.ocr_mode == OcrMode::Wer
                    && tokenize(t).is_empty() =>
            {
                Err(bad("OCR reference text is empty"))
            }
            _ => Ok(()),
        }
    }

    pub fn dispatch(&self, sample: &Sample, response: &str) -> Result<RewardScore, RewardError> {
        self.validate_sample(sample)?;
        let task = sample.problem_type;
        let route = self
            .routes
            .get(&task)
            .ok_or(RewardError::MissingRoute(task))?;
        let extracted = extract_answer(response, task);
        let outcome = match route {
            Route::Builtin => self.score_builtin(sample, extracted.as_ref())?,
            Route::External(None) => Outcome {
                accuracy: 0.0,
                unavailable: true,
            },
            Route::External(Some(handler)) => match handler.evaluate(sample, response) {
                Ok(a) if a.is_finite() => Outcome {
                    accuracy: a.clamp(0.0, 1.0),
                    unavailable: false,
                },
                Ok(a) => {
                    log::warn!("sample {}: handler returned {a}", sample.id);
                    Outcome {
                        accuracy: 0.0,
                        unavailable: true,
                    }
                }
                Err(e) => {
                    log::warn!("sample {}: {e}", sample.id);
                    Outcome {
                        accuracy: 0.0,
                        unavailable: true,
                    }
                }
            },
        };
        let format = format_reward(response);
        let (wa, wf) = self.config.weights(task);
        Ok(RewardScore {
            accuracy: outcome.accuracy,
            format,
            overall: wa * outcome.accuracy + wf * format,
            handler_unavailable: outcome.unavailable,
            extracted: extracted.map(|e| e.to_string()),
        })
    }

    fn score_builtin(&self, sample: &Sample, answer: Option<&Extracted>) -> Result<Outcome, RewardError> {
        let Some(answer) = answer else {
            return Ok(Outcome {
                accuracy: 0.0,
                unavailable: false,
            });
        };
        let cfg = &self.config;
        let task = sample.problem_type;
        let accuracy = match (&sample.ground_truth, answer) {
            (GroundTruth::Choice(g), Extracted::Choice(p)) => {
                score_exact_match(&p.to_string(), &g.to_string())
            }
            (GroundTruth::Number(g), Extracted::Number(p)) => {
                score_numerical(*p, *g, cfg.numerical_tol(task))
            }
            (GroundTruth::Interval(g), Extracted::Interval(p)) => temporal_iou(p, g),
            (GroundTruth::Box(g), Extracted::Box(p)) => bbox_iou(p, g),
            (GroundTruth::Trajectory(g), Extracted::Trajectory(p)) => st_grounding_score(p, g),
            (GroundTruth::Boolean(g), Extracted::Text(p)) => score_boolean(p, *g),
            (GroundTruth::Text(g), Extracted::Text(p)) => match task {
                TaskType::OpenEnded => rouge_l_f1(&tokenize(p), &tokenize(g)),
                TaskType::Math => score_math(p, g, cfg.math_rel_tol),
                TaskType::Ocr => match cfg.ocr_mode {
                    OcrMode::Wer => wer_accuracy(&tokenize(p), &tokenize(g))?,
                    OcrMode::ExactMatch => score_exact_match(p, g),
                },
                _ => 0.0,
            },
            _ => 0.0,
        };
        Ok(Outcome {
            accuracy,
            unavailable: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::{CannedJudge, DataType, Interval, JudgeHandler};

    fn sample(task: TaskType, gt: GroundTruth) -> Sample {
        Sample {
            id: "s1".into(),
            problem_type: task,
            data_type: DataType::Video,
            prompt: "q".into(),
            media_ref: Some("v.mp4".into()),
            ground_truth: gt,
        }
    }

    #[test]
    fn multiple_choice_full_marks() {
        let d = RewardDispatcher::new(RewardConfig::default()).unwrap();
        let s = sample(TaskType::MultipleChoice, GroundTruth::Choice('C'));
        let r = d.dispatch(&s, "<think>because</think><answer>C</answer>").unwrap();
        assert_eq!((r.accuracy, r.format, r.overall), (1.0, 1.0, 1.0));
        assert_eq!(r.extracted.as_deref(), Some("C"));
    }

    #[test]
    fn temporal_grounding_route() {
        let d = RewardDispatcher::new(RewardConfig::default()).unwrap();
        let s = sample(TaskType::TemporalGrounding, GroundTruth::Interval(Interval::new(3.0, 7.0)));
        let r = d.dispatch(&s, "<answer>2 5</answer>").unwrap();
        assert_eq!(r.accuracy, 0.4);
        assert_eq!(r.format, 0.0);
    }

    #[test]
    fn preference_without_judge_is_flagged() {
        let d = RewardDispatcher::new(RewardConfig::default()).unwrap();
        let s = sample(TaskType::Preference, GroundTruth::Text("be helpful".into()));
        let r = d.dispatch(&s, "<think>x</think><answer>hi</answer>").unwrap();
        assert_eq!(r.accuracy, 0.0);
        assert!(r.handler_unavailable);
    }

    #[test]
    fn preference_with_canned_judge() {
        let judge = CannedJudge::new().with_reply("s1", 0.75, "fine");
        let d = RewardDispatcher::builder(RewardConfig::default())
            .external(TaskType::Preference, Arc::new(JudgeHandler::new(judge)))
            .build()
            .unwrap();
        let s = sample(TaskType::Preference, GroundTruth::Text("be helpful".into()));
        let r = d.dispatch(&s, "<answer>hi</answer>").unwrap();
        assert_eq!(r.accuracy, 0.75);
        assert!(!r.handler_unavailable);
    }

    #[test]
    fn variant_mismatch_is_a_configuration_error() {
        let d = RewardDispatcher::new(RewardConfig::default()).unwrap();
        let s = sample(TaskType::TemporalGrounding, GroundTruth::Choice('A'));
        let err = d.dispatch(&s, "<answer>A</answer>").unwrap_err();
        assert!(matches!(err, RewardError::VariantMismatch { expected: "interval", .. }));
    }

    #[test]
    fn missing_route_fails_at_build_time() {
        let err = RewardDispatcher::builder(RewardConfig::default())
            .without_route(TaskType::Ocr)
            .build()
            .unwrap_err();
        assert!(matches!(err, RewardError::MissingRoute(TaskType::Ocr)));
    }

    #[test]
    fn overrides_and_ocr_modes() {
        let mut cfg = RewardConfig::default();
        cfg.overrides.insert(
            TaskType::Numerical,
            TaskOverride {
                numerical_rel_tol: Some(0.2),
                accuracy_weight: Some(1.0),
                format_weight: Some(0.0),
            },
        );
        let d = RewardDispatcher::new(cfg.clone()).unwrap();
        let s = sample(TaskType::Numerical, GroundTruth::Number(100.0));
        let r = d.dispatch(&s, "<answer>115</answer>").unwrap();
        assert_eq!((r.accuracy, r.overall), (1.0, 1.0));

        let ocr = sample(TaskType::Ocr, GroundTruth::Text("a b c".into()));
        assert_eq!(d.dispatch(&ocr, "<answer>a x c</answer>").unwrap().accuracy, 2.0 / 3.0);
        cfg.ocr_mode = OcrMode::ExactMatch;
        let d = RewardDispatcher::new(cfg).unwrap();
        assert_eq!(d.dispatch(&ocr, "<answer>a x c</answer>").unwrap().accuracy, 0.0);
        assert_eq!(d.dispatch(&ocr, "<answer>A B C</answer>").unwrap().accuracy, 1.0);
    }

    #[test]
    fn bad_weights_rejected() {
        let cfg = RewardConfig {
            accuracy_weight: 0.9,
            format_weight: 0.5,
            ..Default::default()
        };
        assert!(RewardDispatcher::new(cfg).is_err());
    }

    #[test]
    fn config_section_from_toml() {
        let doc = crate::config::ConfigDoc::parse(
            "[reward]\naccuracy_weight = 0.8\nformat_weight = 0.2\nocr_mode = \"exact_match\"\n\
             [reward.overrides.temporal_grounding]\nformat_weight = 0.0\n",
        )
        .unwrap();
        let cfg: RewardConfig = doc.section("reward").unwrap();
        assert_eq!(cfg.ocr_mode, OcrMode::ExactMatch);
        assert_eq!(cfg.weights(TaskType::TemporalGrounding), (0.8, 0.0));
        assert_eq!(cfg.weights(TaskType::Math), (0.8, 0.2));
    }
}
