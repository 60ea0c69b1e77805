use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{EvalRequest, Responder};
use crate::reward::Sample;
use crate::rollout::{candidate_answers, response_text};
use crate::seed;

const STREAM_ENGINE: u64 = 0xe9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MockMode {
    /// Echo the ground truth.
    Oracle,
    /// Always answer `answer`.
    Constant,
    /// Pick one of `vocab` candidates from a hash of the request id.
    #[default]
    Hashed,
}

/// The `[mock]` scenario section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockConfig {
    pub mode: MockMode,
    pub answer: String,
    pub vocab: usize,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            mode: MockMode::Hashed,
            answer: "A".into(),
            vocab: 4,
        }
    }
}

/// Deterministic stand-in for the model: the answer depends only on the
/// request id.
#[derive(Debug, Clone)]
pub struct MockEngine {
    cfg: MockConfig,
    seed: u64,
    pools: HashMap<String, Vec<String>>,
}

impl MockEngine {
    pub fn new<'a>(cfg: MockConfig, seed: u64, samples: impl IntoIterator<Item = &'a Sample>) -> Self {
        let vocab = cfg.vocab.max(1);
        let pools = samples
            .into_iter()
            .map(|s| (s.id.clone(), candidate_answers(&s.ground_truth, vocab)))
            .collect();
        Self { cfg, seed, pools }
    }

    pub fn answer(&self, id: &str) -> String {
        match self.cfg.mode {
            MockMode::Constant => self.cfg.answer.clone(),
            MockMode::Oracle => self
                .pools
                .get(id)
                .map(|p| p[0].clone())
                .unwrap_or_default(),
            MockMode::Hashed => match self.pools.get(id) {
                Some(pool) => {
                    let h = seed::derive(self.seed, id, 0, STREAM_ENGINE);
                    pool[(h % pool.len() as u64) as usize].clone()
                }
                None => String::new(),
            },
        }
    }
}

impl Responder for MockEngine {
    fn respond(&self, request: &EvalRequest) -> String {
        response_text(&self.answer(&request.id))
    }
}
