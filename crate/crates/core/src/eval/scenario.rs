use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BenchItem, EngineConfig, EvalError, EvalRequest, MockConfig};
use crate::config::ConfigDoc;
use crate::seed;

const STREAM_REQUESTS: u64 = 0x4e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Arrival {
    #[default]
    AllAtStart,
    Timed,
}

/// The `[requests]` section: how request sizes and arrivals are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RequestGen {
    /// Items generated when no manifest is given.
    pub count: usize,
    pub prompt_tokens_min: usize,
    pub prompt_tokens_max: usize,
    pub max_new_tokens_min: usize,
    pub max_new_tokens_max: usize,
    pub arrival: Arrival,
    pub interarrival_ms: f64,
}

impl Default for RequestGen {
    fn default() -> Self {
        Self {
            count: 64,
            prompt_tokens_min: 1024,
            prompt_tokens_max: 4096,
            max_new_tokens_min: 16,
            max_new_tokens_max: 32,
            arrival: Arrival::AllAtStart,
            interarrival_ms: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyncConfig {
    pub batch_size: usize,
    pub cached: bool,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            cached: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AsyncConfig {
    pub cached: bool,
}

impl Default for AsyncConfig {
    fn default() -> Self {
        Self { cached: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub engine: EngineConfig,
    pub requests: RequestGen,
    pub sync: SyncConfig,
    pub async_mode: AsyncConfig,
    pub mock: MockConfig,
}

impl Scenario {
    pub fn from_doc(doc: &ConfigDoc) -> Result<Self, EvalError> {
        let s = Self {
            engine: doc.section("engine")?,
            requests: doc.section("requests")?,
            sync: doc.section("sync")?,
            async_mode: doc.section("async")?,
            mock: doc.section("mock")?,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        self.engine.validate()?;
        let r = &self.requests;
        if r.prompt_tokens_min < 1 || r.prompt_tokens_min > r.prompt_tokens_max {
            return Err(EvalError::Config("need 1 <= prompt_tokens_min <= prompt_tokens_max".into()));
        }
        if r.max_new_tokens_min > r.max_new_tokens_max {
            return Err(EvalError::Config("need max_new_tokens_min <= max_new_tokens_max".into()));
        }
        if !(r.interarrival_ms.is_finite() && r.interarrival_ms >= 0.0) {
            return Err(EvalError::Config("interarrival_ms must be >= 0".into()));
        }
        if self.sync.batch_size < 1 {
            return Err(EvalError::Config("sync batch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Builds one request per item. Missing sizes are drawn from
    /// `(seed, item id)`.
    pub fn build_requests(&self, items: &[BenchItem], seed_value: u64) -> Vec<EvalRequest> {
        let r = &self.requests;
        items
            .iter()
            .enumerate()
            .map(|(i, it)| {
                let id = &it.sample.id;
                let mut rng = seed::rng_for(seed_value, id, 0, STREAM_REQUESTS);
                let prompt = rng.gen_range(r.prompt_tokens_min..=r.prompt_tokens_max);
                let new = rng.gen_range(r.max_new_tokens_min..=r.max_new_tokens_max);
                EvalRequest {
                    id: id.clone(),
                    prompt_tokens: it.prompt_tokens.unwrap_or(prompt),
                    max_new_tokens: it.max_new_tokens.unwrap_or(new),
                    cache_ref: it.sample.media_ref.clone().unwrap_or_else(|| id.clone()),
                    arrival_ms: match r.arrival {
                        Arrival::AllAtStart => 0.0,
                        Arrival::Timed => i as f64 * r.interarrival_ms,
                    },
                }
            })
            .collect()
    }
}

/// Resolves a scenario path, trying `<path>.toml` when `path` is missing.
pub fn resolve_scenario_path(path: &Path) -> PathBuf {
    if path.exists() {
        return path.to_path_buf();
    }
    let mut with_ext = path.as_os_str().to_owned();
    with_ext.push(".toml");
    PathBuf::from(with_ext)
}

pub fn load_scenario(path: &Path, env: bool) -> Result<Scenario, EvalError> {
    let mut doc = ConfigDoc::load(resolve_scenario_path(path))?;
    if env {
        doc.apply_process_env();
    }
    Scenario::from_doc(&doc)
}
