use serde::{Deserialize, Serialize};

use super::{
    run_async, run_sync_baseline, speedup_report, AdapterRegistry, BenchItem, Completion,
    EvalError, MockEngine, Scenario,
};
use crate::reward::{RewardDispatcher, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub id: String,
    pub extracted: Option<String>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub benchmark: String,
    pub metric: String,
    pub value: f64,
    pub samples: usize,
    pub errors: usize,
    pub makespan_ms: f64,
    pub occupancy: f64,
    pub sync_makespan_ms: Option<f64>,
    pub sync_occupancy: Option<f64>,
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// In input order.
    pub records: Vec<ResultRecord>,
    pub errors: Vec<LineError>,
    pub summary: EvalSummary,
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Also run the batch-synchronous baseline and report the speedup.
    pub sync_baseline: bool,
    pub seed: u64,
}

fn score(
    completions: &[Completion],
    samples: &[&Sample],
    rewards: &RewardDispatcher,
) -> Result<Vec<ResultRecord>, EvalError> {
    let mut sorted: Vec<&Completion> = completions.iter().collect();
    sorted.sort_by_key(|c| c.request);
    sorted
        .into_iter()
        .map(|c| {
            let r = rewards.dispatch(samples[c.request], &c.text)?;
            Ok(ResultRecord {
                id: c.id.clone(),
                extracted: r.extracted,
                score: r.accuracy,
            })
        })
        .collect()
}

/// Loads a benchmark, runs it through the simulated pipeline and scores the
/// answers. Without a manifest the adapter generates `requests.count` items.
pub fn evaluate(
    registry: &AdapterRegistry,
    benchmark: &str,
    manifest: Option<&str>,
    scenario: &Scenario,
    rewards: &RewardDispatcher,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let adapter = registry.get(benchmark)?;
    let mut errors = Vec::new();
    let items: Vec<BenchItem> = match manifest {
        Some(text) => text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .filter_map(|(i, l)| {
                let parsed = adapter
                    .parse_line(l)
                    .and_then(|it| rewards.validate_sample(&it.sample).map(|_| it).map_err(|e| e.to_string()));
                match parsed {
                    Ok(it) => Some(it),
                    Err(message) => {
                        errors.push(LineError { line: i + 1, message });
                        None
                    }
                }
            })
            .collect(),
        None => adapter.generate(scenario.requests.count, opts.seed),
    };
    if items.is_empty() {
        return Err(EvalError::Config(format!(
            "no usable samples for {benchmark} ({} bad lines)",
            errors.len()
        )));
    }
    let samples: Vec<&Sample> = items.iter().map(|it| &it.sample).collect();
    let requests = scenario.build_requests(&items, opts.seed);
    let engine = MockEngine::new(scenario.mock.clone(), opts.seed, samples.iter().copied());

    let out = run_async(&requests, &scenario.engine, scenario.async_mode.cached, &engine)?;
    let records = score(&out.completions, &samples, rewards)?;
    let value = adapter.aggregate(&records.iter().map(|r| r.score).collect::<Vec<_>>());

    let mut summary = EvalSummary {
        benchmark: benchmark.to_string(),
        metric: adapter.metric_name().to_string(),
        value,
        samples: records.len(),
        errors: errors.len(),
        makespan_ms: out.trace.makespan_ms(),
        occupancy: out.trace.occupancy(),
        sync_makespan_ms: None,
        sync_occupancy: None,
        speedup: None,
    };
    if opts.sync_baseline {
        let sync = run_sync_baseline(
            &requests,
            &scenario.engine,
            scenario.sync.batch_size,
            scenario.sync.cached,
            &engine,
        )?;
        if score(&sync.completions, &samples, rewards)? != records {
            return Err(EvalError::Config("sync and async runs scored differently".into()));
        }
        let rep = speedup_report(&out.trace, &sync.trace);
        summary.sync_makespan_ms = Some(sync.trace.makespan_ms());
        summary.sync_occupancy = Some(rep.occupancy_sync);
        summary.speedup = Some(rep.speedup);
    }
    Ok(EvalReport { records, errors, summary })
}
