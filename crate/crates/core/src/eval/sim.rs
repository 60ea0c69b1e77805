use serde::{Deserialize, Serialize};

use super::EvalError;

/// Virtual milliseconds to integer nanoseconds.
pub fn ms_to_ns(ms: f64) -> u64 {
    (ms * 1e6).round() as u64
}

pub fn ns_to_ms(ns: u64) -> f64 {
    ns as f64 / 1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Tokens per scheduler step (B).
    pub token_budget: usize,
    /// Largest prefill chunk (C).
    pub chunk_size: usize,
    /// Virtual ms per token.
    pub prefill_cost_per_token: f64,
    pub decode_cost_per_token: f64,
    pub io_workers: usize,
    /// Virtual ms per request.
    pub io_latency_cached: f64,
    pub io_latency_decode: f64,
    /// Length of an idle scheduler tick in virtual ms.
    pub idle_tick: f64,
    /// Cap on requests between admission and completion; unbounded if unset.
    pub max_in_flight: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            token_budget: 8192,
            chunk_size: 2048,
            prefill_cost_per_token: 0.01,
            decode_cost_per_token: 5.0,
            io_workers: 8,
            io_latency_cached: 300.0,
            io_latency_decode: 14_000.0,
            idle_tick: 1.0,
            max_in_flight: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::Config(m));
        if self.token_budget < 1 {
            return bad("token_budget must be at least 1".into());
        }
        if self.chunk_size < 1 || self.chunk_size > self.token_budget {
            return bad(format!(
                "chunk_size must be in 1..={} (got {})",
                self.token_budget, self.chunk_size
            ));
        }
        if self.io_workers < 1 {
            return bad("io_workers must be at least 1".into());
        }
        for (name, v) in [
            ("prefill_cost_per_token", self.prefill_cost_per_token),
            ("decode_cost_per_token", self.decode_cost_per_token),
            ("idle_tick", self.idle_tick),
        ] {
            if !(v.is_finite() && ms_to_ns(v) >= 1) {
                return bad(format!("{name} must be at least 1 ns, got {v} ms"));
            }
        }
        for (name, v) in [
            ("io_latency_cached", self.io_latency_cached),
            ("io_latency_decode", self.io_latency_decode),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.max_in_flight == Some(0) {
            return bad("max_in_flight must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub id: String,
    /// Visual plus text tokens.
    pub prompt_tokens: usize,
    pub max_new_tokens: usize,
    /// Cache key hex or raw media path.
    pub cache_ref: String,
    /// Virtual ms at which the request is submitted.
    #[serde(default)]
    pub arrival_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    IoStart,
    IoDone,
    ChunkScheduled,
    PrefillDone,
    DecodeToken,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub t_ns: u64,
    /// Index into the request list.
    pub request: usize,
    pub kind: EventKind,
    /// Tokens carried by `chunk_scheduled` / `decode_token` events.
    pub tokens: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub start_ns: u64,
    pub end_ns: u64,
    pub prefill_tokens: usize,
    pub decode_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    /// Sorted by time; ties keep emission order.
    pub events: Vec<Event>,
    /// Busy steps only.
    pub steps: Vec<StepRecord>,
    pub idle_steps: u64,
    pub makespan_ns: u64,
}

impl SimTrace {
    pub fn occupancy(&self) -> f64 {
        let busy = self.steps.len() as u64;
        let total = busy + self.idle_steps;
        if total == 0 {
            0.0
        } else {
            busy as f64 / total as f64
        }
    }

    pub fn makespan_ms(&self) -> f64 {
        ns_to_ms(self.makespan_ns)
    }
}

/// Source of mock model outputs.
pub trait Responder: Sync {
    fn respond(&self, request: &EvalRequest) -> String;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub request: usize,
    pub id: String,
    pub text: String,
    pub done_ns: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    /// In completion order.
    pub completions: Vec<Completion>,
    pub trace: SimTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub speedup: f64,
    pub occupancy_async: f64,
    pub occupancy_sync: f64,
}

pub fn speedup_report(async_trace: &SimTrace, sync_trace: &SimTrace) -> SpeedupReport {
    let speedup = if async_trace.makespan_ns == 0 {
        1.0
    } else {
        sync_trace.makespan_ns as f64 / async_trace.makespan_ns as f64
    };
    SpeedupReport {
        speedup,
        occupancy_async: async_trace.occupancy(),
        occupancy_sync: sync_trace.occupancy(),
    }
}

struct Costs {
    prefill: u64,
    decode: u64,
    tick: u64,
}

impl Costs {
    fn new(cfg: &EngineConfig) -> Self {
        Self {
            prefill: ms_to_ns(cfg.prefill_cost_per_token),
            decode: ms_to_ns(cfg.decode_cost_per_token),
            tick: ms_to_ns(cfg.idle_tick),
        }
    }

    fn step(&self, prefill: usize, decode: usize) -> u64 {
        let ns = prefill as u128 * self.prefill as u128 + decode as u128 * self.decode as u128;
        u64::try_from(ns).unwrap_or(u64::MAX)
    }

    /// First tick boundary strictly after `ready`.
    fn boundary_after(&self, ready: u64) -> u64 {
        (ready / self.tick + 1).saturating_mul(self.tick)
    }

    fn idle_ticks(&self, from: u64, to: u64) -> u64 {
        (to - from).div_ceil(self.tick).max(1)
    }
}

struct Sim<'a> {
    reqs: &'a [EvalRequest],
    costs: Costs,
    budget: usize,
    chunk: usize,
    events: Vec<Event>,
    steps: Vec<StepRecord>,
    idle: u64,
    prefill_left: Vec<usize>,
    decode_left: Vec<usize>,
    io_done: Vec<Option<u64>>,
    done: Vec<Option<u64>>,
}

impl<'a> Sim<'a> {
    fn new(reqs: &'a [EvalRequest], cfg: &EngineConfig) -> Self {
        Self {
            reqs,
            costs: Costs::new(cfg),
            budget: cfg.token_budget,
            chunk: cfg.chunk_size,
            events: Vec::new(),
            steps: Vec::new(),
            idle: 0,
            prefill_left: reqs.iter().map(|r| r.prompt_tokens).collect(),
            decode_left: reqs.iter().map(|r| r.max_new_tokens).collect(),
            io_done: vec![None; reqs.len()],
            done: vec![None; reqs.len()],
        }
    }

    fn push(&mut self, t_ns: u64, request: usize, kind: EventKind, tokens: usize) {
        self.events.push(Event { t_ns, request, kind, tokens });
    }

    /// Assigns request `i` to the earliest free IO server.
    fn load(&mut self, i: usize, servers: &mut [u64], floor: u64, latency: u64) {
        let s = (0..servers.len()).min_by_key(|&s| (servers[s], s)).unwrap();
        let start = servers[s].max(floor).max(ms_to_ns(self.reqs[i].arrival_ms));
        let done = start + latency;
        servers[s] = done;
        self.io_done[i] = Some(done);
        self.push(start, i, EventKind::IoStart, 0);
        self.push(done, i, EventKind::IoDone, 0);
    }

    /// Runs one busy step at `t`. Returns the step end and the requests that
    /// finished prefill and decode in it.
    fn step(&mut self, t: u64, decode: &[usize], prefill: &[(usize, usize)]) -> (u64, Vec<usize>, Vec<usize>) {
        let p_tokens: usize = prefill.iter().map(|(_, c)| c).sum();
        let end = t + self.costs.step(p_tokens, decode.len());
        self.steps.push(StepRecord {
            start_ns: t,
            end_ns: end,
            prefill_tokens: p_tokens,
            decode_tokens: decode.len(),
        });
        for &i in decode {
            self.push(t, i, EventKind::DecodeToken, 1);
        }
        for &(i, c) in prefill {
            self.push(t, i, EventKind::ChunkScheduled, c);
        }
        let mut finished_prefill = Vec::new();
        let mut finished = Vec::new();
        for &(i, c) in prefill {
            self.prefill_left[i] -= c;
            if self.prefill_left[i] == 0 {
                self.push(end, i, EventKind::PrefillDone, 0);
                if self.decode_left[i] == 0 {
                    finished.push(i);
                } else {
                    finished_prefill.push(i);
                }
            }
        }
        for &i in decode {
            self.decode_left[i] -= 1;
            if self.decode_left[i] == 0 {
                finished.push(i);
            }
        }
        for &i in &finished {
            self.done[i] = Some(end);
            self.push(end, i, EventKind::Done, 0);
        }
        (end, finished_prefill, finished)
    }

    /// Prefill chunks for `ready` requests in order, one per request, within
    /// the budget left after `decode_tokens`.
    fn pack_prefill(&self, ready: impl Iterator<Item = usize>, decode_tokens: usize) -> Vec<(usize, usize)> {
        let mut left = self.budget - decode_tokens;
        let mut out = Vec::new();
        for i in ready {
            if left == 0 {
                break;
            }
            let c = self.prefill_left[i].min(self.chunk).min(left);
            if c > 0 {
                out.push((i, c));
                left -= c;
            }
        }
        out
    }

    fn finish(mut self, responder: &dyn Responder, makespan: u64) -> SimOutput {
        self.events.sort_by_key(|e| e.t_ns);
        let mut order: Vec<usize> = (0..self.reqs.len()).collect();
        order.sort_by_key(|&i| (self.done[i], i));
        let completions = order
            .into_iter()
            .map(|i| Completion {
                request: i,
                id: self.reqs[i].id.clone(),
                text: responder.respond(&self.reqs[i]),
                done_ns: self.done[i].unwrap_or(makespan),
            })
            .collect();
        SimOutput {
            completions,
            trace: SimTrace {
                events: self.events,
                steps: self.steps,
                idle_steps: self.idle,
                makespan_ns: makespan,
            },
        }
    }
}

fn check_requests(requests: &[EvalRequest]) -> Result<(), EvalError> {
    if requests.is_empty() {
        return Err(EvalError::Config("no requests".into()));
    }
    for r in requests {
        if r.prompt_tokens < 1 {
            return Err(EvalError::Config(format!("request {}: prompt_tokens must be >= 1", r.id)));
        }
        if !(r.arrival_ms.is_finite() && r.arrival_ms >= 0.0) {
            return Err(EvalError::Config(format!("request {}: bad arrival {}", r.id, r.arrival_ms)));
        }
    }
    Ok(())
}

fn arrival_order(requests: &[EvalRequest]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..requests.len()).collect();
    order.sort_by_key(|&i| (ms_to_ns(requests[i].arrival_ms), i));
    order
}

fn io_latency(cfg: &EngineConfig, cached: bool) -> u64 {
    ms_to_ns(if cached { cfg.io_latency_cached } else { cfg.io_latency_decode })
}

/// Three-stage pipeline: IO servers feed a scheduler that mixes decode
/// tokens with FIFO prefill chunks in every step.
pub fn run_async(
    requests: &[EvalRequest],
    cfg: &EngineConfig,
    cached: bool,
    responder: &dyn Responder,
) -> Result<SimOutput, EvalError> {
    cfg.validate()?;
    check_requests(requests)?;
    let n = requests.len();
    let latency = io_latency(cfg, cached);
    let limit = cfg.max_in_flight.unwrap_or(usize::MAX);
    let order = arrival_order(requests);
    let mut sim = Sim::new(requests, cfg);
    let mut servers = vec![0u64; cfg.io_workers];
    let mut admitted = 0;
    let mut in_flight = 0;
    // Requests waiting for prefill, ordered by (io_done, index).
    let mut prefill_queue: Vec<usize> = Vec::new();
    let mut decode_queue: Vec<usize> = Vec::new();
    let mut remaining = n;
    let mut t = 0u64;

    while remaining > 0 {
        while admitted < n && in_flight < limit {
            let i = order[admitted];
            sim.load(i, &mut servers, t, latency);
            let key = (sim.io_done[i], i);
            let pos = prefill_queue.partition_point(|&j| (sim.io_done[j], j) < key);
            prefill_queue.insert(pos, i);
            admitted += 1;
            in_flight += 1;
        }

        let decode: Vec<usize> = decode_queue.iter().copied().take(sim.budget).collect();
        let ready = prefill_queue
            .iter()
            .copied()
            .take_while(|&i| sim.io_done[i].is_some_and(|d| d < t));
        let prefill = sim.pack_prefill(ready, decode.len());

        if decode.is_empty() && prefill.is_empty() {
            let next = prefill_queue
                .iter()
                .filter_map(|&i| sim.io_done[i])
                .find(|&d| d >= t)
                .ok_or_else(|| EvalError::Config("scheduler stalled".into()))?;
            let resume = sim.costs.boundary_after(next);
            sim.idle += sim.costs.idle_ticks(t, resume);
            t = resume;
            continue;
        }

        let (end, to_decode, finished) = sim.step(t, &decode, &prefill);
        prefill_queue.retain(|&i| sim.prefill_left[i] > 0);
        decode_queue.retain(|&i| sim.decode_left[i] > 0);
        decode_queue.extend(to_decode);
        remaining -= finished.len();
        in_flight -= finished.len();
        t = end;
    }
    Ok(sim.finish(responder, t))
}

/// Batch-at-a-time baseline: load the whole batch, prefill all of it, then
/// decode all of it before the next batch starts.
pub fn run_sync_baseline(
    requests: &[EvalRequest],
    cfg: &EngineConfig,
    batch_size: usize,
    cached: bool,
    responder: &dyn Responder,
) -> Result<SimOutput, EvalError> {
    cfg.validate()?;
    check_requests(requests)?;
    if batch_size < 1 {
        return Err(EvalError::Config("batch_size must be at least 1".into()));
    }
    let latency = io_latency(cfg, cached);
    let order = arrival_order(requests);
    let mut sim = Sim::new(requests, cfg);
    let mut t = 0u64;

    for batch in order.chunks(batch_size) {
        let mut servers = vec![t; cfg.io_workers];
        for &i in batch {
            sim.load(i, &mut servers, t, latency);
        }
        let loaded = batch.iter().filter_map(|&i| sim.io_done[i]).max().unwrap_or(t);
        let resume = sim.costs.boundary_after(loaded.max(t));
        sim.idle += sim.costs.idle_ticks(t, resume);
        t = resume;

        let mut fifo: Vec<usize> = batch.to_vec();
        fifo.sort_by_key(|&i| (sim.io_done[i], i));
        while fifo.iter().any(|&i| sim.prefill_left[i] > 0) {
            let prefill = sim.pack_prefill(fifo.iter().copied(), 0);
            let (end, _, _) = sim.step(t, &[], &prefill);
            t = end;
        }
        let mut decoding: Vec<usize> = fifo.into_iter().filter(|&i| sim.decode_left[i] > 0).collect();
        while !decoding.is_empty() {
            let decode: Vec<usize> = decoding.iter().copied().take(sim.budget).collect();
            let (end, _, _) = sim.step(t, &decode, &[]);
            decoding.retain(|&i| sim.decode_left[i] > 0);
            t = end;
        }
    }
    Ok(sim.finish(responder, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Echo;
    impl Responder for Echo {
        fn respond(&self, r: &EvalRequest) -> String {
            r.id.clone()
        }
    }

    fn req(id: &str, prompt: usize, new: usize) -> EvalRequest {
        EvalRequest {
            id: id.into(),
            prompt_tokens: prompt,
            max_new_tokens: new,
            cache_ref: format!("{id}.mp4"),
            arrival_ms: 0.0,
        }
    }

    fn cfg(b: usize, c: usize) -> EngineConfig {
        EngineConfig {
            token_budget: b,
            chunk_size: c,
            prefill_cost_per_token: 0.01,
            decode_cost_per_token: 2.0,
            io_workers: 1,
            io_latency_cached: 50.0,
            io_latency_decode: 400.0,
            idle_tick: 1.0,
            max_in_flight: None,
        }
    }

    #[test]
    fn single_request_hand_simulation() {
        let c = cfg(512, 512);
        let out = run_async(&[req("a", 1000, 4)], &c, true, &Echo).unwrap();
        let tr = &out.trace;
        let steps: Vec<(usize, usize)> = tr.steps.iter().map(|s| (s.prefill_tokens, s.decode_tokens)).collect();
        assert_eq!(steps, [(512, 0), (488, 0), (0, 1), (0, 1), (0, 1), (0, 1)]);
        // io 50 ms, first tick boundary after it is 51 ms.
        let expect = ms_to_ns(51.0) + ms_to_ns(0.01) * 1000 + ms_to_ns(2.0) * 4;
        assert_eq!(tr.makespan_ns, expect);
        assert_eq!(tr.idle_steps, 51);
    }

    #[test]
    fn staggered_requests_share_steps() {
        let mut c = cfg(600, 256);
        c.io_workers = 1;
        let out = run_async(&[req("a", 300, 100), req("b", 2000, 2)], &c, true, &Echo).unwrap();
        let mixed = out.trace.steps.iter().filter(|s| s.prefill_tokens > 0 && s.decode_tokens > 0).count();
        assert!(mixed > 0);
        assert!(out.trace.steps.iter().all(|s| s.prefill_tokens + s.decode_tokens <= 600));
    }

    #[test]
    fn one_chunk_per_step_without_decode() {
        let c = cfg(256, 256);
        let out = run_sync_baseline(&[req("a", 1024, 0), req("b", 512, 0)], &c, 2, true, &Echo).unwrap();
        assert!(out.trace.steps.iter().all(|s| s.prefill_tokens == 256));
        assert_eq!(out.trace.steps.len(), 6);
    }

    #[test]
    fn single_unbounded_request_has_no_overlap() {
        let mut c = cfg(usize::MAX / 2, usize::MAX / 2);
        c.io_workers = 1;
        let r = [req("a", 70_000, 16)];
        let a = run_async(&r, &c, false, &Echo).unwrap();
        let s = run_sync_baseline(&r, &c, 1, false, &Echo).unwrap();
        assert_eq!(speedup_report(&a.trace, &s.trace).speedup, 1.0);
        assert_eq!(speedup_report(&a.trace, &a.trace).speedup, 1.0);
    }

    #[test]
    fn sync_batch_shows_load_gap() {
        let mut c = cfg(4096, 1024);
        c.io_workers = 2;
        let reqs: Vec<_> = (0..8).map(|i| req(&format!("r{i}"), 800, 4)).collect();
        let s = run_sync_baseline(&reqs, &c, 8, false, &Echo).unwrap();
        let first = s.trace.steps[0].start_ns;
        assert!(first > ms_to_ns(4.0 * 400.0));
        let a = run_async(&reqs, &c, false, &Echo).unwrap();
        assert!(a.trace.makespan_ns <= s.trace.makespan_ns);
        assert!(s.trace.occupancy() < a.trace.occupancy());
    }

    #[test]
    fn config_errors() {
        assert!(run_async(&[req("a", 1, 1)], &cfg(0, 0), true, &Echo).is_err());
        assert!(run_async(&[req("a", 1, 1)], &cfg(4, 8), true, &Echo).is_err());
        assert!(run_async(&[], &cfg(4, 4), true, &Echo).is_err());
        assert!(run_async(&[req("a", 0, 1)], &cfg(4, 4), true, &Echo).is_err());
        let mut c = cfg(4, 4);
        c.max_in_flight = Some(0);
        assert!(run_async(&[req("a", 1, 1)], &c, true, &Echo).is_err());
    }

    #[test]
    fn admission_cap_is_respected() {
        let mut c = cfg(4096, 512);
        c.io_workers = 4;
        c.max_in_flight = Some(2);
        let reqs: Vec<_> = (0..6).map(|i| req(&format!("r{i}"), 700, 3)).collect();
        let out = run_async(&reqs, &c, true, &Echo).unwrap();
        let mut live = 0i64;
        let mut peak = 0;
        for e in &out.trace.events {
            match e.kind {
                EventKind::IoStart => live += 1,
                EventKind::Done => live -= 1,
                _ => {}
            }
            peak = peak.max(live);
        }
        assert!(peak <= 2, "peak {peak}");
        assert_eq!(out.completions.len(), 6);
    }
}
