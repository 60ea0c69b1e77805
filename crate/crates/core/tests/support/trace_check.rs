// Independent checks of a simulator trace against the pipeline invariants.

use std::collections::BTreeMap;

use evr_core::eval::{ms_to_ns, EngineConfig, EvalRequest, EventKind, SimTrace};

#[derive(Default)]
struct Seen {
    io_start: Vec<u64>,
    io_done: Vec<u64>,
    chunks: Vec<(u64, usize)>,
    prefill_done: Vec<u64>,
    decodes: Vec<u64>,
    done: Vec<u64>,
}

pub fn check_trace(reqs: &[EvalRequest], cfg: &EngineConfig, tr: &SimTrace) -> Result<(), String> {
    if tr.events.windows(2).any(|w| w[0].t_ns > w[1].t_ns) {
        return Err("events out of time order".into());
    }
    let mut per: Vec<Seen> = (0..reqs.len()).map(|_| Seen::default()).collect();
    // step start -> (prefill tokens, decode tokens)
    let mut by_step: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
    for e in &tr.events {
        let s = per.get_mut(e.request).ok_or("event for unknown request")?;
        match e.kind {
            EventKind::IoStart => s.io_start.push(e.t_ns),
            EventKind::IoDone => s.io_done.push(e.t_ns),
            EventKind::ChunkScheduled => {
                if e.tokens == 0 || e.tokens > cfg.chunk_size {
                    return Err(format!("chunk of {} tokens", e.tokens));
                }
                s.chunks.push((e.t_ns, e.tokens));
                by_step.entry(e.t_ns).or_default().0 += e.tokens;
            }
            EventKind::PrefillDone => s.prefill_done.push(e.t_ns),
            EventKind::DecodeToken => {
                s.decodes.push(e.t_ns);
                by_step.entry(e.t_ns).or_default().1 += e.tokens;
            }
            EventKind::Done => s.done.push(e.t_ns),
        }
    }
    for (t, (p, d)) in &by_step {
        if p + d > cfg.token_budget {
            return Err(format!("step at {t} carries {} tokens > {}", p + d, cfg.token_budget));
        }
    }
    if tr.steps.iter().any(|s| s.prefill_tokens + s.decode_tokens > cfg.token_budget) {
        return Err("step record over budget".into());
    }
    for (r, s) in reqs.iter().zip(&per) {
        let id = &r.id;
        if s.io_start.len() != 1 || s.io_done.len() != 1 || s.prefill_done.len() != 1 || s.done.len() != 1 {
            return Err(format!("{id}: lifecycle events not exactly once"));
        }
        let (io_s, io_d, pd, done) = (s.io_start[0], s.io_done[0], s.prefill_done[0], s.done[0]);
        if io_s < ms_to_ns(r.arrival_ms) || io_s > io_d {
            return Err(format!("{id}: io window wrong"));
        }
        let prefill: usize = s.chunks.iter().map(|c| c.1).sum();
        if prefill != r.prompt_tokens {
            return Err(format!("{id}: prefilled {prefill} of {}", r.prompt_tokens));
        }
        if s.decodes.len() != r.max_new_tokens {
            return Err(format!("{id}: {} decode tokens, wanted {}", s.decodes.len(), r.max_new_tokens));
        }
        let first_chunk = s.chunks.iter().map(|c| c.0).min().unwrap();
        let last_chunk = s.chunks.iter().map(|c| c.0).max().unwrap();
        if !(io_d < first_chunk && last_chunk < pd) {
            return Err(format!("{id}: io_done {io_d} / chunks {first_chunk}..{last_chunk} / prefill_done {pd}"));
        }
        if let (Some(&fd), Some(&ld)) = (s.decodes.iter().min(), s.decodes.iter().max()) {
            if !(pd <= fd && fd < done && ld < done) {
                return Err(format!("{id}: prefill_done {pd} / decode {fd}..{ld} / done {done}"));
            }
        } else if done != pd {
            return Err(format!("{id}: no decode but done {done} != prefill_done {pd}"));
        }
        if done > tr.makespan_ns {
            return Err(format!("{id}: done after makespan"));
        }
    }
    let last = tr.events.iter().map(|e| e.t_ns).max().unwrap_or(0);
    if last != tr.makespan_ns {
        return Err(format!("makespan {} but last event at {last}", tr.makespan_ns));
    }
    Ok(())
}
