mod support;

use evr_core::eval::{
    run_async, run_sync_baseline, speedup_report, EngineConfig, EvalRequest, Responder,
};
use proptest::prelude::*;
use support::trace_check::check_trace;

struct ById;
impl Responder for ById {
    fn respond(&self, r: &EvalRequest) -> String {
        format!("<think>x</think><answer>{}</answer>", r.id)
    }
}

prop_compose! {
    fn engine()(
        budget in 1usize..4096,
        chunk_frac in 0.01f64..=1.0,
        prefill in 0.001f64..0.2,
        decode in 0.01f64..20.0,
        workers in 1usize..9,
        cached in 0.0f64..500.0,
        extra in 0.0f64..20_000.0,
        tick in 0.001f64..5.0,
    ) -> EngineConfig {
        EngineConfig {
            token_budget: budget,
            chunk_size: ((budget as f64 * chunk_frac) as usize).clamp(1, budget),
            prefill_cost_per_token: prefill,
            decode_cost_per_token: decode,
            io_workers: workers,
            io_latency_cached: cached,
            io_latency_decode: cached + extra,
            idle_tick: tick,
            max_in_flight: None,
        }
    }
}

prop_compose! {
    fn requests()(
        sizes in prop::collection::vec((1usize..6000, 0usize..40, 0.0f64..3000.0, any::<bool>()), 1..24)
    ) -> Vec<EvalRequest> {
        sizes
            .into_iter()
            .enumerate()
            .map(|(i, (p, n, at, timed))| EvalRequest {
                id: format!("r{i}"),
                prompt_tokens: p,
                max_new_tokens: n,
                cache_ref: format!("v{i}"),
                arrival_ms: if timed { at } else { 0.0 },
            })
            .collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn traces_hold_invariants_and_async_dominates(
        cfg in engine(),
        reqs in requests(),
        batch in 1usize..12,
        async_cached in any::<bool>(),
        sync_cached in any::<bool>(),
    ) {
        // Async may use cached loads only if the baseline is at least as slow to load.
        let async_cached = async_cached || sync_cached;
        let a = run_async(&reqs, &cfg, async_cached, &ById).unwrap();
        let s = run_sync_baseline(&reqs, &cfg, batch, sync_cached, &ById).unwrap();
        check_trace(&reqs, &cfg, &a.trace).map_err(TestCaseError::fail)?;
        check_trace(&reqs, &cfg, &s.trace).map_err(TestCaseError::fail)?;
        prop_assert!(a.trace.makespan_ns <= s.trace.makespan_ns,
            "async {} > sync {}", a.trace.makespan_ns, s.trace.makespan_ns);
        prop_assert!(speedup_report(&a.trace, &s.trace).speedup >= 1.0);

        let again = run_async(&reqs, &cfg, async_cached, &ById).unwrap();
        prop_assert_eq!(serde_json::to_vec(&a.trace).unwrap(), serde_json::to_vec(&again.trace).unwrap());

        let mut sa: Vec<_> = a.completions.iter().map(|c| (c.request, c.text.clone())).collect();
        let mut ss: Vec<_> = s.completions.iter().map(|c| (c.request, c.text.clone())).collect();
        sa.sort();
        ss.sort();
        prop_assert_eq!(sa, ss);
    }

    #[test]
    fn chunk_size_only_moves_prefill_between_steps(
        cfg in engine(),
        reqs in requests(),
        c2 in 1usize..4096,
    ) {
        let total: usize = reqs.iter().map(|r| r.prompt_tokens).sum();
        let other = EngineConfig { chunk_size: c2.min(cfg.token_budget), ..cfg.clone() };
        for c in [&cfg, &other] {
            let out = run_async(&reqs, c, true, &ById).unwrap();
            let p: usize = out.trace.steps.iter().map(|s| s.prefill_tokens).sum();
            prop_assert_eq!(p, total);
        }
    }

    #[test]
    fn admission_cap_keeps_invariants(
        cfg in engine(),
        reqs in requests(),
        cap in 1usize..6,
    ) {
        let cfg = EngineConfig { max_in_flight: Some(cap), ..cfg };
        let a = run_async(&reqs, &cfg, true, &ById).unwrap();
        check_trace(&reqs, &cfg, &a.trace).map_err(TestCaseError::fail)?;
    }
}
