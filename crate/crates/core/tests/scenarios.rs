use std::path::PathBuf;

use evr_core::eval::{evaluate, load_scenario, AdapterRegistry, EvalOptions};
use evr_core::reward::{RewardConfig, RewardDispatcher};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn speedup(name: &str, seed: u64) -> f64 {
    let s = load_scenario(&scenario_path(name), false).unwrap();
    let d = RewardDispatcher::new(RewardConfig::default()).unwrap();
    let opts = EvalOptions { sync_baseline: true, seed };
    let r = evaluate(&AdapterRegistry::builtin(), "synthetic_mc", None, &s, &d, &opts).unwrap();
    println!("{name} seed {seed}: {:?}", r.summary);
    r.summary.speedup.unwrap()
}

#[test]
fn lvbench_like_lands_in_band() {
    for seed in [0, 1, 42] {
        let s = speedup("lvbench_like", seed);
        assert!((5.0..=9.0).contains(&s), "speedup {s}");
    }
}

#[test]
fn short_video_gains_less() {
    let short = speedup("short_video.toml", 0);
    assert!(short >= 1.0 && short < speedup("lvbench_like", 0));
}
