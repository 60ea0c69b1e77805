use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use evr_core::config::ConfigDoc;
use evr_core::eval::{self, AdapterRegistry, EvalOptions};
use evr_core::frame_cache::{self, FrameDType, PreprocessParams, SyntheticDecoder};
use evr_core::reward::{parse_ground_truth, RewardConfig, RewardDispatcher, Sample, TaskType};
use evr_core::rollout::{self, MockPolicy, PolicyConfig, TrainSetup};
use evr_core::throughput::{compare_modes, ThroughputScenario};

#[derive(Parser)]
#[command(name = "evr", version, about = "Video RL post-training harness")]
struct Cli {
    /// Key-value config file with section headers; EVR1_SECTION__KEY env vars override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Line-delimited JSON output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decode, sample and resize videos into the frame cache.
    Preprocess(PreprocessArgs),
    /// Keep samples the policy solves sometimes but not always.
    Filter(FilterArgs),
    /// Run the rollout / update loop and log per-step metrics.
    TrainSim(TrainArgs),
    /// Run a benchmark through the simulated async pipeline.
    Eval(EvalArgs),
    /// Per-step phase accounting, cached versus realtime loading.
    Throughput(ThroughputArgs),
    /// Score one response against a ground truth.
    RewardCheck(RewardArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, alias = "cache-dir")]
    cache_root: PathBuf,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long)]
    max_frames: Option<usize>,
    #[arg(long)]
    max_pixels: Option<usize>,
    /// u8 or f32
    #[arg(long, default_value = "u8")]
    dtype: String,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Write kept samples here, one JSON record per line.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    steps: Option<usize>,
    /// Metrics log path; stdout when absent.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    benchmark: String,
    #[arg(long)]
    scenario: PathBuf,
    /// Benchmark samples; generated by the adapter when absent.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Also run the synchronous baseline and report the speedup.
    #[arg(long)]
    sync_baseline: bool,
    /// Per-sample results path; stdout when absent.
    #[arg(long)]
    results: Option<PathBuf>,
}

#[derive(Args)]
struct ThroughputArgs {
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Args)]
struct RewardArgs {
    #[arg(long = "type")]
    task: String,
    #[arg(long)]
    pred: String,
    #[arg(long)]
    gt: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ConfigDoc> {
    let mut doc = match &cli.config {
        Some(p) => ConfigDoc::load(p)?,
        None => ConfigDoc::parse("")?,
    };
    doc.apply_process_env();
    Ok(doc)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn dispatcher(doc: &ConfigDoc) -> Result<RewardDispatcher> {
    let cfg: RewardConfig = doc.section("reward")?;
    Ok(RewardDispatcher::new(cfg)?)
}

fn run(cli: &Cli) -> Result<u8> {
    let doc = load_config(cli)?;
    match &cli.cmd {
        Cmd::Preprocess(a) => preprocess(cli, &doc, a),
        Cmd::Filter(a) => filter(cli, &doc, a),
        Cmd::TrainSim(a) => train(cli, &doc, a),
        Cmd::Eval(a) => evaluate(cli, &doc, a),
        Cmd::Throughput(a) => throughput(cli, a),
        Cmd::RewardCheck(a) => reward_check(cli, &doc, a),
    }
}

fn preprocess(cli: &Cli, doc: &ConfigDoc, a: &PreprocessArgs) -> Result<u8> {
    let mut base: PreprocessParams = doc.section("preprocess")?;
    if let Some(v) = a.fps {
        base.target_fps = v;
    }
    if let Some(v) = a.max_frames {
        base.max_frames = v;
    }
    if let Some(v) = a.max_pixels {
        base.max_pixels = v;
    }
    base.validate()?;
    let dtype = match a.dtype.as_str() {
        "u8" => FrameDType::U8,
        "f32" => FrameDType::F32,
        other => bail!("unknown dtype {other:?}, expected u8 or f32"),
    };

    let mut items = Vec::new();
    let mut bad = Vec::new();
    for r in frame_cache::parse_manifest(&read(&a.manifest)?, &base) {
        match r {
            Ok(it) => items.push(it),
            Err(e) => bad.push(e.to_string()),
        }
    }
    let report = frame_cache::batch_preprocess(&items, a.workers, &a.cache_root, &SyntheticDecoder::new(), dtype)?;

    let mut out = io::stdout().lock();
    if cli.json {
        let failed: Vec<_> = report
            .failed
            .iter()
            .map(|f| json!({"path": f.path, "error": f.error}))
            .collect();
        let rec = json!({
            "processed": report.processed,
            "deduplicated": report.deduplicated,
            "already_cached": report.already_cached,
            "failed": failed,
            "manifest_errors": bad,
            "keys": report.keys,
        });
        writeln!(out, "{rec}")?;
    } else {
        writeln!(out, "processed {}", report.processed)?;
        writeln!(out, "deduplicated {}", report.deduplicated)?;
        writeln!(out, "already_cached {}", report.already_cached)?;
        writeln!(out, "failed {}", report.failed.len() + bad.len())?;
        for e in &bad {
            writeln!(out, "  manifest: {e}")?;
        }
        for f in &report.failed {
            writeln!(out, "  {}: {}", f.path, f.error)?;
        }
    }
    Ok(if report.failed.is_empty() && bad.is_empty() { 0 } else { 2 })
}

fn policy_config(cli: &Cli, doc: &ConfigDoc) -> Result<PolicyConfig> {
    let mut p: PolicyConfig = doc.section("policy")?;
    p.seed = cli.seed;
    Ok(p)
}

fn filter(cli: &Cli, doc: &ConfigDoc, a: &FilterArgs) -> Result<u8> {
    let rewards = dispatcher(doc)?;
    let samples: Vec<Sample> = rollout::parse_train_manifest(&read(&a.manifest)?)?
        .into_iter()
        .map(|t| t.sample)
        .collect();
    for s in &samples {
        rewards.validate_sample(s)?;
    }
    let policy = MockPolicy::for_samples(policy_config(cli, doc)?, &samples)?;
    let report = rollout::pass_rate_filter(&samples, &policy, a.k, &rewards)?;

    let mut out = io::stdout().lock();
    for r in &report.rates {
        if cli.json {
            writeln!(out, "{}", serde_json::to_string(r)?)?;
        } else {
            let verdict = if r.kept { "keep" } else { "drop" };
            writeln!(out, "{} {}/{} {verdict}", r.id, r.passes, r.k)?;
        }
    }
    let kept = report.kept(&samples);
    if !cli.json {
        writeln!(out, "kept {} of {}", kept.len(), samples.len())?;
    }
    if let Some(p) = &a.out {
        let mut w = sink(Some(p))?;
        for s in kept {
            writeln!(w, "{}", serde_json::to_string(s)?)?;
        }
        w.flush()?;
    }
    Ok(0)
}

fn train(cli: &Cli, doc: &ConfigDoc, a: &TrainArgs) -> Result<u8> {
    let rewards = dispatcher(doc)?;
    let mut setup = TrainSetup::from_config(doc)?;
    setup.policy.seed = cli.seed;
    if let Some(s) = a.steps {
        setup.train.steps = s;
    }
    let samples = rollout::parse_train_manifest(&read(&a.manifest)?)?;
    for s in &samples {
        rewards.validate_sample(&s.sample)?;
    }
    let mut w = sink(a.metrics.as_deref())?;
    rollout::train_sim(&samples, &setup, &rewards, &mut w)?;
    w.flush()?;
    Ok(0)
}

fn evaluate(cli: &Cli, doc: &ConfigDoc, a: &EvalArgs) -> Result<u8> {
    let rewards = dispatcher(doc)?;
    let scenario = eval::load_scenario(&a.scenario, true)?;
    let manifest = a.manifest.as_deref().map(read).transpose()?;
    let opts = EvalOptions {
        sync_baseline: a.sync_baseline,
        seed: cli.seed,
    };
    let report = eval::evaluate(
        &AdapterRegistry::builtin(),
        &a.benchmark,
        manifest.as_deref(),
        &scenario,
        &rewards,
        &opts,
    )?;

    let to_stdout = a.results.is_none();
    let mut w = sink(a.results.as_deref())?;
    for r in &report.records {
        writeln!(w, "{}", json!({"record": "result", "id": r.id, "extracted": r.extracted, "score": r.score}))?;
    }
    for e in &report.errors {
        writeln!(w, "{}", json!({"record": "error", "line": e.line, "message": e.message}))?;
    }
    let mut summary = serde_json::to_value(&report.summary)?;
    summary["record"] = "summary".into();
    writeln!(w, "{summary}")?;
    w.flush()?;
    drop(w);

    if !to_stdout {
        let s = &report.summary;
        let mut out = io::stdout().lock();
        if cli.json {
            writeln!(out, "{summary}")?;
        } else {
            writeln!(out, "{} {} {:.4} over {} samples ({} bad lines)", s.benchmark, s.metric, s.value, s.samples, s.errors)?;
            writeln!(out, "async makespan {:.1} ms, occupancy {:.3}", s.makespan_ms, s.occupancy)?;
            if let (Some(m), Some(sp)) = (s.sync_makespan_ms, s.speedup) {
                writeln!(out, "sync makespan {m:.1} ms, speedup {sp:.2}")?;
            }
        }
    }
    Ok(0)
}

fn throughput(cli: &Cli, a: &ThroughputArgs) -> Result<u8> {
    let mut doc = ConfigDoc::load(eval::resolve_scenario_path(&a.scenario))?;
    doc.apply_process_env();
    let sc = ThroughputScenario::from_doc(&doc)?;
    let c = compare_modes(&sc.model)?;

    let mut out = io::stdout().lock();
    if cli.json {
        let rec = json!({"comparison": c, "model": sc.model, "calibration": sc.calibration});
        writeln!(out, "{rec}")?;
        return Ok(0);
    }
    writeln!(out, "{:<9}{:>9}{:>9}{:>9}{:>9}{:>9}{:>11}{:>11}", "mode", "rollout", "ref", "actor", "other", "total", "tok/s", "tok/s/gpu")?;
    for r in [&c.realtime, &c.cached] {
        writeln!(
            out,
            "{:<9}{:>9.2}{:>9.2}{:>9.2}{:>9.2}{:>9.2}{:>11.1}{:>11.1}",
            r.mode.as_str(),
            r.rollout_time,
            r.ref_time,
            r.actor_time,
            r.other_time,
            r.total,
            r.throughput,
            r.throughput_per_gpu
        )?;
    }
    writeln!(out, "speedup {:.3}", c.speedup)?;
    writeln!(out, "rollout_ratio {:.3}", c.rollout_ratio)?;
    writeln!(out, "ref_ratio {:.3}", c.ref_ratio)?;
    writeln!(out, "actor_delta {:.3}", c.actor_delta)?;
    writeln!(out, "throughput_ratio {:.3}", c.throughput_ratio)?;
    writeln!(out, "tokens_per_step realtime {} cached {}", c.realtime.tokens_per_step, c.cached.tokens_per_step)?;
    if let Some(cal) = &sc.calibration {
        let r = &cal.residuals;
        // keep float noise from printing as -0.00
        let r2 = |x: f64| if x.abs() < 5e-3 { 0.0 } else { x };
        writeln!(
            out,
            "residuals (model - observed) rollout {:+.2}/{:+.2} ref {:+.2}/{:+.2} total {:+.2}/{:+.2}",
            r2(r.rollout_realtime),
            r2(r.rollout_cached),
            r2(r.ref_realtime),
            r2(r.ref_cached),
            r2(r.total_realtime),
            r2(r.total_cached)
        )?;
        writeln!(out, "note: model fitted to observed phase means; a calibrated reproduction, not a measurement")?;
    }
    Ok(0)
}

fn reward_check(cli: &Cli, doc: &ConfigDoc, a: &RewardArgs) -> Result<u8> {
    let task: TaskType = a.task.parse().map_err(anyhow::Error::msg)?;
    let Some(gt) = parse_ground_truth(&a.gt, task) else {
        bail!("cannot read ground truth {:?} as {task}", a.gt);
    };
    let sample = Sample {
        id: "cli".into(),
        problem_type: task,
        data_type: Default::default(),
        prompt: String::new(),
        media_ref: None,
        ground_truth: gt,
    };
    let rewards = dispatcher(doc)?;
    rewards.validate_sample(&sample)?;
    let score = rewards.dispatch(&sample, &a.pred)?;
    let mut out = io::stdout().lock();
    if cli.json {
        writeln!(out, "{}", serde_json::to_string(&score)?)?;
    } else {
        writeln!(out, "{}", score.accuracy)?;
    }
    Ok(0)
}
