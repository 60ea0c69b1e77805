//! Per-step phase accounting for cached versus realtime video loading.

use serde::{Deserialize, Serialize};

use crate::config::{ConfigDoc, ConfigError};

#[derive(Debug, thiserror::Error)]
pub enum ThroughputError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Seconds per training step for each phase, plus per-video loading costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseLatencyModel {
    pub rollout_compute: f64,
    pub ref_compute: f64,
    pub actor_update: f64,
    pub per_video_decode: f64,
    pub per_video_cache_load: f64,
    pub videos_per_step: u64,
    pub tokens_per_step: u64,
    /// Share of the rollout phase's loading time that is not hidden behind
    /// inference. The reference phase always pays the full cost.
    pub rollout_decode_exposure: f64,
    /// Mode-independent time outside the three phases.
    pub step_overhead: f64,
    /// Used only for the per-GPU throughput figure.
    pub gpus: u64,
}

impl Default for PhaseLatencyModel {
    fn default() -> Self {
        Self {
            rollout_compute: 0.0,
            ref_compute: 0.0,
            actor_update: 0.0,
            per_video_decode: 0.0,
            per_video_cache_load: 0.0,
            videos_per_step: 0,
            tokens_per_step: 0,
            rollout_decode_exposure: 1.0,
            step_overhead: 0.0,
            gpus: 1,
        }
    }
}

impl PhaseLatencyModel {
    pub fn validate(&self) -> Result<(), ThroughputError> {
        for (name, v) in [
            ("rollout_compute", self.rollout_compute),
            ("ref_compute", self.ref_compute),
            ("actor_update", self.actor_update),
            ("per_video_decode", self.per_video_decode),
            ("per_video_cache_load", self.per_video_cache_load),
            ("rollout_decode_exposure", self.rollout_decode_exposure),
            ("step_overhead", self.step_overhead),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ThroughputError::Invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.gpus == 0 {
            return Err(ThroughputError::Invalid("gpus must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadMode {
    Cached,
    Realtime,
}

impl LoadMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LoadMode::Cached => "cached",
            LoadMode::Realtime => "realtime",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub mode: LoadMode,
    pub rollout_time: f64,
    pub ref_time: f64,
    pub actor_time: f64,
    pub other_time: f64,
    pub total: f64,
    pub tokens_per_step: u64,
    /// Tokens per second for the whole job.
    pub throughput: f64,
    pub throughput_per_gpu: f64,
}

pub fn simulate_training_step(model: &PhaseLatencyModel, mode: LoadMode) -> Result<StepReport, ThroughputError> {
    model.validate()?;
    let per_video = match mode {
        LoadMode::Realtime => model.per_video_decode,
        LoadMode::Cached => model.per_video_cache_load,
    };
    let load = per_video * model.videos_per_step as f64;
    let rollout_time = model.rollout_compute + model.rollout_decode_exposure * load;
    let ref_time = model.ref_compute + load;
    let actor_time = model.actor_update;
    let other_time = model.step_overhead;
    let total = rollout_time + ref_time + actor_time + other_time;
    let tokens = model.tokens_per_step as f64;
    let throughput = if total > 0.0 { tokens / total } else { 0.0 };
    Ok(StepReport {
        mode,
        rollout_time,
        ref_time,
        actor_time,
        other_time,
        total,
        tokens_per_step: model.tokens_per_step,
        throughput,
        throughput_per_gpu: throughput / model.gpus as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub realtime: StepReport,
    pub cached: StepReport,
    /// Realtime step time over cached step time.
    pub speedup: f64,
    pub rollout_ratio: f64,
    pub ref_ratio: f64,
    pub actor_delta: f64,
    pub throughput_ratio: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

pub fn compare_modes(model: &PhaseLatencyModel) -> Result<ModeComparison, ThroughputError> {
    let realtime = simulate_training_step(model, LoadMode::Realtime)?;
    let cached = simulate_training_step(model, LoadMode::Cached)?;
    Ok(ModeComparison {
        speedup: ratio(realtime.total, cached.total),
        rollout_ratio: ratio(realtime.rollout_time, cached.rollout_time),
        ref_ratio: ratio(realtime.ref_time, cached.ref_time),
        actor_delta: realtime.actor_time - cached.actor_time,
        throughput_ratio: ratio(cached.throughput, realtime.throughput),
        realtime,
        cached,
    })
}

/// Measured per-step phase times for one loading mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ObservedStep {
    pub rollout: f64,
    pub reference: f64,
    pub actor: f64,
    pub total: f64,
}

/// The `[calibrate]` section: observed times plus the quantities they do
/// not determine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CalibrationInput {
    pub realtime: ObservedStep,
    pub cached: ObservedStep,
    pub per_video_cache_load: f64,
    pub videos_per_step: u64,
    pub tokens_per_step: u64,
    pub gpus: u64,
}

/// Model minus observation, per quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub rollout_realtime: f64,
    pub rollout_cached: f64,
    pub ref_realtime: f64,
    pub ref_cached: f64,
    pub total_realtime: f64,
    pub total_cached: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub model: PhaseLatencyModel,
    pub residuals: Residuals,
}

fn residuals(model: &PhaseLatencyModel, obs: &CalibrationInput) -> Result<Residuals, ThroughputError> {
    let c = compare_modes(model)?;
    Ok(Residuals {
        rollout_realtime: c.realtime.rollout_time - obs.realtime.rollout,
        rollout_cached: c.cached.rollout_time - obs.cached.rollout,
        ref_realtime: c.realtime.ref_time - obs.realtime.reference,
        ref_cached: c.cached.ref_time - obs.cached.reference,
        total_realtime: c.realtime.total - obs.realtime.total,
        total_cached: c.cached.total - obs.cached.total,
    })
}

fn check_input(obs: &CalibrationInput) -> Result<f64, ThroughputError> {
    if obs.videos_per_step == 0 {
        return Err(ThroughputError::Invalid("calibration needs videos_per_step > 0".into()));
    }
    Ok(obs.videos_per_step as f64)
}

fn base_model(obs: &CalibrationInput) -> PhaseLatencyModel {
    PhaseLatencyModel {
        actor_update: (obs.realtime.actor + obs.cached.actor) / 2.0,
        per_video_cache_load: obs.per_video_cache_load,
        videos_per_step: obs.videos_per_step,
        tokens_per_step: obs.tokens_per_step,
        gpus: obs.gpus.max(1),
        ..Default::default()
    }
}

/// Fit with a single decode coefficient shared by both phases, full
/// exposure and no overhead: least squares over the four phase times.
pub fn calibrate_shared(obs: &CalibrationInput) -> Result<Calibration, ThroughputError> {
    let v = check_input(obs)?;
    let l = obs.per_video_cache_load * v;
    // Each phase p: cached = c_p + l, realtime = c_p + D with D = d * v.
    // Least squares gives D - l = mean of the two realtime/cached gaps and
    // c_p = midpoint fit per phase.
    let gap = ((obs.realtime.rollout - obs.cached.rollout) + (obs.realtime.reference - obs.cached.reference)) / 2.0;
    let decode_total = l + gap;
    let fit_c = |rt: f64, ca: f64| ((rt - decode_total) + (ca - l)) / 2.0;
    let model = PhaseLatencyModel {
        rollout_compute: fit_c(obs.realtime.rollout, obs.cached.rollout),
        ref_compute: fit_c(obs.realtime.reference, obs.cached.reference),
        per_video_decode: decode_total / v,
        ..base_model(obs)
    };
    model.validate()?;
    let residuals = residuals(&model, obs)?;
    Ok(Calibration { model, residuals })
}

/// Fit with a rollout exposure factor and a constant step overhead. The
/// four phase times are matched exactly; the overhead is the least-squares
/// fit of the two step totals.
pub fn calibrate(obs: &CalibrationInput) -> Result<Calibration, ThroughputError> {
    let v = check_input(obs)?;
    let l = obs.per_video_cache_load * v;
    let ref_gap = obs.realtime.reference - obs.cached.reference;
    let rollout_gap = obs.realtime.rollout - obs.cached.rollout;
    let d_total = l + ref_gap;
    let swing = d_total - l;
    if swing <= 0.0 {
        return Err(ThroughputError::Invalid("reference phase shows no decode cost to fit".into()));
    }
    let exposure = rollout_gap / swing;
    let mut model = PhaseLatencyModel {
        ref_compute: obs.cached.reference - l,
        rollout_compute: obs.cached.rollout - exposure * l,
        per_video_decode: d_total / v,
        rollout_decode_exposure: exposure,
        ..base_model(obs)
    };
    let phases = |s: &ObservedStep| s.rollout + s.reference + (obs.realtime.actor + obs.cached.actor) / 2.0;
    model.step_overhead = ((obs.realtime.total - phases(&obs.realtime)) + (obs.cached.total - phases(&obs.cached))) / 2.0;
    model.validate()?;
    let residuals = residuals(&model, obs)?;
    Ok(Calibration { model, residuals })
}

/// Throughput scenario: either an explicit `[model]` or a `[calibrate]`
/// section to fit one from.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputScenario {
    pub model: PhaseLatencyModel,
    pub calibration: Option<Calibration>,
}

impl ThroughputScenario {
    pub fn from_doc(doc: &ConfigDoc) -> Result<Self, ThroughputError> {
        if doc.has_section("calibrate") {
            let input: CalibrationInput = doc.section("calibrate")?;
            let cal = calibrate(&input)?;
            Ok(Self { model: cal.model.clone(), calibration: Some(cal) })
        } else if doc.has_section("model") {
            let model: PhaseLatencyModel = doc.section("model")?;
            model.validate()?;
            Ok(Self { model, calibration: None })
        } else {
            Err(ThroughputError::Invalid("scenario needs a [model] or [calibrate] section".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn observed() -> CalibrationInput {
        CalibrationInput {
            realtime: ObservedStep { rollout: 82.1, reference: 53.6, actor: 54.0, total: 194.5 },
            cached: ObservedStep { rollout: 53.9, reference: 18.8, actor: 54.0, total: 131.9 },
            per_video_cache_load: 0.05,
            videos_per_step: 32,
            tokens_per_step: 4_930_000,
            gpus: 32,
        }
    }

    #[test]
    fn calibrated_fit_reproduces_phases() {
        let cal = calibrate(&observed()).unwrap();
        let r = cal.residuals;
        for x in [r.rollout_realtime, r.rollout_cached, r.ref_realtime, r.ref_cached] {
            assert!(x.abs() < 1e-9, "{r:?}");
        }
        assert!((r.total_realtime - 0.2).abs() < 1e-9 && (r.total_cached + 0.2).abs() < 1e-9);
        let c = compare_modes(&cal.model).unwrap();
        assert!((c.speedup - 1.47).abs() <= 0.02, "{}", c.speedup);
        assert!((c.rollout_ratio - 1.52).abs() <= 0.03);
        assert!((c.ref_ratio - 2.85).abs() <= 0.05);
        assert_eq!(c.actor_delta, 0.0);
        assert!((cal.model.rollout_decode_exposure - 28.2 / 34.8).abs() < 1e-12);
        assert!((c.realtime.throughput_per_gpu - 791.3).abs() < 0.5);
        assert!((c.cached.throughput_per_gpu - 1169.8).abs() < 0.5);
    }

    #[test]
    fn shared_coefficient_fit_misses_the_ratios() {
        let cal = calibrate_shared(&observed()).unwrap();
        let c = compare_modes(&cal.model).unwrap();
        assert!((c.rollout_ratio - 1.52).abs() > 0.03, "{}", c.rollout_ratio);
        assert!((c.ref_ratio - 2.85).abs() > 0.05, "{}", c.ref_ratio);
        assert!((c.speedup - 1.47).abs() > 0.02, "{}", c.speedup);
    }

    #[test]
    fn degenerate_models() {
        let m = PhaseLatencyModel {
            rollout_compute: 10.0,
            ref_compute: 5.0,
            actor_update: 7.0,
            per_video_decode: 0.3,
            per_video_cache_load: 0.3,
            videos_per_step: 16,
            tokens_per_step: 1000,
            ..Default::default()
        };
        let c = compare_modes(&m).unwrap();
        assert_eq!((c.speedup, c.rollout_ratio, c.ref_ratio), (1.0, 1.0, 1.0));
        let none = PhaseLatencyModel { videos_per_step: 0, per_video_decode: 9.0, ..m.clone() };
        assert_eq!(compare_modes(&none).unwrap().speedup, 1.0);
        let free = PhaseLatencyModel { per_video_decode: 0.0, per_video_cache_load: 0.0, ..m };
        let c = compare_modes(&free).unwrap();
        assert_eq!((c.speedup, c.rollout_ratio, c.ref_ratio), (1.0, 1.0, 1.0));
        assert!(simulate_training_step(&PhaseLatencyModel { actor_update: -1.0, ..Default::default() }, LoadMode::Cached).is_err());
    }

    #[test]
    fn scenario_sections() {
        let doc = ConfigDoc::parse("[model]\nrollout_compute = 1.0\nactor_update = 2.0\ntokens_per_step = 30\n").unwrap();
        let s = ThroughputScenario::from_doc(&doc).unwrap();
        assert!(s.calibration.is_none());
        assert_eq!(simulate_training_step(&s.model, LoadMode::Cached).unwrap().throughput, 10.0);
        assert!(ThroughputScenario::from_doc(&ConfigDoc::parse("").unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn accounting_closes_and_cache_dominates(
            rc in 0.0f64..200.0, refc in 0.0f64..200.0, actor in 0.0f64..200.0,
            d in 0.0f64..5.0, frac in 0.0f64..=1.0, v in 0u64..512, tokens in 1u64..10_000_000,
            e in 0.0f64..=1.0, over in 0.0f64..20.0,
        ) {
            let m = PhaseLatencyModel {
                rollout_compute: rc, ref_compute: refc, actor_update: actor,
                per_video_decode: d, per_video_cache_load: d * frac,
                videos_per_step: v, tokens_per_step: tokens,
                rollout_decode_exposure: e, step_overhead: over, gpus: 1,
            };
            let c = compare_modes(&m).unwrap();
            for r in [&c.realtime, &c.cached] {
                prop_assert_eq!(r.total, r.rollout_time + r.ref_time + r.actor_time + r.other_time);
                if r.total > 0.0 {
                    prop_assert!((r.throughput * r.total - tokens as f64).abs() <= 1e-9 * tokens as f64);
                }
            }
            prop_assert!(c.cached.total <= c.realtime.total);
            prop_assert_eq!(c.actor_delta, 0.0);
            prop_assert_eq!(c.realtime.tokens_per_step, c.cached.tokens_per_step);
        }
    }
}
