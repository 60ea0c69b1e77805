use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::policy::softmax;
use super::{ClipConfig, MockPolicy, RolloutError, RolloutGroup};

/// Per-item clipped objective `min(r*A, clamp(r, 1-eps_low, 1+eps_high)*A)`.
/// The flag is set when the clamped branch is strictly smaller.
pub fn clipped_objective(ratio: f64, advantage: f64, cfg: &ClipConfig) -> (f64, bool) {
    let plain = ratio * advantage;
    let clamped = ratio.clamp(cfg.lower(), cfg.upper()) * advantage;
    if clamped < plain {
        (clamped, true)
    } else {
        (plain, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub loss: f64,
    pub clip_fraction: f64,
}

/// Negative mean clipped objective over one set of responses. No KL term.
pub fn dapo_surrogate_loss(
    logprob_new: &[f64],
    logprob_old: &[f64],
    advantages: &[f64],
    cfg: &ClipConfig,
) -> Result<Surrogate, RolloutError> {
    let n = logprob_new.len();
    if logprob_old.len() != n || advantages.len() != n {
        return Err(RolloutError::InvalidInput(format!(
            "length mismatch: {} new, {} old, {} advantages",
            n,
            logprob_old.len(),
            advantages.len()
        )));
    }
    if n == 0 {
        return Err(RolloutError::InvalidInput("empty surrogate input".into()));
    }
    let mut total = 0.0;
    let mut clipped = 0usize;
    for i in 0..n {
        if !logprob_new[i].is_finite() {
            return Err(RolloutError::NonFinite { what: "logprob_new", index: i });
        }
        if !logprob_old[i].is_finite() {
            return Err(RolloutError::NonFinite { what: "logprob_old", index: i });
        }
        if !advantages[i].is_finite() {
            return Err(RolloutError::NonFinite { what: "advantage", index: i });
        }
        let (obj, c) = clipped_objective((logprob_new[i] - logprob_old[i]).exp(), advantages[i], cfg);
        total += obj;
        clipped += usize::from(c);
    }
    Ok(Surrogate {
        loss: -total / n as f64,
        clip_fraction: clipped as f64 / n as f64,
    })
}

/// Surrogate of each group under `policy`, then averaged across groups.
pub fn groups_surrogate(
    policy: &MockPolicy,
    groups: &[RolloutGroup],
    cfg: &ClipConfig,
) -> Result<Surrogate, RolloutError> {
    if groups.is_empty() {
        return Ok(Surrogate { loss: 0.0, clip_fraction: 0.0 });
    }
    let mut loss = 0.0;
    let mut frac = 0.0;
    for g in groups {
        let new = g
            .responses
            .iter()
            .map(|r| policy.log_prob(&g.sample_id, r.action))
            .collect::<Result<Vec<_>, _>>()?;
        let old: Vec<f64> = g.responses.iter().map(|r| r.logprob_old).collect();
        let s = dapo_surrogate_loss(&new, &old, &g.advantages, cfg)?;
        loss += s.loss;
        frac += s.clip_fraction;
    }
    let m = groups.len() as f64;
    Ok(Surrogate { loss: loss / m, clip_fraction: frac / m })
}

/// Gradient of the mean-over-groups objective (the negated loss) with
/// respect to each sample head's logits.
pub fn surrogate_gradient(
    policy: &MockPolicy,
    groups: &[RolloutGroup],
    cfg: &ClipConfig,
) -> Result<BTreeMap<String, Vec<f64>>, RolloutError> {
    let t = policy.config.temperature;
    let mut grads: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let m = groups.len() as f64;
    for g in groups {
        let head = policy.head(&g.sample_id)?;
        let probs = softmax(&head.logits, t);
        let grad = grads
            .entry(g.sample_id.clone())
            .or_insert_with(|| vec![0.0; head.len()]);
        let n = g.responses.len() as f64;
        for (r, &adv) in g.responses.iter().zip(&g.advantages) {
            let lp = policy.log_prob(&g.sample_id, r.action)?;
            let ratio = (lp - r.logprob_old).exp();
            let (_, clipped) = clipped_objective(ratio, adv, cfg);
            if clipped {
                continue;
            }
            // d(ratio*A)/dz_j = ratio*A * (1[j=a] - p_j) / T
            let w = ratio * adv / (t * n * m);
            for (j, gj) in grad.iter_mut().enumerate() {
                let ind = if j == r.action { 1.0 } else { 0.0 };
                *gj += w * (ind - probs[j]);
            }
        }
    }
    Ok(grads)
}

/// One gradient-ascent step on the clipped objective.
pub fn policy_gradient_step(
    policy: &MockPolicy,
    groups: &[RolloutGroup],
    lr: f64,
    cfg: &ClipConfig,
) -> Result<MockPolicy, RolloutError> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(RolloutError::InvalidInput(format!("learning rate must be positive, got {lr}")));
    }
    let grads = surrogate_gradient(policy, groups, cfg)?;
    let mut next = policy.clone();
    for (id, g) in grads {
        let head = next.head_mut(&id)?;
        for (z, d) in head.logits.iter_mut().zip(g) {
            *z += lr * d;
        }
    }
    Ok(next)
}
