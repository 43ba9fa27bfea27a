//! The clipped PPO surrogate plus value and entropy terms, and the analytic
//! derivatives the trainer backpropagates.

use super::TrainConfig;

/// The three addends of the total loss, kept for logging: `value` is already
/// weighted by value_coef, `entropy` is the raw entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossComponents {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

/// Per-transition PPO loss: −min(r·A, clip(r)·A) + value_coef·(V−target)² −
/// entropy_coef·H, with r = exp(log_prob_new − log_prob_old).
pub fn ppo_clip_loss(
    log_prob_new: f64,
    log_prob_old: f64,
    advantage: f64,
    value_new: f64,
    return_target: f64,
    entropy: f64,
    cfg: &TrainConfig,
) -> (f64, LossComponents) {
    let ratio = (log_prob_new - log_prob_old).exp();
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * advantage;
    let policy = -unclipped.min(clipped);
    let value = cfg.value_coef * (value_new - return_target).powi(2);
    let total = policy + value - cfg.entropy_coef * entropy;
    (
        total,
        LossComponents {
            policy,
            value,
            entropy,
        },
    )
}

/// d(policy term)/d(log_prob_new): −r·A while the unclipped branch is active
/// (ties included), 0 once the clip has frozen the ratio.
pub fn policy_grad_wrt_log_prob(
    log_prob_new: f64,
    log_prob_old: f64,
    advantage: f64,
    clip: f64,
) -> f64 {
    let ratio = (log_prob_new - log_prob_old).exp();
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if unclipped <= clipped {
        -ratio * advantage
    } else {
        0.0
    }
}

/// d(value term)/d(value_new).
pub fn value_grad(value_new: f64, return_target: f64, value_coef: f64) -> f64 {
    2.0 * value_coef * (value_new - return_target)
}
