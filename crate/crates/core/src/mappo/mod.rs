//! POMDP wrapper over the market world and the multi-agent PPO trainer:
//! observation and global-state construction, the bid action map, the shared
//! team reward, generalized advantage estimation, the clipped surrogate loss,
//! rollout collection, training, evaluation, the non-learning bidding
//! baselines, and versioned checkpoints.
//!
//! Buyers are the learning agents; sellers always ask their valuation.
//! Every agent in a slot records the same shared reward, and a single critic
//! scores the global state for all of them.

mod checkpoint;
mod eval;
mod gae;
mod loss;
mod obs;
mod policy;
mod rollout;
mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use eval::{baseline_policy, evaluate, evaluate_seq, EvalReport, PolicySource, Stat};
pub use gae::{annuity, compute_gae};
pub use loss::{policy_grad_wrt_log_prob, ppo_clip_loss, value_grad, LossComponents};
pub use obs::{
    action_to_bid, build_global_state, build_observation, compute_reward, market_counts,
    normalize_observation, ObsContext,
};
pub use policy::{Critic, Policy, PolicySet};
pub use rollout::{collect_rollout, run_episode, EpisodeBidder};
pub use trainer::{train, EpochRow, TrainResult, TRAIN_LOG_HEADER};

use serde::{Deserialize, Serialize};

use crate::neural::NeuralError;
use crate::simenv::SimError;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum MappoError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("invalid config: {field} {message}")]
    InvalidConfig {
        field: &'static str,
        message: String,
    },
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },
    #[error("evaluation needs at least one episode")]
    EmptyEvaluation,
    #[error("checkpoint {path}: expected version {expected}, found {found}")]
    VersionMismatch {
        path: String,
        expected: u32,
        found: u32,
    },
    #[error("checkpoint {path}: {message}")]
    CorruptCheckpoint { path: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// How buyers bid when no learned policy is in play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BidderKind {
    #[serde(rename = "learned")]
    Learned,
    #[serde(rename = "truthful")]
    Truthful,
    #[serde(rename = "random")]
    RandomBid,
}

impl BidderKind {
    pub const ALL: [BidderKind; 3] = [
        BidderKind::Learned,
        BidderKind::Truthful,
        BidderKind::RandomBid,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BidderKind::Learned => "learned",
            BidderKind::Truthful => "truthful",
            BidderKind::RandomBid => "random",
        }
    }
}

impl std::fmt::Display for BidderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BidderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "learned" => Ok(BidderKind::Learned),
            "truthful" => Ok(BidderKind::Truthful),
            "random" => Ok(BidderKind::RandomBid),
            other => Err(format!(
                "unknown bidder `{other}` (expected learned, truthful, or random)"
            )),
        }
    }
}

/// PPO hyperparameters and the reward/normalization constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// α in the reward's budget penalty.
    pub budget_coef: f64,
    /// w_L in the reward's latency term.
    pub latency_weight: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Independent episodes collected into each training batch.
    pub episodes_per_batch: usize,
    pub minibatch: usize,
    pub ppo_updates_per_batch: usize,
    pub share_policy_params: bool,
    pub hidden_sizes: Vec<usize>,
    /// Bits/second used to normalize rate observations.
    pub rate_max: f64,
    /// Epoch interval between checkpoint files during training.
    pub checkpoint_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.95,
            gae_lambda: 0.95,
            clip: 0.2,
            entropy_coef: 0.02,
            value_coef: 0.5,
            budget_coef: 0.01,
            latency_weight: 1.0,
            learning_rate: 0.001,
            epochs: 50,
            episodes_per_batch: 16,
            minibatch: 256,
            ppo_updates_per_batch: 1,
            share_policy_params: false,
            hidden_sizes: vec![64, 64],
            rate_max: 3.5e7,
            checkpoint_interval: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MappoError> {
        let unit_interval = [("gamma", self.gamma), ("gae_lambda", self.gae_lambda)];
        for (field, value) in unit_interval {
            if !(0.0..=1.0).contains(&value) {
                return Err(MappoError::InvalidConfig {
                    field,
                    message: format!("must lie in [0, 1], got {value}"),
                });
            }
        }
        if !(self.clip > 0.0) {
            return Err(MappoError::InvalidConfig {
                field: "clip",
                message: format!("must be positive, got {}", self.clip),
            });
        }
        let nonnegative = [
            ("entropy_coef", self.entropy_coef),
            ("value_coef", self.value_coef),
            ("budget_coef", self.budget_coef),
            ("latency_weight", self.latency_weight),
        ];
        for (field, value) in nonnegative {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(MappoError::InvalidConfig {
                    field,
                    message: format!("must be nonnegative and finite, got {value}"),
                });
            }
        }
        let positive = [
            ("learning_rate", self.learning_rate),
            ("rate_max", self.rate_max),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(MappoError::InvalidConfig {
                    field,
                    message: format!("must be positive and finite, got {value}"),
                });
            }
        }
        let at_least_one = [
            ("episodes_per_batch", self.episodes_per_batch),
            ("minibatch", self.minibatch),
            ("ppo_updates_per_batch", self.ppo_updates_per_batch),
            ("checkpoint_interval", self.checkpoint_interval),
        ];
        for (field, value) in at_least_one {
            if value == 0 {
                return Err(MappoError::InvalidConfig {
                    field,
                    message: "must be at least 1".into(),
                });
            }
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(MappoError::InvalidConfig {
                field: "hidden_sizes",
                message: "needs at least one nonzero layer width".into(),
            });
        }
        Ok(())
    }
}

/// One agent-slot interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub agent_id: usize,
    /// Base observation of length N+2 (any shared-policy one-hot is appended
    /// at use time).
    pub observation: Vec<f64>,
    /// Raw policy sample z before the tanh bid map.
    pub raw_action: f64,
    pub bid: f64,
    pub log_prob: f64,
    pub shared_reward: f64,
    pub value_estimate: f64,
    pub done: bool,
}

/// A batch of per-agent trajectories (one or more episodes back to back),
/// plus the advantage estimates computed by [`RolloutBuffer::finalize`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RolloutBuffer {
    /// transitions[agent] is that agent's slot-ordered trajectory; `done`
    /// flags mark episode boundaries.
    pub transitions: Vec<Vec<Transition>>,
    /// Global critic inputs per slot, shared by every agent.
    pub global_states: Vec<Vec<f64>>,
    /// Discounted remaining-horizon factor per slot; scales the critic's
    /// per-slot output into a value estimate.
    pub annuities: Vec<f64>,
    /// Advantages per agent per slot, normalized across the whole batch.
    pub advantages: Vec<Vec<f64>>,
    /// Unnormalized return targets per agent per slot.
    pub return_targets: Vec<Vec<f64>>,
    /// Per-slot environment metrics for logging.
    pub slot_metrics: Vec<crate::simenv::SlotMetrics>,
    /// Shared reward per slot.
    pub rewards: Vec<f64>,
}

impl RolloutBuffer {
    /// Compute GAE per agent (restarting at every `done` boundary) and
    /// normalize advantages to zero mean and unit variance across every
    /// transition in the batch.
    pub fn finalize(&mut self, gamma: f64, lambda: f64) {
        self.advantages.clear();
        self.return_targets.clear();
        for agent_transitions in &self.transitions {
            let mut adv = Vec::with_capacity(agent_transitions.len());
            let mut targets = Vec::with_capacity(agent_transitions.len());
            let mut start = 0;
            for (i, transition) in agent_transitions.iter().enumerate() {
                if transition.done || i + 1 == agent_transitions.len() {
                    let segment = &agent_transitions[start..=i];
                    let rewards: Vec<f64> = segment.iter().map(|t| t.shared_reward).collect();
                    let values: Vec<f64> = segment.iter().map(|t| t.value_estimate).collect();
                    let (a, g) = compute_gae(&rewards, &values, 0.0, gamma, lambda);
                    adv.extend(a);
                    targets.extend(g);
                    start = i + 1;
                }
            }
            self.advantages.push(adv);
            self.return_targets.push(targets);
        }
        let all: Vec<f64> = self.advantages.iter().flatten().copied().collect();
        if all.len() < 2 {
            return;
        }
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / all.len() as f64;
        let std = var.sqrt();
        for agent in &mut self.advantages {
            for a in agent {
                *a = (*a - mean) / (std + 1e-8);
            }
        }
    }

    /// Concatenate episode buffers into one batch. Advantages and targets are
    /// dropped; call [`RolloutBuffer::finalize`] on the result to recompute
    /// them across the whole batch.
    pub fn merge(episodes: Vec<RolloutBuffer>) -> RolloutBuffer {
        let mut merged = RolloutBuffer::default();
        for episode in episodes {
            if merged.transitions.is_empty() {
                merged.transitions = vec![Vec::new(); episode.transitions.len()];
            }
            assert_eq!(
                merged.transitions.len(),
                episode.transitions.len(),
                "merged episodes must agree on the agent count"
            );
            for (agent, trajectory) in episode.transitions.into_iter().enumerate() {
                merged.transitions[agent].extend(trajectory);
            }
            merged.global_states.extend(episode.global_states);
            merged.annuities.extend(episode.annuities);
            merged.slot_metrics.extend(episode.slot_metrics);
            merged.rewards.extend(episode.rewards);
        }
        merged
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.iter().map(Vec::len).sum()
    }
}
