//! The training loop: collect a batch of independent episodes per epoch, run
//! clipped PPO updates over shuffled minibatches, log a CSV row per epoch,
//! and checkpoint on an interval.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::market::MechanismKind;
use crate::neural::{backward, gaussian_logprob_grad, GradientBundle};
use crate::rng::{child_seed, seeded};
use crate::simenv::{World, WorldConfig};

use super::checkpoint::{save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
use super::loss::{policy_grad_wrt_log_prob, ppo_clip_loss, value_grad};
use super::policy::{Critic, PolicySet};
use super::rollout::collect_rollout;
use super::{MappoError, RolloutBuffer, TrainConfig};

pub const TRAIN_LOG_HEADER: &str =
    "epoch,mean_reward,mean_sw,mean_budget,mean_latency,policy_loss,value_loss,entropy";

/// One training-log row. Row 0 is the pre-update evaluation of the fresh
/// policies; rows 1..=epochs follow one per epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub mean_reward: f64,
    pub mean_sw: f64,
    pub mean_budget: f64,
    pub mean_latency: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

impl EpochRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.epoch,
            self.mean_reward,
            self.mean_sw,
            self.mean_budget,
            self.mean_latency,
            self.policy_loss,
            self.value_loss,
            self.entropy
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub rows: Vec<EpochRow>,
    pub policies: PolicySet,
    pub critic: Critic,
}

struct LossTally {
    policy: f64,
    value: f64,
    entropy: f64,
    count: usize,
}

impl LossTally {
    fn new() -> LossTally {
        LossTally {
            policy: 0.0,
            value: 0.0,
            entropy: 0.0,
            count: 0,
        }
    }

    fn means(&self) -> (f64, f64, f64) {
        if self.count == 0 {
            return (0.0, 0.0, 0.0);
        }
        let n = self.count as f64;
        (self.policy / n, self.value / n, self.entropy / n)
    }
}

fn metric_row(epoch: usize, buffer: &RolloutBuffer, tally: &LossTally) -> EpochRow {
    let slots = buffer.slot_metrics.len().max(1) as f64;
    let (policy_loss, value_loss, entropy) = tally.means();
    EpochRow {
        epoch,
        mean_reward: buffer.rewards.iter().sum::<f64>() / slots,
        mean_sw: buffer
            .slot_metrics
            .iter()
            .map(|m| m.social_welfare)
            .sum::<f64>()
            / slots,
        mean_budget: buffer
            .slot_metrics
            .iter()
            .map(|m| m.global_budget)
            .sum::<f64>()
            / slots,
        mean_latency: buffer
            .slot_metrics
            .iter()
            .map(|m| m.total_latency)
            .sum::<f64>()
            / slots,
        policy_loss,
        value_loss,
        entropy,
    }
}

/// Run PPO updates on one collected buffer, mutating policies and critic.
/// Returns the loss tally over every transition visit.
fn update_on_buffer(
    epoch: usize,
    buffer: &RolloutBuffer,
    policies: &mut PolicySet,
    critic: &mut Critic,
    cfg: &TrainConfig,
    shuffle_rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<LossTally, MappoError> {
    let mut tally = LossTally::new();
    let mut indices: Vec<(usize, usize)> = buffer
        .transitions
        .iter()
        .enumerate()
        .flat_map(|(agent, ts)| (0..ts.len()).map(move |t| (agent, t)))
        .collect();
    if indices.is_empty() {
        return Ok(tally);
    }

    for _ in 0..cfg.ppo_updates_per_batch {
        indices.shuffle(shuffle_rng);
        for minibatch in indices.chunks(cfg.minibatch) {
            let weight = 1.0 / minibatch.len() as f64;
            let mut policy_grads: BTreeMap<usize, (GradientBundle, f64)> = BTreeMap::new();
            let mut critic_grads = GradientBundle::zeros_like(&critic.net);

            for &(agent, t) in minibatch {
                let transition = &buffer.transitions[agent][t];
                let input = policies.input_for(agent, &transition.observation);
                let policy = policies.policy(agent);
                let (mean, log_prob_new, entropy) =
                    policy.evaluate(&input, transition.raw_action)?;
                let advantage = buffer.advantages[agent][t];
                let target = buffer.return_targets[agent][t];
                let value_new = critic.value(&buffer.global_states[t])? * buffer.annuities[t];

                let (total, parts) = ppo_clip_loss(
                    log_prob_new,
                    transition.log_prob,
                    advantage,
                    value_new,
                    target,
                    entropy,
                    cfg,
                );
                if !total.is_finite() {
                    return Err(MappoError::NonFiniteLoss {
                        epoch,
                        detail: format!(
                            "agent {agent} slot {t}: total {total}, policy {}, value {}, \
                             log_prob_new {log_prob_new}, advantage {advantage}",
                            parts.policy, parts.value
                        ),
                    });
                }
                tally.policy += parts.policy;
                tally.value += parts.value;
                tally.entropy += parts.entropy;
                tally.count += 1;

                let d_log_prob = policy_grad_wrt_log_prob(
                    log_prob_new,
                    transition.log_prob,
                    advantage,
                    cfg.clip,
                );
                let (d_mean, d_log_std) = gaussian_logprob_grad(
                    &[mean],
                    &[policy.log_std],
                    &[transition.raw_action],
                );
                let upstream = d_log_prob * d_mean[0];
                let net_grads = backward(&policy.net, &input, &[upstream])?;
                let log_std_grad = d_log_prob * d_log_std[0] - cfg.entropy_coef;
                let slot = policy_grads.entry(policies.policy_index(agent)).or_insert_with(
                    || (GradientBundle::zeros_like(&policy.net), 0.0),
                );
                slot.0.add_scaled(&net_grads, weight);
                slot.1 += log_std_grad * weight;

                let value_upstream = value_grad(value_new, target, cfg.value_coef) * buffer.annuities[t];
                let value_bundle =
                    backward(&critic.net, &buffer.global_states[t], &[value_upstream])?;
                critic_grads.add_scaled(&value_bundle, weight);
            }

            for (index, (net_grads, log_std_grad)) in policy_grads {
                policies.policies[index].apply_update(&net_grads, log_std_grad)?;
            }
            critic.apply_update(&critic_grads)?;
        }
    }
    Ok(tally)
}

/// Collect `cfg.episodes_per_batch` independent episodes into one batch.
/// Episode worlds and action streams are seeded by the flat episode index,
/// so the result is identical whether collection runs in parallel or not.
fn collect_batch(
    world_cfg: &WorldConfig,
    policies: &PolicySet,
    critic: &Critic,
    mechanism: MechanismKind,
    cfg: &TrainConfig,
    world_seed_base: u64,
    action_seed_base: u64,
    epoch: usize,
) -> Result<RolloutBuffer, MappoError> {
    let indices: Vec<u64> = (0..cfg.episodes_per_batch)
        .map(|k| (epoch * cfg.episodes_per_batch + k) as u64)
        .collect();
    let run_one = |index: &u64| -> Result<RolloutBuffer, MappoError> {
        let mut episode_cfg = world_cfg.clone();
        episode_cfg.rng_seed = child_seed(world_seed_base, *index);
        let mut world = World::new(episode_cfg)?;
        collect_rollout(
            &mut world,
            policies,
            critic,
            mechanism,
            cfg,
            child_seed(action_seed_base, *index),
        )
    };
    #[cfg(feature = "parallel")]
    let episodes = {
        use rayon::prelude::*;
        indices
            .par_iter()
            .map(run_one)
            .collect::<Result<Vec<_>, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let episodes = indices.iter().map(run_one).collect::<Result<Vec<_>, _>>()?;
    let mut batch = RolloutBuffer::merge(episodes);
    batch.finalize(cfg.gamma, cfg.gae_lambda);
    Ok(batch)
}

/// Train buyer policies for `cfg.epochs` epochs. Writes `training_log.csv`
/// and periodic checkpoints under `out_dir` when given; always returns the
/// full row list and the final parameters.
pub fn train(
    world_cfg: &WorldConfig,
    cfg: &TrainConfig,
    mechanism: MechanismKind,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<TrainResult, MappoError> {
    world_cfg.validate()?;
    cfg.validate()?;

    let obs_dim = world_cfg.rsu_count + 2;
    let mut policies = PolicySet::new(
        world_cfg.vehicle_count,
        obs_dim,
        &cfg.hidden_sizes,
        cfg.share_policy_params,
        cfg.learning_rate,
        seed,
    );
    let mut critic = Critic::new(
        3 * world_cfg.rsu_count,
        &cfg.hidden_sizes,
        cfg.learning_rate,
        child_seed(seed, 9),
    );
    let mut shuffle_rng = seeded(child_seed(seed, 7));
    let world_seeds = child_seed(seed, 5);
    let action_seeds = child_seed(seed, 4);

    let mut log_file = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| MappoError::Io {
                path: dir.display().to_string(),
                message: e.to_string(),
            })?;
            let path = dir.join("training_log.csv");
            let mut file = std::fs::File::create(&path).map_err(|e| MappoError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            writeln!(file, "{TRAIN_LOG_HEADER}").map_err(|e| MappoError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            Some((file, path))
        }
        None => None,
    };
    let emit = |row: &EpochRow, log_file: &mut Option<(std::fs::File, std::path::PathBuf)>| {
        if let Some((file, path)) = log_file {
            writeln!(file, "{}", row.csv())
                .and_then(|_| file.flush())
                .map_err(|e| MappoError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
        }
        Ok::<(), MappoError>(())
    };

    let mut rows = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..=cfg.epochs {
        let buffer = collect_batch(
            world_cfg,
            &policies,
            &critic,
            mechanism,
            cfg,
            world_seeds,
            action_seeds,
            epoch,
        )?;
        let tally = if epoch == 0 {
            // Start the critic's output at the observed per-slot reward
            // level before any gradient step.
            if !buffer.rewards.is_empty() {
                let level = buffer.rewards.iter().sum::<f64>() / buffer.rewards.len() as f64;
                critic.warm_start_bias(level);
            }
            LossTally::new()
        } else {
            update_on_buffer(epoch, &buffer, &mut policies, &mut critic, cfg, &mut shuffle_rng)?
        };
        let row = metric_row(epoch, &buffer, &tally);
        emit(&row, &mut log_file)?;
        rows.push(row);

        if let Some(dir) = out_dir {
            let due = epoch > 0 && epoch % cfg.checkpoint_interval == 0;
            if due || epoch == cfg.epochs {
                let checkpoint = Checkpoint {
                    version: CHECKPOINT_VERSION,
                    epoch,
                    mechanism,
                    world_config: world_cfg.clone(),
                    train_config: cfg.clone(),
                    policies: policies.clone(),
                    critic: critic.clone(),
                    rng_state: shuffle_rng.clone(),
                };
                if due {
                    save_checkpoint(&dir.join(format!("checkpoint-epoch-{epoch}.json")), &checkpoint)?;
                }
                if epoch == cfg.epochs {
                    save_checkpoint(&dir.join("checkpoint.json"), &checkpoint)?;
                }
            }
        }
    }

    Ok(TrainResult {
        rows,
        policies,
        critic,
    })
}
