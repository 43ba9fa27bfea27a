//! Frozen-policy evaluation over independent seeded episodes, plus the
//! non-learning bidding baselines. Learned policies act through their mean;
//! baselines bid truthfully or uniformly at random.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::market::MechanismKind;
use crate::rng::child_seed;
use crate::simenv::{World, WorldConfig};

use super::policy::PolicySet;
use super::rollout::{run_episode, EpisodeBidder};
use super::{BidderKind, MappoError, RolloutBuffer, TrainConfig};

/// What supplies the bids being evaluated.
#[derive(Debug, Clone, Copy)]
pub enum PolicySource<'a> {
    Learned(&'a PolicySet),
    Baseline(BidderKind),
}

/// Mean and population standard deviation over episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    fn over(samples: &[f64]) -> Stat {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Stat {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Aggregates over evaluation episodes; each episode contributes its
/// per-slot mean of the four series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub episodes: usize,
    pub reward: Stat,
    pub social_welfare: Stat,
    pub budget: Stat,
    pub latency: Stat,
}

/// One baseline bid: the valuation itself, or uniform in [0, 2·u_v].
pub fn baseline_policy(kind: BidderKind, valuation: f64, rng: &mut ChaCha8Rng) -> f64 {
    match kind {
        BidderKind::Truthful => valuation,
        BidderKind::RandomBid => {
            if valuation > 0.0 {
                rng.gen_range(0.0..2.0 * valuation)
            } else {
                0.0
            }
        }
        BidderKind::Learned => {
            unreachable!("learned bidders act through a policy, not a baseline")
        }
    }
}

fn episode_means(buffer: &RolloutBuffer) -> [f64; 4] {
    let slots = buffer.slot_metrics.len().max(1) as f64;
    [
        buffer.rewards.iter().sum::<f64>() / slots,
        buffer
            .slot_metrics
            .iter()
            .map(|m| m.social_welfare)
            .sum::<f64>()
            / slots,
        buffer
            .slot_metrics
            .iter()
            .map(|m| m.global_budget)
            .sum::<f64>()
            / slots,
        buffer
            .slot_metrics
            .iter()
            .map(|m| m.total_latency)
            .sum::<f64>()
            / slots,
    ]
}

fn run_one(
    source: PolicySource<'_>,
    world_cfg: &WorldConfig,
    cfg: &TrainConfig,
    mechanism: MechanismKind,
    world_seed: u64,
    action_seed: u64,
) -> Result<[f64; 4], MappoError> {
    let mut episode_cfg = world_cfg.clone();
    episode_cfg.rng_seed = world_seed;
    let mut world = World::new(episode_cfg)?;
    let bidder = match source {
        PolicySource::Learned(policies) => EpisodeBidder::Policy {
            policies,
            critic: None,
            deterministic: true,
        },
        PolicySource::Baseline(BidderKind::Truthful) => EpisodeBidder::Truthful,
        PolicySource::Baseline(BidderKind::RandomBid) => EpisodeBidder::Random,
        PolicySource::Baseline(BidderKind::Learned) => {
            return Err(MappoError::InvalidConfig {
                field: "bidder",
                message: "learned bidding needs a policy set or checkpoint".into(),
            })
        }
    };
    let buffer = run_episode(&mut world, bidder, mechanism, cfg, action_seed)?;
    Ok(episode_means(&buffer))
}

fn report_from(samples: Vec<[f64; 4]>) -> EvalReport {
    let column = |i: usize| samples.iter().map(|s| s[i]).collect::<Vec<f64>>();
    EvalReport {
        episodes: samples.len(),
        reward: Stat::over(&column(0)),
        social_welfare: Stat::over(&column(1)),
        budget: Stat::over(&column(2)),
        latency: Stat::over(&column(3)),
    }
}

/// Evaluate over `episodes` independent worlds, sequentially.
pub fn evaluate_seq(
    source: PolicySource<'_>,
    world_cfg: &WorldConfig,
    cfg: &TrainConfig,
    mechanism: MechanismKind,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, MappoError> {
    if episodes == 0 {
        return Err(MappoError::EmptyEvaluation);
    }
    world_cfg.validate()?;
    let world_seeds = child_seed(seed, 6);
    let action_seeds = child_seed(seed, 8);
    let samples = (0..episodes)
        .map(|i| {
            run_one(
                source,
                world_cfg,
                cfg,
                mechanism,
                child_seed(world_seeds, i as u64),
                child_seed(action_seeds, i as u64),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(report_from(samples))
}

/// Evaluate over independent worlds, in parallel when the `parallel` feature
/// is enabled. Results match [`evaluate_seq`] exactly.
#[cfg(feature = "parallel")]
pub fn evaluate(
    source: PolicySource<'_>,
    world_cfg: &WorldConfig,
    cfg: &TrainConfig,
    mechanism: MechanismKind,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, MappoError> {
    use rayon::prelude::*;
    if episodes == 0 {
        return Err(MappoError::EmptyEvaluation);
    }
    world_cfg.validate()?;
    let world_seeds = child_seed(seed, 6);
    let action_seeds = child_seed(seed, 8);
    let samples = (0..episodes)
        .into_par_iter()
        .map(|i| {
            run_one(
                source,
                world_cfg,
                cfg,
                mechanism,
                child_seed(world_seeds, i as u64),
                child_seed(action_seeds, i as u64),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(report_from(samples))
}

#[cfg(not(feature = "parallel"))]
pub fn evaluate(
    source: PolicySource<'_>,
    world_cfg: &WorldConfig,
    cfg: &TrainConfig,
    mechanism: MechanismKind,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, MappoError> {
    evaluate_seq(source, world_cfg, cfg, mechanism, episodes, seed)
}
