//! Simulation core for decentralized AIGC service allocation in a vehicular
//! edge network.
//!
//! The crate is organized around four subsystems:
//!
//! - [`market`]: per-RSU double-sided auction clearing (McAfee mechanism plus
//!   second-price and random-matching baselines) and the economic property
//!   suite that checks individual rationality, truthfulness, budget balance,
//!   and efficiency on randomized markets.
//! - [`simenv`]: the physical world — RSU placement, vehicle mobility, the
//!   wireless channel, valuation synthesis, and the welfare/latency metrics.
//! - [`neural`]: a minimal dense-MLP substrate with exact reverse-mode
//!   gradients, Adam, and diagonal-Gaussian policy math. No external ML
//!   dependency.
//! - [`mappo`]: the POMDP wrapper over the market world and the multi-agent
//!   PPO trainer, including rollout collection, GAE, the clip loss,
//!   non-learning bidding baselines, evaluation, and checkpointing.
//!
//! Batch-level hot loops (market clearing over many pools, the property
//! suite, evaluation episodes) run data-parallel on rayon when the `parallel`
//! feature is enabled (the default) and fall back to equivalent sequential
//! code when it is not. Results are identical either way: every parallel map
//! preserves input order and every random draw is keyed by a per-item seed.

pub mod mappo;
pub mod market;
pub mod neural;
pub mod rng;
pub mod simenv;
