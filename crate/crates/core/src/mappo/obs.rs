//! Observation and global-state assembly, the bid action map, and the shared
//! team reward.

use crate::market::ClearingOutcome;
use crate::simenv::{transmission_rate, World};

use super::TrainConfig;

/// Slot-persistent normalization state for observations: last transaction
/// price per market and the running price scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsContext {
    /// Last transaction price per market; 0 until that market first trades.
    pub last_prices: Vec<f64>,
    /// Running max of observed prices, floored at 1.
    pub price_scale: f64,
    /// Bits/second normalization constant for rate components.
    pub rate_max: f64,
}

impl ObsContext {
    pub fn new(market_count: usize, rate_max: f64) -> ObsContext {
        ObsContext {
            last_prices: vec![0.0; market_count],
            price_scale: 1.0,
            rate_max,
        }
    }

    /// Fold one slot's clearing outcomes in: a market that traded updates its
    /// last price to the mean mid-price of its matches, others keep theirs.
    pub fn record_outcomes(&mut self, outcomes: &[ClearingOutcome]) {
        for outcome in outcomes {
            if outcome.matches.is_empty() {
                continue;
            }
            let mut sum = 0.0;
            for (buyer, seller) in &outcome.matches {
                let paid = outcome.buyer_payments[buyer];
                let received = outcome.seller_revenues[seller];
                sum += (paid + received) / 2.0;
            }
            let mean = sum / outcome.matches.len() as f64;
            self.last_prices[outcome.market_id] = mean;
            self.price_scale = self.price_scale.max(mean);
        }
    }
}

/// Participant count |V_n ∪ M_n| per market.
pub fn market_counts(world: &World) -> Vec<usize> {
    (0..world.config.rsu_count)
        .map(|rsu| world.market_members(rsu).len() + world.market_sellers(rsu).len())
        .collect()
}

/// The seller a buyer would reach for in a market: lowest ask, ties to the
/// lower id.
pub fn cheapest_ask_seller(world: &World, rsu_id: usize) -> Option<usize> {
    world
        .market_sellers(rsu_id)
        .into_iter()
        .min_by(|&a, &b| {
            world.sellers[a]
                .valuation
                .total_cmp(&world.sellers[b].valuation)
                .then(a.cmp(&b))
        })
}

/// A buyer's rate to the cheapest-ask seller of its home market; 0 when the
/// market has no sellers.
pub fn candidate_rate(world: &World, agent_id: usize) -> f64 {
    let vehicle = &world.vehicles[agent_id];
    match cheapest_ask_seller(world, vehicle.home_market) {
        Some(seller) => transmission_rate(
            &world.sellers[seller],
            vehicle,
            &world.rsu_positions,
            &world.config.channel,
        ),
        None => 0.0,
    }
}

/// Assemble the normalized length-N+2 vector from raw components: counts ÷
/// vehicle count, price ÷ scale, rate ÷ rate_max.
pub fn normalize_observation(
    counts: &[usize],
    vehicle_count: usize,
    last_price: f64,
    price_scale: f64,
    rate: f64,
    rate_max: f64,
) -> Vec<f64> {
    let denom = vehicle_count.max(1) as f64;
    let mut obs: Vec<f64> = counts.iter().map(|&c| c as f64 / denom).collect();
    obs.push(last_price / price_scale.max(1.0));
    obs.push(rate / rate_max);
    obs
}

/// One agent's observation at the current slot: every market's participant
/// count, the home market's last transaction price, and the rate to the
/// cheapest-ask home seller.
pub fn build_observation(world: &World, ctx: &ObsContext, agent_id: usize) -> Vec<f64> {
    let counts = market_counts(world);
    let home = world.vehicles[agent_id].home_market;
    normalize_observation(
        &counts,
        world.config.vehicle_count,
        ctx.last_prices[home],
        ctx.price_scale,
        candidate_rate(world, agent_id),
        ctx.rate_max,
    )
}

/// Critic input of length 3N: all counts, all last prices, and the mean
/// candidate rate per market, normalized like observations.
pub fn build_global_state(world: &World, ctx: &ObsContext) -> Vec<f64> {
    let counts = market_counts(world);
    let denom = world.config.vehicle_count.max(1) as f64;
    let scale = ctx.price_scale.max(1.0);
    let n = world.config.rsu_count;
    let mut state = Vec::with_capacity(3 * n);
    state.extend(counts.iter().map(|&c| c as f64 / denom));
    state.extend(ctx.last_prices.iter().map(|&p| p / scale));
    for rsu in 0..n {
        let members = world.market_members(rsu);
        let mean_rate = if members.is_empty() {
            0.0
        } else {
            members.iter().map(|&v| candidate_rate(world, v)).sum::<f64>() / members.len() as f64
        };
        state.push(mean_rate / ctx.rate_max);
    }
    state
}

/// Squash a raw policy sample into a bid: u_v·(1 + tanh(z)) ∈ [0, 2·u_v],
/// truthful at z = 0.
pub fn action_to_bid(raw_action: f64, valuation: f64) -> f64 {
    valuation * (1.0 + raw_action.tanh())
}

/// Shared team reward for one slot: welfare minus the squared-budget penalty
/// minus weighted latency.
pub fn compute_reward(sw: f64, beta: f64, latency: f64, cfg: &TrainConfig) -> f64 {
    sw - cfg.budget_coef * beta * beta - cfg.latency_weight * latency
}
