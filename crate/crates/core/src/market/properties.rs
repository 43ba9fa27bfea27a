//! Randomized economic property suite.
//!
//! Checks the mechanism guarantees over large batches of random markets:
//! individual rationality against submitted prices, weak budget balance,
//! truthfulness under unilateral deviations, efficiency against the
//! exhaustive matching oracle, per-slot feasibility, and determinism of the
//! serialized outcome. The suite backs both the `mechanism-props` CLI
//! subcommand and the acceptance tests.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    breakeven_index, build_pools, clear, efficient_match_oracle, mcafee_clear, Ask, Bid,
    ClearingOutcome, MarketPools, MechanismKind,
};
use crate::rng::{child_seed, seeded};

/// Slack allowed when comparing truthful utility against a deviation, to
/// absorb floating-point noise in otherwise exact ties.
pub const TRUTHFULNESS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyConfig {
    /// Random markets checked for IR, budget, efficiency, feasibility, and
    /// determinism.
    pub market_instances: usize,
    /// Largest pool size per side for those markets.
    pub max_pool: usize,
    /// Random truthful markets checked against unilateral deviations.
    pub truthfulness_instances: usize,
    /// Largest pool size per side for the truthfulness markets.
    pub truthfulness_max_pool: usize,
    /// Number of grid points used both for valuations and deviations.
    pub deviation_points: usize,
    pub seed: u64,
}

impl Default for PropertyConfig {
    fn default() -> Self {
        PropertyConfig {
            market_instances: 10_000,
            max_pool: 8,
            truthfulness_instances: 400,
            truthfulness_max_pool: 6,
            deviation_points: 21,
            seed: 0,
        }
    }
}

/// Aggregated check and violation counts. A fresh report merges into another
/// by field-wise addition, so batches can be verified in any order.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub market_instances: usize,
    pub truthfulness_instances: usize,
    pub ir_checks: usize,
    pub ir_violations: usize,
    pub feasibility_checks: usize,
    pub feasibility_violations: usize,
    pub determinism_checks: usize,
    pub determinism_violations: usize,
    pub mcafee_budget_checks: usize,
    pub mcafee_budget_violations: usize,
    pub random_budget_checks: usize,
    pub random_budget_violations: usize,
    pub efficiency_checks: usize,
    pub efficiency_violations: usize,
    pub truthfulness_checks: usize,
    pub truthfulness_violations: usize,
}

impl PropertyReport {
    pub fn merge(mut self, other: PropertyReport) -> PropertyReport {
        self.market_instances += other.market_instances;
        self.truthfulness_instances += other.truthfulness_instances;
        self.ir_checks += other.ir_checks;
        self.ir_violations += other.ir_violations;
        self.feasibility_checks += other.feasibility_checks;
        self.feasibility_violations += other.feasibility_violations;
        self.determinism_checks += other.determinism_checks;
        self.determinism_violations += other.determinism_violations;
        self.mcafee_budget_checks += other.mcafee_budget_checks;
        self.mcafee_budget_violations += other.mcafee_budget_violations;
        self.random_budget_checks += other.random_budget_checks;
        self.random_budget_violations += other.random_budget_violations;
        self.efficiency_checks += other.efficiency_checks;
        self.efficiency_violations += other.efficiency_violations;
        self.truthfulness_checks += other.truthfulness_checks;
        self.truthfulness_violations += other.truthfulness_violations;
        self
    }

    pub fn all_hold(&self) -> bool {
        self.ir_violations == 0
            && self.feasibility_violations == 0
            && self.determinism_violations == 0
            && self.mcafee_budget_violations == 0
            && self.random_budget_violations == 0
            && self.efficiency_violations == 0
            && self.truthfulness_violations == 0
    }

    pub fn summary_lines(&self) -> Vec<String> {
        vec![
            format!(
                "individual rationality (all mechanisms): {} checks, {} violations",
                self.ir_checks, self.ir_violations
            ),
            format!(
                "weak budget balance (mcafee): {} checks, {} violations",
                self.mcafee_budget_checks, self.mcafee_budget_violations
            ),
            format!(
                "zero budget (random): {} checks, {} violations",
                self.random_budget_checks, self.random_budget_violations
            ),
            format!(
                "efficiency within one trade of oracle (mcafee): {} checks, {} violations",
                self.efficiency_checks, self.efficiency_violations
            ),
            format!(
                "per-slot feasibility (all mechanisms): {} checks, {} violations",
                self.feasibility_checks, self.feasibility_violations
            ),
            format!(
                "serialized determinism (all mechanisms): {} checks, {} violations",
                self.determinism_checks, self.determinism_violations
            ),
            format!(
                "truthfulness under unilateral deviation (mcafee): {} checks, {} violations",
                self.truthfulness_checks, self.truthfulness_violations
            ),
        ]
    }
}

/// Run the whole suite sequentially.
pub fn run_property_suite_seq(config: &PropertyConfig) -> PropertyReport {
    let markets = (0..config.market_instances)
        .map(|i| market_instance_report(config, i))
        .fold(PropertyReport::default(), PropertyReport::merge);
    let truth = (0..config.truthfulness_instances)
        .map(|i| truthfulness_instance_report(config, i))
        .fold(PropertyReport::default(), PropertyReport::merge);
    markets.merge(truth)
}

/// Run the whole suite, fanning instances out across threads when the
/// `parallel` feature is enabled. Counts match [`run_property_suite_seq`].
#[cfg(feature = "parallel")]
pub fn run_property_suite(config: &PropertyConfig) -> PropertyReport {
    use rayon::prelude::*;
    let markets = (0..config.market_instances)
        .into_par_iter()
        .map(|i| market_instance_report(config, i))
        .reduce(PropertyReport::default, PropertyReport::merge);
    let truth = (0..config.truthfulness_instances)
        .into_par_iter()
        .map(|i| truthfulness_instance_report(config, i))
        .reduce(PropertyReport::default, PropertyReport::merge);
    markets.merge(truth)
}

#[cfg(not(feature = "parallel"))]
pub fn run_property_suite(config: &PropertyConfig) -> PropertyReport {
    run_property_suite_seq(config)
}

fn market_instance_report(config: &PropertyConfig, index: usize) -> PropertyReport {
    let mut rng = seeded(child_seed(child_seed(config.seed, 0), index as u64));
    let n_asks = rng.gen_range(1..=config.max_pool);
    let n_bids = rng.gen_range(1..=config.max_pool);
    let asks: Vec<Ask> = (0..n_asks)
        .map(|seller_id| Ask {
            seller_id,
            price: rng.gen::<f64>(),
        })
        .collect();
    let bids: Vec<Bid> = (0..n_bids)
        .map(|buyer_id| Bid {
            buyer_id,
            price: rng.gen::<f64>(),
        })
        .collect();
    let ask_prices: BTreeMap<usize, f64> = asks.iter().map(|a| (a.seller_id, a.price)).collect();
    let bid_prices: BTreeMap<usize, f64> = bids.iter().map(|b| (b.buyer_id, b.price)).collect();
    let pools = build_pools(index, asks, bids);

    let mut report = PropertyReport {
        market_instances: 1,
        ..PropertyReport::default()
    };
    for (mech_idx, mech) in MechanismKind::ALL.iter().enumerate() {
        let clear_seed = child_seed(child_seed(config.seed, 2), (index * 8 + mech_idx) as u64);
        let out = clear(*mech, &pools, clear_seed);

        for &(buyer, seller) in &out.matches {
            report.ir_checks += 2;
            if out.buyer_payments[&buyer] > bid_prices[&buyer] {
                report.ir_violations += 1;
            }
            if out.seller_revenues[&seller] < ask_prices[&seller] {
                report.ir_violations += 1;
            }
        }

        report.feasibility_checks += 1;
        if !all_distinct(out.matches.iter().map(|m| m.0))
            || !all_distinct(out.matches.iter().map(|m| m.1))
        {
            report.feasibility_violations += 1;
        }

        report.determinism_checks += 1;
        let replay = clear(*mech, &pools, clear_seed);
        let first = serde_json::to_string(&out).expect("outcome serializes");
        let second = serde_json::to_string(&replay).expect("outcome serializes");
        if first != second {
            report.determinism_violations += 1;
        }

        match mech {
            MechanismKind::McAfeeDouble => {
                report.mcafee_budget_checks += 1;
                let balanced_when_unreduced = out.used_trade_reduction || out.local_budget == 0.0;
                if out.local_budget < 0.0 || !balanced_when_unreduced {
                    report.mcafee_budget_violations += 1;
                }
                let oracle =
                    efficient_match_oracle(&pools).expect("pool within oracle budget");
                report.efficiency_checks += 2;
                let m = out.matches.len();
                if !(m == oracle || (oracle > 0 && m == oracle - 1)) {
                    report.efficiency_violations += 1;
                }
                if breakeven_index(&pools) != oracle {
                    report.efficiency_violations += 1;
                }
            }
            MechanismKind::RandomMatch => {
                report.random_budget_checks += 1;
                if out.local_budget != 0.0 {
                    report.random_budget_violations += 1;
                }
            }
            MechanismKind::SecondPrice => {}
        }
    }
    report
}

fn truthfulness_instance_report(config: &PropertyConfig, index: usize) -> PropertyReport {
    let mut rng = seeded(child_seed(child_seed(config.seed, 1), index as u64));
    let points = config.deviation_points.max(2);
    let grid = |k: usize| k as f64 / (points - 1) as f64;
    let n_sellers = rng.gen_range(1..=config.truthfulness_max_pool);
    let n_buyers = rng.gen_range(1..=config.truthfulness_max_pool);
    let seller_values: Vec<f64> = (0..n_sellers).map(|_| grid(rng.gen_range(0..points))).collect();
    let buyer_values: Vec<f64> = (0..n_buyers).map(|_| grid(rng.gen_range(0..points))).collect();

    let truthful_outcome = mcafee_clear(&pools_from(&seller_values, &buyer_values));
    let mut report = PropertyReport {
        truthfulness_instances: 1,
        ..PropertyReport::default()
    };

    for buyer in 0..n_buyers {
        let honest = buyer_utility(&truthful_outcome, buyer, buyer_values[buyer]);
        for k in 0..points {
            let mut reports = buyer_values.clone();
            reports[buyer] = grid(k);
            let deviated = mcafee_clear(&pools_from(&seller_values, &reports));
            let utility = buyer_utility(&deviated, buyer, buyer_values[buyer]);
            report.truthfulness_checks += 1;
            if honest < utility - TRUTHFULNESS_TOLERANCE {
                report.truthfulness_violations += 1;
            }
        }
    }
    for seller in 0..n_sellers {
        let honest = seller_utility(&truthful_outcome, seller, seller_values[seller]);
        for k in 0..points {
            let mut reports = seller_values.clone();
            reports[seller] = grid(k);
            let deviated = mcafee_clear(&pools_from(&reports, &buyer_values));
            let utility = seller_utility(&deviated, seller, seller_values[seller]);
            report.truthfulness_checks += 1;
            if honest < utility - TRUTHFULNESS_TOLERANCE {
                report.truthfulness_violations += 1;
            }
        }
    }
    report
}

fn pools_from(ask_reports: &[f64], bid_reports: &[f64]) -> MarketPools {
    let asks = ask_reports
        .iter()
        .enumerate()
        .map(|(seller_id, &price)| Ask { seller_id, price })
        .collect();
    let bids = bid_reports
        .iter()
        .enumerate()
        .map(|(buyer_id, &price)| Bid { buyer_id, price })
        .collect();
    build_pools(0, asks, bids)
}

fn buyer_utility(outcome: &ClearingOutcome, buyer_id: usize, valuation: f64) -> f64 {
    outcome
        .buyer_payments
        .get(&buyer_id)
        .map_or(0.0, |payment| valuation - payment)
}

fn seller_utility(outcome: &ClearingOutcome, seller_id: usize, valuation: f64) -> f64 {
    outcome
        .seller_revenues
        .get(&seller_id)
        .map_or(0.0, |revenue| revenue - valuation)
}

fn all_distinct(ids: impl Iterator<Item = usize>) -> bool {
    let mut seen = Vec::new();
    for id in ids {
        if seen.contains(&id) {
            return false;
        }
        seen.push(id);
    }
    true
}
