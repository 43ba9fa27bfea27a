//! Double-sided auction engine.
//!
//! Each RSU runs a local market per time slot: virtual machines submit asks,
//! vehicles submit bids, and the auctioneer clears the market with one of
//! three mechanisms. [`mcafee_clear`] implements the budget-balanced McAfee
//! double auction; [`second_price_clear`] and [`random_clear`] are the
//! comparison baselines. Clearing is a pure function of the sorted pools, so
//! batches of markets can be cleared in parallel and recombined with
//! [`global_budget`].

mod baselines;
mod csv;
mod mcafee;
mod oracle;
pub mod properties;

pub use baselines::{random_clear, second_price_clear};
pub use csv::{match_csv_rows, MATCH_CSV_HEADER};
pub use mcafee::mcafee_clear;
pub use oracle::{efficient_match_oracle, ORACLE_MAX_POOL};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::rng::child_seed;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum MarketError {
    #[error("{side} pool has {len} entries, exceeding the brute-force budget of {max}")]
    PoolTooLarge {
        side: &'static str,
        len: usize,
        max: usize,
    },
}

/// A seller's offer: one unit of service at `price` credits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ask {
    pub seller_id: usize,
    pub price: f64,
}

/// A buyer's offer: `price` credits for one unit of service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub buyer_id: usize,
    pub price: f64,
}

/// Sorted seller and buyer pools for one RSU's market slot.
///
/// Asks are nondecreasing in price, bids nonincreasing; ties break by
/// ascending participant id so clearing is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketPools {
    pub market_id: usize,
    pub asks: Vec<Ask>,
    pub bids: Vec<Bid>,
}

/// Result of clearing one market: who trades, at what prices, and the
/// auctioneer's local budget cost (payments collected minus revenues paid).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearingOutcome {
    pub market_id: usize,
    /// Matched `(buyer_id, seller_id)` pairs.
    pub matches: Vec<(usize, usize)>,
    pub buyer_payments: BTreeMap<usize, f64>,
    pub seller_revenues: BTreeMap<usize, f64>,
    pub breakeven_index: usize,
    pub used_trade_reduction: bool,
    pub local_budget: f64,
}

impl ClearingOutcome {
    pub(crate) fn empty(market_id: usize) -> Self {
        ClearingOutcome {
            market_id,
            matches: Vec::new(),
            buyer_payments: BTreeMap::new(),
            seller_revenues: BTreeMap::new(),
            breakeven_index: 0,
            used_trade_reduction: false,
            local_budget: 0.0,
        }
    }

    /// Assemble an outcome from matched pairs and their prices, deriving the
    /// local budget as the exact difference of payment and revenue sums.
    pub(crate) fn from_trades(
        market_id: usize,
        trades: Vec<(usize, usize, f64, f64)>,
        breakeven_index: usize,
        used_trade_reduction: bool,
    ) -> Self {
        let mut matches = Vec::with_capacity(trades.len());
        let mut buyer_payments = BTreeMap::new();
        let mut seller_revenues = BTreeMap::new();
        let mut paid = 0.0;
        let mut received = 0.0;
        for (buyer, seller, payment, revenue) in trades {
            matches.push((buyer, seller));
            buyer_payments.insert(buyer, payment);
            seller_revenues.insert(seller, revenue);
            paid += payment;
            received += revenue;
        }
        ClearingOutcome {
            market_id,
            matches,
            buyer_payments,
            seller_revenues,
            breakeven_index,
            used_trade_reduction,
            local_budget: paid - received,
        }
    }
}

/// Which clearing rule an experiment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MechanismKind {
    #[serde(rename = "mcafee")]
    McAfeeDouble,
    #[serde(rename = "second-price")]
    SecondPrice,
    #[serde(rename = "random")]
    RandomMatch,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 3] = [
        MechanismKind::McAfeeDouble,
        MechanismKind::SecondPrice,
        MechanismKind::RandomMatch,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MechanismKind::McAfeeDouble => "mcafee",
            MechanismKind::SecondPrice => "second-price",
            MechanismKind::RandomMatch => "random",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mcafee" => Ok(MechanismKind::McAfeeDouble),
            "second-price" => Ok(MechanismKind::SecondPrice),
            "random" => Ok(MechanismKind::RandomMatch),
            other => Err(format!(
                "unknown mechanism `{other}` (expected mcafee, second-price, or random)"
            )),
        }
    }
}

/// Sort raw asks and bids into a market's pools.
///
/// Asks sort ascending by price, bids descending; ties break by ascending
/// participant id. Empty sides are allowed.
pub fn build_pools(market_id: usize, mut asks: Vec<Ask>, mut bids: Vec<Bid>) -> MarketPools {
    asks.sort_by(|a, b| {
        a.price
            .total_cmp(&b.price)
            .then_with(|| a.seller_id.cmp(&b.seller_id))
    });
    bids.sort_by(|a, b| {
        b.price
            .total_cmp(&a.price)
            .then_with(|| a.buyer_id.cmp(&b.buyer_id))
    });
    MarketPools {
        market_id,
        asks,
        bids,
    }
}

/// The breakeven index K: the largest k such that the k-th highest bid is at
/// least the k-th lowest ask, or 0 when no pair is profitable.
pub fn breakeven_index(pools: &MarketPools) -> usize {
    let depth = pools.asks.len().min(pools.bids.len());
    (0..depth)
        .take_while(|&i| pools.bids[i].price >= pools.asks[i].price)
        .count()
}

/// Clear one market with the selected mechanism. The seed only matters for
/// [`MechanismKind::RandomMatch`].
pub fn clear(mechanism: MechanismKind, pools: &MarketPools, seed: u64) -> ClearingOutcome {
    match mechanism {
        MechanismKind::McAfeeDouble => mcafee_clear(pools),
        MechanismKind::SecondPrice => second_price_clear(pools),
        MechanismKind::RandomMatch => random_clear(pools, seed),
    }
}

/// Clear a batch of markets sequentially. Each market's random stream is
/// keyed by its id, so the result is independent of iteration order.
pub fn clear_markets_seq(
    pools: &[MarketPools],
    mechanism: MechanismKind,
    slot_seed: u64,
) -> Vec<ClearingOutcome> {
    pools
        .iter()
        .map(|p| clear(mechanism, p, child_seed(slot_seed, p.market_id as u64)))
        .collect()
}

/// Clear a batch of markets, in parallel when the `parallel` feature is
/// enabled. Output order and contents match [`clear_markets_seq`] exactly.
#[cfg(feature = "parallel")]
pub fn clear_markets(
    pools: &[MarketPools],
    mechanism: MechanismKind,
    slot_seed: u64,
) -> Vec<ClearingOutcome> {
    use rayon::prelude::*;
    pools
        .par_iter()
        .map(|p| clear(mechanism, p, child_seed(slot_seed, p.market_id as u64)))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn clear_markets(
    pools: &[MarketPools],
    mechanism: MechanismKind,
    slot_seed: u64,
) -> Vec<ClearingOutcome> {
    clear_markets_seq(pools, mechanism, slot_seed)
}

/// Total budget cost of the decentralized market: the sum of local budgets.
pub fn global_budget(outcomes: &[ClearingOutcome]) -> f64 {
    outcomes.iter().map(|o| o.local_budget).sum()
}

#[cfg(test)]
pub(crate) fn asks_from_prices(prices: &[f64]) -> Vec<Ask> {
    prices
        .iter()
        .enumerate()
        .map(|(i, &price)| Ask {
            seller_id: i,
            price,
        })
        .collect()
}

#[cfg(test)]
pub(crate) fn bids_from_prices(prices: &[f64]) -> Vec<Bid> {
    prices
        .iter()
        .enumerate()
        .map(|(i, &price)| Bid {
            buyer_id: i,
            price,
        })
        .collect()
}
