//! Exhaustive-search efficiency oracle used by the property suite.

use super::{MarketError, MarketPools};

/// Largest per-side pool size the oracle will accept.
pub const ORACLE_MAX_POOL: usize = 12;

/// Number of trades in an efficient assignment: over every set of disjoint
/// (buyer, seller) pairs with bid ≥ ask, maximize total gains from trade and
/// break welfare ties toward more trades. Searched exhaustively over seller
/// subsets, so pools with more than [`ORACLE_MAX_POOL`] entries per side are
/// rejected.
pub fn efficient_match_oracle(pools: &MarketPools) -> Result<usize, MarketError> {
    for (side, len) in [("ask", pools.asks.len()), ("bid", pools.bids.len())] {
        if len > ORACLE_MAX_POOL {
            return Err(MarketError::PoolTooLarge {
                side,
                len,
                max: ORACLE_MAX_POOL,
            });
        }
    }
    let mut memo = vec![None; (pools.bids.len() + 1) << pools.asks.len()];
    let (_, trades) = best(pools, 0, 0, &mut memo);
    Ok(trades as usize)
}

fn best(
    pools: &MarketPools,
    buyer: usize,
    used_sellers: u32,
    memo: &mut [Option<(f64, u8)>],
) -> (f64, u8) {
    if buyer == pools.bids.len() {
        return (0.0, 0);
    }
    let key = (buyer << pools.asks.len()) | used_sellers as usize;
    if let Some(cached) = memo[key] {
        return cached;
    }
    let mut result = best(pools, buyer + 1, used_sellers, memo);
    for (s, ask) in pools.asks.iter().enumerate() {
        if used_sellers & (1 << s) == 0 && pools.bids[buyer].price >= ask.price {
            let (welfare, trades) = best(pools, buyer + 1, used_sellers | (1 << s), memo);
            let candidate = (welfare + (pools.bids[buyer].price - ask.price), trades + 1);
            if candidate.0 > result.0 || (candidate.0 == result.0 && candidate.1 > result.1) {
                result = candidate;
            }
        }
    }
    memo[key] = Some(result);
    result
}
