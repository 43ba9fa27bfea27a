//! The McAfee budget-balanced double auction.

use super::{breakeven_index, ClearingOutcome, MarketPools};

/// Clear a market with the McAfee rule.
///
/// Let K be the breakeven index. The candidate price is the midpoint of the
/// (K+1)-th bid and ask. If exactly K bids are at or above it and exactly K
/// asks at or below it, the first K pairs all trade at that single price and
/// the budget is zero. Otherwise the mechanism drops the marginal pair: the
/// first K-1 buyers pay the K-th bid, the first K-1 sellers receive the K-th
/// ask, and the auctioneer keeps the nonnegative gap. A missing (K+1)-th
/// entry on either side also forces the reduced outcome.
pub fn mcafee_clear(pools: &MarketPools) -> ClearingOutcome {
    let k = breakeven_index(pools);
    if k == 0 {
        return ClearingOutcome::empty(pools.market_id);
    }

    if let (Some(next_ask), Some(next_bid)) = (pools.asks.get(k), pools.bids.get(k)) {
        let price = (next_bid.price + next_ask.price) / 2.0;
        let bids_at_or_above = pools.bids.iter().filter(|b| b.price >= price).count();
        let asks_at_or_below = pools.asks.iter().filter(|a| a.price <= price).count();
        if bids_at_or_above == k && asks_at_or_below == k {
            let trades = (0..k)
                .map(|i| {
                    (
                        pools.bids[i].buyer_id,
                        pools.asks[i].seller_id,
                        price,
                        price,
                    )
                })
                .collect();
            return ClearingOutcome::from_trades(pools.market_id, trades, k, false);
        }
    }

    let buyer_price = pools.bids[k - 1].price;
    let seller_price = pools.asks[k - 1].price;
    let trades = (0..k - 1)
        .map(|i| {
            (
                pools.bids[i].buyer_id,
                pools.asks[i].seller_id,
                buyer_price,
                seller_price,
            )
        })
        .collect();
    ClearingOutcome::from_trades(pools.market_id, trades, k, true)
}
