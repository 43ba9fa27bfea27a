//! Comparison mechanisms: a double-sided second-price rule and a random
//! maximal matching.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{breakeven_index, ClearingOutcome, MarketPools};
use crate::rng::seeded;

/// Second-price style clearing: the first K pairs trade, each buyer pays the
/// next-lower bid (the last matched buyer pays the K+1-th bid or its matched
/// ask, whichever is higher), and each seller receives its own ask. The
/// budget is whatever gap those prices leave.
pub fn second_price_clear(pools: &MarketPools) -> ClearingOutcome {
    let k = breakeven_index(pools);
    if k == 0 {
        return ClearingOutcome::empty(pools.market_id);
    }
    let last_payment = match pools.bids.get(k) {
        Some(next) => next.price.max(pools.asks[k - 1].price),
        None => pools.asks[k - 1].price,
    };
    let trades = (0..k)
        .map(|i| {
            let payment = if i + 1 < k {
                pools.bids[i + 1].price
            } else {
                last_payment
            };
            (
                pools.bids[i].buyer_id,
                pools.asks[i].seller_id,
                payment,
                pools.asks[i].price,
            )
        })
        .collect();
    ClearingOutcome::from_trades(pools.market_id, trades, k, false)
}

/// Random clearing: draw feasible (bid ≥ ask) pairs uniformly at random until
/// none remain, so the matching is maximal. Each pair trades at a uniform
/// price in [ask, bid] paid by the buyer directly to the seller, leaving the
/// auctioneer's budget at exactly zero.
pub fn random_clear(pools: &MarketPools, rng_seed: u64) -> ClearingOutcome {
    let mut rng = seeded(rng_seed);
    let mut free_buyers: Vec<usize> = (0..pools.bids.len()).collect();
    let mut free_sellers: Vec<usize> = (0..pools.asks.len()).collect();
    let mut trades = Vec::new();
    loop {
        let feasible: Vec<(usize, usize)> = free_buyers
            .iter()
            .flat_map(|&b| {
                free_sellers
                    .iter()
                    .filter(move |&&s| pools.bids[b].price >= pools.asks[s].price)
                    .map(move |&s| (b, s))
            })
            .collect();
        let Some(&(b, s)) = feasible.choose(&mut rng) else {
            break;
        };
        let ask = pools.asks[s].price;
        let bid = pools.bids[b].price;
        let price = (ask + (bid - ask) * rng.gen::<f64>()).clamp(ask, bid);
        trades.push((pools.bids[b].buyer_id, pools.asks[s].seller_id, price, price));
        free_buyers.retain(|&x| x != b);
        free_sellers.retain(|&x| x != s);
    }
    let matched = trades.len();
    ClearingOutcome::from_trades(pools.market_id, trades, matched, false)
}
