//! CSV serialization of clearing results.

use super::{ClearingOutcome, MechanismKind};

pub const MATCH_CSV_HEADER: &str =
    "slot,market_id,buyer_id,seller_id,payment,revenue,mechanism,trade_reduction";

/// One CSV row per match, in match order.
pub fn match_csv_rows(
    slot: usize,
    outcome: &ClearingOutcome,
    mechanism: MechanismKind,
) -> Vec<String> {
    outcome
        .matches
        .iter()
        .map(|&(buyer, seller)| {
            format!(
                "{slot},{market},{buyer},{seller},{payment},{revenue},{mechanism},{reduced}",
                market = outcome.market_id,
                payment = outcome.buyer_payments[&buyer],
                revenue = outcome.seller_revenues[&seller],
                reduced = outcome.used_trade_reduction,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{asks_from_prices, bids_from_prices, build_pools, mcafee_clear};

    #[test]
    fn rows_match_the_documented_layout() {
        let pools = build_pools(
            3,
            asks_from_prices(&[2.0, 4.0, 6.0, 9.0]),
            bids_from_prices(&[10.0, 8.0, 5.0, 3.0]),
        );
        let out = mcafee_clear(&pools);
        let rows = match_csv_rows(7, &out, MechanismKind::McAfeeDouble);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], "7,3,0,0,5.5,5.5,mcafee,false");
        assert_eq!(rows[1], "7,3,1,1,5.5,5.5,mcafee,false");
    }

    #[test]
    fn header_field_count_matches_rows() {
        let fields = MATCH_CSV_HEADER.split(',').count();
        let pools = build_pools(
            0,
            asks_from_prices(&[2.0]),
            bids_from_prices(&[10.0, 9.0]),
        );
        let out = crate::market::second_price_clear(&pools);
        for row in match_csv_rows(0, &out, MechanismKind::SecondPrice) {
            assert_eq!(row.split(',').count(), fields);
        }
    }
}
