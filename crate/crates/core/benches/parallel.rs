//! Parallel vs sequential throughput on the three fan-out surfaces: market
//! clearing, the economic property suite, and policy evaluation. Run with
//! `cargo bench -p edgemarket-core`.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::Rng;

use edgemarket_core::mappo::{evaluate, evaluate_seq, BidderKind, PolicySource, TrainConfig};
use edgemarket_core::market::properties::{
    run_property_suite, run_property_suite_seq, PropertyConfig,
};
use edgemarket_core::market::{
    build_pools, clear_markets, clear_markets_seq, Ask, Bid, MarketPools, MechanismKind,
};
use edgemarket_core::rng::seeded;
use edgemarket_core::simenv::WorldConfig;

fn random_pools(markets: usize, max_pool: usize, seed: u64) -> Vec<MarketPools> {
    let mut rng = seeded(seed);
    (0..markets)
        .map(|market_id| {
            let asks = (0..rng.gen_range(1..=max_pool))
                .map(|seller_id| Ask {
                    seller_id,
                    price: rng.gen(),
                })
                .collect();
            let bids = (0..rng.gen_range(1..=max_pool))
                .map(|buyer_id| Bid {
                    buyer_id,
                    price: rng.gen(),
                })
                .collect();
            build_pools(market_id, asks, bids)
        })
        .collect()
}

fn bench_clear_markets(c: &mut Criterion) {
    let pools = random_pools(512, 8, 11);
    let mut group = c.benchmark_group("clear_markets_512");
    for mechanism in MechanismKind::ALL {
        group.bench_function(format!("parallel/{mechanism}"), |b| {
            b.iter(|| clear_markets(black_box(&pools), mechanism, 7))
        });
        group.bench_function(format!("sequential/{mechanism}"), |b| {
            b.iter(|| clear_markets_seq(black_box(&pools), mechanism, 7))
        });
    }
    group.finish();
}

fn bench_property_suite(c: &mut Criterion) {
    let config = PropertyConfig {
        market_instances: 2000,
        truthfulness_instances: 50,
        seed: 3,
        ..PropertyConfig::default()
    };
    let mut group = c.benchmark_group("property_suite_2000");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| run_property_suite(black_box(&config))));
    group.bench_function("sequential", |b| {
        b.iter(|| run_property_suite_seq(black_box(&config)))
    });
    group.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let world = WorldConfig {
        slots_per_episode: 50,
        ..WorldConfig::default()
    };
    let cfg = TrainConfig::default();
    let mut group = c.benchmark_group("evaluate_16_episodes");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            evaluate(
                PolicySource::Baseline(BidderKind::Truthful),
                black_box(&world),
                &cfg,
                MechanismKind::McAfeeDouble,
                16,
                5,
            )
            .unwrap()
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            evaluate_seq(
                PolicySource::Baseline(BidderKind::Truthful),
                black_box(&world),
                &cfg,
                MechanismKind::McAfeeDouble,
                16,
                5,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_clear_markets, bench_property_suite, bench_evaluate);
criterion_main!(benches);
