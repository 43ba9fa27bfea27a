//! The physical world: RSU placement, vehicle mobility, market membership,
//! the channel and latency model, valuation synthesis, and per-slot welfare
//! metrics.
//!
//! A [`World`] owns the vehicles and the virtual-machine sellers hosted at
//! each RSU. Every slot, vehicles belong to exactly one local market (their
//! nearest RSU), trade through the market module, and then move. All
//! randomness flows from the configured seed, so worlds replay exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::market::{global_budget, ClearingOutcome};
use crate::rng::{child_seed, seeded};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error("vehicle {vehicle_id} at ({x:.1}, {y:.1}) is outside every RSU's coverage")]
    UncoveredPosition { vehicle_id: usize, x: f64, y: f64 },
    #[error("matched pair (buyer {buyer_id}, seller {seller_id}) has zero transmission rate")]
    ZeroRate { buyer_id: usize, seller_id: usize },
    #[error("content size file {path}: line {line} is not a nonnegative number")]
    MalformedContentFile { path: String, line: usize },
    #[error("content size file {path}: {message}")]
    ContentFileUnreadable { path: String, message: String },
    #[error("content size file {path} has no rows")]
    EmptyContentFile { path: String },
    #[error("invalid config: {field} {message}")]
    InvalidConfig {
        field: &'static str,
        message: String,
    },
}

/// Logarithm used by the buyer valuation curve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "natural")]
    Natural,
    #[serde(rename = "log10")]
    Log10,
}

/// Which social-welfare formula to report: the sum of both sides' valuations
/// or the conventional gains-from-trade difference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum WelfareMode {
    #[default]
    #[serde(rename = "paper")]
    Paper,
    #[serde(rename = "gains")]
    Gains,
}

/// Where content sizes come from: a synthetic log-normal or a headerless
/// one-column CSV of sizes in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ContentProfile {
    Synthetic { median: f64, sigma: f64 },
    FileBacked { path: PathBuf },
}

impl Default for ContentProfile {
    fn default() -> Self {
        ContentProfile::Synthetic {
            median: 4000.0,
            sigma: 0.5,
        }
    }
}

/// Log-distance path loss feeding a Shannon-capacity rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    /// Hz.
    pub bandwidth: f64,
    /// Meters; the distance at which path loss is unity.
    pub reference_distance: f64,
    pub path_loss_exponent: f64,
    /// Watts.
    pub noise_power: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            bandwidth: 1e6,
            reference_distance: 1.0,
            path_loss_exponent: 2.5,
            noise_power: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Side of the square service area, meters.
    pub area_side: f64,
    pub rsu_count: usize,
    /// Coverage radius per RSU, meters.
    pub rsu_coverage: f64,
    pub vehicle_count: usize,
    /// Virtual machines hosted per RSU.
    pub vms_per_rsu: usize,
    /// Meters per second.
    pub mean_speed: f64,
    /// Seconds.
    pub slot_duration: f64,
    pub slots_per_episode: usize,
    pub rng_seed: u64,
    /// When true, every buyer redraws its request each slot; by default only
    /// served buyers do, so a losing buyer re-enters with the same request.
    pub redraw_unserved: bool,
    pub valuation_log: LogBase,
    pub welfare: WelfareMode,
    pub channel: ChannelParams,
    pub content: ContentProfile,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            area_side: 1000.0,
            rsu_count: 4,
            rsu_coverage: 500.0,
            vehicle_count: 20,
            vms_per_rsu: 5,
            mean_speed: 25.0,
            slot_duration: 1.0,
            slots_per_episode: 100,
            rng_seed: 0,
            redraw_unserved: false,
            valuation_log: LogBase::default(),
            welfare: WelfareMode::default(),
            channel: ChannelParams::default(),
            content: ContentProfile::default(),
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("area_side", self.area_side),
            ("rsu_coverage", self.rsu_coverage),
            ("mean_speed", self.mean_speed),
            ("slot_duration", self.slot_duration),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SimError::InvalidConfig {
                    field,
                    message: format!("must be positive and finite, got {value}"),
                });
            }
        }
        let nonzero = [
            ("rsu_count", self.rsu_count),
            ("slots_per_episode", self.slots_per_episode),
        ];
        for (field, value) in nonzero {
            if value == 0 {
                return Err(SimError::InvalidConfig {
                    field,
                    message: "must be at least 1".into(),
                });
            }
        }
        if let ContentProfile::Synthetic { median, sigma } = self.content {
            if !(median > 0.0) || sigma < 0.0 {
                return Err(SimError::InvalidConfig {
                    field: "content",
                    message: format!("synthetic profile needs median > 0 and sigma ≥ 0, got median {median}, sigma {sigma}"),
                });
            }
        }
        let farthest = worst_case_gap(self);
        if farthest > self.rsu_coverage {
            return Err(SimError::InvalidConfig {
                field: "rsu_coverage",
                message: format!(
                    "{} m leaves gaps; the grid layout needs at least {farthest:.1} m",
                    self.rsu_coverage
                ),
            });
        }
        Ok(())
    }
}

/// RSU centers on a row-major grid over the square area.
pub fn rsu_positions(config: &WorldConfig) -> Vec<(f64, f64)> {
    let (rows, cols) = grid_shape(config.rsu_count);
    let cell_w = config.area_side / cols as f64;
    let cell_h = config.area_side / rows as f64;
    (0..config.rsu_count)
        .map(|id| {
            let r = id / cols;
            let c = id % cols;
            ((c as f64 + 0.5) * cell_w, (r as f64 + 0.5) * cell_h)
        })
        .collect()
}

fn grid_shape(rsu_count: usize) -> (usize, usize) {
    let rows = (rsu_count as f64).sqrt().floor() as usize;
    let rows = rows.max(1);
    let cols = rsu_count.div_ceil(rows);
    (rows, cols)
}

/// Farthest any point in the area can be from its nearest RSU center. The
/// last grid row may be partially filled, so scan a fine lattice instead of
/// assuming the closed-form cell diagonal.
fn worst_case_gap(config: &WorldConfig) -> f64 {
    let centers = rsu_positions(config);
    let steps = 50;
    let mut worst: f64 = 0.0;
    for i in 0..=steps {
        for j in 0..=steps {
            let p = (
                config.area_side * i as f64 / steps as f64,
                config.area_side * j as f64 / steps as f64,
            );
            let nearest = centers
                .iter()
                .map(|&c| squared_distance(p, c))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(nearest.sqrt());
        }
    }
    worst
}

fn squared_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}

pub fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    squared_distance(a, b).sqrt()
}

/// A virtual machine offering one AIGC service per slot from its RSU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SellerState {
    pub seller_id: usize,
    pub rsu_id: usize,
    pub model_id: usize,
    /// Watts.
    pub tx_power: f64,
    /// Credits per unit.
    pub compute_cost: f64,
    /// Bits.
    pub content_size: f64,
    /// Credits per unit.
    pub storage_cost: f64,
    /// Credits; tx_power / 10 under the default profile.
    pub valuation: f64,
    pub capacity_per_slot: usize,
}

/// A vehicle requesting one AIGC service at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub vehicle_id: usize,
    pub position: (f64, f64),
    pub velocity: (f64, f64),
    /// RSU whose market this vehicle bids in this slot.
    pub home_market: usize,
    pub participates: bool,
    /// Bits.
    pub requested_size: f64,
    /// Credits; ln(1 + requested_size/1000) under the default profile.
    pub valuation: f64,
}

/// Aggregate outcome of one slot across every market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotMetrics {
    pub social_welfare: f64,
    pub total_latency: f64,
    pub global_budget: f64,
    pub matches_count: usize,
}

/// Advance every vehicle by one slot: move with the current velocity, wrap
/// around the square area, then resample speed around the mean with ±20%
/// jitter, keeping the heading.
pub fn step_mobility(vehicles: &mut [VehicleState], config: &WorldConfig, rng: &mut ChaCha8Rng) {
    for v in vehicles.iter_mut() {
        v.position.0 = (v.position.0 + v.velocity.0 * config.slot_duration)
            .rem_euclid(config.area_side);
        v.position.1 = (v.position.1 + v.velocity.1 * config.slot_duration)
            .rem_euclid(config.area_side);
        let speed = (v.velocity.0 * v.velocity.0 + v.velocity.1 * v.velocity.1).sqrt();
        if speed > 0.0 {
            let new_speed = config.mean_speed * (1.0 + rng.gen_range(-0.2..=0.2));
            v.velocity.0 *= new_speed / speed;
            v.velocity.1 *= new_speed / speed;
        }
    }
}

/// Nearest covering RSU for a vehicle; distance ties break toward the lowest
/// RSU id.
pub fn assign_market(
    vehicle: &VehicleState,
    rsu_positions: &[(f64, f64)],
    coverage: f64,
) -> Result<usize, SimError> {
    let mut best: Option<(usize, f64)> = None;
    for (id, &center) in rsu_positions.iter().enumerate() {
        let d2 = squared_distance(vehicle.position, center);
        if best.is_none_or(|(_, best_d2)| d2 < best_d2) {
            best = Some((id, d2));
        }
    }
    match best {
        Some((id, d2)) if d2.sqrt() <= coverage => Ok(id),
        _ => Err(SimError::UncoveredPosition {
            vehicle_id: vehicle.vehicle_id,
            x: vehicle.position.0,
            y: vehicle.position.1,
        }),
    }
}

/// Shannon rate over a log-distance channel, bits per second.
pub fn rate_from_distance(tx_power: f64, dist: f64, params: &ChannelParams) -> f64 {
    let d = dist.max(1.0);
    let snr = tx_power * (params.reference_distance / d).powf(params.path_loss_exponent)
        / params.noise_power;
    params.bandwidth * (1.0 + snr).log2()
}

/// Downlink rate from a seller's RSU to a vehicle.
pub fn transmission_rate(
    seller: &SellerState,
    vehicle: &VehicleState,
    rsu_positions: &[(f64, f64)],
    params: &ChannelParams,
) -> f64 {
    let d = distance(vehicle.position, rsu_positions[seller.rsu_id]);
    rate_from_distance(seller.tx_power, d, params)
}

/// Buyer valuation of a requested content size, natural-log form.
pub fn buyer_valuation(requested_size: f64) -> f64 {
    buyer_valuation_in(LogBase::Natural, requested_size)
}

pub fn buyer_valuation_in(base: LogBase, requested_size: f64) -> f64 {
    let scaled = 1.0 + requested_size / 1000.0;
    match base {
        LogBase::Natural => scaled.ln(),
        LogBase::Log10 => scaled.log10(),
    }
}

/// Seller valuation: transmit power over ten.
pub fn seller_valuation(tx_power: f64) -> f64 {
    tx_power / 10.0
}

/// Content-size source, built once from a profile.
#[derive(Debug, Clone)]
pub enum ContentSampler {
    Synthetic(LogNormal<f64>),
    FileBacked(Vec<f64>),
}

impl ContentSampler {
    pub fn from_profile(profile: &ContentProfile) -> Result<ContentSampler, SimError> {
        match profile {
            ContentProfile::Synthetic { median, sigma } => {
                let dist = LogNormal::new(median.ln(), *sigma).map_err(|e| {
                    SimError::InvalidConfig {
                        field: "content",
                        message: e.to_string(),
                    }
                })?;
                Ok(ContentSampler::Synthetic(dist))
            }
            ContentProfile::FileBacked { path } => {
                let shown = path.display().to_string();
                let text = fs::read_to_string(path).map_err(|e| {
                    SimError::ContentFileUnreadable {
                        path: shown.clone(),
                        message: e.to_string(),
                    }
                })?;
                let mut sizes = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    let trimmed = line.trim();
                    if trimmed.is_empty() {
                        continue;
                    }
                    match trimmed.parse::<f64>() {
                        Ok(size) if size >= 0.0 && size.is_finite() => sizes.push(size),
                        _ => {
                            return Err(SimError::MalformedContentFile {
                                path: shown,
                                line: i + 1,
                            })
                        }
                    }
                }
                if sizes.is_empty() {
                    return Err(SimError::EmptyContentFile { path: shown });
                }
                Ok(ContentSampler::FileBacked(sizes))
            }
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ContentSampler::Synthetic(dist) => dist.sample(rng),
            ContentSampler::FileBacked(sizes) => sizes[rng.gen_range(0..sizes.len())],
        }
    }
}

/// One draw from a content profile. Repeated file-backed draws should build
/// a [`ContentSampler`] once instead.
pub fn sample_content_size(profile: &ContentProfile, rng: &mut ChaCha8Rng) -> Result<f64, SimError> {
    Ok(ContentSampler::from_profile(profile)?.sample(rng))
}

/// Social welfare of one slot's matches: the sum over matched pairs of both
/// sides' valuations (or their difference in gains mode).
pub fn social_welfare(
    matches: &[(usize, usize)],
    buyer_valuations: &BTreeMap<usize, f64>,
    seller_valuations: &BTreeMap<usize, f64>,
    mode: WelfareMode,
) -> f64 {
    matches
        .iter()
        .map(|&(buyer, seller)| {
            let u_v = buyer_valuations[&buyer];
            let u_m = seller_valuations[&seller];
            match mode {
                WelfareMode::Paper => u_v + u_m,
                WelfareMode::Gains => u_v - u_m,
            }
        })
        .sum()
}

/// Total transmission latency of one slot's matches: content size over rate
/// for every matched, in-market pair.
pub fn total_latency(
    matches: &[(usize, usize)],
    sellers: &[SellerState],
    vehicles: &[VehicleState],
    rsu_positions: &[(f64, f64)],
    params: &ChannelParams,
) -> Result<f64, SimError> {
    let mut latency = 0.0;
    for &(buyer_id, seller_id) in matches {
        let vehicle = &vehicles[buyer_id];
        let seller = &sellers[seller_id];
        if vehicle.home_market != seller.rsu_id {
            continue;
        }
        let rate = transmission_rate(seller, vehicle, rsu_positions, params);
        if rate <= 0.0 {
            return Err(SimError::ZeroRate {
                buyer_id,
                seller_id,
            });
        }
        latency += seller.content_size / rate;
    }
    Ok(latency)
}

/// The simulated world; deterministic under its config seed.
#[derive(Debug, Clone)]
pub struct World {
    pub config: WorldConfig,
    pub rsu_positions: Vec<(f64, f64)>,
    pub sellers: Vec<SellerState>,
    pub vehicles: Vec<VehicleState>,
    pub slot: usize,
    sampler: ContentSampler,
    rng: ChaCha8Rng,
}

impl World {
    /// Build a world: sellers first (RSU-major), then vehicles, then the
    /// initial market assignment.
    pub fn new(config: WorldConfig) -> Result<World, SimError> {
        config.validate()?;
        let sampler = ContentSampler::from_profile(&config.content)?;
        let mut rng = seeded(child_seed(config.rng_seed, 0));
        let positions = rsu_positions(&config);

        let mut sellers = Vec::with_capacity(config.rsu_count * config.vms_per_rsu);
        for rsu_id in 0..config.rsu_count {
            for _ in 0..config.vms_per_rsu {
                let tx_power = rng.gen_range(0.0..10.0);
                sellers.push(SellerState {
                    seller_id: sellers.len(),
                    rsu_id,
                    model_id: rng.gen_range(0..8),
                    tx_power,
                    compute_cost: rng.gen_range(0.0..1.0),
                    content_size: sampler.sample(&mut rng),
                    storage_cost: rng.gen_range(0.0..1.0),
                    valuation: seller_valuation(tx_power),
                    capacity_per_slot: 1,
                });
            }
        }

        let mut vehicles = Vec::with_capacity(config.vehicle_count);
        for vehicle_id in 0..config.vehicle_count {
            let position = (
                rng.gen_range(0.0..config.area_side),
                rng.gen_range(0.0..config.area_side),
            );
            let heading = rng.gen_range(0.0..std::f64::consts::TAU);
            let speed = config.mean_speed * (1.0 + rng.gen_range(-0.2..=0.2));
            let requested_size = sampler.sample(&mut rng);
            vehicles.push(VehicleState {
                vehicle_id,
                position,
                velocity: (speed * heading.cos(), speed * heading.sin()),
                home_market: 0,
                participates: true,
                requested_size,
                valuation: buyer_valuation_in(config.valuation_log, requested_size),
            });
        }

        let mut world = World {
            config,
            rsu_positions: positions,
            sellers,
            vehicles,
            slot: 0,
            sampler,
            rng,
        };
        world.refresh_markets()?;
        Ok(world)
    }

    /// Recompute every vehicle's home market from its current position.
    pub fn refresh_markets(&mut self) -> Result<(), SimError> {
        for i in 0..self.vehicles.len() {
            self.vehicles[i].home_market = assign_market(
                &self.vehicles[i],
                &self.rsu_positions,
                self.config.rsu_coverage,
            )?;
        }
        Ok(())
    }

    /// Participating vehicle ids in one RSU's market, ascending.
    pub fn market_members(&self, rsu_id: usize) -> Vec<usize> {
        self.vehicles
            .iter()
            .filter(|v| v.participates && v.home_market == rsu_id)
            .map(|v| v.vehicle_id)
            .collect()
    }

    /// Seller ids hosted at one RSU, ascending.
    pub fn market_sellers(&self, rsu_id: usize) -> Vec<usize> {
        self.sellers
            .iter()
            .filter(|s| s.rsu_id == rsu_id)
            .map(|s| s.seller_id)
            .collect()
    }

    /// Served buyers draw a fresh request; everyone else keeps theirs (or
    /// redraws too under `redraw_unserved`). Then vehicles move and markets
    /// are reassigned for the next slot.
    pub fn serve_and_advance(&mut self, served_buyers: &[usize]) -> Result<(), SimError> {
        if self.config.redraw_unserved {
            for vehicle_id in 0..self.vehicles.len() {
                self.redraw_request(vehicle_id);
            }
        } else {
            for &vehicle_id in served_buyers {
                self.redraw_request(vehicle_id);
            }
        }
        step_mobility(&mut self.vehicles, &self.config, &mut self.rng);
        self.slot += 1;
        self.refresh_markets()
    }

    fn redraw_request(&mut self, vehicle_id: usize) {
        let size = self.sampler.sample(&mut self.rng);
        let v = &mut self.vehicles[vehicle_id];
        v.requested_size = size;
        v.valuation = buyer_valuation_in(self.config.valuation_log, size);
    }

    /// Welfare, latency, budget, and match count across one slot's outcomes.
    pub fn slot_metrics(&self, outcomes: &[ClearingOutcome]) -> Result<SlotMetrics, SimError> {
        let buyer_vals: BTreeMap<usize, f64> = self
            .vehicles
            .iter()
            .map(|v| (v.vehicle_id, v.valuation))
            .collect();
        let seller_vals: BTreeMap<usize, f64> = self
            .sellers
            .iter()
            .map(|s| (s.seller_id, s.valuation))
            .collect();
        let mut social = 0.0;
        let mut latency = 0.0;
        let mut matches_count = 0;
        for outcome in outcomes {
            social += social_welfare(
                &outcome.matches,
                &buyer_vals,
                &seller_vals,
                self.config.welfare,
            );
            latency += total_latency(
                &outcome.matches,
                &self.sellers,
                &self.vehicles,
                &self.rsu_positions,
                &self.config.channel,
            )?;
            matches_count += outcome.matches.len();
        }
        Ok(SlotMetrics {
            social_welfare: social,
            total_latency: latency,
            global_budget: global_budget(outcomes),
            matches_count,
        })
    }
}
