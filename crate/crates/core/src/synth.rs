//! Synthetic instance generators for tests, benchmarks and examples.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::allocator::AllocatorKind;
use crate::baselines::ApproximationConfig;
use crate::model::{LinkRate, RateSet, SlotBudget, TileLadder, UserRequest, UtilityPolicy};
use crate::simulator::{default_frame_profile, RoiSpec, Scenario, ScenarioUser};

/// A complete single-epoch allocation problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub ladders: Vec<TileLadder>,
    pub requests: Vec<UserRequest>,
    pub policy: UtilityPolicy,
    pub slot: SlotBudget,
    pub budget: u64,
}

/// Slot timing under which 1 Mb/s carries exactly one byte per slot.
pub fn unit_slot() -> SlotBudget {
    SlotBudget::new(25, 8_000)
}

/// The two-user, one-tile instance used throughout the docs: rates of 1 and
/// 2 bytes per slot, sizes 4 and 8 bytes, utilities 1 and 2 per user.
pub fn desk_instance(budget: u64) -> Instance {
    Instance {
        ladders: vec![TileLadder::new(1, vec![4, 8]).unwrap()],
        requests: vec![
            UserRequest::new(1, LinkRate::from_mbps(1.0), [1], 2, 1),
            UserRequest::new(2, LinkRate::from_mbps(2.0), [1], 2, 1),
        ],
        policy: UtilityPolicy::LevelTable { values: vec![1.0, 2.0] },
        slot: unit_slot(),
        budget,
    }
}

/// Same user pair, with the tile duplicated `tiles` times.
pub fn desk_copies(tiles: u32, budget: u64) -> Instance {
    let mut inst = desk_instance(budget);
    inst.ladders = (1..=tiles).map(|id| TileLadder::new(id, vec![4, 8]).unwrap()).collect();
    for r in &mut inst.requests {
        r.roi = (1..=tiles).collect();
    }
    inst
}

/// Random instance small enough for exhaustive enumeration: up to 3 tiles,
/// 4 users over at most 3 distinct rates, 3 levels and 64 slots.
pub fn small_instance<R: Rng>(rng: &mut R) -> Instance {
    let tiles = rng.gen_range(1..=3u32);
    let levels = rng.gen_range(1..=3usize);
    let users = rng.gen_range(1..=4u32);
    let ladders = (1..=tiles)
        .map(|id| {
            let mut acc = 0;
            let sizes = (0..levels)
                .map(|_| {
                    acc += rng.gen_range(1..=12u64);
                    acc
                })
                .collect();
            TileLadder::new(id, sizes).unwrap()
        })
        .collect();
    let requests = (1..=users)
        .map(|id| {
            let rate = LinkRate::from_mbps(rng.gen_range(1..=3) as f64);
            let roi: Vec<u32> = (1..=tiles).filter(|_| rng.gen_bool(0.6)).collect();
            let requested = rng.gen_range(1..=levels);
            let guaranteed = rng.gen_range(1..=requested);
            UserRequest::new(id, rate, roi, requested, guaranteed)
        })
        .collect();
    Instance {
        ladders,
        requests,
        policy: UtilityPolicy::TileSize,
        slot: unit_slot(),
        budget: rng.gen_range(0..=64),
    }
}

/// Per-tile byte sizes from stream-level bitrates: `bitrate / 8 / fps / tiles`.
pub fn tile_sizes_from_bitrates(bitrates_mbps: &[f64], frame_rate: u32, tiles: usize) -> Vec<u64> {
    bitrates_mbps
        .iter()
        .map(|b| (b * 1e6 / 8.0 / frame_rate as f64 / tiles as f64).round() as u64)
        .collect()
}

/// Medium-rate ladder bitrates in Mb/s, levels 1 through 5.
pub const MEDIUM_RATE_MBPS: [f64; 5] = [1.5, 2.9, 4.6, 6.6, 10.9];
/// High-rate ladder bitrates in Mb/s, levels 1 through 5.
pub const HIGH_RATE_MBPS: [f64; 5] = [2.5, 5.0, 8.4, 11.1, 20.2];

/// Uniform ladders for a `cols x rows` grid.
pub fn grid_ladders(cols: u32, rows: u32, bitrates_mbps: &[f64], frame_rate: u32) -> Vec<TileLadder> {
    let n = (cols * rows) as usize;
    let sizes = tile_sizes_from_bitrates(bitrates_mbps, frame_rate, n);
    (1..=n as u32).map(|id| TileLadder::new(id, sizes.clone()).unwrap()).collect()
}

/// Tile ids (1-based, row-major) covered by a rectangle on the grid.
pub fn rect_tiles(cols: u32, x: u32, y: u32, w: u32, h: u32) -> Vec<u32> {
    (y..y + h).flat_map(|r| (x..x + w).map(move |c| r * cols + c + 1)).collect()
}

/// Benchmark instance at the scale of a 16x9 grid, 5 levels and one user
/// per 802.11a rate.
pub fn paper_scale_instance<R: Rng>(rng: &mut R, budget: u64) -> Instance {
    let (cols, rows) = (16, 9);
    let ladders = grid_ladders(cols, rows, &MEDIUM_RATE_MBPS, 25);
    let rates = RateSet::ieee80211a();
    let mut order: Vec<usize> = (0..rates.len()).collect();
    order.shuffle(rng);
    let requests = order
        .iter()
        .enumerate()
        .map(|(i, &ri)| {
            let w = rng.gen_range(4..=10);
            let h = rng.gen_range(3..=6);
            let x = rng.gen_range(0..=cols - w);
            let y = rng.gen_range(0..=rows - h);
            let requested = rng.gen_range(3..=5);
            UserRequest::new(i as u32 + 1, rates.rate(ri), rect_tiles(cols, x, y, w, h), requested, 1)
        })
        .collect();
    Instance {
        ladders,
        requests,
        policy: UtilityPolicy::TileSize,
        slot: SlotBudget::default(),
        budget,
    }
}

/// The desk instance as a one-tile, lossless simulation with a fixed
/// per-frame budget and no rate adaptation.
pub fn desk_scenario(slots_per_frame: u64) -> Scenario {
    let rates = RateSet::new(vec![LinkRate::from_mbps(1.0), LinkRate::from_mbps(2.0)]).unwrap();
    let user = |id, mbps| ScenarioUser {
        id,
        rate: LinkRate::from_mbps(mbps),
        roi: RoiSpec::Tiles(vec![1]),
        requested_level: 2,
        max_rate: None,
        loss_row: None,
    };
    Scenario {
        grid: (1, 1),
        ladders: vec![TileLadder::new(1, vec![4, 8]).unwrap()],
        rates,
        users: vec![user(1, 1.0), user(2, 2.0)],
        default_loss: vec![0.0, 0.0],
        policy: UtilityPolicy::LevelTable { values: vec![1.0, 2.0] },
        slot: unit_slot().with_slots(slots_per_frame),
        epoch_s: 2.0,
        duration_s: 2.0,
        gop_length: 10,
        frame_profile: default_frame_profile(10),
        rate_adaptation: None,
        trace: Vec::new(),
        allocator: AllocatorKind::Optimal,
        approx: ApproximationConfig::default(),
        seed: 1,
    }
}

/// Settings of a scenario on the 16x9 grid with the medium-rate ladder.
#[derive(Debug, Clone)]
pub struct GridScenarioConfig {
    pub rates_mbps: Vec<f64>,
    pub rois: Vec<RoiSpec>,
    pub requested_level: usize,
    pub ladder_mbps: Vec<f64>,
    pub duration_s: f64,
    pub loss: f64,
    pub allocator: AllocatorKind,
    pub seed: u64,
}

/// A 16x9-grid scenario with one user per entry of `rates_mbps`, the
/// 802.11a rate set, the default 9 us slot, a uniform loss probability at
/// every rate, each client capped at its own rate and rate adaptation on.
pub fn grid_scenario(cfg: &GridScenarioConfig) -> Scenario {
    let (cols, rows) = (16, 9);
    let users = cfg
        .rates_mbps
        .iter()
        .zip(&cfg.rois)
        .enumerate()
        .map(|(k, (&mbps, roi))| ScenarioUser {
            id: k as u32 + 1,
            rate: LinkRate::from_mbps(mbps),
            roi: roi.clone(),
            requested_level: cfg.requested_level,
            max_rate: Some(LinkRate::from_mbps(mbps)),
            loss_row: None,
        })
        .collect();
    let rates = RateSet::ieee80211a();
    Scenario {
        grid: (cols, rows),
        ladders: grid_ladders(cols, rows, &cfg.ladder_mbps, 25),
        default_loss: vec![cfg.loss; rates.len()],
        rates,
        users,
        policy: UtilityPolicy::TileSize,
        slot: SlotBudget::default(),
        epoch_s: 2.0,
        duration_s: cfg.duration_s,
        gop_length: 10,
        frame_profile: default_frame_profile(10),
        rate_adaptation: Some(Default::default()),
        trace: Vec::new(),
        allocator: cfg.allocator,
        approx: ApproximationConfig::default(),
        seed: cfg.seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medium_ladder_sizes() {
        assert_eq!(tile_sizes_from_bitrates(&MEDIUM_RATE_MBPS, 25, 144), vec![52, 101, 160, 229, 378]);
    }

    #[test]
    fn rect_is_row_major() {
        assert_eq!(rect_tiles(16, 1, 1, 2, 2), vec![18, 19, 34, 35]);
    }
}
