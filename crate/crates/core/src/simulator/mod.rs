//! Discrete-time epoch loop: trace events, rate adaptation, allocation,
//! GOP-proportional slot budgeting, lossy reception and per-epoch metrics.

mod metrics;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::{allocate, AllocateError, Allocation, AllocationStatus, AllocatorKind};
use crate::baselines::ApproximationConfig;
use crate::channel::{ChannelError, LossModel, RateAdaptConfig, RateAdaptState};
use crate::model::{
    received_utility, ExtendedUtility, Level, LinkRate, ModelError, RateSet, SlotBudget, TileId, TileLadder,
    UserId, UserRequest, UtilityPolicy, UTILITY_SCALE,
};
use crate::synth::rect_tiles;

pub use metrics::{fairness, goodput, population_std, similarity, GoodputSummary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Allocate(#[from] AllocateError),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("trace event at {time_s} s: {message}")]
    Trace { time_s: f64, message: String },
}

/// A region of interest, either as a tile rectangle on the grid (0-based
/// column and row of the top-left tile) or as explicit tile ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RoiSpec {
    Rect { x: u32, y: u32, w: u32, h: u32 },
    Tiles(Vec<TileId>),
}

impl RoiSpec {
    pub fn tiles(&self, grid: (u32, u32)) -> Result<BTreeSet<TileId>, String> {
        let (cols, rows) = grid;
        match self {
            Self::Rect { x, y, w, h } => {
                if *w == 0 || *h == 0 || x + w > cols || y + h > rows {
                    return Err(format!("rectangle {w}x{h} at ({x}, {y}) does not fit a {cols}x{rows} grid"));
                }
                Ok(rect_tiles(cols, *x, *y, *w, *h).into_iter().collect())
            }
            Self::Tiles(ids) => {
                if let Some(bad) = ids.iter().find(|t| **t == 0 || **t > cols * rows) {
                    return Err(format!("tile {bad} outside a {cols}x{rows} grid"));
                }
                Ok(ids.iter().copied().collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceKind {
    Roi(RoiSpec),
    Zoom(Level),
    /// New loss row, one probability per rate.
    Channel(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub time_s: f64,
    pub user_id: UserId,
    pub kind: TraceKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioUser {
    pub id: UserId,
    /// Initial link rate; must be in the rate set.
    pub rate: LinkRate,
    pub roi: RoiSpec,
    pub requested_level: Level,
    /// Highest rate the client can decode at all.
    pub max_rate: Option<LinkRate>,
    pub loss_row: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: (u32, u32),
    pub ladders: Vec<TileLadder>,
    pub rates: RateSet,
    pub users: Vec<ScenarioUser>,
    /// Loss row for users without their own.
    pub default_loss: Vec<f64>,
    pub policy: UtilityPolicy,
    pub slot: SlotBudget,
    pub epoch_s: f64,
    pub duration_s: f64,
    pub gop_length: u32,
    /// Relative size of each frame position in a GOP.
    pub frame_profile: Vec<f64>,
    /// `None` keeps every client at its initial rate.
    pub rate_adaptation: Option<RateAdaptConfig>,
    pub trace: Vec<TraceEvent>,
    pub allocator: AllocatorKind,
    pub approx: ApproximationConfig,
    pub seed: u64,
}

/// I:P:B weights 4:2:1 in an I B B P B B P ... pattern.
pub fn default_frame_profile(gop_length: u32) -> Vec<f64> {
    (0..gop_length)
        .map(|k| match k {
            0 => 4.0,
            k if k % 3 == 0 => 2.0,
            _ => 1.0,
        })
        .collect()
}

impl Scenario {
    pub fn frames_per_epoch(&self) -> u32 {
        (self.epoch_s * self.slot.frame_rate as f64).round() as u32
    }

    pub fn gops_per_epoch(&self) -> u32 {
        self.frames_per_epoch() / self.gop_length.max(1)
    }

    pub fn epochs(&self) -> usize {
        (self.duration_s / self.epoch_s).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Scenario(m));
        let frames = self.epoch_s * self.slot.frame_rate as f64;
        if !(self.epoch_s > 0.0) || (frames - frames.round()).abs() > 1e-9 || frames.round() < 1.0 {
            return bad(format!("epoch of {} s is not a whole number of frames", self.epoch_s));
        }
        if self.gop_length == 0 || !self.frames_per_epoch().is_multiple_of(self.gop_length) {
            return bad(format!(
                "GOP length {} does not divide the {} frames of an epoch",
                self.gop_length,
                self.frames_per_epoch()
            ));
        }
        if self.frame_profile.len() != self.gop_length as usize || self.frame_profile.iter().any(|w| !(*w > 0.0)) {
            return bad(format!("frame profile needs {} positive weights", self.gop_length));
        }
        if !(self.duration_s >= self.epoch_s) {
            return bad("duration shorter than one epoch".into());
        }
        if self.ladders.len() != (self.grid.0 * self.grid.1) as usize {
            return bad(format!("{} ladders for a {}x{} grid", self.ladders.len(), self.grid.0, self.grid.1));
        }
        if self.ladders.iter().enumerate().any(|(k, l)| l.id != k as u32 + 1) {
            return bad("ladders must be numbered 1..=N in row-major order".into());
        }
        let levels = crate::model::ladder_levels(&self.ladders)?;
        self.policy.validate(levels)?;
        if self.default_loss.len() != self.rates.len() {
            return Err(ChannelError::RowLength { found: self.default_loss.len(), expected: self.rates.len() }.into());
        }
        if let Some(cfg) = &self.rate_adaptation {
            cfg.validate()?;
        }
        let mut ids = BTreeSet::new();
        for u in &self.users {
            if !ids.insert(u.id) {
                return bad(format!("duplicate user id {}", u.id));
            }
            self.rates.index_of(u.rate)?;
            if let Some(m) = u.max_rate {
                self.rates.index_of(m)?;
            }
            u.roi.tiles(self.grid).map_err(|m| SimError::Scenario(format!("user {}: {m}", u.id)))?;
            if u.requested_level == 0 || u.requested_level > levels {
                return bad(format!("user {}: requested level {} outside 1..={levels}", u.id, u.requested_level));
            }
        }
        let mut last = f64::NEG_INFINITY;
        for e in &self.trace {
            let err = |message: String| Err(SimError::Trace { time_s: e.time_s, message });
            if e.time_s < last {
                return err("times must be non-decreasing".into());
            }
            last = e.time_s;
            if !ids.contains(&e.user_id) {
                return err(format!("unknown user {}", e.user_id));
            }
            match &e.kind {
                TraceKind::Roi(spec) => {
                    spec.tiles(self.grid).map_err(|message| SimError::Trace { time_s: e.time_s, message })?;
                }
                TraceKind::Zoom(l) if *l == 0 || *l > levels => return err(format!("level {l} outside 1..={levels}")),
                TraceKind::Zoom(_) => {}
                TraceKind::Channel(row) => {
                    LossModel::new(row.clone())?;
                    if row.len() != self.rates.len() {
                        return err(format!("loss row has {} entries for {} rates", row.len(), self.rates.len()));
                    }
                }
            }
        }
        Ok(())
    }

    /// User requests at time 0: initial state with the trace events due at
    /// 0 applied. Loss rows play no part in a snapshot.
    pub fn initial_requests(&self) -> Result<Vec<UserRequest>, SimError> {
        self.validate()?;
        let mut users = self.users.clone();
        users.sort_by_key(|u| u.id);
        let mut requests = users
            .iter()
            .map(|u| Ok(UserRequest::new(u.id, u.rate, u.roi.tiles(self.grid).map_err(SimError::Scenario)?, u.requested_level, 1)))
            .collect::<Result<Vec<_>, SimError>>()?;
        for e in self.trace.iter().take_while(|e| e.time_s <= 1e-9) {
            let r = requests.iter_mut().find(|r| r.user_id == e.user_id).expect("validated user id");
            match &e.kind {
                TraceKind::Roi(spec) => r.roi = spec.tiles(self.grid).map_err(SimError::Scenario)?,
                TraceKind::Zoom(level) => r.requested_level = *level,
                TraceKind::Channel(_) => {}
            }
        }
        Ok(requests)
    }
}

/// One-shot allocation on the time-0 snapshot of `scenario` with its own
/// allocator and a per-frame budget of `slot.slots_per_frame`.
pub fn solve(scenario: &Scenario) -> Result<Allocation, SimError> {
    let requests = scenario.initial_requests()?;
    Ok(allocate(
        scenario.allocator,
        &scenario.ladders,
        &requests,
        &scenario.policy,
        scenario.slot.slots_per_frame,
        &scenario.slot,
        &scenario.approx,
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSlots {
    pub budget: u64,
    pub used: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserEpoch {
    pub user_id: UserId,
    pub rate_index: usize,
    /// Utility summed over the epoch's GOPs, in fixed-point units.
    pub realized_units: i64,
    /// Mean utility per GOP.
    pub realized_utility: f64,
    pub goodput_bits: u64,
    pub goodput_bps: f64,
    /// Highest level of each RoI tile decoded in any GOP of the epoch.
    pub bitmap: BTreeMap<TileId, Level>,
    pub lost: u64,
    pub attempted: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub start_s: f64,
    pub duration_s: f64,
    pub allocator: AllocatorKind,
    pub seed: u64,
    pub status: AllocationStatus,
    pub planned_objective: ExtendedUtility,
    pub gops: u32,
    pub users: Vec<UserEpoch>,
    /// Per-frame slot total of the plan.
    pub slots_used: u64,
    pub budget: u64,
    /// Budget and usage for each frame position of a GOP.
    pub frame_slots: Vec<FrameSlots>,
    pub similarity: f64,
}

impl EpochReport {
    /// Finite part of the planner objective.
    pub fn planned_units(&self) -> i64 {
        self.planned_objective.units().unwrap_or(0)
    }

    /// Total realized units divided by the number of GOPs, exact when the
    /// division is.
    pub fn realized_units_total(&self) -> i64 {
        self.users.iter().map(|u| u.realized_units).sum()
    }

    /// Mean total utility per GOP.
    pub fn realized_utility(&self) -> f64 {
        self.realized_units_total() as f64 / self.gops.max(1) as f64 / UTILITY_SCALE as f64
    }

    /// Whether every GOP realized exactly the planned objective.
    pub fn matches_plan(&self) -> bool {
        self.realized_units_total() == self.planned_units() * self.gops as i64
    }
}

/// Splits `total` in proportion to `weights`, flooring each share and
/// handing the leftover units to the largest remainders (ties to the lower
/// index). The parts always sum to `total`. Weights are resolved to 1e-6.
pub fn largest_remainder(total: u64, weights: &[f64]) -> Vec<u64> {
    let fixed: Vec<u64> = weights.iter().map(|w| (w.max(0.0) * 1e6).round() as u64).collect();
    largest_remainder_exact(total, &fixed)
}

/// Same split with integer weights, in exact arithmetic.
pub fn largest_remainder_exact(total: u64, weights: &[u64]) -> Vec<u64> {
    let sum: u128 = weights.iter().map(|w| *w as u128).sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let scaled: Vec<(u128, u128)> = weights
        .iter()
        .map(|w| {
            let num = total as u128 * *w as u128;
            (num / sum, num % sum)
        })
        .collect();
    let mut parts: Vec<u64> = scaled.iter().map(|(q, _)| *q as u64).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| scaled[b].1.cmp(&scaled[a].1).then(a.cmp(&b)));
    let left = total - parts.iter().sum::<u64>();
    for &k in order.iter().take(left as usize) {
        parts[k] += 1;
    }
    parts
}

/// Packs a reception draw's identity into a ChaCha stream number, so the
/// same (epoch, GOP, user, tile, level, rate) sees the same draw whatever the
/// allocator. Fields wrap at their widths.
fn stream_key(epoch: usize, gop: u32, user: UserId, tile: TileId, level: Level, rate: usize) -> u64 {
    (epoch as u64 & 0xFFFF) << 48
        | (gop as u64 & 0xFF) << 40
        | (user as u64 & 0xFFFF) << 24
        | (tile as u64 & 0xFFFF) << 8
        | (level as u64 & 0xF) << 4
        | (rate as u64 & 0xF)
}

struct Client {
    request: UserRequest,
    rate_index: usize,
    adapt: Option<RateAdaptState>,
    last_lost: u64,
    last_attempted: u64,
}

/// Runs every epoch of `scenario` and returns one report per epoch.
pub fn run_simulation(scenario: &Scenario) -> Result<Vec<EpochReport>, SimError> {
    scenario.validate()?;
    let mut loss = LossModel::new(scenario.default_loss.clone())?;
    let mut clients: Vec<Client> = Vec::with_capacity(scenario.users.len());
    let mut sorted_users = scenario.users.clone();
    sorted_users.sort_by_key(|u| u.id);
    for u in &sorted_users {
        if let Some(row) = &u.loss_row {
            loss.set_row(u.id, row.clone())?;
        }
        if let Some(m) = u.max_rate {
            loss.set_max_rate(u.id, scenario.rates.index_of(m)?)?;
        }
        let rate_index = scenario.rates.index_of(u.rate)?;
        let adapt = scenario
            .rate_adaptation
            .map(|cfg| RateAdaptState::new(scenario.rates.len(), rate_index, cfg))
            .transpose()?;
        let roi = u.roi.tiles(scenario.grid).map_err(SimError::Scenario)?;
        clients.push(Client {
            request: UserRequest::new(u.id, u.rate, roi, u.requested_level, 1),
            rate_index,
            adapt,
            last_lost: 0,
            last_attempted: 0,
        });
    }
    let index_of: BTreeMap<UserId, usize> = clients.iter().enumerate().map(|(k, c)| (c.request.user_id, k)).collect();
    let ladders: BTreeMap<TileId, &TileLadder> = scenario.ladders.iter().map(|l| (l.id, l)).collect();

    let budget = scenario.slot.slots_per_frame;
    let gops = scenario.gops_per_epoch();
    let frame_budgets = largest_remainder(budget * scenario.gop_length as u64, &scenario.frame_profile);
    let base_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut next_event = 0;
    let mut reports = Vec::with_capacity(scenario.epochs());

    for epoch in 0..scenario.epochs() {
        let start_s = epoch as f64 * scenario.epoch_s;
        // 1. trace events due by the start of this epoch
        while let Some(e) = scenario.trace.get(next_event).filter(|e| e.time_s <= start_s + 1e-9) {
            let client = &mut clients[index_of[&e.user_id]];
            match &e.kind {
                TraceKind::Roi(spec) => {
                    client.request.roi = spec.tiles(scenario.grid).map_err(SimError::Scenario)?;
                }
                TraceKind::Zoom(level) => client.request.requested_level = *level,
                TraceKind::Channel(row) => loss.set_row(e.user_id, row.clone())?,
            }
            next_event += 1;
        }

        // 2. rate update from the previous epoch's observations
        for client in &mut clients {
            if let Some(state) = &mut client.adapt {
                if epoch > 0 {
                    state.observe_interval(client.last_lost, client.last_attempted);
                }
                client.rate_index = state.current;
            }
            client.request.link_rate = scenario.rates.rate(client.rate_index);
        }

        // 3. allocation
        let requests: Vec<UserRequest> = clients.iter().map(|c| c.request.clone()).collect();
        let allocation = allocate(
            scenario.allocator,
            &scenario.ladders,
            &requests,
            &scenario.policy,
            budget,
            &scenario.slot,
            &scenario.approx,
        )?;
        let plan = &allocation.result.plan;

        // 4. GOP budgeting
        let used = largest_remainder_exact(plan.total_slots * scenario.gop_length as u64, &frame_budgets);
        let frame_slots: Vec<FrameSlots> =
            frame_budgets.iter().zip(&used).map(|(&budget, &used)| FrameSlots { budget, used }).collect();

        // 5. receptions
        let entry_rates: Vec<usize> =
            plan.entries.iter().map(|e| scenario.rates.index_of(e.link_rate)).collect::<Result<_, _>>()?;
        let mut users_out = Vec::with_capacity(clients.len());
        for client in &mut clients {
            let req = &client.request;
            let (mut lost, mut attempted) = (0u64, 0u64);
            let mut units = 0i64;
            let mut bits = 0u64;
            let mut bitmap: BTreeMap<TileId, Level> = BTreeMap::new();
            for gop in 0..gops {
                let mut decoded: BTreeMap<TileId, Level> = BTreeMap::new();
                for (entry, &rate) in plan.entries.iter().zip(&entry_rates) {
                    if entry.recipient.is_some_and(|r| r != req.user_id) {
                        continue;
                    }
                    let mut rng = base_rng.clone();
                    rng.set_stream(stream_key(epoch, gop, req.user_id, entry.tile, entry.level, rate));
                    let ok = rng.gen_bool(1.0 - loss.loss(req.user_id, rate));
                    if rate > client.rate_index {
                        if let Some(state) = &mut client.adapt {
                            state.free_probe_observe(rate, ok);
                        }
                        continue;
                    }
                    attempted += 1;
                    if !ok {
                        lost += 1;
                        continue;
                    }
                    if req.is_interested(entry.tile) {
                        let best = decoded.entry(entry.tile).or_insert(entry.level);
                        *best = (*best).max(entry.level);
                    }
                }
                for (&tile, ladder) in &ladders {
                    if !req.is_interested(tile) {
                        continue;
                    }
                    let level = decoded.get(&tile).copied();
                    units += received_utility(&scenario.policy, ladder, req, level, false)
                        .units()
                        .expect("measurement view is finite");
                    if let Some(m) = level {
                        bits += ladder.size(m)? * 8 * scenario.gop_length as u64;
                        let b = bitmap.entry(tile).or_insert(m);
                        *b = (*b).max(m);
                    }
                }
            }
            client.last_lost = lost;
            client.last_attempted = attempted;
            users_out.push(UserEpoch {
                user_id: req.user_id,
                rate_index: client.rate_index,
                realized_units: units,
                realized_utility: units as f64 / gops.max(1) as f64 / UTILITY_SCALE as f64,
                goodput_bits: bits,
                goodput_bps: bits as f64 / scenario.epoch_s,
                bitmap,
                lost,
                attempted,
            });
        }

        // 6. report
        reports.push(EpochReport {
            epoch,
            start_s,
            duration_s: scenario.epoch_s,
            allocator: scenario.allocator,
            seed: scenario.seed,
            status: allocation.status,
            planned_objective: allocation.result.objective,
            gops,
            users: users_out,
            slots_used: plan.total_slots,
            budget,
            frame_slots,
            similarity: similarity(&requests),
        });
    }
    Ok(reports)
}

/// Runs `scenario` once per (allocator, seed) pair in parallel, returning
/// the runs in input order.
pub fn run_grid(
    scenario: &Scenario,
    allocators: &[AllocatorKind],
    seeds: &[u64],
) -> Result<Vec<(AllocatorKind, u64, Vec<EpochReport>)>, SimError> {
    let jobs: Vec<(AllocatorKind, u64)> =
        allocators.iter().flat_map(|a| seeds.iter().map(move |s| (*a, *s))).collect();
    jobs.par_iter()
        .map(|&(allocator, seed)| {
            let s = Scenario { allocator, seed, ..scenario.clone() };
            run_simulation(&s).map(|r| (allocator, seed, r))
        })
        .collect()
}

#[cfg(test)]
mod tests;
