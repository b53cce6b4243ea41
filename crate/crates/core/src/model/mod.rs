//! Domain types shared by every allocator: tile ladders, user requests,
//! slot arithmetic, the extended-real utility and virtual user clustering.

mod cluster;
mod plan;
mod utility;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cluster::{cluster_users, individual_users, TileInterest, VirtualUser};
pub use plan::{AllocationResult, PlanEntry, TransmissionPlan};
pub use utility::{received_utility, utility, UtilityPolicy};

pub type TileId = u32;
pub type UserId = u32;
/// Resolution level, 1-based. Level 0 is used internally for "nothing received".
pub type Level = usize;

/// Fixed-point units per unit of utility. All utility arithmetic is exact
/// integer arithmetic on these units.
pub const UTILITY_SCALE: i64 = 1_000_000;

/// Default slot length of 802.11a, in nanoseconds.
pub const DEFAULT_SLOT_NS: u64 = 9_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("level {level} outside 1..={max}")]
    InvalidLevel { level: Level, max: Level },
    #[error("tile {tile}: sizes must be positive and strictly increasing")]
    NonIncreasingLadder { tile: TileId },
    #[error("tile {tile}: ladder has {found} levels, expected {expected}")]
    LadderLength { tile: TileId, found: usize, expected: usize },
    #[error("user {user}: levels must satisfy 1 <= L ({guaranteed}) <= R ({requested}) <= M ({max})")]
    InvalidBounds { user: UserId, guaranteed: Level, requested: Level, max: Level },
    #[error("user {user}: RoI references unknown tile {tile}")]
    UnknownTile { user: UserId, tile: TileId },
    #[error("slot cost requires positive size and rate (size {size} bytes, rate {rate} b/s)")]
    NonPositiveCost { size: u64, rate: u64 },
    #[error("link rate {0} b/s is not in the configured rate set")]
    UnsupportedRate(u64),
    #[error("utility table must be positive and strictly increasing")]
    InvalidUtilityTable,
    #[error("no tiles configured")]
    NoTiles,
}

/// A utility value that is either a finite non-negative amount or `NEG_INF`.
///
/// Finite values are stored as integer multiples of `1 / UTILITY_SCALE`, so
/// sums are exact and independent of evaluation order. `NEG_INF` absorbs
/// every addition and compares below every finite value.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExtendedUtility(i64);

impl ExtendedUtility {
    pub const NEG_INF: Self = Self(i64::MIN);
    pub const ZERO: Self = Self(0);

    pub fn from_units(units: i64) -> Self {
        assert!(units >= 0, "finite utility must be non-negative");
        Self(units)
    }

    /// Rounds `value` to the nearest fixed-point unit.
    pub fn from_f64(value: f64) -> Self {
        if value == f64::NEG_INFINITY {
            return Self::NEG_INF;
        }
        Self::from_units((value * UTILITY_SCALE as f64).round() as i64)
    }

    pub fn is_finite(self) -> bool {
        self.0 >= 0
    }

    pub fn units(self) -> Option<i64> {
        self.is_finite().then_some(self.0)
    }

    pub fn to_f64(self) -> f64 {
        match self.units() {
            Some(u) => u as f64 / UTILITY_SCALE as f64,
            None => f64::NEG_INFINITY,
        }
    }

    pub(crate) fn raw(self) -> i64 {
        self.0
    }

    pub(crate) fn from_raw(raw: i64) -> Self {
        if raw < 0 {
            Self::NEG_INF
        } else {
            Self(raw)
        }
    }
}

impl Add for ExtendedUtility {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        if self.is_finite() && rhs.is_finite() {
            Self(self.0 + rhs.0)
        } else {
            Self::NEG_INF
        }
    }
}

impl std::iter::Sum for ExtendedUtility {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |acc, x| acc + x)
    }
}

impl fmt::Debug for ExtendedUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for ExtendedUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.units() {
            Some(_) => write!(f, "{}", self.to_f64()),
            None => f.write_str("-inf"),
        }
    }
}

/// Physical link rate in bits per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkRate(pub u64);

impl LinkRate {
    pub fn from_mbps(mbps: f64) -> Self {
        Self((mbps * 1e6).round() as u64)
    }

    pub fn bps(self) -> u64 {
        self.0
    }

    pub fn mbps(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

impl fmt::Display for LinkRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Mb/s", self.mbps())
    }
}

/// The ordered set of link rates the PHY supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateSet {
    rates: Vec<LinkRate>,
}

impl RateSet {
    pub fn ieee80211a() -> Self {
        Self::new([6.0, 9.0, 12.0, 18.0, 24.0, 36.0, 48.0, 54.0].map(LinkRate::from_mbps).to_vec())
            .expect("static rate set is valid")
    }

    pub fn new(mut rates: Vec<LinkRate>) -> Result<Self, ModelError> {
        rates.sort();
        rates.dedup();
        if let Some(bad) = rates.iter().find(|r| r.0 == 0) {
            return Err(ModelError::UnsupportedRate(bad.0));
        }
        Ok(Self { rates })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rate(&self, index: usize) -> LinkRate {
        self.rates[index]
    }

    pub fn rates(&self) -> &[LinkRate] {
        &self.rates
    }

    pub fn index_of(&self, rate: LinkRate) -> Result<usize, ModelError> {
        self.rates.binary_search(&rate).map_err(|_| ModelError::UnsupportedRate(rate.0))
    }
}

impl Default for RateSet {
    fn default() -> Self {
        Self::ieee80211a()
    }
}

/// Per-tile byte sizes across the resolution ladder; `sizes[m - 1]` is the
/// GOP-averaged size of the tile at level `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileLadder {
    pub id: TileId,
    sizes: Vec<u64>,
}

impl TileLadder {
    pub fn new(id: TileId, sizes: Vec<u64>) -> Result<Self, ModelError> {
        let increasing = sizes.windows(2).all(|w| w[0] < w[1]);
        if sizes.is_empty() || sizes[0] == 0 || !increasing {
            return Err(ModelError::NonIncreasingLadder { tile: id });
        }
        Ok(Self { id, sizes })
    }

    pub fn levels(&self) -> Level {
        self.sizes.len()
    }

    pub fn size(&self, level: Level) -> Result<u64, ModelError> {
        if level == 0 || level > self.sizes.len() {
            return Err(ModelError::InvalidLevel { level, max: self.sizes.len() });
        }
        Ok(self.sizes[level - 1])
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }
}

/// Checks that every ladder has the same number of levels and returns it.
pub fn ladder_levels(ladders: &[TileLadder]) -> Result<Level, ModelError> {
    let first = ladders.first().ok_or(ModelError::NoTiles)?;
    let expected = first.levels();
    for l in ladders {
        if l.levels() != expected {
            return Err(ModelError::LadderLength { tile: l.id, found: l.levels(), expected });
        }
    }
    Ok(expected)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRequest {
    pub user_id: UserId,
    pub link_rate: LinkRate,
    pub roi: BTreeSet<TileId>,
    pub requested_level: Level,
    pub guaranteed_level: Level,
}

impl UserRequest {
    pub fn new(
        user_id: UserId,
        link_rate: LinkRate,
        roi: impl IntoIterator<Item = TileId>,
        requested_level: Level,
        guaranteed_level: Level,
    ) -> Self {
        Self {
            user_id,
            link_rate,
            roi: roi.into_iter().collect(),
            requested_level,
            guaranteed_level,
        }
    }

    pub fn is_interested(&self, tile: TileId) -> bool {
        self.roi.contains(&tile)
    }

    pub fn validate(&self, ladders: &[TileLadder]) -> Result<(), ModelError> {
        let max = ladder_levels(ladders)?;
        let (l, r) = (self.guaranteed_level, self.requested_level);
        if l < 1 || l > r || r > max {
            return Err(ModelError::InvalidBounds {
                user: self.user_id,
                guaranteed: l,
                requested: r,
                max,
            });
        }
        if let Some(&tile) = self.roi.iter().find(|t| !ladders.iter().any(|l| l.id == **t)) {
            return Err(ModelError::UnknownTile { user: self.user_id, tile });
        }
        Ok(())
    }
}

/// Returns the requests sorted by link rate (ties by user id), the order every
/// allocator assumes.
pub fn sort_by_rate(requests: &[UserRequest]) -> Vec<UserRequest> {
    let mut sorted = requests.to_vec();
    sorted.sort_by_key(|r| (r.link_rate, r.user_id));
    sorted
}

/// Slot timing and the per-frame slot budget `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotBudget {
    pub slots_per_frame: u64,
    pub slot_ns: u64,
    pub frame_rate: u32,
}

impl SlotBudget {
    /// Budget derived from the frame period: `floor((1 / fps) / slot)`.
    pub fn new(frame_rate: u32, slot_ns: u64) -> Self {
        assert!(frame_rate > 0 && slot_ns > 0);
        Self {
            slots_per_frame: 1_000_000_000 / (frame_rate as u64 * slot_ns),
            slot_ns,
            frame_rate,
        }
    }

    pub fn with_slots(mut self, slots_per_frame: u64) -> Self {
        self.slots_per_frame = slots_per_frame;
        self
    }
}

impl Default for SlotBudget {
    fn default() -> Self {
        Self::new(25, DEFAULT_SLOT_NS)
    }
}

/// Number of slots needed to send `size_bytes` at `rate`, rounded up.
///
/// Evaluated as `ceil(size * 8 / (rate * slot))` in exact integer arithmetic.
pub fn slot_cost(size_bytes: u64, rate: LinkRate, slot: &SlotBudget) -> Result<u64, ModelError> {
    if size_bytes == 0 || rate.0 == 0 || slot.slot_ns == 0 {
        return Err(ModelError::NonPositiveCost { size: size_bytes, rate: rate.0 });
    }
    let num = size_bytes as u128 * 8 * 1_000_000_000;
    let den = rate.0 as u128 * slot.slot_ns as u128;
    Ok(num.div_ceil(den) as u64)
}
