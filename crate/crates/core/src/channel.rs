//! Per-client link model: loss-driven rate adaptation and a seedable
//! per-(user, rate) loss table.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::UserId;

pub const P_MTL: f64 = 0.10;
pub const P_ORI: f64 = 0.03;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("loss row has {found} entries, rate set has {expected}")]
    RowLength { found: usize, expected: usize },
    #[error("loss probability {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("loss probability decreases from rate index {0} to {next}", next = .0 + 1)]
    Decreasing(usize),
    #[error("invalid rate adaptation thresholds: ORI {ori} must be below MTL {mtl}")]
    Thresholds { ori: f64, mtl: f64 },
    #[error("rate index {index} outside a set of {len} rates")]
    RateIndex { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateAdaptConfig {
    pub p_mtl: f64,
    pub p_ori: f64,
    /// Estimation window at multiplier 1, in allocation intervals.
    pub min_window: u32,
    /// Largest window multiplier; a power of two.
    pub max_backoff: u32,
}

impl Default for RateAdaptConfig {
    fn default() -> Self {
        Self { p_mtl: P_MTL, p_ori: P_ORI, min_window: 1, max_backoff: 64 }
    }
}

impl RateAdaptConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.p_ori < self.p_mtl && self.p_ori >= 0.0 && self.p_mtl <= 1.0 {
            Ok(())
        } else {
            Err(ChannelError::Thresholds { ori: self.p_ori, mtl: self.p_mtl })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateChange {
    Decrease,
    Hold,
    Increase,
}

/// Rate adaptation state of one client.
///
/// The window of rate `j` is `min_window * backoff[j]` intervals. A failure
/// at `j` doubles `backoff[j - 1]`, so the client waits longer below a rate
/// that keeps failing; a success at `j` halves `backoff[j - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateAdaptState {
    pub cfg: RateAdaptConfig,
    pub current: usize,
    pub backoff: Vec<u32>,
    /// Intervals observed in the current window.
    pub window_fill: u32,
    pub window_lost: u64,
    pub window_attempted: u64,
    /// (attempted, lost) per rate index above `current`, this window only.
    probes: BTreeMap<usize, (u64, u64)>,
}

impl RateAdaptState {
    pub fn new(rate_count: usize, start: usize, cfg: RateAdaptConfig) -> Result<Self, ChannelError> {
        cfg.validate()?;
        if start >= rate_count {
            return Err(ChannelError::RateIndex { index: start, len: rate_count });
        }
        Ok(Self {
            cfg,
            current: start,
            backoff: vec![1; rate_count],
            window_fill: 0,
            window_lost: 0,
            window_attempted: 0,
            probes: BTreeMap::new(),
        })
    }

    /// Current estimation window in allocation intervals.
    pub fn estimation_window(&self) -> u32 {
        self.cfg.min_window.max(1) * self.backoff[self.current]
    }

    /// Window-end decision for loss rate `p`, with `small_window_loss` the
    /// loss over the most recent interval.
    pub fn ha_rraa_step(&mut self, p: f64, small_window_loss: f64) -> RateChange {
        let change = if small_window_loss > self.cfg.p_mtl || p > self.cfg.p_mtl {
            self.fail()
        } else {
            self.succeed();
            if p < self.cfg.p_ori && !self.probe_suppressed() && self.current + 1 < self.backoff.len() {
                self.current += 1;
                RateChange::Increase
            } else {
                RateChange::Hold
            }
        };
        self.reset_window();
        change
    }

    /// Records a packet heard at a rate above the current one.
    pub fn free_probe_observe(&mut self, rate_index: usize, success: bool) {
        if rate_index <= self.current {
            return;
        }
        let entry = self.probes.entry(rate_index).or_default();
        entry.0 += 1;
        if !success {
            entry.1 += 1;
        }
    }

    /// Feeds one allocation interval of losses at the current rate.
    ///
    /// Steps immediately when the interval alone exceeds the tolerable loss,
    /// otherwise once the estimation window is full. Intervals with no
    /// packets carry no information and do not advance the window.
    pub fn observe_interval(&mut self, lost: u64, attempted: u64) -> Option<RateChange> {
        if attempted == 0 {
            return None;
        }
        let small = lost as f64 / attempted as f64;
        self.window_fill += 1;
        self.window_lost += lost;
        self.window_attempted += attempted;
        if small > self.cfg.p_mtl || self.window_fill >= self.estimation_window() {
            let p = self.window_lost as f64 / self.window_attempted as f64;
            return Some(self.ha_rraa_step(p, small));
        }
        None
    }

    fn fail(&mut self) -> RateChange {
        if self.current == 0 {
            return RateChange::Hold;
        }
        self.current -= 1;
        let b = &mut self.backoff[self.current];
        *b = (*b * 2).min(self.cfg.max_backoff.max(1));
        RateChange::Decrease
    }

    fn succeed(&mut self) {
        if self.current > 0 {
            let b = &mut self.backoff[self.current - 1];
            *b = (*b / 2).max(1);
        }
    }

    /// Probe losses at the next rate above the tolerable loss hold the rate.
    fn probe_suppressed(&self) -> bool {
        self.probes
            .get(&(self.current + 1))
            .is_some_and(|&(attempted, lost)| attempted > 0 && lost as f64 / attempted as f64 > self.cfg.p_mtl)
    }

    fn reset_window(&mut self) {
        self.window_fill = 0;
        self.window_lost = 0;
        self.window_attempted = 0;
        self.probes.clear();
    }
}

/// Loss probability per (user, rate index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    rate_count: usize,
    default_row: Vec<f64>,
    rows: BTreeMap<UserId, Vec<f64>>,
    /// Highest decodable rate index per user; loss is 1 above it.
    max_rate: BTreeMap<UserId, usize>,
}

impl LossModel {
    pub fn new(default_row: Vec<f64>) -> Result<Self, ChannelError> {
        let rate_count = default_row.len();
        validate_row(&default_row, rate_count)?;
        Ok(Self { rate_count, default_row, rows: BTreeMap::new(), max_rate: BTreeMap::new() })
    }

    /// Zero loss at every rate.
    pub fn lossless(rate_count: usize) -> Self {
        Self::new(vec![0.0; rate_count]).expect("zero row is valid")
    }

    pub fn rate_count(&self) -> usize {
        self.rate_count
    }

    pub fn set_row(&mut self, user: UserId, row: Vec<f64>) -> Result<(), ChannelError> {
        validate_row(&row, self.rate_count)?;
        self.rows.insert(user, row);
        Ok(())
    }

    pub fn row(&self, user: UserId) -> &[f64] {
        self.rows.get(&user).unwrap_or(&self.default_row)
    }

    pub fn set_max_rate(&mut self, user: UserId, index: usize) -> Result<(), ChannelError> {
        if index >= self.rate_count {
            return Err(ChannelError::RateIndex { index, len: self.rate_count });
        }
        self.max_rate.insert(user, index);
        Ok(())
    }

    pub fn max_rate(&self, user: UserId) -> Option<usize> {
        self.max_rate.get(&user).copied()
    }

    pub fn loss(&self, user: UserId, rate_index: usize) -> f64 {
        if self.max_rate(user).is_some_and(|m| rate_index > m) {
            return 1.0;
        }
        self.row(user)[rate_index]
    }

    pub fn default_row(&self) -> &[f64] {
        &self.default_row
    }

    pub fn user_rows(&self) -> impl Iterator<Item = (UserId, &[f64])> {
        self.rows.iter().map(|(u, r)| (*u, r.as_slice()))
    }
}

fn validate_row(row: &[f64], expected: usize) -> Result<(), ChannelError> {
    if row.len() != expected {
        return Err(ChannelError::RowLength { found: row.len(), expected });
    }
    if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(ChannelError::OutOfRange(*p));
    }
    if let Some(i) = row.windows(2).position(|w| w[1] < w[0]) {
        return Err(ChannelError::Decreasing(i));
    }
    Ok(())
}

/// One Bernoulli reception draw.
pub fn sample_reception<R: Rng + ?Sized>(loss: &LossModel, user: UserId, rate_index: usize, rng: &mut R) -> bool {
    rng.gen_bool(1.0 - loss.loss(user, rate_index))
}
