//! Versioned TOML scenario files.

use serde::{Deserialize, Serialize};

use crate::allocator::AllocatorKind;
use crate::baselines::ApproximationConfig;
use crate::channel::{RateAdaptConfig, P_MTL, P_ORI};
use crate::model::{LinkRate, RateSet, SlotBudget, TileLadder, UtilityPolicy, DEFAULT_SLOT_NS};
use crate::simulator::{default_frame_profile, RoiSpec, Scenario, ScenarioUser, TraceEvent};

use super::IoError;

pub const SCENARIO_FORMAT: &str = "tilecast-scenario/1";

/// On-disk form of a scenario. Optional fields fall back to the documented
/// defaults when converted with [`ScenarioFile::to_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format: String,
    #[serde(default = "default_allocator")]
    pub allocator: AllocatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    /// Overrides the per-frame budget derived from the slot and frame rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_slots: Option<u64>,
    pub rates_mbps: Vec<f64>,
    #[serde(default)]
    pub timing: TimingSection,
    pub video: VideoSection,
    #[serde(default)]
    pub utility: UtilityPolicy,
    #[serde(default)]
    pub channel: ChannelSection,
    pub users: Vec<UserEntry>,
}

fn default_allocator() -> AllocatorKind {
    AllocatorKind::Optimal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSection {
    #[serde(default = "default_slot_ns")]
    pub slot_ns: u64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: u32,
    #[serde(default = "default_epoch")]
    pub epoch_s: f64,
    #[serde(default = "default_gop")]
    pub gop_length: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_profile: Option<Vec<f64>>,
}

fn default_slot_ns() -> u64 {
    DEFAULT_SLOT_NS
}
fn default_frame_rate() -> u32 {
    25
}
fn default_epoch() -> f64 {
    2.0
}
fn default_gop() -> u32 {
    10
}

impl Default for TimingSection {
    fn default() -> Self {
        Self {
            slot_ns: default_slot_ns(),
            frame_rate: default_frame_rate(),
            epoch_s: default_epoch(),
            gop_length: default_gop(),
            frame_profile: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoSection {
    /// Columns and rows.
    pub grid: [u32; 2],
    pub levels: Vec<LevelEntry>,
    /// Multiplier on derived tile sizes, either one value or one per tile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile_variation: Option<Variation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Variation {
    Uniform(f64),
    PerTile(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<String>,
    /// Stream bitrate from which per-tile sizes are derived.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bitrate_mbps: Option<f64>,
    /// Per-tile average bytes per frame, given directly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile_bytes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    /// Loss probability per rate for users without their own row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_loss: Option<Vec<f64>>,
    #[serde(default = "yes")]
    pub rate_adaptation: bool,
    #[serde(default = "default_mtl")]
    pub p_mtl: f64,
    #[serde(default = "default_ori")]
    pub p_ori: f64,
    #[serde(default = "one")]
    pub min_window: u32,
    #[serde(default = "default_max_backoff")]
    pub max_backoff: u32,
}

fn yes() -> bool {
    true
}
fn default_mtl() -> f64 {
    P_MTL
}
fn default_ori() -> f64 {
    P_ORI
}
fn one() -> u32 {
    1
}
fn default_max_backoff() -> u32 {
    64
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            default_loss: None,
            rate_adaptation: true,
            p_mtl: P_MTL,
            p_ori: P_ORI,
            min_window: 1,
            max_backoff: default_max_backoff(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserEntry {
    pub id: u32,
    pub rate_mbps: f64,
    pub roi: RoiSpec,
    pub requested_level: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rate_mbps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<Vec<f64>>,
}

/// Parses and validates a scenario document.
pub fn parse_scenario_str(text: &str) -> Result<ScenarioFile, IoError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        IoError::Parse { line, field: None, message: e.message().to_string() }
    })?;
    if file.format != SCENARIO_FORMAT {
        return Err(IoError::Parse {
            line: locate(text, None, "format"),
            field: Some("format".into()),
            message: format!("expected \"{SCENARIO_FORMAT}\", found \"{}\"", file.format),
        });
    }
    file.to_scenario(&[]).map_err(|e| match e {
        IoError::Invalid { field, message } => {
            IoError::Parse { line: locate_field(text, &field), field: Some(field), message }
        }
        other => other,
    })?;
    Ok(file)
}

pub fn parse_scenario(path: &std::path::Path) -> Result<ScenarioFile, IoError> {
    let text = super::read(path)?;
    parse_scenario_str(&text).map_err(|e| e.in_file(path))
}

pub fn write_scenario_string(file: &ScenarioFile) -> Result<String, IoError> {
    toml::to_string_pretty(file).map_err(|e| IoError::Invalid { field: "scenario".into(), message: e.to_string() })
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::Invalid { field: field.into(), message: message.into() }
}

impl ScenarioFile {
    pub fn rate_set(&self) -> Result<RateSet, IoError> {
        if let Some(k) = self.rates_mbps.iter().position(|r| !(*r > 0.0)) {
            return Err(invalid(format!("rates_mbps[{k}]"), "rates must be positive"));
        }
        RateSet::new(self.rates_mbps.iter().map(|r| LinkRate::from_mbps(*r)).collect())
            .map_err(|e| invalid("rates_mbps", e.to_string()))
    }

    /// Per-tile ladders, numbered 1..=N row-major.
    pub fn ladders(&self) -> Result<Vec<TileLadder>, IoError> {
        let [cols, rows] = self.video.grid;
        let tiles = (cols * rows) as usize;
        if tiles == 0 {
            return Err(invalid("video.grid", "grid must have at least one tile"));
        }
        if self.video.levels.is_empty() {
            return Err(invalid("video.levels", "at least one level is required"));
        }
        let fps = self.timing.frame_rate as f64;
        let mut base = Vec::with_capacity(self.video.levels.len());
        for (k, level) in self.video.levels.iter().enumerate() {
            let field = format!("video.levels[{k}]");
            base.push(match (level.bitrate_mbps, level.tile_bytes) {
                (Some(b), None) if b > 0.0 => b * 1e6 / 8.0 / fps / tiles as f64,
                (None, Some(bytes)) if bytes > 0 => bytes as f64,
                (Some(_), None) | (None, Some(_)) => return Err(invalid(field, "size must be positive")),
                _ => return Err(invalid(field, "give exactly one of bitrate_mbps and tile_bytes")),
            });
        }
        let factors: Vec<f64> = match &self.video.tile_variation {
            None => vec![1.0; tiles],
            Some(Variation::Uniform(f)) => vec![*f; tiles],
            Some(Variation::PerTile(v)) if v.len() == tiles => v.clone(),
            Some(Variation::PerTile(v)) => {
                return Err(invalid("video.tile_variation", format!("{} values for {tiles} tiles", v.len())))
            }
        };
        if factors.iter().any(|f| !(*f > 0.0)) {
            return Err(invalid("video.tile_variation", "multipliers must be positive"));
        }
        (0..tiles)
            .map(|g| {
                let sizes = base.iter().map(|s| (s * factors[g]).round() as u64).collect();
                TileLadder::new(g as u32 + 1, sizes).map_err(|e| invalid("video.levels", e.to_string()))
            })
            .collect()
    }

    /// Builds the simulation input, with `trace` attached.
    pub fn to_scenario(&self, trace: &[TraceEvent]) -> Result<Scenario, IoError> {
        let rates = self.rate_set()?;
        let ladders = self.ladders()?;
        let t = &self.timing;
        if t.slot_ns == 0 || t.frame_rate == 0 {
            return Err(invalid("timing", "slot_ns and frame_rate must be positive"));
        }
        let mut slot = SlotBudget::new(t.frame_rate, t.slot_ns);
        if let Some(b) = self.budget_slots {
            slot = slot.with_slots(b);
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(invalid("epsilon", "must lie in (0, 1)"));
            }
        }
        let levels = ladders[0].levels();
        for (k, u) in self.users.iter().enumerate() {
            let at = |f: &str| format!("users[{k}].{f}");
            if rates.index_of(LinkRate::from_mbps(u.rate_mbps)).is_err() {
                return Err(invalid(at("rate_mbps"), format!("{} Mb/s is not in rates_mbps", u.rate_mbps)));
            }
            if u.max_rate_mbps.is_some_and(|m| rates.index_of(LinkRate::from_mbps(m)).is_err()) {
                return Err(invalid(at("max_rate_mbps"), "not in rates_mbps"));
            }
            if u.requested_level == 0 || u.requested_level > levels {
                return Err(invalid(at("requested_level"), format!("must lie in 1..={levels}")));
            }
            u.roi.tiles((self.video.grid[0], self.video.grid[1])).map_err(|m| invalid(at("roi"), m))?;
            if let Some(row) = &u.loss {
                crate::channel::LossModel::new(row.clone()).map_err(|e| invalid(at("loss"), e.to_string()))?;
                if row.len() != rates.len() {
                    return Err(invalid(at("loss"), format!("{} entries for {} rates", row.len(), rates.len())));
                }
            }
        }
        let default_loss = self.channel.default_loss.clone().unwrap_or_else(|| vec![0.0; rates.len()]);
        let users = self
            .users
            .iter()
            .map(|u| ScenarioUser {
                id: u.id,
                rate: LinkRate::from_mbps(u.rate_mbps),
                roi: u.roi.clone(),
                requested_level: u.requested_level,
                max_rate: u.max_rate_mbps.map(LinkRate::from_mbps),
                loss_row: u.loss.clone(),
            })
            .collect();
        let c = &self.channel;
        let scenario = Scenario {
            grid: (self.video.grid[0], self.video.grid[1]),
            ladders,
            rates,
            users,
            default_loss,
            policy: self.utility.clone(),
            slot,
            epoch_s: t.epoch_s,
            duration_s: self.duration_s.unwrap_or(t.epoch_s),
            gop_length: t.gop_length,
            frame_profile: t.frame_profile.clone().unwrap_or_else(|| default_frame_profile(t.gop_length)),
            rate_adaptation: c.rate_adaptation.then_some(RateAdaptConfig {
                p_mtl: c.p_mtl,
                p_ori: c.p_ori,
                min_window: c.min_window,
                max_backoff: c.max_backoff,
            }),
            trace: trace.to_vec(),
            allocator: self.allocator,
            approx: ApproximationConfig { epsilon: self.epsilon.unwrap_or(0.2), unit: None },
            seed: self.seed,
        };
        scenario.validate().map_err(|e| invalid(scenario_field(&e.to_string(), self), e.to_string()))?;
        Ok(scenario)
    }
}

/// Best-effort field path for a semantic error message.
fn scenario_field(message: &str, file: &ScenarioFile) -> String {
    if let Some(k) = file.users.iter().position(|u| message.contains(&format!("user {}", u.id))) {
        return format!("users[{k}]");
    }
    for (needle, field) in [
        ("GOP", "timing.gop_length"),
        ("frame profile", "timing.frame_profile"),
        ("epoch", "timing.epoch_s"),
        ("duration", "duration_s"),
        ("loss row", "channel.default_loss"),
        ("loss probability", "channel.default_loss"),
        ("ORI", "channel.p_ori"),
        ("utility", "utility"),
        ("link rate", "users"),
    ] {
        if message.contains(needle) {
            return field.into();
        }
    }
    "scenario".into()
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]` (or the top level), 1-based. With an
/// empty or absent key, the section header's line.
fn locate(text: &str, section: Option<(&str, usize)>, key: &str) -> Option<usize> {
    let mut current: Option<(String, usize)> = None;
    let mut counts: std::collections::BTreeMap<String, usize> = Default::default();
    let mut header = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let table = if let Some(name) = line.strip_prefix("[[").and_then(|l| l.strip_suffix("]]")) {
            let idx = counts.entry(name.trim().to_string()).or_insert(0);
            *idx += 1;
            Some((name.trim().to_string(), *idx - 1))
        } else {
            line.strip_prefix('[').and_then(|l| l.strip_suffix(']')).map(|name| (name.trim().to_string(), 0))
        };
        if let Some(t) = table {
            current = Some(t);
            if current.as_ref().map(|(s, i)| (s.as_str(), *i)) == section {
                header = Some(n + 1);
            }
            continue;
        }
        let here = current.as_ref().map(|(s, i)| (s.as_str(), *i));
        if here == section && !key.is_empty() && line.split('=').next().map(str::trim) == Some(key) {
            return Some(n + 1);
        }
    }
    header
}

/// Maps a dotted field path such as `users[2].rate_mbps` to a line.
fn locate_field(text: &str, field: &str) -> Option<usize> {
    let (head, key) = match field.rsplit_once('.') {
        Some((h, k)) => (h, k),
        None => ("", field),
    };
    let strip_index = |s: &str| -> (String, usize) {
        match s.split_once('[') {
            Some((name, rest)) => (name.to_string(), rest.trim_end_matches(']').parse().unwrap_or(0)),
            None => (s.to_string(), 0),
        }
    };
    if head.is_empty() {
        let (name, idx) = strip_index(key);
        if name == "users" || field.starts_with("users[") {
            return locate(text, Some(("users", idx)), "");
        }
        return locate(text, None, &name);
    }
    let (name, idx) = strip_index(head);
    let (key, _) = strip_index(key);
    locate(text, Some((&name, idx)), &key)
}
