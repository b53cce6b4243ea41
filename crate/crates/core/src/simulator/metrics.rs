use std::collections::{BTreeMap, BTreeSet};

use crate::model::{TileId, UserId, UserRequest};

use super::EpochReport;

/// Mean per-user overlap degree of the RoIs.
///
/// A tile's popularity is the fraction of participating users interested in
/// it; a user's degree is the summed popularity of its tiles that at least
/// one other user also wants, divided by its RoI size. Users with an empty
/// RoI take no part. Returns 0 when nobody participates.
pub fn similarity(requests: &[UserRequest]) -> f64 {
    let rois: Vec<&BTreeSet<TileId>> = requests.iter().map(|r| &r.roi).filter(|r| !r.is_empty()).collect();
    if rois.is_empty() {
        return 0.0;
    }
    let n = rois.len() as f64;
    let mut count: BTreeMap<TileId, usize> = BTreeMap::new();
    for roi in &rois {
        for &t in *roi {
            *count.entry(t).or_default() += 1;
        }
    }
    let total: f64 = rois
        .iter()
        .map(|roi| {
            let shared: f64 = roi.iter().map(|t| count[t]).filter(|&c| c > 1).map(|c| c as f64 / n).sum();
            shared / roi.len() as f64
        })
        .sum();
    total / n
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodputSummary {
    pub per_user_bps: BTreeMap<UserId, f64>,
    pub average_bps: f64,
}

/// Decodable RoI bits per second over the whole report stream.
pub fn goodput(reports: &[EpochReport]) -> GoodputSummary {
    let elapsed: f64 = reports.iter().map(|r| r.duration_s).sum();
    let mut bits: BTreeMap<UserId, u64> = BTreeMap::new();
    for r in reports {
        for u in &r.users {
            *bits.entry(u.user_id).or_default() += u.goodput_bits;
        }
    }
    let per_user_bps: BTreeMap<UserId, f64> = bits
        .into_iter()
        .map(|(u, b)| (u, if elapsed > 0.0 { b as f64 / elapsed } else { 0.0 }))
        .collect();
    let average_bps = if per_user_bps.is_empty() {
        0.0
    } else {
        per_user_bps.values().sum::<f64>() / per_user_bps.len() as f64
    };
    GoodputSummary { per_user_bps, average_bps }
}

/// Population standard deviation of per-user realized utility in one epoch.
pub fn fairness(report: &EpochReport) -> f64 {
    population_std(&report.users.iter().map(|u| u.realized_utility).collect::<Vec<_>>())
}

pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}
