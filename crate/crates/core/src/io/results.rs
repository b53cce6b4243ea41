//! Per-epoch results as CSV, one row per (run, epoch, user) plus an `all`
//! row carrying the epoch totals.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocator::{AllocationStatus, AllocatorKind};
use crate::simulator::EpochReport;

use super::IoError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub epoch: usize,
    pub allocator: AllocatorKind,
    pub seed: u64,
    /// User id, or `all` for the epoch totals.
    pub user: String,
    pub realized_utility: f64,
    pub goodput_bps: f64,
    /// Empty on `all` rows.
    pub rate_index: Option<usize>,
    pub similarity: f64,
    pub slots_used: u64,
    pub status: AllocationStatus,
}

pub fn result_rows(reports: &[EpochReport]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for r in reports {
        let row = |user: String, utility: f64, goodput: f64, rate: Option<usize>| ResultRow {
            epoch: r.epoch,
            allocator: r.allocator,
            seed: r.seed,
            user,
            realized_utility: utility,
            goodput_bps: goodput,
            rate_index: rate,
            similarity: r.similarity,
            slots_used: r.slots_used,
            status: r.status,
        };
        for u in &r.users {
            rows.push(row(u.user_id.to_string(), u.realized_utility, u.goodput_bps, Some(u.rate_index)));
        }
        let goodput = if r.users.is_empty() {
            0.0
        } else {
            r.users.iter().map(|u| u.goodput_bps).sum::<f64>() / r.users.len() as f64
        };
        rows.push(row("all".into(), r.realized_utility(), goodput, None));
    }
    rows
}

pub fn write_results<W: std::io::Write>(out: W, rows: &[ResultRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| IoError::Io { path: "<results>".into(), message: e.to_string() };
    for row in rows {
        w.serialize(row).map_err(fail)?;
    }
    w.flush().map_err(|e| IoError::Io { path: "<results>".into(), message: e.to_string() })
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, IoError> {
    let text = super::read(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e| IoError::Parse {
                line: e.position().map(|p| p.line() as usize),
                field: None,
                message: e.to_string(),
            })
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.in_file(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::run_simulation;
    use crate::synth::desk_scenario;

    #[test]
    fn rows_cover_users_and_totals() {
        let reports = run_simulation(&desk_scenario(8)).unwrap();
        let rows = result_rows(&reports);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].user, "all");
        assert_eq!(rows[2].rate_index, None);
        assert!((rows[2].realized_utility - rows[0].realized_utility - rows[1].realized_utility).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip() {
        let rows = result_rows(&run_simulation(&desk_scenario(8)).unwrap());
        let dir = std::env::temp_dir().join(format!("tilecast-results-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("r.csv");
        write_results(std::fs::File::create(&path).unwrap(), &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("epoch,allocator,seed,user,"));
        assert_eq!(read_results(&path).unwrap(), rows);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
