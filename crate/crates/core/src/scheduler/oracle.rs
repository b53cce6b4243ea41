use crate::model::{slot_cost, ExtendedUtility, SlotBudget, TileLadder, VirtualUser};

use super::SchedulerError;

/// Size limits for exhaustive enumeration.
#[derive(Debug, Clone, Copy)]
pub struct OracleLimits {
    pub tiles: usize,
    pub users: usize,
    pub levels: usize,
    pub budget: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { tiles: 3, users: 4, levels: 3, budget: 64 }
    }
}

/// Maximum utility by enumerating every set of (level, rate) transmissions
/// per tile and every combination of per-tile choices within `budget`.
pub fn brute_force_oracle(
    ladders: &[TileLadder],
    users: &[VirtualUser],
    budget: u64,
    slot: &SlotBudget,
) -> Result<ExtendedUtility, SchedulerError> {
    let limits = OracleLimits::default();
    let levels = ladders.iter().map(|l| l.levels()).max().unwrap_or(0);
    if ladders.len() > limits.tiles || users.len() > limits.users || levels > limits.levels || budget > limits.budget {
        return Err(SchedulerError::TooLarge(format!(
            "{} tiles, {} users, {levels} levels, budget {budget}",
            ladders.len(),
            users.len()
        )));
    }

    // for each tile, the best finite utility at each exact total cost
    let mut per_tile: Vec<Vec<(u64, i64)>> = Vec::new();
    for ladder in ladders {
        let mut pairs = Vec::new();
        for m in 1..=ladder.levels() {
            for u in users {
                pairs.push((m, u.link_rate, slot_cost(ladder.size(m)?, u.link_rate, slot)?));
            }
        }
        let mut best_at = vec![None::<i64>; budget as usize + 1];
        for mask in 0u32..(1 << pairs.len()) {
            let chosen = || (0..pairs.len()).filter(move |b| mask >> b & 1 == 1).map(|b| pairs[b]);
            let cost: u64 = chosen().map(|p| p.2).sum();
            if cost > budget {
                continue;
            }
            let total: ExtendedUtility = users
                .iter()
                .map(|u| {
                    let level = chosen().filter(|p| p.1 <= u.link_rate).map(|p| p.0).max().unwrap_or(0);
                    u.utility(ladder.id, level)
                })
                .sum();
            if let Some(v) = total.units() {
                let slot = &mut best_at[cost as usize];
                *slot = Some(slot.map_or(v, |b| b.max(v)));
            }
        }
        per_tile.push(
            best_at
                .iter()
                .enumerate()
                .filter_map(|(c, v)| v.map(|v| (c as u64, v)))
                .collect(),
        );
    }

    let mut best = None::<i64>;
    combine(&per_tile, 0, 0, 0, budget, &mut best);
    Ok(best.map_or(ExtendedUtility::NEG_INF, ExtendedUtility::from_units))
}

fn combine(options: &[Vec<(u64, i64)>], g: usize, cost: u64, value: i64, budget: u64, best: &mut Option<i64>) {
    if g == options.len() {
        *best = Some(best.map_or(value, |b| b.max(value)));
        return;
    }
    for &(c, v) in &options[g] {
        if cost + c <= budget {
            combine(options, g + 1, cost + c, value + v, budget, best);
        }
    }
}
