//! Optimal allocators.
//!
//! * [`single_tile_optimal`] solves one tile for a given slot allowance.
//! * [`multi_tile_naive`] splits the budget across tiles by enumerating every
//!   allowance per tile (quadratic in `T`); kept as a reference path.
//! * [`multi_tile_optimal`] chains the tiles through one table so the split
//!   falls out of the recursion, linear in `T`.
//! * [`brute_force_oracle`] enumerates transmission sets on small instances.

mod oracle;
pub(crate) mod table;

use thiserror::Error;

use crate::model::{ladder_levels, ExtendedUtility, ModelError, PlanEntry, SlotBudget, TileLadder, TransmissionPlan, VirtualUser};
use table::{fill_utility_layer, walk_tile, Shape, TileContext, MAX_USERS, NEG};

pub use oracle::{brute_force_oracle, OracleLimits};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedulerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("virtual users must be sorted by link rate")]
    UnsortedUsers,
    #[error("at most {MAX_USERS} virtual users are supported, got {0}")]
    TooManyUsers(usize),
    #[error("instance too large for exhaustive enumeration: {0}")]
    TooLarge(String),
    #[error("schedule extraction failed: {0}")]
    Inconsistent(String),
}

/// Optimal value together with a plan achieving it.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub objective: ExtendedUtility,
    pub plan: TransmissionPlan,
}

impl Schedule {
    fn infeasible() -> Self {
        Self { objective: ExtendedUtility::NEG_INF, plan: TransmissionPlan::default() }
    }
}

fn check_users(users: &[VirtualUser]) -> Result<(), SchedulerError> {
    if users.len() > MAX_USERS {
        return Err(SchedulerError::TooManyUsers(users.len()));
    }
    if users.windows(2).any(|w| w[0].link_rate > w[1].link_rate) {
        return Err(SchedulerError::UnsortedUsers);
    }
    Ok(())
}

fn push_sent(plan: &mut TransmissionPlan, ctx: &TileContext, sent: Vec<(usize, usize, u64)>) {
    for (level, ip, cost) in sent {
        plan.push(PlanEntry {
            tile: ctx.tile,
            level,
            link_rate: ctx.rates[ip],
            slot_cost: cost,
            recipient: None,
        });
    }
}

/// Best utility for one tile within `t` slots.
pub fn single_tile_optimal(
    ladder: &TileLadder,
    users: &[VirtualUser],
    t: u64,
    slot: &SlotBudget,
) -> Result<Schedule, SchedulerError> {
    check_users(users)?;
    let ctx = TileContext::new(ladder, users, slot)?;
    let width = t as usize + 1;
    let shape = Shape { users: ctx.users, levels: ctx.levels, width };
    let mut values = vec![0i64; shape.value_len()];
    let mut journal = vec![0u8; shape.journal_len()];
    fill_utility_layer(&ctx, &vec![0; width], &mut values, &mut journal);
    let objective = ExtendedUtility::from_raw(values[shape.row(ctx.users, ctx.levels) + t as usize]);
    if !objective.is_finite() {
        return Ok(Schedule::infeasible());
    }
    let mut plan = TransmissionPlan::default();
    let (sent, _) = walk_tile(&ctx, &journal, width, t as usize).map_err(SchedulerError::Inconsistent)?;
    push_sent(&mut plan, &ctx, sent);
    plan.normalize();
    Ok(Schedule { objective, plan })
}

/// Per-tile optimal tables combined by enumerating each tile's allowance.
pub fn multi_tile_naive(
    ladders: &[TileLadder],
    users: &[VirtualUser],
    budget: u64,
    slot: &SlotBudget,
) -> Result<Schedule, SchedulerError> {
    check_users(users)?;
    ladder_levels(ladders)?;
    let width = budget as usize + 1;
    let mut contexts = Vec::with_capacity(ladders.len());
    let mut journals = Vec::with_capacity(ladders.len());
    // best[t] over the tiles combined so far; choice[g][t] is tile g's allowance
    let mut best = vec![0i64; width];
    let mut choice: Vec<Vec<u32>> = Vec::with_capacity(ladders.len());
    let zeros = vec![0i64; width];
    let mut values = Vec::new();
    for ladder in ladders {
        let ctx = TileContext::new(ladder, users, slot)?;
        let shape = Shape { users: ctx.users, levels: ctx.levels, width };
        values.resize(shape.value_len(), 0);
        let mut journal = vec![0u8; shape.journal_len()];
        fill_utility_layer(&ctx, &zeros, &mut values, &mut journal);
        let row = shape.row(ctx.users, ctx.levels);
        let tile_best = &values[row..row + width];

        let mut next = vec![NEG; width];
        let mut pick = vec![0u32; width];
        for t in 0..width {
            for tp in 0..=t {
                let (a, b) = (best[t - tp], tile_best[tp]);
                if a >= 0 && b >= 0 && a + b > next[t] {
                    next[t] = a + b;
                    pick[t] = tp as u32;
                }
            }
        }
        best = next;
        choice.push(pick);
        contexts.push(ctx);
        journals.push(journal);
    }
    let objective = ExtendedUtility::from_raw(best[budget as usize]);
    if !objective.is_finite() {
        return Ok(Schedule::infeasible());
    }
    let mut plan = TransmissionPlan::default();
    let mut t = budget as usize;
    for g in (0..contexts.len()).rev() {
        let allowance = choice[g][t] as usize;
        let (sent, _) = walk_tile(&contexts[g], &journals[g], width, allowance).map_err(SchedulerError::Inconsistent)?;
        push_sent(&mut plan, &contexts[g], sent);
        t -= allowance;
    }
    plan.normalize();
    Ok(Schedule { objective, plan })
}

/// Optimal multi-tile allocation with the tiles chained through one table.
///
/// Row `i = 0` of tile `g` is the finished `(n, M)` row of tile `g - 1`, so
/// the slot split between tiles needs no separate enumeration.
pub fn multi_tile_optimal(
    ladders: &[TileLadder],
    users: &[VirtualUser],
    budget: u64,
    slot: &SlotBudget,
) -> Result<Schedule, SchedulerError> {
    check_users(users)?;
    ladder_levels(ladders)?;
    let width = budget as usize + 1;
    let contexts = ladders
        .iter()
        .map(|l| TileContext::new(l, users, slot))
        .collect::<Result<Vec<_>, _>>()?;
    let Some(first) = contexts.first() else {
        return Ok(Schedule { objective: ExtendedUtility::ZERO, plan: TransmissionPlan::default() });
    };
    let shape = Shape { users: first.users, levels: first.levels, width };
    let layer = shape.journal_len();
    let mut journal = vec![0u8; layer * contexts.len()];
    let mut values = vec![0i64; shape.value_len()];
    let mut base = vec![0i64; width];
    for (g, ctx) in contexts.iter().enumerate() {
        fill_utility_layer(ctx, &base, &mut values, &mut journal[g * layer..(g + 1) * layer]);
        let row = shape.row(ctx.users, ctx.levels);
        base.copy_from_slice(&values[row..row + width]);
    }
    let objective = ExtendedUtility::from_raw(base[budget as usize]);
    if !objective.is_finite() {
        return Ok(Schedule::infeasible());
    }
    let mut plan = TransmissionPlan::default();
    let mut t = budget as usize;
    for g in (0..contexts.len()).rev() {
        let (sent, rest) = walk_tile(&contexts[g], &journal[g * layer..(g + 1) * layer], width, t)
            .map_err(SchedulerError::Inconsistent)?;
        push_sent(&mut plan, &contexts[g], sent);
        t = rest;
    }
    plan.normalize();
    if plan.total_slots > budget {
        return Err(SchedulerError::Inconsistent(format!(
            "plan uses {} slots, budget {budget}",
            plan.total_slots
        )));
    }
    Ok(Schedule { objective, plan })
}

#[cfg(test)]
mod tests;
