//! Approximation with utility, rather than slots, as the table dimension.
//!
//! Utilities are rounded down to multiples of a unit `delta`; the table then
//! holds the fewest slots that reach at least `q` units of quantized utility.
//! The answer is the largest `q` whose slot count fits the budget.

use crate::model::{ladder_levels, ExtendedUtility, PlanEntry, SlotBudget, TileLadder, TransmissionPlan, VirtualUser};
use crate::scheduler::table::{Shape, TileContext, COPY, DEAD, MAX_USERS, SKIP, TRANSMIT_BASE};
use crate::scheduler::SchedulerError;

const INF: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproximationConfig {
    pub epsilon: f64,
    /// Explicit quantization unit in fixed-point utility units; derived from
    /// `epsilon` when absent.
    pub unit: Option<i64>,
}

impl Default for ApproximationConfig {
    fn default() -> Self {
        Self { epsilon: 0.2, unit: None }
    }
}

impl ApproximationConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self { epsilon, unit: None }
    }

    /// `delta = epsilon * mean max utility per interested (tile, user) pair`.
    pub fn utility_unit(&self, users: &[VirtualUser]) -> i64 {
        if let Some(u) = self.unit {
            return u.max(1);
        }
        let (mut total, mut pairs) = (0i64, 0usize);
        for vu in users {
            for (_, t) in vu.tiles() {
                total += t.utilities.last().copied().unwrap_or(0);
                pairs += t.members;
            }
        }
        if pairs == 0 {
            return 1;
        }
        ((self.epsilon * total as f64 / pairs as f64).round() as i64).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxSchedule {
    /// True utility of the extracted plan.
    pub objective: ExtendedUtility,
    pub plan: TransmissionPlan,
    /// Best reachable quantized total, in multiples of `unit`.
    pub quantized_objective: Option<u64>,
    pub unit: i64,
}

struct QuantizedTile {
    ctx: TileContext,
    /// qreward[m][i'][i], or -1 when some user in the range is below its bound
    qreward: Vec<Vec<Vec<i64>>>,
}

impl QuantizedTile {
    fn new(ctx: TileContext, ladder: &TileLadder, users: &[VirtualUser], unit: i64) -> Self {
        let n = users.len();
        let mut qreward = vec![vec![vec![-1; n + 1]; n + 1]; ctx.levels + 1];
        for (m, by_start) in qreward.iter_mut().enumerate().skip(1) {
            for (ip, row) in by_start.iter_mut().enumerate().skip(1) {
                let mut acc = Some(0i64);
                for i in ip..=n {
                    acc = acc.and_then(|a| users[i - 1].utility(ladder.id, m).units().map(|u| a + u / unit));
                    row[i] = acc.unwrap_or(-1);
                }
            }
        }
        Self { ctx, qreward }
    }

    fn fill(&self, base: &[u64], values: &mut [u64], journal: &mut [u8]) {
        let ctx = &self.ctx;
        let shape = Shape { users: ctx.users, levels: ctx.levels, width: base.len() };
        let width = shape.width;
        for m in 0..=ctx.levels {
            let r = shape.row(0, m);
            values[r..r + width].copy_from_slice(base);
        }
        for i in 1..=ctx.users {
            if !ctx.interested[i] {
                for m in 0..=ctx.levels {
                    let (src, dst) = (shape.row(i - 1, m), shape.row(i, m));
                    values.copy_within(src..src + width, dst);
                    let j = shape.journal_row(i, m);
                    journal[j..j + width].fill(COPY);
                }
                continue;
            }
            let (r, j) = (shape.row(i, 0), shape.journal_row(i, 0));
            if ctx.zero_ok[i] {
                values.copy_within(shape.row(i - 1, 0)..shape.row(i - 1, 0) + width, r);
                journal[j..j + width].fill(COPY);
            } else {
                values[r..r + width].fill(INF);
                journal[j..j + width].fill(DEAD);
            }
            for m in 1..=ctx.levels {
                let (head, tail) = values.split_at_mut(shape.row(i, m));
                let dst = &mut tail[..width];
                dst.copy_from_slice(&head[shape.row(i, m - 1)..shape.row(i, m - 1) + width]);
                let jr = shape.journal_row(i, m);
                let jrow = &mut journal[jr..jr + width];
                jrow.fill(SKIP);
                for ip in 1..=i {
                    let w = self.qreward[m][ip][i];
                    if w < 0 {
                        continue;
                    }
                    let w = w as usize;
                    let c = ctx.cost[m][ip];
                    let src = &head[shape.row(ip - 1, m - 1)..shape.row(ip - 1, m - 1) + width];
                    let code = TRANSMIT_BASE + ip as u8;
                    for q in 0..width {
                        let s = src[q.saturating_sub(w)];
                        if s != INF && s + c < dst[q] {
                            dst[q] = s + c;
                            jrow[q] = code;
                        }
                    }
                }
            }
        }
    }

    fn walk(&self, journal: &[u8], width: usize, mut q: usize, plan: &mut TransmissionPlan) -> Result<usize, SchedulerError> {
        let ctx = &self.ctx;
        let shape = Shape { users: ctx.users, levels: ctx.levels, width };
        let (mut i, mut m) = (ctx.users, ctx.levels);
        while i > 0 {
            match journal[shape.journal_row(i, m) + q] {
                COPY => i -= 1,
                SKIP => m -= 1,
                DEAD => {
                    return Err(SchedulerError::Inconsistent(format!(
                        "tile {}: reached infeasible state ({i}, {m}, {q})",
                        ctx.tile
                    )))
                }
                code => {
                    let ip = (code - TRANSMIT_BASE) as usize;
                    plan.push(PlanEntry {
                        tile: ctx.tile,
                        level: m,
                        link_rate: ctx.rates[ip],
                        slot_cost: ctx.cost[m][ip],
                        recipient: None,
                    });
                    q = q.saturating_sub(self.qreward[m][ip][i] as usize);
                    i = ip - 1;
                    m -= 1;
                }
            }
        }
        Ok(q)
    }
}

/// Approximate allocation on quantized utilities; `users` sorted by rate.
pub fn approximation_allocate(
    ladders: &[TileLadder],
    users: &[VirtualUser],
    budget: u64,
    slot: &SlotBudget,
    cfg: &ApproximationConfig,
) -> Result<ApproxSchedule, SchedulerError> {
    if users.len() > MAX_USERS {
        return Err(SchedulerError::TooManyUsers(users.len()));
    }
    if users.windows(2).any(|w| w[0].link_rate > w[1].link_rate) {
        return Err(SchedulerError::UnsortedUsers);
    }
    let levels = ladder_levels(ladders)?;
    let unit = cfg.utility_unit(users);
    let upper: i64 = ladders
        .iter()
        .map(|l| users.iter().filter_map(|u| u.utility(l.id, levels).units()).map(|v| v / unit).sum::<i64>())
        .sum();
    let width = upper as usize + 1;
    let tiles = ladders
        .iter()
        .map(|l| Ok(QuantizedTile::new(TileContext::new(l, users, slot)?, l, users, unit)))
        .collect::<Result<Vec<_>, SchedulerError>>()?;

    let shape = Shape { users: users.len(), levels, width };
    let layer = shape.journal_len();
    let mut journal = vec![0u8; layer * tiles.len()];
    let mut values = vec![0u64; shape.value_len()];
    let mut base = vec![INF; width];
    base[0] = 0;
    for (g, tile) in tiles.iter().enumerate() {
        tile.fill(&base, &mut values, &mut journal[g * layer..(g + 1) * layer]);
        let row = shape.row(users.len(), levels);
        base.copy_from_slice(&values[row..row + width]);
    }

    let Some(best_q) = (0..width).rev().find(|&q| base[q] <= budget) else {
        return Ok(ApproxSchedule {
            objective: ExtendedUtility::NEG_INF,
            plan: TransmissionPlan::default(),
            quantized_objective: None,
            unit,
        });
    };
    let mut plan = TransmissionPlan::default();
    let mut q = best_q;
    for g in (0..tiles.len()).rev() {
        q = tiles[g].walk(&journal[g * layer..(g + 1) * layer], width, q, &mut plan)?;
    }
    plan.normalize();
    if plan.total_slots > budget {
        return Err(SchedulerError::Inconsistent(format!(
            "approximate plan uses {} slots, budget {budget}",
            plan.total_slots
        )));
    }
    let objective = ladders
        .iter()
        .map(|l| {
            users
                .iter()
                .map(|u| {
                    let level = plan
                        .entries
                        .iter()
                        .filter(|e| e.tile == l.id && e.link_rate <= u.link_rate)
                        .map(|e| e.level)
                        .max()
                        .unwrap_or(0);
                    u.utility(l.id, level)
                })
                .sum::<ExtendedUtility>()
        })
        .sum();
    Ok(ApproxSchedule { objective, plan, quantized_objective: Some(best_q as u64), unit })
}
