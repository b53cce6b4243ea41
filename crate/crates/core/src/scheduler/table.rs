//! Shared machinery for the per-tile utility tables.
//!
//! A layer holds `U(i, m, t)` for one tile over virtual users `0..=n`, levels
//! `0..=M` and slots `0..=T`, stored row-major so that every state a
//! transition reads precedes the state it writes.

use crate::model::{slot_cost, ExtendedUtility, LinkRate, ModelError, SlotBudget, TileId, TileLadder, VirtualUser};

pub(crate) const NEG: i64 = i64::MIN;

/// Journal codes. Values `TRANSMIT_BASE + i'` record a transmission at the
/// rate of virtual user `i'` (1-based).
pub(crate) const COPY: u8 = 0;
pub(crate) const SKIP: u8 = 1;
pub(crate) const TRANSMIT_BASE: u8 = 1;
pub(crate) const DEAD: u8 = u8::MAX;
pub(crate) const MAX_USERS: usize = (u8::MAX - 2) as usize;

/// Per-tile inputs of the recursion, indexed by 1-based user and level.
pub(crate) struct TileContext {
    pub tile: TileId,
    pub users: usize,
    pub levels: usize,
    pub rates: Vec<LinkRate>,
    pub interested: Vec<bool>,
    /// whether user i may receive nothing of this tile
    pub zero_ok: Vec<bool>,
    /// cost[m][i'] for 1 <= m <= M, 1 <= i' <= n
    pub cost: Vec<Vec<u64>>,
    /// reward[m][i'][i] = sum of utilities of users i'..=i at level m
    pub reward: Vec<Vec<Vec<i64>>>,
}

impl TileContext {
    pub fn new(ladder: &TileLadder, users: &[VirtualUser], slot: &SlotBudget) -> Result<Self, ModelError> {
        let n = users.len();
        let levels = ladder.levels();
        let mut cost = vec![vec![0; n + 1]; levels + 1];
        let mut reward = vec![vec![vec![NEG; n + 1]; n + 1]; levels + 1];
        for m in 1..=levels {
            let size = ladder.size(m)?;
            for ip in 1..=n {
                cost[m][ip] = slot_cost(size, users[ip - 1].link_rate, slot)?;
                let mut acc = ExtendedUtility::ZERO;
                for i in ip..=n {
                    acc = acc + users[i - 1].utility(ladder.id, m);
                    reward[m][ip][i] = acc.raw();
                }
            }
        }
        let mut interested = vec![false; n + 1];
        let mut zero_ok = vec![true; n + 1];
        for i in 1..=n {
            interested[i] = users[i - 1].is_interested(ladder.id);
            zero_ok[i] = users[i - 1].utility(ladder.id, 0).is_finite();
        }
        Ok(Self {
            tile: ladder.id,
            users: n,
            levels,
            rates: std::iter::once(LinkRate(0)).chain(users.iter().map(|u| u.link_rate)).collect(),
            interested,
            zero_ok,
            cost,
            reward,
        })
    }
}

/// Layout helper for one layer.
#[derive(Clone, Copy)]
pub(crate) struct Shape {
    pub users: usize,
    pub levels: usize,
    pub width: usize,
}

impl Shape {
    pub fn value_len(self) -> usize {
        (self.users + 1) * (self.levels + 1) * self.width
    }

    pub fn journal_len(self) -> usize {
        self.users * (self.levels + 1) * self.width
    }

    pub fn row(self, i: usize, m: usize) -> usize {
        (i * (self.levels + 1) + m) * self.width
    }

    pub fn journal_row(self, i: usize, m: usize) -> usize {
        debug_assert!(i >= 1);
        ((i - 1) * (self.levels + 1) + m) * self.width
    }
}

/// Fills one tile layer of the maximization tables.
///
/// `base` supplies row `i = 0` for every level: zeros for a stand-alone tile,
/// or the previous tile's `(n, M)` row when chaining tiles.
pub(crate) fn fill_utility_layer(ctx: &TileContext, base: &[i64], values: &mut [i64], journal: &mut [u8]) {
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
            values[r..r + width].fill(NEG);
            journal[j..j + width].fill(DEAD);
        }
        for m in 1..=ctx.levels {
            let dst_start = shape.row(i, m);
            let (head, tail) = values.split_at_mut(dst_start);
            let dst = &mut tail[..width];
            // level m not sent
            dst.copy_from_slice(&head[shape.row(i, m - 1)..shape.row(i, m - 1) + width]);
            let jr = shape.journal_row(i, m);
            let jrow = &mut journal[jr..jr + width];
            jrow.fill(SKIP);
            for ip in 1..=i {
                let reward = ctx.reward[m][ip][i];
                let c = ctx.cost[m][ip] as usize;
                if reward < 0 || c >= width {
                    continue;
                }
                let src = &head[shape.row(ip - 1, m - 1)..shape.row(ip - 1, m - 1) + width];
                let code = TRANSMIT_BASE + ip as u8;
                for t in c..width {
                    let s = src[t - c];
                    if s >= 0 && s + reward > dst[t] {
                        dst[t] = s + reward;
                        jrow[t] = code;
                    }
                }
            }
        }
    }
}

/// `(level, user index, cost)` per transmission, then the slot index at row 0.
type Backtrack = (Vec<(usize, usize, u64)>, usize);

/// Walks one tile's journal from `(n, M, t)` down to row 0.
pub(crate) fn walk_tile(
    ctx: &TileContext,
    journal: &[u8],
    width: usize,
    mut t: usize,
) -> Result<Backtrack, String> {
    let shape = Shape { users: ctx.users, levels: ctx.levels, width };
    let (mut i, mut m) = (ctx.users, ctx.levels);
    let mut sent = Vec::new();
    while i > 0 {
        match journal[shape.journal_row(i, m) + t] {
            COPY => i -= 1,
            SKIP => m -= 1,
            DEAD => return Err(format!("tile {}: reached infeasible state ({i}, {m}, {t})", ctx.tile)),
            code => {
                let ip = (code - TRANSMIT_BASE) as usize;
                let c = ctx.cost[m][ip];
                if ip == 0 || ip > i || c as usize > t {
                    return Err(format!("tile {}: corrupt journal entry {code} at ({i}, {m}, {t})", ctx.tile));
                }
                sent.push((m, ip, c));
                t -= c as usize;
                i = ip - 1;
                m -= 1;
            }
        }
    }
    Ok((sent, t))
}
