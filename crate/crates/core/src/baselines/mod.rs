//! Comparison allocators: greedy unicast, greedy multicast and a
//! utility-quantized approximation.

mod approx;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{slot_cost, LinkRate, ModelError, PlanEntry, SlotBudget, TileId, TileLadder, TransmissionPlan, UserRequest};

pub use approx::{approximation_allocate, ApproxSchedule, ApproximationConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("level 1 for every requested tile needs {required} slots, budget is {budget}")]
    Infeasible { required: u64, budget: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn ladder_map(ladders: &[TileLadder]) -> BTreeMap<TileId, &TileLadder> {
    ladders.iter().map(|l| (l.id, l)).collect()
}

/// Unicast-only allocation.
///
/// Every user first gets each RoI tile at level 1 at its own rate. Then,
/// in ascending user id order, a user's whole tile set is replaced by its
/// requested level whenever the extra slots still fit.
pub fn adaptive_unicast(
    ladders: &[TileLadder],
    requests: &[UserRequest],
    budget: u64,
    slot: &SlotBudget,
) -> Result<TransmissionPlan, BaselineError> {
    let tiles = ladder_map(ladders);
    let mut users: Vec<&UserRequest> = requests.iter().collect();
    users.sort_by_key(|r| r.user_id);

    let mut per_user: Vec<Vec<PlanEntry>> = Vec::new();
    let mut used = 0u64;
    for req in &users {
        let mut entries = Vec::new();
        for &tile in &req.roi {
            let ladder = tiles.get(&tile).ok_or(ModelError::UnknownTile { user: req.user_id, tile })?;
            let cost = slot_cost(ladder.size(1)?, req.link_rate, slot)?;
            used += cost;
            entries.push(PlanEntry {
                tile,
                level: 1,
                link_rate: req.link_rate,
                slot_cost: cost,
                recipient: Some(req.user_id),
            });
        }
        per_user.push(entries);
    }
    if used > budget {
        return Err(BaselineError::Infeasible { required: used, budget });
    }

    for (req, entries) in users.iter().zip(per_user.iter_mut()) {
        if req.requested_level <= 1 {
            continue;
        }
        let upgraded = entries
            .iter()
            .map(|e| slot_cost(tiles[&e.tile].size(req.requested_level)?, req.link_rate, slot))
            .collect::<Result<Vec<_>, _>>()?;
        let delta: u64 = upgraded.iter().sum::<u64>() - entries.iter().map(|e| e.slot_cost).sum::<u64>();
        if used + delta <= budget {
            used += delta;
            for (e, cost) in entries.iter_mut().zip(upgraded) {
                e.level = req.requested_level;
                e.slot_cost = cost;
            }
        }
    }

    let mut plan = TransmissionPlan::default();
    per_user.into_iter().flatten().for_each(|e| plan.push(e));
    plan.normalize();
    Ok(plan)
}

/// One multicast per requested tile at the slowest interested rate.
///
/// Level 1 goes out for every tile first; the remaining slots then upgrade
/// tiles, most popular first, to the highest level any interested user asked
/// for.
pub fn adaptive_multicast(
    ladders: &[TileLadder],
    requests: &[UserRequest],
    budget: u64,
    slot: &SlotBudget,
) -> Result<TransmissionPlan, BaselineError> {
    struct Demand<'a> {
        ladder: &'a TileLadder,
        popularity: usize,
        rate: LinkRate,
        target: usize,
    }
    for req in requests {
        req.validate(ladders)?;
    }
    let mut demands: Vec<Demand> = ladders
        .iter()
        .filter_map(|ladder| {
            let interested: Vec<&UserRequest> = requests.iter().filter(|r| r.is_interested(ladder.id)).collect();
            Some(Demand {
                ladder,
                popularity: interested.len(),
                rate: interested.iter().map(|r| r.link_rate).min()?,
                target: interested.iter().map(|r| r.requested_level).max()?,
            })
        })
        .collect();

    let mut levels = Vec::with_capacity(demands.len());
    let mut costs = Vec::with_capacity(demands.len());
    for d in &demands {
        costs.push(slot_cost(d.ladder.size(1)?, d.rate, slot)?);
        levels.push(1);
    }
    let mut used: u64 = costs.iter().sum();
    if used > budget {
        return Err(BaselineError::Infeasible { required: used, budget });
    }

    let mut order: Vec<usize> = (0..demands.len()).collect();
    order.sort_by_key(|&k| (std::cmp::Reverse(demands[k].popularity), demands[k].ladder.id));
    for k in order {
        let d = &demands[k];
        if d.target <= 1 {
            continue;
        }
        let upgraded = slot_cost(d.ladder.size(d.target)?, d.rate, slot)?;
        if used - costs[k] + upgraded <= budget {
            used = used - costs[k] + upgraded;
            costs[k] = upgraded;
            levels[k] = d.target;
        }
    }

    let mut plan = TransmissionPlan::default();
    for (k, d) in demands.drain(..).enumerate() {
        plan.push(PlanEntry {
            tile: d.ladder.id,
            level: levels[k],
            link_rate: d.rate,
            slot_cost: costs[k],
            recipient: None,
        });
    }
    plan.normalize();
    Ok(plan)
}
