//! Adaptive lower-bound assignment.
//!
//! Before optimizing, every user's guaranteed level starts at the requested
//! level and is lowered uniformly until the minimum slot demand of all tiles
//! fits in the frame budget.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{
    slot_cost, sort_by_rate, Level, ModelError, SlotBudget, TileLadder, UserId, UserRequest,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeasibilityError {
    #[error("even with every lower bound at level 1 the demand exceeds {budget} slots")]
    InfeasibleAtMinimum { budget: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Guaranteed level per user.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LowerBoundVector(pub BTreeMap<UserId, Level>);

impl LowerBoundVector {
    pub fn from_requests(requests: &[UserRequest]) -> Self {
        Self(requests.iter().map(|r| (r.user_id, r.guaranteed_level)).collect())
    }

    pub fn at_requested(requests: &[UserRequest]) -> Self {
        Self(requests.iter().map(|r| (r.user_id, r.requested_level)).collect())
    }

    pub fn get(&self, user: UserId) -> Option<Level> {
        self.0.get(&user).copied()
    }

    /// Copies `requests` with their guaranteed levels replaced by these bounds.
    pub fn apply(&self, requests: &[UserRequest]) -> Vec<UserRequest> {
        requests
            .iter()
            .map(|r| UserRequest {
                guaranteed_level: self.get(r.user_id).unwrap_or(r.guaranteed_level),
                ..r.clone()
            })
            .collect()
    }

    fn step_down(&self) -> Self {
        Self(self.0.iter().map(|(u, l)| (*u, l.saturating_sub(1).max(1))).collect())
    }

    fn all_at_minimum(&self) -> bool {
        self.0.values().all(|l| *l <= 1)
    }
}

/// Minimum slots needed to deliver `tile` so that every interested user gets
/// at least its bound, or `None` when that is impossible.
///
/// `users` must be sorted by non-decreasing link rate. The recursion tracks
/// `l`, the highest level still owed to faster users; an interested user
/// either defers the owed level `max(l, L_i)` to slower rates, or has it sent
/// at its own rate.
pub fn min_slots_tile(
    tile: &TileLadder,
    users: &[UserRequest],
    bounds: &LowerBoundVector,
    slot: &SlotBudget,
) -> Result<Option<u64>, ModelError> {
    let levels = tile.levels();
    // prev[l] is the minimum over users 1..i-1 with level l still pending
    let mut prev: Vec<Option<u64>> = vec![None; levels + 1];
    prev[0] = Some(0);
    for user in users {
        if !user.is_interested(tile.id) {
            continue;
        }
        let bound = bounds.get(user.user_id).unwrap_or(user.guaranteed_level);
        if bound == 0 || bound > levels {
            return Err(ModelError::InvalidLevel { level: bound, max: levels });
        }
        let mut next = vec![None; levels + 1];
        for (l, out) in next.iter_mut().enumerate() {
            let h = l.max(bound);
            let send_here = match prev[0] {
                Some(base) => Some(base + slot_cost(tile.size(h)?, user.link_rate, slot)?),
                None => None,
            };
            *out = match (prev[h], send_here) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
        }
        prev = next;
    }
    Ok(prev[0])
}

/// Whether every tile can meet its lower bounds within `budget` slots in total.
pub fn is_feasible(
    tiles: &[TileLadder],
    users: &[UserRequest],
    bounds: &LowerBoundVector,
    budget: u64,
    slot: &SlotBudget,
) -> Result<bool, ModelError> {
    Ok(total_min_slots(tiles, users, bounds, slot)?.is_some_and(|s| s <= budget))
}

/// Sum of per-tile minima, `None` if any tile is infeasible on its own.
pub fn total_min_slots(
    tiles: &[TileLadder],
    users: &[UserRequest],
    bounds: &LowerBoundVector,
    slot: &SlotBudget,
) -> Result<Option<u64>, ModelError> {
    let sorted = sort_by_rate(users);
    let mut total = 0u64;
    for tile in tiles {
        match min_slots_tile(tile, &sorted, bounds, slot)? {
            Some(s) => total += s,
            None => return Ok(None),
        }
    }
    Ok(Some(total))
}

/// Starts from `L_i = R_i` and lowers every bound by one per round until the
/// instance is feasible.
pub fn adapt_lower_bounds(
    tiles: &[TileLadder],
    users: &[UserRequest],
    budget: u64,
    slot: &SlotBudget,
) -> Result<LowerBoundVector, FeasibilityError> {
    let mut bounds = LowerBoundVector::at_requested(users);
    loop {
        if is_feasible(tiles, users, &bounds, budget, slot)? {
            return Ok(bounds);
        }
        if bounds.all_at_minimum() {
            return Err(FeasibilityError::InfeasibleAtMinimum { budget });
        }
        bounds = bounds.step_down();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinkRate;
    use proptest::prelude::*;

    /// 8 us slots, so 1 Mb/s carries exactly one byte per slot.
    fn unit_slot() -> SlotBudget {
        SlotBudget::new(25, 8_000)
    }

    fn two_users(l: [Level; 2]) -> Vec<UserRequest> {
        vec![
            UserRequest::new(1, LinkRate::from_mbps(1.0), [1], 2, l[0]),
            UserRequest::new(2, LinkRate::from_mbps(2.0), [1], 2, l[1]),
        ]
    }

    fn desk_tile() -> TileLadder {
        TileLadder::new(1, vec![4, 8]).unwrap()
    }

    /// Exhaustive minimum over every set of (level, rate) transmissions.
    fn brute_min_slots(tile: &TileLadder, users: &[UserRequest], slot: &SlotBudget) -> Option<u64> {
        let pairs: Vec<(Level, LinkRate)> = (1..=tile.levels())
            .flat_map(|m| users.iter().map(move |u| (m, u.link_rate)))
            .collect();
        let mut best = None;
        for mask in 0u32..(1 << pairs.len()) {
            let chosen: Vec<_> = (0..pairs.len()).filter(|b| mask >> b & 1 == 1).map(|b| pairs[b]).collect();
            let ok = users.iter().filter(|u| u.is_interested(tile.id)).all(|u| {
                chosen.iter().filter(|(_, r)| *r <= u.link_rate).map(|(m, _)| *m).max().unwrap_or(0)
                    >= u.guaranteed_level
            });
            if ok {
                let cost: u64 = chosen
                    .iter()
                    .map(|(m, r)| slot_cost(tile.size(*m).unwrap(), *r, slot).unwrap())
                    .sum();
                best = Some(best.map_or(cost, |b: u64| b.min(cost)));
            }
        }
        best
    }

    #[test]
    fn shared_low_level_costs_one_slow_send() {
        let users = two_users([1, 1]);
        let b = LowerBoundVector::from_requests(&users);
        assert_eq!(min_slots_tile(&desk_tile(), &users, &b, &unit_slot()).unwrap(), Some(4));
        assert_eq!(brute_min_slots(&desk_tile(), &users, &unit_slot()), Some(4));
    }

    #[test]
    fn level_two_at_slow_rate() {
        let users = two_users([2, 2]);
        let b = LowerBoundVector::from_requests(&users);
        assert_eq!(min_slots_tile(&desk_tile(), &users, &b, &unit_slot()).unwrap(), Some(8));
        assert_eq!(brute_min_slots(&desk_tile(), &users, &unit_slot()), Some(8));
    }

    #[test]
    fn uninterested_tile_is_free() {
        let users = vec![UserRequest::new(1, LinkRate::from_mbps(1.0), [2], 2, 2)];
        let b = LowerBoundVector::from_requests(&users);
        assert_eq!(min_slots_tile(&desk_tile(), &users, &b, &unit_slot()).unwrap(), Some(0));
    }

    #[test]
    fn feasibility_examples() {
        let slot = unit_slot();
        let empty = vec![UserRequest::new(1, LinkRate::from_mbps(1.0), [], 2, 2)];
        let b = LowerBoundVector::from_requests(&empty);
        assert!(is_feasible(&[desk_tile()], &empty, &b, 0, &slot).unwrap());

        let users = two_users([1, 1]);
        let b = LowerBoundVector::from_requests(&users);
        assert!(is_feasible(&[desk_tile()], &users, &b, 4, &slot).unwrap());
        assert!(!is_feasible(&[desk_tile()], &users, &b, 3, &slot).unwrap());

        let users = two_users([2, 2]);
        let b = LowerBoundVector::from_requests(&users);
        assert!(is_feasible(&[desk_tile()], &users, &b, 8, &slot).unwrap());
    }

    #[test]
    fn adapt_examples() {
        let slot = unit_slot();
        let users = two_users([2, 2]);
        let at_r = adapt_lower_bounds(&[desk_tile()], &users, 8, &slot).unwrap();
        assert_eq!(at_r, LowerBoundVector::at_requested(&users));
        let lowered = adapt_lower_bounds(&[desk_tile()], &users, 7, &slot).unwrap();
        assert_eq!(lowered.0.values().copied().collect::<Vec<_>>(), vec![1, 1]);
        assert_eq!(
            adapt_lower_bounds(&[desk_tile()], &users, 3, &slot),
            Err(FeasibilityError::InfeasibleAtMinimum { budget: 3 })
        );
    }

    fn instance() -> impl Strategy<Value = (TileLadder, Vec<UserRequest>)> {
        let ladder = (1usize..=3).prop_flat_map(|m| {
            proptest::collection::vec(1u64..12, m).prop_map(|steps| {
                let mut acc = 0;
                steps.into_iter().map(|s| { acc += s; acc }).collect::<Vec<_>>()
            })
        });
        ladder.prop_flat_map(|sizes| {
            let m = sizes.len();
            let user = (1u64..=3, any::<bool>(), 1..=m, 1..=m).prop_map(|(rate, int, a, b)| (rate, int, a.min(b), a.max(b)));
            (Just(sizes), proptest::collection::vec(user, 1..=4))
        })
        .prop_map(|(sizes, us)| {
            let tile = TileLadder::new(1, sizes).unwrap();
            let users = us
                .into_iter()
                .enumerate()
                .map(|(i, (rate, int, l, r))| {
                    let roi: Vec<u32> = if int { vec![1] } else { vec![] };
                    UserRequest::new(i as u32 + 1, LinkRate::from_mbps(rate as f64), roi, r, l)
                })
                .collect();
            (tile, users)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn recursion_matches_enumeration((tile, users) in instance()) {
            let sorted = sort_by_rate(&users);
            let b = LowerBoundVector::from_requests(&sorted);
            let slot = unit_slot();
            prop_assert_eq!(min_slots_tile(&tile, &sorted, &b, &slot).unwrap(), brute_min_slots(&tile, &sorted, &slot));
        }

        #[test]
        fn lowering_a_bound_never_costs_more((tile, users) in instance(), who in 0usize..4) {
            let sorted = sort_by_rate(&users);
            let b = LowerBoundVector::from_requests(&sorted);
            let mut lowered = b.clone();
            if let Some((_, l)) = lowered.0.iter_mut().nth(who % sorted.len()) {
                *l = l.saturating_sub(1).max(1);
            }
            let slot = unit_slot();
            let before = min_slots_tile(&tile, &sorted, &b, &slot).unwrap();
            let after = min_slots_tile(&tile, &sorted, &lowered, &slot).unwrap();
            prop_assert!(after.is_some());
            if let (Some(x), Some(y)) = (before, after) { prop_assert!(y <= x); }
        }
    }
}
