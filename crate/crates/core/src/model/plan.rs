use std::collections::BTreeMap;

use super::{
    received_utility, ExtendedUtility, Level, LinkRate, TileId, TileLadder, UserId, UserRequest,
    UtilityPolicy, UTILITY_SCALE,
};

/// One scheduled transmission of a tile at a level and link rate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanEntry {
    pub tile: TileId,
    pub level: Level,
    pub link_rate: LinkRate,
    pub slot_cost: u64,
    /// `Some(user)` for a unicast transmission addressed to one user.
    pub recipient: Option<UserId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransmissionPlan {
    pub entries: Vec<PlanEntry>,
    pub total_slots: u64,
}

impl TransmissionPlan {
    pub fn push(&mut self, entry: PlanEntry) {
        self.total_slots += entry.slot_cost;
        self.entries.push(entry);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorts entries by (tile, level, rate) and recomputes the slot total.
    pub fn normalize(&mut self) {
        self.entries.sort_by_key(|e| (e.tile, e.level, e.link_rate, e.recipient));
        self.total_slots = self.entries.iter().map(|e| e.slot_cost).sum();
    }

    /// Whether `req` is addressed by, and able to decode, `entry`.
    pub fn reaches(entry: &PlanEntry, req: &UserRequest) -> bool {
        entry.link_rate <= req.link_rate && entry.recipient.is_none_or(|r| r == req.user_id)
    }

    /// Highest level of `tile` that `req` receives, i.e. the maximum level
    /// over entries sent at a rate no higher than the user's own.
    pub fn received_level(&self, tile: TileId, req: &UserRequest) -> Option<Level> {
        self.entries
            .iter()
            .filter(|e| e.tile == tile && Self::reaches(e, req))
            .map(|e| e.level)
            .max()
    }

    /// Checks that, per tile, multicast levels strictly increase with rate.
    pub fn is_rate_monotone(&self) -> bool {
        let mut by_tile: BTreeMap<TileId, Vec<(LinkRate, Level)>> = BTreeMap::new();
        for e in self.entries.iter().filter(|e| e.recipient.is_none()) {
            by_tile.entry(e.tile).or_default().push((e.link_rate, e.level));
        }
        by_tile.values_mut().all(|v| {
            v.sort();
            v.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1)
        })
    }
}

/// A plan together with its evaluation against the original requests.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    /// Sum of utilities at each user's highest received level, with lower
    /// bounds enforced.
    pub objective: ExtendedUtility,
    pub plan: TransmissionPlan,
    /// Per-user utility in fixed-point units, lower bounds treated as 1.
    pub per_user_units: BTreeMap<UserId, i64>,
    /// Highest received level per (tile, user), for tiles that arrive at all.
    pub per_tile_levels: BTreeMap<(TileId, UserId), Level>,
}

impl AllocationResult {
    pub fn evaluate(
        plan: TransmissionPlan,
        requests: &[UserRequest],
        ladders: &[TileLadder],
        policy: &UtilityPolicy,
    ) -> Self {
        let mut objective = ExtendedUtility::ZERO;
        let mut per_user_units = BTreeMap::new();
        let mut per_tile_levels = BTreeMap::new();
        for req in requests {
            let mut user_units = 0;
            for ladder in ladders {
                let level = plan.received_level(ladder.id, req);
                if let Some(m) = level {
                    per_tile_levels.insert((ladder.id, req.user_id), m);
                }
                objective = objective + received_utility(policy, ladder, req, level, true);
                user_units += received_utility(policy, ladder, req, level, false)
                    .units()
                    .expect("measurement view is finite");
            }
            per_user_units.insert(req.user_id, user_units);
        }
        Self { objective, plan, per_user_units, per_tile_levels }
    }

    pub fn per_user_utility(&self) -> BTreeMap<UserId, f64> {
        self.per_user_units
            .iter()
            .map(|(u, units)| (*u, *units as f64 / UTILITY_SCALE as f64))
            .collect()
    }

    /// Total measured utility (bounds treated as 1) in fixed-point units.
    pub fn measured_units(&self) -> i64 {
        self.per_user_units.values().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(tile: TileId, level: Level, rate: u64) -> PlanEntry {
        PlanEntry { tile, level, link_rate: LinkRate(rate), slot_cost: 1, recipient: None }
    }

    #[test]
    fn received_level_respects_rate() {
        let mut plan = TransmissionPlan::default();
        plan.push(entry(1, 1, 100));
        plan.push(entry(1, 2, 200));
        let slow = UserRequest::new(1, LinkRate(100), [1], 2, 1);
        let fast = UserRequest::new(2, LinkRate(250), [1], 2, 1);
        assert_eq!(plan.received_level(1, &slow), Some(1));
        assert_eq!(plan.received_level(1, &fast), Some(2));
        assert_eq!(plan.received_level(2, &fast), None);
        assert!(plan.is_rate_monotone());
        assert_eq!(plan.total_slots, 2);
    }

    #[test]
    fn unicast_reaches_only_recipient() {
        let mut plan = TransmissionPlan::default();
        plan.push(PlanEntry { recipient: Some(2), ..entry(1, 2, 100) });
        let a = UserRequest::new(1, LinkRate(300), [1], 2, 1);
        let b = UserRequest::new(2, LinkRate(100), [1], 2, 1);
        assert_eq!(plan.received_level(1, &a), None);
        assert_eq!(plan.received_level(1, &b), Some(2));
    }

    #[test]
    fn non_monotone_plan_detected() {
        let mut plan = TransmissionPlan::default();
        plan.push(entry(1, 2, 100));
        plan.push(entry(1, 1, 200));
        assert!(!plan.is_rate_monotone());
    }

    #[test]
    fn evaluation_enforces_bounds_only_in_objective() {
        let ladders = vec![TileLadder::new(1, vec![4, 8]).unwrap()];
        let reqs = vec![UserRequest::new(1, LinkRate(100), [1], 2, 2)];
        let mut plan = TransmissionPlan::default();
        plan.push(entry(1, 1, 100));
        let r = AllocationResult::evaluate(plan, &reqs, &ladders, &UtilityPolicy::TileSize);
        assert_eq!(r.objective, ExtendedUtility::NEG_INF);
        assert_eq!(r.per_user_units[&1], UTILITY_SCALE / 2);
    }
}
