use std::collections::BTreeMap;

use super::{
    ladder_levels, sort_by_rate, ExtendedUtility, Level, LinkRate, ModelError, TileId, TileLadder,
    UserId, UserRequest, UtilityPolicy,
};

/// Aggregated interest of a virtual user in one tile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileInterest {
    /// Highest guaranteed level among the interested members; 0 means no
    /// lower bound is enforced.
    pub guaranteed_level: Level,
    /// Number of interested members.
    pub members: usize,
    /// Summed finite member utilities, `utilities[m - 1]` for level `m`.
    pub utilities: Vec<i64>,
}

/// All users that share one link rate, merged by summing their utilities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualUser {
    pub link_rate: LinkRate,
    pub merged_ids: Vec<UserId>,
    tiles: BTreeMap<TileId, TileInterest>,
}

impl VirtualUser {
    fn empty(link_rate: LinkRate) -> Self {
        Self { link_rate, merged_ids: Vec::new(), tiles: BTreeMap::new() }
    }

    fn absorb(&mut self, req: &UserRequest, ladders: &[TileLadder], policy: &UtilityPolicy) {
        self.merged_ids.push(req.user_id);
        for ladder in ladders.iter().filter(|l| req.is_interested(l.id)) {
            let entry = self.tiles.entry(ladder.id).or_insert_with(|| TileInterest {
                guaranteed_level: 0,
                members: 0,
                utilities: vec![0; ladder.levels()],
            });
            entry.guaranteed_level = entry.guaranteed_level.max(req.guaranteed_level);
            entry.members += 1;
            for (m, slot) in entry.utilities.iter_mut().enumerate() {
                *slot += policy.finite_units(ladder, req.requested_level, m + 1);
            }
        }
    }

    pub fn is_interested(&self, tile: TileId) -> bool {
        self.tiles.contains_key(&tile)
    }

    pub fn interest(&self, tile: TileId) -> Option<&TileInterest> {
        self.tiles.get(&tile)
    }

    pub fn tiles(&self) -> impl Iterator<Item = (TileId, &TileInterest)> {
        self.tiles.iter().map(|(k, v)| (*k, v))
    }

    /// Combined utility of the members when level `m` (0 = nothing) is the
    /// highest level they receive of `tile`.
    pub fn utility(&self, tile: TileId, m: Level) -> ExtendedUtility {
        match self.tiles.get(&tile) {
            None => ExtendedUtility::ZERO,
            Some(t) if m < t.guaranteed_level => ExtendedUtility::NEG_INF,
            Some(_) if m == 0 => ExtendedUtility::ZERO,
            Some(t) => ExtendedUtility::from_units(t.utilities[m - 1]),
        }
    }

    /// Drops every lower bound, so that missing tiles are worth 0 instead of
    /// `NEG_INF`. Used for best-effort allocation when even level 1 for
    /// everyone does not fit.
    pub fn relax_lower_bounds(&mut self) {
        for t in self.tiles.values_mut() {
            t.guaranteed_level = 0;
        }
    }
}

/// Merges users with identical link rates; output is sorted by rate.
pub fn cluster_users(
    requests: &[UserRequest],
    ladders: &[TileLadder],
    policy: &UtilityPolicy,
) -> Result<Vec<VirtualUser>, ModelError> {
    check(requests, ladders, policy)?;
    let mut out: Vec<VirtualUser> = Vec::new();
    for req in sort_by_rate(requests) {
        match out.last_mut() {
            Some(v) if v.link_rate == req.link_rate => v.absorb(&req, ladders, policy),
            _ => {
                let mut v = VirtualUser::empty(req.link_rate);
                v.absorb(&req, ladders, policy);
                out.push(v);
            }
        }
    }
    Ok(out)
}

/// One virtual user per request, without merging; sorted by rate.
pub fn individual_users(
    requests: &[UserRequest],
    ladders: &[TileLadder],
    policy: &UtilityPolicy,
) -> Result<Vec<VirtualUser>, ModelError> {
    check(requests, ladders, policy)?;
    Ok(sort_by_rate(requests)
        .iter()
        .map(|req| {
            let mut v = VirtualUser::empty(req.link_rate);
            v.absorb(req, ladders, policy);
            v
        })
        .collect())
}

fn check(requests: &[UserRequest], ladders: &[TileLadder], policy: &UtilityPolicy) -> Result<(), ModelError> {
    let levels = ladder_levels(ladders)?;
    policy.validate(levels)?;
    requests.iter().try_for_each(|r| r.validate(ladders))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladders() -> Vec<TileLadder> {
        vec![TileLadder::new(1, vec![4, 8]).unwrap(), TileLadder::new(2, vec![5, 9]).unwrap()]
    }

    #[test]
    fn same_rate_merges_additively() {
        let reqs = vec![
            UserRequest::new(1, LinkRate(100), [1], 2, 1),
            UserRequest::new(2, LinkRate(100), [1], 2, 2),
        ];
        let vus = cluster_users(&reqs, &ladders(), &UtilityPolicy::TileSize).unwrap();
        assert_eq!(vus.len(), 1);
        assert_eq!(vus[0].merged_ids, vec![1, 2]);
        assert_eq!(vus[0].utility(1, 2), ExtendedUtility::from_f64(2.0));
        assert_eq!(vus[0].utility(1, 1), ExtendedUtility::NEG_INF);
        assert_eq!(vus[0].interest(1).unwrap().guaranteed_level, 2);
        assert_eq!(vus[0].utility(2, 1), ExtendedUtility::ZERO);
    }

    #[test]
    fn distinct_rates_stay_separate_and_sorted() {
        let reqs = vec![
            UserRequest::new(1, LinkRate(300), [1], 2, 1),
            UserRequest::new(2, LinkRate(100), [2], 2, 1),
            UserRequest::new(3, LinkRate(200), [1, 2], 2, 1),
        ];
        let vus = cluster_users(&reqs, &ladders(), &UtilityPolicy::TileSize).unwrap();
        assert_eq!(vus.len(), 3);
        let rates: Vec<_> = vus.iter().map(|v| v.link_rate.0).collect();
        assert_eq!(rates, vec![100, 200, 300]);
        assert_eq!(individual_users(&reqs, &ladders(), &UtilityPolicy::TileSize).unwrap(), vus);
    }

    #[test]
    fn relaxing_bounds_makes_misses_zero() {
        let reqs = vec![UserRequest::new(1, LinkRate(100), [1], 2, 2)];
        let mut vus = cluster_users(&reqs, &ladders(), &UtilityPolicy::TileSize).unwrap();
        assert_eq!(vus[0].utility(1, 0), ExtendedUtility::NEG_INF);
        vus[0].relax_lower_bounds();
        assert_eq!(vus[0].utility(1, 0), ExtendedUtility::ZERO);
        assert_eq!(vus[0].utility(1, 1), ExtendedUtility::from_f64(0.5));
    }
}
