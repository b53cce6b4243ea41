use serde::{Deserialize, Serialize};

use super::{ExtendedUtility, Level, ModelError, TileLadder, UserRequest, UTILITY_SCALE};

/// How finite utilities are assigned to received levels.
///
/// Whatever the policy, the rules around it are fixed: zero outside the RoI,
/// `NEG_INF` below the guaranteed level, strictly increasing up to the
/// requested level and flat above it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UtilityPolicy {
    /// `s^m / s^R`: the requested level is worth 1, lower levels in
    /// proportion to their byte size.
    #[default]
    TileSize,
    /// Explicit utility per level, `values[m - 1]`.
    LevelTable { values: Vec<f64> },
}

impl UtilityPolicy {
    pub fn validate(&self, levels: Level) -> Result<(), ModelError> {
        match self {
            Self::TileSize => Ok(()),
            Self::LevelTable { values } => {
                let ok = values.len() == levels
                    && values.first().is_some_and(|v| *v > 0.0)
                    && values.windows(2).all(|w| w[0] < w[1]);
                if ok {
                    Ok(())
                } else {
                    Err(ModelError::InvalidUtilityTable)
                }
            }
        }
    }

    /// Finite utility of receiving `level` when `requested` was asked for,
    /// ignoring the guaranteed level. `level` must be in 1..=M.
    pub fn finite_units(&self, ladder: &TileLadder, requested: Level, level: Level) -> i64 {
        let effective = level.min(requested);
        match self {
            Self::TileSize => {
                let num = ladder.sizes()[effective - 1] as i128 * UTILITY_SCALE as i128;
                let den = ladder.sizes()[requested - 1] as i128;
                // round half up
                ((2 * num + den) / (2 * den)) as i64
            }
            Self::LevelTable { values } => {
                (values[effective - 1] * UTILITY_SCALE as f64).round() as i64
            }
        }
    }
}

/// Utility of user `req` receiving `ladder` at level `m` (1..=M).
pub fn utility(
    policy: &UtilityPolicy,
    ladder: &TileLadder,
    req: &UserRequest,
    m: Level,
) -> Result<ExtendedUtility, ModelError> {
    if m == 0 || m > ladder.levels() {
        return Err(ModelError::InvalidLevel { level: m, max: ladder.levels() });
    }
    if !req.is_interested(ladder.id) {
        return Ok(ExtendedUtility::ZERO);
    }
    if m < req.guaranteed_level {
        return Ok(ExtendedUtility::NEG_INF);
    }
    Ok(ExtendedUtility::from_units(policy.finite_units(ladder, req.requested_level, m)))
}

/// Utility of the highest received level, `None` meaning nothing arrived.
///
/// With `enforce_bound` false the guaranteed level is treated as 1 and a
/// missing tile is worth 0; this is the measurement view used for realized
/// utility, where `NEG_INF` has no physical meaning.
pub fn received_utility(
    policy: &UtilityPolicy,
    ladder: &TileLadder,
    req: &UserRequest,
    received: Option<Level>,
    enforce_bound: bool,
) -> ExtendedUtility {
    if !req.is_interested(ladder.id) {
        return ExtendedUtility::ZERO;
    }
    match received {
        Some(m) if !enforce_bound || m >= req.guaranteed_level => {
            ExtendedUtility::from_units(policy.finite_units(ladder, req.requested_level, m))
        }
        Some(_) => ExtendedUtility::NEG_INF,
        None if enforce_bound => ExtendedUtility::NEG_INF,
        None => ExtendedUtility::ZERO,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinkRate;

    fn ladder() -> TileLadder {
        TileLadder::new(3, vec![10, 20, 40, 80, 160]).unwrap()
    }

    #[test]
    fn outside_roi_is_zero() {
        let req = UserRequest::new(1, LinkRate(1), [1, 2], 3, 2);
        for m in 1..=5 {
            assert_eq!(utility(&UtilityPolicy::TileSize, &ladder(), &req, m).unwrap(), ExtendedUtility::ZERO);
        }
    }

    #[test]
    fn below_guaranteed_is_neg_inf() {
        let req = UserRequest::new(1, LinkRate(1), [3], 3, 2);
        assert_eq!(utility(&UtilityPolicy::TileSize, &ladder(), &req, 1).unwrap(), ExtendedUtility::NEG_INF);
        assert!(utility(&UtilityPolicy::TileSize, &ladder(), &req, 2).unwrap().is_finite());
    }

    #[test]
    fn above_requested_is_flat() {
        let req = UserRequest::new(1, LinkRate(1), [3], 3, 1);
        let at_r = utility(&UtilityPolicy::TileSize, &ladder(), &req, 3).unwrap();
        assert_eq!(at_r, ExtendedUtility::from_f64(1.0));
        assert_eq!(utility(&UtilityPolicy::TileSize, &ladder(), &req, 5).unwrap(), at_r);
        assert_eq!(utility(&UtilityPolicy::TileSize, &ladder(), &req, 2).unwrap(), ExtendedUtility::from_f64(0.5));
    }

    #[test]
    fn invalid_level_rejected() {
        let req = UserRequest::new(1, LinkRate(1), [3], 3, 1);
        assert!(utility(&UtilityPolicy::TileSize, &ladder(), &req, 0).is_err());
        assert!(utility(&UtilityPolicy::TileSize, &ladder(), &req, 6).is_err());
    }

    #[test]
    fn level_table_policy() {
        let policy = UtilityPolicy::LevelTable { values: vec![1.0, 2.0] };
        let l = TileLadder::new(1, vec![4, 8]).unwrap();
        policy.validate(2).unwrap();
        assert!(UtilityPolicy::LevelTable { values: vec![2.0, 1.0] }.validate(2).is_err());
        let req = UserRequest::new(1, LinkRate(1), [1], 2, 1);
        assert_eq!(utility(&policy, &l, &req, 2).unwrap(), ExtendedUtility::from_f64(2.0));
    }

    #[test]
    fn measurement_view_never_neg_inf() {
        let req = UserRequest::new(1, LinkRate(1), [3], 3, 3);
        let p = UtilityPolicy::TileSize;
        assert_eq!(received_utility(&p, &ladder(), &req, None, false), ExtendedUtility::ZERO);
        assert_eq!(received_utility(&p, &ladder(), &req, Some(1), false), ExtendedUtility::from_f64(0.25));
        assert_eq!(received_utility(&p, &ladder(), &req, Some(1), true), ExtendedUtility::NEG_INF);
    }

    proptest::proptest! {
        #[test]
        fn monotone_in_level(r in 1usize..=5, l_off in 0usize..5) {
            let l = r.saturating_sub(l_off).max(1);
            let req = UserRequest::new(1, LinkRate(1), [3], r, l);
            let mut prev = ExtendedUtility::NEG_INF;
            for m in 1..=5 {
                let u = utility(&UtilityPolicy::TileSize, &ladder(), &req, m).unwrap();
                proptest::prop_assert!(u >= prev);
                proptest::prop_assert_eq!(u.is_finite(), m >= l);
                if m <= r && m > l { proptest::prop_assert!(u > prev); }
                prev = u;
            }
        }
    }
}
