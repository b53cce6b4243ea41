//! One entry point over every allocator, including lower-bound adaptation
//! and evaluation of the resulting plan.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{adaptive_multicast, adaptive_unicast, approximation_allocate, ApproximationConfig, BaselineError};
use crate::feasibility::{adapt_lower_bounds, FeasibilityError, LowerBoundVector};
use crate::model::{
    cluster_users, AllocationResult, ExtendedUtility, ModelError, SlotBudget, TileLadder, TransmissionPlan,
    UserRequest, UtilityPolicy,
};
use crate::scheduler::{multi_tile_naive, multi_tile_optimal, SchedulerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocatorKind {
    Optimal,
    Naive,
    Unicast,
    Multicast,
    Approximation,
}

impl AllocatorKind {
    pub const ALL: [AllocatorKind; 5] = [Self::Optimal, Self::Naive, Self::Unicast, Self::Multicast, Self::Approximation];

    pub fn name(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Naive => "naive",
            Self::Unicast => "unicast",
            Self::Multicast => "multicast",
            Self::Approximation => "approximation",
        }
    }

    /// Allocators that adapt lower bounds and maximize utility exactly or
    /// approximately.
    pub fn is_utility_optimizing(self) -> bool {
        matches!(self, Self::Optimal | Self::Naive | Self::Approximation)
    }
}

impl fmt::Display for AllocatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown allocator `{0}` (expected optimal, naive, unicast, multicast or approximation)")]
pub struct UnknownAllocator(pub String);

impl FromStr for AllocatorKind {
    type Err = UnknownAllocator;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" => Ok(Self::Optimal),
            "naive" => Ok(Self::Naive),
            "unicast" => Ok(Self::Unicast),
            "multicast" => Ok(Self::Multicast),
            "approximation" | "approx" => Ok(Self::Approximation),
            other => Err(UnknownAllocator(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error("{allocator}: planner objective {planned} differs from evaluated objective {evaluated}")]
    Mismatch { allocator: AllocatorKind, planned: ExtendedUtility, evaluated: ExtendedUtility },
}

/// How the epoch's plan relates to the requested lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationStatus {
    Feasible,
    /// Level 1 for everyone does not fit; the plan is best effort without
    /// lower bounds.
    Degraded,
    /// The allocator cannot produce any plan; the plan is empty.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub allocator: AllocatorKind,
    pub status: AllocationStatus,
    /// Bounds the plan was computed and evaluated against.
    pub bounds: LowerBoundVector,
    /// Evaluation against `bounds`. For degraded or infeasible epochs the
    /// objective is the measured utility, which is always finite.
    pub result: AllocationResult,
}

impl Allocation {
    /// Finite part of the objective in fixed-point units.
    pub fn objective_units(&self) -> i64 {
        self.result.objective.units().unwrap_or(0)
    }
}

/// Runs lower-bound adaptation and the chosen allocator for one epoch.
///
/// Utility-optimizing allocators plan against the adapted bounds; the two
/// greedy baselines only ever guarantee level 1 and are evaluated that way.
pub fn allocate(
    kind: AllocatorKind,
    ladders: &[TileLadder],
    requests: &[UserRequest],
    policy: &UtilityPolicy,
    budget: u64,
    slot: &SlotBudget,
    approx: &ApproximationConfig,
) -> Result<Allocation, AllocateError> {
    let participating: Vec<UserRequest> = requests.iter().filter(|r| !r.roi.is_empty()).cloned().collect();
    for r in &participating {
        r.validate(ladders)?;
    }
    let level_one = LowerBoundVector(participating.iter().map(|r| (r.user_id, 1)).collect());

    if !kind.is_utility_optimizing() {
        let reqs = level_one.apply(&participating);
        let outcome = match kind {
            AllocatorKind::Unicast => adaptive_unicast(ladders, &reqs, budget, slot),
            _ => adaptive_multicast(ladders, &reqs, budget, slot),
        };
        return match outcome {
            Ok(plan) => finish(kind, AllocationStatus::Feasible, level_one, plan, None, &reqs, ladders, policy),
            Err(BaselineError::Infeasible { .. }) => {
                finish(kind, AllocationStatus::Infeasible, level_one, TransmissionPlan::default(), None, &reqs, ladders, policy)
            }
            Err(BaselineError::Model(e)) => Err(e.into()),
        };
    }

    let (status, bounds) = match adapt_lower_bounds(ladders, &participating, budget, slot) {
        Ok(bounds) => (AllocationStatus::Feasible, bounds),
        Err(FeasibilityError::InfeasibleAtMinimum { .. }) => (AllocationStatus::Degraded, level_one),
        Err(FeasibilityError::Model(e)) => return Err(e.into()),
    };
    let reqs = bounds.apply(&participating);
    let mut users = cluster_users(&reqs, ladders, policy)?;
    if status == AllocationStatus::Degraded {
        users.iter_mut().for_each(|u| u.relax_lower_bounds());
    }
    let (planned, plan) = match kind {
        AllocatorKind::Optimal => {
            let s = multi_tile_optimal(ladders, &users, budget, slot)?;
            (s.objective, s.plan)
        }
        AllocatorKind::Naive => {
            let s = multi_tile_naive(ladders, &users, budget, slot)?;
            (s.objective, s.plan)
        }
        _ => {
            let s = approximation_allocate(ladders, &users, budget, slot, approx)?;
            (s.objective, s.plan)
        }
    };
    finish(kind, status, bounds, plan, Some(planned), &reqs, ladders, policy)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    kind: AllocatorKind,
    status: AllocationStatus,
    bounds: LowerBoundVector,
    plan: TransmissionPlan,
    planned: Option<ExtendedUtility>,
    reqs: &[UserRequest],
    ladders: &[TileLadder],
    policy: &UtilityPolicy,
) -> Result<Allocation, AllocateError> {
    let mut result = AllocationResult::evaluate(plan, reqs, ladders, policy);
    if status == AllocationStatus::Feasible {
        if let Some(planned) = planned.filter(|p| *p != result.objective) {
            return Err(AllocateError::Mismatch { allocator: kind, planned, evaluated: result.objective });
        }
        if !result.objective.is_finite() {
            return Err(AllocateError::Mismatch {
                allocator: kind,
                planned: planned.unwrap_or(result.objective),
                evaluated: result.objective,
            });
        }
    } else {
        let measured = ExtendedUtility::from_units(result.measured_units());
        if let Some(planned) = planned.filter(|p| *p != measured) {
            return Err(AllocateError::Mismatch { allocator: kind, planned, evaluated: measured });
        }
        result.objective = measured;
    }
    Ok(Allocation { allocator: kind, status, bounds, result })
}
