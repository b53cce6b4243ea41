use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::{cluster_users, individual_users, AllocationResult, LinkRate};
use crate::synth::{desk_copies, desk_instance, small_instance, Instance};

fn vusers(inst: &Instance) -> Vec<VirtualUser> {
    cluster_users(&inst.requests, &inst.ladders, &inst.policy).unwrap()
}

fn util(v: f64) -> ExtendedUtility {
    ExtendedUtility::from_f64(v)
}

#[test]
fn single_tile_desk_examples() {
    let inst = desk_instance(8);
    let vu = vusers(&inst);
    let s = single_tile_optimal(&inst.ladders[0], &vu, 8, &inst.slot).unwrap();
    assert_eq!(s.objective, util(4.0));
    assert_eq!(s.plan.entries.len(), 1);
    let e = &s.plan.entries[0];
    assert_eq!((e.level, e.link_rate, e.slot_cost), (2, LinkRate::from_mbps(1.0), 8));

    let s7 = single_tile_optimal(&inst.ladders[0], &vu, 7, &inst.slot).unwrap();
    assert_eq!(s7.objective, util(2.0));
    assert_eq!(s7.plan.total_slots, 4);
}

#[test]
fn single_tile_without_interest_is_zero() {
    let mut inst = desk_instance(8);
    for r in &mut inst.requests {
        r.roi.clear();
    }
    let vu = vusers(&inst);
    for t in [0, 3, 20] {
        let s = single_tile_optimal(&inst.ladders[0], &vu, t, &inst.slot).unwrap();
        assert_eq!(s.objective, ExtendedUtility::ZERO);
        assert!(s.plan.is_empty());
    }
}

#[test]
fn naive_matches_single_tile_for_one_tile() {
    let inst = desk_instance(0);
    let vu = vusers(&inst);
    for t in 0..=20 {
        let a = single_tile_optimal(&inst.ladders[0], &vu, t, &inst.slot).unwrap();
        let b = multi_tile_naive(&inst.ladders, &vu, t, &inst.slot).unwrap();
        assert_eq!(a.objective, b.objective, "t = {t}");
    }
}

#[test]
fn two_tile_examples() {
    for (budget, expected) in [(16, 8.0), (12, 6.0)] {
        let inst = desk_copies(2, budget);
        let vu = vusers(&inst);
        let naive = multi_tile_naive(&inst.ladders, &vu, budget, &inst.slot).unwrap();
        let fast = multi_tile_optimal(&inst.ladders, &vu, budget, &inst.slot).unwrap();
        let oracle = brute_force_oracle(&inst.ladders, &vu, budget, &inst.slot).unwrap();
        assert_eq!(naive.objective, util(expected));
        assert_eq!(fast.objective, util(expected));
        assert_eq!(oracle, util(expected));
    }
    let inst = desk_copies(2, 16);
    let fast = multi_tile_optimal(&inst.ladders, &vusers(&inst), 16, &inst.slot).unwrap();
    assert_eq!(fast.plan.entries.len(), 2);
    assert!(fast.plan.entries.iter().all(|e| e.slot_cost == 8));
    let eval = AllocationResult::evaluate(fast.plan, &inst.requests, &inst.ladders, &inst.policy);
    assert_eq!(eval.objective, util(8.0));
}

#[test]
fn zero_budget_with_demand_is_infeasible() {
    let inst = desk_copies(2, 0);
    let s = multi_tile_optimal(&inst.ladders, &vusers(&inst), 0, &inst.slot).unwrap();
    assert_eq!(s.objective, ExtendedUtility::NEG_INF);
    assert!(s.plan.is_empty());
}

#[test]
fn empty_rois_give_zero() {
    let mut inst = desk_copies(3, 10);
    for r in &mut inst.requests {
        r.roi.clear();
    }
    let s = multi_tile_optimal(&inst.ladders, &vusers(&inst), 10, &inst.slot).unwrap();
    assert_eq!(s.objective, ExtendedUtility::ZERO);
    assert!(s.plan.is_empty());
}

#[test]
fn unsorted_users_rejected() {
    let inst = desk_instance(8);
    let mut vu = vusers(&inst);
    vu.reverse();
    assert_eq!(
        multi_tile_optimal(&inst.ladders, &vu, 8, &inst.slot),
        Err(SchedulerError::UnsortedUsers)
    );
}

#[test]
fn oracle_refuses_large_instances() {
    let inst = desk_copies(4, 10);
    assert!(matches!(
        brute_force_oracle(&inst.ladders, &vusers(&inst), 10, &inst.slot),
        Err(SchedulerError::TooLarge(_))
    ));
}

#[test]
fn ample_budget_reaches_max_utility() {
    let inst = desk_copies(3, 64);
    let s = multi_tile_optimal(&inst.ladders, &vusers(&inst), 64, &inst.slot).unwrap();
    // each user gets its requested level on every tile
    assert_eq!(s.objective, util(12.0));
    assert_eq!(brute_force_oracle(&inst.ladders, &vusers(&inst), 64, &inst.slot).unwrap(), util(12.0));
}

#[test]
fn random_instances_agree_and_plans_are_valid() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let inst = small_instance(&mut rng);
        let vu = vusers(&inst);
        let oracle = brute_force_oracle(&inst.ladders, &vu, inst.budget, &inst.slot).unwrap();
        let naive = multi_tile_naive(&inst.ladders, &vu, inst.budget, &inst.slot).unwrap();
        let fast = multi_tile_optimal(&inst.ladders, &vu, inst.budget, &inst.slot).unwrap();
        assert_eq!(oracle, naive.objective, "{inst:?}");
        assert_eq!(oracle, fast.objective, "{inst:?}");
        for plan in [&naive.plan, &fast.plan] {
            assert!(plan.total_slots <= inst.budget);
            assert!(plan.is_rate_monotone(), "{plan:?}");
            let eval = AllocationResult::evaluate(plan.clone(), &inst.requests, &inst.ladders, &inst.policy);
            assert_eq!(eval.objective, oracle);
        }
        // unclustered input yields the same optimum
        let solo = individual_users(&inst.requests, &inst.ladders, &inst.policy).unwrap();
        let unclustered = multi_tile_optimal(&inst.ladders, &solo, inst.budget, &inst.slot).unwrap();
        assert_eq!(unclustered.objective, oracle);
    }
}

#[test]
fn objective_is_monotone_in_budget_and_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let inst = small_instance(&mut rng);
        let vu = vusers(&inst);
        let a = multi_tile_optimal(&inst.ladders, &vu, inst.budget, &inst.slot).unwrap();
        let b = multi_tile_optimal(&inst.ladders, &vu, inst.budget + 5, &inst.slot).unwrap();
        assert!(b.objective >= a.objective);

        let mut faster = inst.clone();
        faster.requests[0].link_rate = LinkRate(faster.requests[0].link_rate.0 + 1_000_000);
        let fv = vusers(&faster);
        let c = multi_tile_optimal(&faster.ladders, &fv, inst.budget, &inst.slot).unwrap();
        assert!(c.objective >= a.objective, "{inst:?}");
    }
}

#[test]
fn relaxed_bounds_agree_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let inst = small_instance(&mut rng);
        let mut vu = vusers(&inst);
        vu.iter_mut().for_each(|u| u.relax_lower_bounds());
        let oracle = brute_force_oracle(&inst.ladders, &vu, inst.budget, &inst.slot).unwrap();
        let fast = multi_tile_optimal(&inst.ladders, &vu, inst.budget, &inst.slot).unwrap();
        let naive = multi_tile_naive(&inst.ladders, &vu, inst.budget, &inst.slot).unwrap();
        assert!(oracle.is_finite());
        assert_eq!(fast.objective, oracle, "{inst:?}");
        assert_eq!(naive.objective, oracle);
    }
}
