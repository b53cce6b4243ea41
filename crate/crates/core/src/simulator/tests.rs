use super::*;
use crate::synth::{desk_scenario, grid_scenario, GridScenarioConfig, MEDIUM_RATE_MBPS};

fn units(v: f64) -> i64 {
    (v * UTILITY_SCALE as f64).round() as i64
}

fn grid_config(allocator: AllocatorKind) -> GridScenarioConfig {
    GridScenarioConfig {
        rates_mbps: vec![6.0, 12.0, 24.0, 36.0],
        rois: vec![
            RoiSpec::Rect { x: 0, y: 0, w: 4, h: 3 },
            RoiSpec::Rect { x: 2, y: 1, w: 4, h: 3 },
            RoiSpec::Rect { x: 8, y: 4, w: 4, h: 3 },
            RoiSpec::Rect { x: 9, y: 5, w: 4, h: 3 },
        ],
        requested_level: 5,
        ladder_mbps: MEDIUM_RATE_MBPS.to_vec(),
        duration_s: 6.0,
        loss: 0.0,
        allocator,
        seed: 9,
    }
}

#[test]
fn desk_replay_matches_planner() {
    for kind in AllocatorKind::ALL {
        let mut s = desk_scenario(8);
        s.allocator = kind;
        let reports = run_simulation(&s).unwrap();
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert!(r.matches_plan(), "{kind}");
        if kind != AllocatorKind::Unicast {
            assert_eq!(r.realized_units_total(), units(4.0) * r.gops as i64, "{kind}");
        }
    }
}

#[test]
fn ample_budget_reaches_max_utility() {
    let mut cfg = grid_config(AllocatorKind::Optimal);
    cfg.rates_mbps = vec![54.0; 4];
    let s = grid_scenario(&cfg);
    let max: i64 = s.users.iter().map(|u| u.roi.tiles(s.grid).unwrap().len() as i64 * UTILITY_SCALE).sum();
    for r in run_simulation(&s).unwrap() {
        assert_eq!(r.status, AllocationStatus::Feasible);
        assert_eq!(r.realized_units_total(), max * r.gops as i64);
    }
}

#[test]
fn lossless_runs_match_plan_for_every_allocator() {
    for kind in AllocatorKind::ALL {
        let mut s = grid_scenario(&grid_config(kind));
        // uncapped, so adaptation climbs without ever meeting a loss
        s.users.iter_mut().for_each(|u| u.max_rate = None);
        if kind == AllocatorKind::Naive {
            s.duration_s = 2.0;
        }
        let reports = run_simulation(&s).unwrap();
        for r in &reports {
            assert!(r.matches_plan(), "{kind} epoch {}", r.epoch);
        }
        assert!(reports.windows(2).all(|w| w[0].users[0].rate_index <= w[1].users[0].rate_index));
    }
}

#[test]
fn total_loss_for_one_user_leaves_others_alone() {
    let mut s = desk_scenario(8);
    let clean = run_simulation(&s).unwrap();
    s.users[0].loss_row = Some(vec![1.0, 1.0]);
    let lossy = run_simulation(&s).unwrap();
    assert_eq!(lossy[0].users[0].realized_units, 0);
    assert_eq!(lossy[0].users[1].realized_units, clean[0].users[1].realized_units);
}

#[test]
fn runs_are_deterministic() {
    let mut cfg = grid_config(AllocatorKind::Optimal);
    cfg.loss = 0.05;
    let s = grid_scenario(&cfg);
    assert_eq!(run_simulation(&s).unwrap(), run_simulation(&s).unwrap());
    let other = Scenario { seed: 10, ..s.clone() };
    assert_ne!(run_simulation(&s).unwrap(), run_simulation(&other).unwrap());
}

#[test]
fn slots_are_conserved_per_gop() {
    for kind in [AllocatorKind::Optimal, AllocatorKind::Unicast, AllocatorKind::Multicast, AllocatorKind::Approximation] {
        let s = grid_scenario(&grid_config(kind));
        for r in run_simulation(&s).unwrap() {
            let budget: u64 = r.frame_slots.iter().map(|f| f.budget).sum();
            let used: u64 = r.frame_slots.iter().map(|f| f.used).sum();
            assert_eq!(budget, r.budget * s.gop_length as u64);
            assert_eq!(used, r.slots_used * s.gop_length as u64);
            assert!(r.frame_slots.iter().all(|f| f.used <= f.budget));
            assert!(r.slots_used <= r.budget);
        }
    }
}

#[test]
fn frame_budgets_follow_profile() {
    assert_eq!(largest_remainder(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
    assert_eq!(largest_remainder_exact(7, &[4, 2, 1]), vec![4, 2, 1]);
    assert_eq!(largest_remainder_exact(5, &[1, 1]), vec![3, 2]);
    let parts = largest_remainder(4444 * 10, &default_frame_profile(10));
    assert_eq!(parts.iter().sum::<u64>(), 44_440);
    assert!(parts[0] > parts[3] && parts[3] > parts[1]);
}

#[test]
fn lossless_goodput_counts_decoded_bytes() {
    let s = desk_scenario(8);
    let reports = run_simulation(&s).unwrap();
    let g = goodput(&reports);
    // level 2 is 8 bytes per frame for both users, 50 frames in 2 s
    assert_eq!(g.per_user_bps[&1], 8.0 * 8.0 * 50.0 / 2.0);
    assert_eq!(g.average_bps, 1600.0);
}

#[test]
fn goodput_scales_with_delivery_probability() {
    let mut s = desk_scenario(8);
    s.default_loss = vec![0.2, 0.2];
    let mut total = 0.0;
    for seed in 0..100 {
        s.seed = seed;
        total += goodput(&run_simulation(&s).unwrap()).average_bps;
    }
    let ratio = total / 100.0 / 1600.0;
    assert!((ratio - 0.8).abs() < 0.03, "{ratio}");
}

#[test]
fn zoom_event_changes_request() {
    let mut s = desk_scenario(100);
    s.duration_s = 4.0;
    s.trace.push(TraceEvent { time_s: 2.0, user_id: 1, kind: TraceKind::Zoom(1) });
    s.trace.push(TraceEvent { time_s: 2.0, user_id: 2, kind: TraceKind::Zoom(1) });
    let r = run_simulation(&s).unwrap();
    assert_eq!(r[0].users[0].bitmap[&1], 2);
    assert_eq!(r[1].users[0].bitmap[&1], 1);
    assert_eq!(r[1].planned_objective, ExtendedUtility::from_f64(2.0));
}

#[test]
fn infeasible_budget_is_flagged_not_fatal() {
    let mut s = desk_scenario(2);
    let r = run_simulation(&s).unwrap();
    assert_eq!(r[0].status, AllocationStatus::Degraded);
    assert!(r[0].matches_plan());
    s.allocator = AllocatorKind::Multicast;
    let r = run_simulation(&s).unwrap();
    assert_eq!(r[0].status, AllocationStatus::Infeasible);
    assert_eq!(r[0].realized_units_total(), 0);
}

#[test]
fn rate_adaptation_follows_channel() {
    let mut cfg = grid_config(AllocatorKind::Optimal);
    cfg.duration_s = 20.0;
    let mut s = grid_scenario(&cfg);
    s.users.iter_mut().for_each(|u| u.max_rate = None);
    // user 1 can sustain 12 Mb/s but not 18
    s.users[0].loss_row = Some(vec![0.0, 0.0, 0.0, 0.5, 0.6, 0.7, 0.8, 0.9]);
    let r = run_simulation(&s).unwrap();
    assert_eq!(r[0].users[0].rate_index, 0);
    assert_eq!(r.last().unwrap().users[0].rate_index, 2);
}

#[test]
fn invalid_scenarios_are_rejected() {
    let mut s = desk_scenario(8);
    s.gop_length = 7;
    s.frame_profile = default_frame_profile(7);
    assert!(matches!(run_simulation(&s), Err(SimError::Scenario(_))));

    let mut s = desk_scenario(8);
    s.trace.push(TraceEvent { time_s: 1.0, user_id: 1, kind: TraceKind::Zoom(1) });
    s.trace.push(TraceEvent { time_s: 0.5, user_id: 1, kind: TraceKind::Zoom(1) });
    assert!(matches!(run_simulation(&s), Err(SimError::Trace { .. })));

    let mut s = desk_scenario(8);
    s.users[0].roi = RoiSpec::Rect { x: 0, y: 0, w: 2, h: 1 };
    assert!(matches!(run_simulation(&s), Err(SimError::Scenario(_))));
}

#[test]
fn optimal_is_fairer_than_unicast_under_contention() {
    let (mut opt, mut uni) = (0.0, 0.0);
    for seed in 0..20 {
        let mut cfg = grid_config(AllocatorKind::Optimal);
        cfg.loss = 0.02;
        cfg.seed = seed;
        cfg.duration_s = 2.0;
        let r = run_simulation(&grid_scenario(&cfg)).unwrap();
        opt += fairness(&r[0]);
        cfg.allocator = AllocatorKind::Unicast;
        let r = run_simulation(&grid_scenario(&cfg)).unwrap();
        uni += fairness(&r[0]);
    }
    assert!(opt <= uni, "optimal {opt} unicast {uni}");
}

#[test]
fn solve_uses_time_zero_snapshot() {
    let mut s = desk_scenario(8);
    assert_eq!(solve(&s).unwrap().result.objective, ExtendedUtility::from_f64(4.0));
    s.trace.push(TraceEvent { time_s: 0.0, user_id: 1, kind: TraceKind::Zoom(1) });
    s.trace.push(TraceEvent { time_s: 0.0, user_id: 2, kind: TraceKind::Zoom(1) });
    s.trace.push(TraceEvent { time_s: 1.0, user_id: 2, kind: TraceKind::Zoom(2) });
    assert_eq!(solve(&s).unwrap().result.objective, ExtendedUtility::from_f64(2.0));
}
