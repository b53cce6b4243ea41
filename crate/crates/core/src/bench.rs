//! Wall-time sweep of the chained and the naive multi-tile DP over the
//! slot budget.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::cluster_users;
use crate::scheduler::{multi_tile_naive, multi_tile_optimal, SchedulerError};
use crate::synth::paper_scale_instance;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub budgets: Vec<u64>,
    pub repetitions: usize,
    pub seed: u64,
    pub naive: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { budgets: vec![500, 1000, 2000, 4000], repetitions: 3, seed: 1, naive: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPoint {
    pub budget: u64,
    /// Median over the repetitions.
    pub optimal_ms: f64,
    pub naive_ms: Option<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub points: Vec<BenchPoint>,
}

impl BenchReport {
    /// R² of a least-squares line through (T, chained DP time).
    pub fn optimal_linear_r2(&self) -> f64 {
        let xs: Vec<f64> = self.points.iter().map(|p| p.budget as f64).collect();
        let ys: Vec<f64> = self.points.iter().map(|p| p.optimal_ms).collect();
        linear_r2(&xs, &ys)
    }

    /// Naive time at budget `hi` over naive time at budget `lo`.
    pub fn naive_ratio(&self, lo: u64, hi: u64) -> Option<f64> {
        let at = |t| self.points.iter().find(|p| p.budget == t).and_then(|p| p.naive_ms);
        Some(at(hi)? / at(lo)?)
    }
}

/// Times both DPs on one fixed benchmark instance (N_g = 144, M = 5, eight
/// rates) and checks that they agree on every objective.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, SchedulerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let inst = paper_scale_instance(&mut rng, 0);
    let users = cluster_users(&inst.requests, &inst.ladders, &inst.policy)?;
    let reps = cfg.repetitions.max(1);
    let mut points = Vec::with_capacity(cfg.budgets.len());
    for &t in &cfg.budgets {
        let mut objective = None;
        let mut times = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            let s = multi_tile_optimal(&inst.ladders, &users, t, &inst.slot)?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
            objective = Some(s.objective);
        }
        let optimal_ms = median(&mut times);
        let objective = objective.expect("at least one repetition");
        let naive_ms = if cfg.naive {
            let mut times = Vec::with_capacity(reps);
            for _ in 0..reps {
                let start = Instant::now();
                let s = multi_tile_naive(&inst.ladders, &users, t, &inst.slot)?;
                times.push(start.elapsed().as_secs_f64() * 1e3);
                if s.objective != objective {
                    return Err(SchedulerError::Inconsistent(format!(
                        "naive objective {} differs from {} at T = {t}",
                        s.objective.to_f64(),
                        objective.to_f64()
                    )));
                }
            }
            Some(median(&mut times))
        } else {
            None
        };
        points.push(BenchPoint { budget: t, optimal_ms, naive_ms, objective: objective.to_f64() });
    }
    Ok(BenchReport { points })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Coefficient of determination of the least-squares line; 1 when `ys` is
/// constant and fit exactly.
pub fn linear_r2(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    let slope = sxy / sxx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    1.0 - sse / syy
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r2_of_exact_and_curved_data() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((linear_r2(&xs, &[3.0, 5.0, 7.0, 9.0]) - 1.0).abs() < 1e-12);
        let r2 = linear_r2(&xs, &[1.0, 4.0, 9.0, 16.0]);
        assert!(r2 < 1.0 && r2 > 0.9);
        assert!(linear_r2(&xs, &[1.0, -1.0, 1.0, -1.0]) < 0.3);
    }

    #[test]
    fn median_handles_both_parities() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn small_sweep_agrees() {
        let r = run_bench(&BenchConfig { budgets: vec![50, 100], repetitions: 1, seed: 2, naive: true }).unwrap();
        assert_eq!(r.points.len(), 2);
        assert!(r.points.iter().all(|p| p.naive_ms.is_some()));
        assert!(r.naive_ratio(50, 100).is_some());
    }
}
