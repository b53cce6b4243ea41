//! Synthetic RoI traces with a controlled amount of overlap.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{LinkRate, TileId, UserRequest};
use crate::simulator::{similarity, RoiSpec, TraceEvent, TraceKind};
use crate::synth::rect_tiles;

use super::IoError;

pub const SIMILARITY_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceGenConfig {
    pub grid: (u32, u32),
    pub users: u32,
    pub roi_w: u32,
    pub roi_h: u32,
    pub similarity_target: f64,
    pub duration_s: f64,
    /// When set, every RoI is shifted by a common random step at each
    /// multiple of this interval. A common shift keeps the overlap intact.
    pub interval_s: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTrace {
    pub events: Vec<TraceEvent>,
    /// RoI of users `1..=n` at time 0.
    pub rois: Vec<RoiSpec>,
    pub similarity: f64,
}

type Pos = (u32, u32);

struct Layout<'a> {
    cfg: &'a TraceGenConfig,
}

impl Layout<'_> {
    fn similarity(&self, pos: &[Pos]) -> f64 {
        let cols = self.cfg.grid.0;
        let requests: Vec<UserRequest> = pos
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| UserRequest {
                user_id: i as u32 + 1,
                link_rate: LinkRate(1),
                roi: rect_tiles(cols, x, y, self.cfg.roi_w, self.cfg.roi_h).into_iter().collect::<BTreeSet<TileId>>(),
                requested_level: 1,
                guaranteed_level: 1,
            })
            .collect();
        similarity(&requests)
    }

    fn span(&self) -> Pos {
        (self.cfg.grid.0 - self.cfg.roi_w, self.cfg.grid.1 - self.cfg.roi_h)
    }

    fn random(&self, rng: &mut ChaCha8Rng) -> Pos {
        let (sx, sy) = self.span();
        (rng.gen_range(0..=sx), rng.gen_range(0..=sy))
    }

    /// Pairwise disjoint placement, row-major, if the grid has room.
    fn disjoint(&self) -> Option<Vec<Pos>> {
        let c = self.cfg;
        let per_row = c.grid.0 / c.roi_w;
        let fit = per_row * (c.grid.1 / c.roi_h);
        (fit >= c.users).then(|| (0..c.users).map(|k| ((k % per_row) * c.roi_w, (k / per_row) * c.roi_h)).collect())
    }
}

/// Emits `users` equal-sized rectangular RoIs whose measured similarity is
/// within [`SIMILARITY_TOLERANCE`] of the target. Deterministic per seed.
pub fn generate_trace(cfg: &TraceGenConfig) -> Result<GeneratedTrace, IoError> {
    validate(cfg)?;
    let layout = Layout { cfg };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let target = cfg.similarity_target;
    let n = cfg.users as usize;

    let pos = if target == 1.0 || n == 1 {
        if n == 1 && target != 0.0 && target != 1.0 {
            return Err(IoError::Unreachable { target, low: 0.0, high: 0.0 });
        }
        vec![layout.random(&mut rng); n]
    } else if target == 0.0 {
        layout.disjoint().ok_or_else(|| {
            // the closest anyone can get is the best local search result
            let (best, _) = search(&layout, &mut rng, 0.0);
            IoError::Unreachable { target, low: best, high: 1.0 }
        })?
    } else {
        let mut found = None;
        let (mut below, mut above) = (f64::NEG_INFINITY, f64::INFINITY);
        for _ in 0..8 {
            let (s, p) = search(&layout, &mut rng, target);
            if (s - target).abs() <= SIMILARITY_TOLERANCE {
                found = Some(p);
                break;
            }
            if s < target {
                below = below.max(s);
            } else {
                above = above.min(s);
            }
        }
        match found {
            Some(p) => p,
            None => {
                let low = if below.is_finite() { below } else if layout.disjoint().is_some() { 0.0 } else { target };
                let high = if above.is_finite() { above } else { 1.0 };
                return Err(IoError::Unreachable { target, low, high });
            }
        }
    };

    let measured = layout.similarity(&pos);
    let rect = |&(x, y): &Pos| RoiSpec::Rect { x, y, w: cfg.roi_w, h: cfg.roi_h };
    let rois: Vec<RoiSpec> = pos.iter().map(rect).collect();
    let mut events: Vec<TraceEvent> = rois
        .iter()
        .enumerate()
        .map(|(i, r)| TraceEvent { time_s: 0.0, user_id: i as u32 + 1, kind: TraceKind::Roi(r.clone()) })
        .collect();

    if let Some(interval) = cfg.interval_s {
        let mut cur = pos;
        let (sx, sy) = layout.span();
        let mut k = 1u32;
        while f64::from(k) * interval < cfg.duration_s {
            let dx = rng.gen_range(-1i64..=1);
            let dy = rng.gen_range(-1i64..=1);
            let ok = cur.iter().all(|&(x, y)| {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                (0..=sx as i64).contains(&nx) && (0..=sy as i64).contains(&ny)
            });
            if ok && (dx, dy) != (0, 0) {
                cur = cur.iter().map(|&(x, y)| ((x as i64 + dx) as u32, (y as i64 + dy) as u32)).collect();
                let t = f64::from(k) * interval;
                events.extend(cur.iter().enumerate().map(|(i, p)| TraceEvent {
                    time_s: t,
                    user_id: i as u32 + 1,
                    kind: TraceKind::Roi(rect(p)),
                }));
            }
            k += 1;
        }
    }
    Ok(GeneratedTrace { events, rois, similarity: measured })
}

fn validate(cfg: &TraceGenConfig) -> Result<(), IoError> {
    let bad = |field: &str, message: String| Err(IoError::Invalid { field: field.into(), message });
    if !(0.0..=1.0).contains(&cfg.similarity_target) {
        return bad("similarity", format!("{} is outside [0, 1]", cfg.similarity_target));
    }
    if cfg.users == 0 {
        return bad("users", "need at least one user".into());
    }
    if cfg.roi_w == 0 || cfg.roi_h == 0 || cfg.roi_w > cfg.grid.0 || cfg.roi_h > cfg.grid.1 {
        return bad("roi", format!("{}x{} does not fit a {}x{} grid", cfg.roi_w, cfg.roi_h, cfg.grid.0, cfg.grid.1));
    }
    if !(cfg.duration_s >= 0.0) || cfg.interval_s.is_some_and(|i| !(i > 0.0)) {
        return bad("duration", "durations must be non-negative and intervals positive".into());
    }
    Ok(())
}

/// Hill climbing on |similarity - target| with occasional random jumps.
/// Returns the best similarity found and its layout.
fn search(layout: &Layout, rng: &mut ChaCha8Rng, target: f64) -> (f64, Vec<Pos>) {
    let n = layout.cfg.users as usize;
    let (sx, sy) = layout.span();
    let mut pos: Vec<Pos> = (0..n).map(|_| layout.random(rng)).collect();
    let mut sim = layout.similarity(&pos);
    let mut best = (sim, pos.clone());
    for _ in 0..4000 {
        if (best.0 - target).abs() <= SIMILARITY_TOLERANCE / 2.0 {
            break;
        }
        let i = rng.gen_range(0..n);
        let old = pos[i];
        pos[i] = if rng.gen_bool(0.3) {
            layout.random(rng)
        } else {
            let (x, y) = old;
            let nx = (x as i64 + rng.gen_range(-1..=1)).clamp(0, sx as i64) as u32;
            let ny = (y as i64 + rng.gen_range(-1..=1)).clamp(0, sy as i64) as u32;
            (nx, ny)
        };
        let next = layout.similarity(&pos);
        if (next - target).abs() <= (sim - target).abs() || rng.gen_bool(0.02) {
            sim = next;
            if (sim - target).abs() < (best.0 - target).abs() {
                best = (sim, pos.clone());
            }
        } else {
            pos[i] = old;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(users: u32, w: u32, h: u32, target: f64) -> TraceGenConfig {
        TraceGenConfig {
            grid: (16, 9),
            users,
            roi_w: w,
            roi_h: h,
            similarity_target: target,
            duration_s: 10.0,
            interval_s: None,
            seed: 3,
        }
    }

    fn measured(t: &GeneratedTrace, grid: (u32, u32)) -> f64 {
        let requests: Vec<UserRequest> = t
            .rois
            .iter()
            .enumerate()
            .map(|(i, r)| UserRequest {
                user_id: i as u32 + 1,
                link_rate: LinkRate(1),
                roi: r.tiles(grid).unwrap(),
                requested_level: 1,
                guaranteed_level: 1,
            })
            .collect();
        similarity(&requests)
    }

    #[test]
    fn full_similarity_gives_identical_rois() {
        let t = generate_trace(&cfg(8, 4, 3, 1.0)).unwrap();
        assert!(t.rois.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(measured(&t, (16, 9)), 1.0);
    }

    #[test]
    fn zero_similarity_gives_disjoint_rois() {
        let t = generate_trace(&cfg(8, 4, 3, 0.0)).unwrap();
        let sets: Vec<_> = t.rois.iter().map(|r| r.tiles((16, 9)).unwrap()).collect();
        for a in 0..sets.len() {
            for b in a + 1..sets.len() {
                assert!(sets[a].is_disjoint(&sets[b]));
            }
        }
        assert!(matches!(generate_trace(&cfg(13, 4, 3, 0.0)), Err(IoError::Unreachable { .. })));
    }

    #[test]
    fn two_users_two_tiles_half_overlap() {
        let t = generate_trace(&cfg(2, 2, 1, 0.5)).unwrap();
        assert!((measured(&t, (16, 9)) - 0.5).abs() <= 0.05);
        assert_eq!(t.similarity, measured(&t, (16, 9)));
    }

    #[test]
    fn sweep_hits_every_target() {
        for target in [0.25, 0.5, 0.75] {
            let t = generate_trace(&cfg(8, 4, 3, target)).unwrap();
            assert!((measured(&t, (16, 9)) - target).abs() <= 0.05, "{target}: {}", t.similarity);
        }
    }

    #[test]
    fn unreachable_target_reports_neighbours() {
        // two users with single-tile RoIs overlap fully or not at all
        match generate_trace(&cfg(2, 1, 1, 0.5)) {
            Err(IoError::Unreachable { low, high, .. }) => assert_eq!((low, high), (0.0, 1.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_and_moving() {
        let mut c = cfg(4, 4, 3, 0.5);
        c.interval_s = Some(2.0);
        let a = generate_trace(&c).unwrap();
        assert_eq!(a, generate_trace(&c).unwrap());
        assert!(a.events.len() > 4);
        assert!(a.events.windows(2).all(|w| w[0].time_s <= w[1].time_s));
    }
}
