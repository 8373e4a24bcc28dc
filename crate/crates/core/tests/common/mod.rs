//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sensorplace::fitness::FitnessWeights;
use sensorplace::grid::{Cell, CellTag, OcclusionMask, Scenario, SensorSpec};
use sensorplace::visibility::Gene;

/// Parameter interval `[enter, exit]` over which the segment between two
/// cell centers touches the closed square of `cell`, if it does.
fn touch_interval(from: Cell, to: Cell, cell: Cell) -> Option<(f64, f64)> {
    // doubled coordinates: centers are odd, cell edges even
    let p0 = [2.0 * from.x as f64 + 1.0, 2.0 * from.y as f64 + 1.0];
    let p1 = [2.0 * to.x as f64 + 1.0, 2.0 * to.y as f64 + 1.0];
    let lo = [2.0 * cell.x as f64, 2.0 * cell.y as f64];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for k in 0..2 {
        let d = p1[k] - p0[k];
        let (a, b) = (lo[k], lo[k] + 2.0);
        if d == 0.0 {
            if p0[k] < a || p0[k] > b {
                return None;
            }
        } else {
            let (mut ta, mut tb) = ((a - p0[k]) / d, (b - p0[k]) / d);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

/// Cells touched by the segment, ordered by where the segment enters them.
/// Cells entered at the same point (a pass through a grid vertex) come in
/// the order: the two side cells, x-side first, then the cell continuing
/// the segment.
pub fn touched_cells(from: Cell, to: Cell, w: usize, h: usize) -> Vec<Cell> {
    let (xa, xb) = (from.x.min(to.x), from.x.max(to.x));
    let (ya, yb) = (from.y.min(to.y), from.y.max(to.y));
    let mut cells = Vec::new();
    for y in ya..=yb.min(h - 1) {
        for x in xa..=xb.min(w - 1) {
            let c = Cell::new(x, y);
            if let Some((t0, t1)) = touch_interval(from, to, c) {
                let x_progress = (x as i64 - from.x as i64).abs();
                cells.push((t0, t1, -x_progress, c));
            }
        }
    }
    cells.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    cells.into_iter().map(|(_, _, _, c)| c).collect()
}

/// Line of sight: no obstacle strictly between the endpoints, and every run
/// of semi-transparent cells crossed completely has a clear first cell.
pub fn oracle_los(s: &Scenario, mask: &OcclusionMask, from: Cell, to: Cell) -> bool {
    let semi = |c: &Cell| s.opacity().get(c).is_some_and(|&v| v > 0.0);
    let inner: Vec<Cell> = touched_cells(from, to, s.width(), s.height())
        .into_iter()
        .filter(|&c| c != from && c != to)
        .collect();
    if inner.iter().any(|&c| s.tag(c) == CellTag::Obstacle) {
        return false;
    }
    let mut i = 0;
    while i < inner.len() {
        if !semi(&inner[i]) {
            i += 1;
            continue;
        }
        let entry = inner[i];
        let mut j = i;
        while j < inner.len() && semi(&inner[j]) {
            j += 1;
        }
        let reaches_target = j == inner.len() && semi(&to);
        if !reaches_target && mask.opaque_now.contains(&entry) {
            return false;
        }
        i = j;
    }
    true
}

pub fn oracle_covers(g: &Gene, cell: Cell, s: &Scenario, mask: &OcclusionMask) -> bool {
    let pos = g.cell();
    if pos == cell {
        return false;
    }
    let l = s.grid_len();
    let spec = s.sensor_spec();
    let dx = (cell.x as f64 - pos.x as f64) * l;
    let dy = (cell.y as f64 - pos.y as f64) * l;
    if dx * dx + dy * dy > spec.range_m * spec.range_m + 1e-9 {
        return false;
    }
    let half = spec.fov_deg.to_radians() / 2.0;
    if half < std::f64::consts::PI {
        let (ux, uy) = (g.phi.cos(), g.phi.sin());
        let dot = dx * ux + dy * uy;
        let cross = ux * dy - uy * dx;
        if cross.abs().atan2(dot) > half + 1e-9 {
            return false;
        }
    }
    oracle_los(s, mask, pos, cell)
}

pub fn oracle_counts(genes: &[Gene], s: &Scenario, mask: &OcclusionMask) -> Vec<u32> {
    s.street_cells()
        .iter()
        .map(|&c| genes.iter().filter(|g| oracle_covers(g, c, s, mask)).count() as u32)
        .collect()
}

/// `f = alpha N1 + beta Nprio - gamma Nsens + delta sum_{n>=2} N(n)/(n-1)`,
/// averaged over the masks.
pub fn oracle_fitness(genes: &[Gene], s: &Scenario, w: &FitnessWeights, masks: &[OcclusionMask]) -> f64 {
    let mut total = 0.0;
    for m in masks {
        let counts = oracle_counts(genes, s, m);
        let n_at_least = |n: u32| counts.iter().filter(|&&k| k >= n).count() as f64;
        let n_prio = s
            .street_cells()
            .iter()
            .zip(&counts)
            .filter(|(c, &k)| s.is_priority(**c) && k >= 2)
            .count() as f64;
        let max = counts.iter().copied().max().unwrap_or(0);
        let mut overlap = 0.0;
        for n in 2..=max {
            overlap += n_at_least(n) / (n - 1) as f64;
        }
        total += w.alpha * n_at_least(1) + w.beta * n_prio - w.gamma * genes.len() as f64 + w.delta * overlap;
    }
    total / masks.len() as f64
}

/// A random scenario: street band(s), free cells, obstacles, priority and
/// semi-transparent street cells, guaranteed to have street and free cells.
pub fn random_scenario(seed: u64, w: usize, h: usize, with_opacity: bool) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tags = vec![CellTag::Free; w * h];
    for t in tags.iter_mut() {
        let u: f64 = rng.random();
        *t = if u < 0.45 {
            CellTag::Street
        } else if u < 0.6 {
            CellTag::Obstacle
        } else if u < 0.65 {
            CellTag::Blocked
        } else {
            CellTag::Free
        };
    }
    tags[0] = CellTag::Free;
    tags[w * h - 1] = CellTag::Street;
    let mut priority = BTreeSet::new();
    let mut opacity = BTreeMap::new();
    for (i, t) in tags.iter().enumerate() {
        if *t != CellTag::Street {
            continue;
        }
        let c = Cell::new(i % w, i / w);
        if rng.random_bool(0.1) {
            priority.insert(c);
        }
        if with_opacity && rng.random_bool(0.2) {
            opacity.insert(c, [0.3, 0.8, 1.0][rng.random_range(0..3)]);
        }
    }
    let range = rng.random_range(3.0..12.0f64).round();
    let fov = [30.0, 40.0, 60.0, 90.0, 120.0, 360.0][rng.random_range(0..6)];
    Scenario::new(w, h, 1.0, tags, priority, opacity, SensorSpec::new(range, fov).unwrap()).unwrap()
}

/// Random genes on distinct free cells, each facing a candidate direction.
pub fn random_genes(s: &Scenario, seed: u64, max: usize) -> Vec<Gene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let free = s.free_cells();
    let n = rng.random_range(0..=max.min(free.len()));
    let mut picked = BTreeSet::new();
    let mut genes = Vec::new();
    while genes.len() < n {
        let c = free[rng.random_range(0..free.len())];
        if !picked.insert(c) {
            continue;
        }
        let angles = sensorplace::visibility::candidate_angles(c, s);
        let phi = if angles.is_empty() {
            rng.random_range(-3.0..3.0)
        } else {
            angles[rng.random_range(0..angles.len())]
        };
        genes.push(Gene::new(c.x, c.y, phi));
    }
    genes
}
