//! Geometric kernel: range, field-of-view wedge and line of sight on the grid.
//!
//! These functions are the reference semantics. [`crate::model::Problem`]
//! precomputes the same predicate for fast repeated evaluation and is tested
//! against this module.

use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::grid::{Cell, CellTag, OcclusionMask, Scenario};

/// Candidate angles closer than this are merged.
pub const ANGLE_DEDUP_TOL: f64 = 1e-9;
/// Slack on the inclusive wedge boundary.
pub const WEDGE_EPS: f64 = 1e-9;

/// One placed sensor: cell position and orientation (radians from the +x
/// axis, measured toward +y, i.e. clockwise on screen).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gene {
    pub x: usize,
    pub y: usize,
    pub phi: f64,
}

impl Gene {
    pub fn new(x: usize, y: usize, phi: f64) -> Self {
        Gene { x, y, phi }
    }

    pub fn cell(&self) -> Cell {
        Cell::new(self.x, self.y)
    }

    /// Deterministic order on `(y, x, phi)` used as the final tie-break.
    pub fn tie_order(&self, other: &Gene) -> Ordering {
        (self.y, self.x)
            .cmp(&(other.y, other.x))
            .then(self.phi.total_cmp(&other.phi))
    }
}

/// Direction from the center of `from` to the center of `to`, in `(-pi, pi]`.
pub fn direction(from: Cell, to: Cell) -> f64 {
    let dx = to.x as f64 - from.x as f64;
    let dy = to.y as f64 - from.y as f64;
    dy.atan2(dx)
}

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut d = a.rem_euclid(2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    }
    d
}

/// True iff `angle` lies in the closed wedge `[phi - half, phi + half]` mod 2pi.
pub fn in_wedge(angle: f64, phi: f64, half_fov: f64) -> bool {
    half_fov >= PI || wrap_angle(angle - phi).abs() <= half_fov + WEDGE_EPS
}

/// True iff the cell centers are at most `range_m` apart (inclusive).
pub fn in_range(a: Cell, b: Cell, scenario: &Scenario) -> bool {
    let l = scenario.grid_len();
    let r = scenario.sensor_spec().range_m;
    a.dist2(b) as f64 * l * l <= r * r + 1e-9
}

/// Sorted, deduplicated directions from `pos` to every street cell.
pub fn candidate_angles(pos: Cell, scenario: &Scenario) -> Vec<f64> {
    let mut angles: Vec<f64> = scenario
        .street_cells()
        .iter()
        .filter(|&&c| c != pos)
        .map(|&c| direction(pos, c))
        .collect();
    dedup_angles(&mut angles);
    angles
}

pub(crate) fn dedup_angles(angles: &mut Vec<f64>) {
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|b, a| (*b - *a).abs() <= ANGLE_DEDUP_TOL);
}

/// Candidate angle closest to `phi` in circular distance. Ties resolve to the
/// smaller angle.
pub fn nearest_angle(angles: &[f64], phi: f64) -> Option<f64> {
    angles.iter().copied().min_by(|a, b| {
        wrap_angle(a - phi)
            .abs()
            .total_cmp(&wrap_angle(b - phi).abs())
            .then(a.total_cmp(b))
    })
}

/// The `k` candidate angles closest to `phi`, nearest first.
pub fn nearest_angles(angles: &[f64], phi: f64, k: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = angles.to_vec();
    sorted.sort_by(|a, b| {
        wrap_angle(a - phi)
            .abs()
            .total_cmp(&wrap_angle(b - phi).abs())
            .then(a.total_cmp(b))
    });
    sorted.truncate(k);
    sorted
}

/// Visits every cell the segment between the two cell centers touches,
/// including cells touched only at a grid vertex, in order from `from` to
/// `to` (both included). Stops early when `visit` returns `false`.
///
/// Works in doubled coordinates, where cell `(i, j)` spans
/// `[2i, 2i+2] x [2j, 2j+2]` and centers are odd, so every comparison is exact.
pub fn supercover(from: Cell, to: Cell, mut visit: impl FnMut(i64, i64) -> bool) {
    let (x0, y0) = (from.x as i64, from.y as i64);
    let (x1, y1) = (to.x as i64, to.y as i64);
    if !visit(x0, y0) {
        return;
    }
    let (cx0, cy0) = (2 * x0 + 1, 2 * y0 + 1);
    let (dx, dy) = (2 * (x1 - x0), 2 * (y1 - y0));
    let (sx, sy) = (dx.signum(), dy.signum());
    let (adx, ady) = (dx.abs(), dy.abs());
    let (mut i, mut j) = (x0, y0);

    while (i, j) != (x1, y1) {
        // Parametric distance to the next vertical/horizontal grid line,
        // compared as fractions nx/adx versus ny/ady.
        let ord = match (sx != 0, sy != 0) {
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            (true, true) => {
                let bx = if sx > 0 { 2 * (i + 1) } else { 2 * i };
                let by = if sy > 0 { 2 * (j + 1) } else { 2 * j };
                let nx = (bx - cx0).abs();
                let ny = (by - cy0).abs();
                (nx * ady).cmp(&(ny * adx))
            }
            (false, false) => unreachable!("distinct endpoints imply a direction"),
        };
        match ord {
            Ordering::Less => i += sx,
            Ordering::Greater => j += sy,
            Ordering::Equal => {
                // Passing exactly through a vertex touches both side cells.
                if !visit(i + sx, j) || !visit(i, j + sy) {
                    return;
                }
                i += sx;
                j += sy;
            }
        }
        if !visit(i, j) {
            return;
        }
    }
}

/// True iff the segment between the two cell centers crosses no obstacle and
/// is not shadowed by a semi-transparent region in `mask`.
///
/// Consecutive opacity-annotated cells along the segment form one region. A
/// region the segment passes all the way through hides the target when the
/// cell where the segment entered it is opaque in `mask`, so cells behind a
/// region are hidden with probability equal to that cell's opacity. A region
/// that extends up to the target does not hide it. The endpoint cells never
/// block.
pub fn line_of_sight(scenario: &Scenario, mask: &OcclusionMask, from: Cell, to: Cell) -> bool {
    let semi = |c: &Cell| scenario.opacity().get(c).is_some_and(|&v| v > 0.0);
    let mut clear = true;
    let mut in_region = false;
    let mut pending = false;
    supercover(from, to, |x, y| {
        let c = Cell::new(x as usize, y as usize);
        if c == from || c == to {
            return true;
        }
        if scenario.tag(c) == CellTag::Obstacle {
            clear = false;
        } else if semi(&c) {
            if !in_region {
                pending = mask.is_opaque(c);
            }
            in_region = true;
        } else {
            clear &= !pending;
            pending = false;
            in_region = false;
        }
        clear
    });
    let inside = in_region && semi(&to);
    clear && (inside || !pending)
}

/// True iff the sensor `gene` covers the street cell `cell`: within range,
/// inside the field-of-view wedge, and with a clear line of sight.
pub fn covers(gene: &Gene, cell: Cell, scenario: &Scenario, mask: &OcclusionMask) -> bool {
    let pos = gene.cell();
    if pos == cell || !in_range(pos, cell, scenario) {
        return false;
    }
    let half = scenario.sensor_spec().fov_rad() / 2.0;
    in_wedge(direction(pos, cell), gene.phi, half) && line_of_sight(scenario, mask, pos, cell)
}

/// Per-street-cell coverage counts, indexed like [`Scenario::street_cells`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageField {
    pub counts: Vec<u32>,
}

impl CoverageField {
    /// Number of street cells covered at least `n` times.
    pub fn n_cov(&self, n: u32) -> usize {
        self.counts.iter().filter(|&&c| c >= n).count()
    }

    /// `[N_cov(0), N_cov(1), ..., N_cov(max)]` where `max` is the largest count.
    pub fn n_cov_table(&self) -> Vec<usize> {
        let max = self.counts.iter().copied().max().unwrap_or(0) as usize;
        let mut hist = vec![0usize; max + 1];
        for &c in &self.counts {
            hist[c as usize] += 1;
        }
        let mut table = vec![0usize; max + 1];
        let mut acc = 0;
        for n in (0..=max).rev() {
            acc += hist[n];
            table[n] = acc;
        }
        table
    }
}

pub fn coverage_counts(genes: &[Gene], scenario: &Scenario, mask: &OcclusionMask) -> CoverageField {
    let counts = scenario
        .street_cells()
        .iter()
        .map(|&c| genes.iter().filter(|g| covers(g, c, scenario, mask)).count() as u32)
        .collect();
    CoverageField { counts }
}

/// Street cells within sensing range of `pos`, ignoring orientation and
/// line of sight.
pub fn cells_in_range(pos: Cell, scenario: &Scenario) -> usize {
    scenario
        .street_cells()
        .iter()
        .filter(|&&c| c != pos && in_range(pos, c, scenario))
        .count()
}
