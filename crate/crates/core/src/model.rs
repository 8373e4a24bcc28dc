//! Precomputed coverage model for one scenario and a fixed set of occlusion
//! realizations.
//!
//! For every free cell the model stores the candidate angles and the street
//! cells within range, sorted by direction, each with a bitset of the
//! realizations under which the line of sight is clear. Footprint queries then
//! reduce to a binary-searched angular window. Identical realizations share a
//! visibility bit.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fitness::{self, CoverageMetrics, FitnessWeights};
use crate::grid::{Cell, CellTag, OcclusionMask, Scenario};
use crate::visibility::{self, Gene};

pub const MAX_MASKS: usize = 64;

#[derive(Debug, Clone, Copy)]
struct Entry {
    angle: f64,
    street: u32,
    visible: u64,
}

#[derive(Debug, Clone)]
struct Site {
    angles: Vec<f64>,
    entries: Vec<Entry>,
}

/// A scenario, its realizations and fitness weights, with the coverage
/// predicate precomputed for every free cell.
#[derive(Debug, Clone)]
pub struct Problem {
    scenario: Scenario,
    masks: Vec<OcclusionMask>,
    weights: FitnessWeights,
    /// Realization index -> distinct-realization group.
    group_of: Vec<usize>,
    n_groups: usize,
    site_of: Vec<Option<u32>>,
    sites: Vec<Site>,
    in_range: Vec<usize>,
    priority: Vec<bool>,
    half_fov: f64,
}

impl Problem {
    pub fn new(scenario: Scenario, masks: Vec<OcclusionMask>, weights: FitnessWeights) -> Result<Self> {
        if masks.is_empty() || masks.len() > MAX_MASKS {
            return Err(Error::Config(format!(
                "need between 1 and {MAX_MASKS} occlusion masks, got {}",
                masks.len()
            )));
        }
        let mut distinct: Vec<&OcclusionMask> = Vec::new();
        let group_of: Vec<usize> = masks
            .iter()
            .map(|m| match distinct.iter().position(|d| d.opaque_now == m.opaque_now) {
                Some(g) => g,
                None => {
                    distinct.push(m);
                    distinct.len() - 1
                }
            })
            .collect();
        let n_groups = distinct.len();

        let (w, h) = (scenario.width(), scenario.height());
        let mut opaque_bits = vec![0u64; w * h];
        let mut semi = vec![false; w * h];
        for (c, &v) in scenario.opacity() {
            semi[c.y * w + c.x] = v > 0.0;
        }
        for (g, m) in distinct.iter().enumerate() {
            for c in &m.opaque_now {
                opaque_bits[c.y * w + c.x] |= 1 << g;
            }
        }
        let all_bits = if n_groups == 64 { u64::MAX } else { (1u64 << n_groups) - 1 };

        let mut site_of = vec![None; w * h];
        for (i, c) in scenario.free_cells().iter().enumerate() {
            site_of[c.y * w + c.x] = Some(i as u32);
        }

        let sc = &scenario;
        let sites: Vec<Site> = scenario
            .free_cells()
            .par_iter()
            .map(|&pos| {
                let mut entries: Vec<Entry> = sc
                    .street_cells()
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| visibility::in_range(pos, c, sc))
                    .filter_map(|(i, &c)| {
                        let mut bits = all_bits;
                        let mut in_region = false;
                        let mut pending = 0u64;
                        visibility::supercover(pos, c, |x, y| {
                            let cell = Cell::new(x as usize, y as usize);
                            if cell == pos || cell == c {
                                return true;
                            }
                            let k = cell.y * w + cell.x;
                            if sc.tag(cell) == CellTag::Obstacle {
                                bits = 0;
                            } else if semi[k] {
                                if !in_region {
                                    pending = opaque_bits[k];
                                }
                                in_region = true;
                            } else {
                                bits &= !pending;
                                pending = 0;
                                in_region = false;
                            }
                            bits != 0
                        });
                        if !(in_region && semi[c.y * w + c.x]) {
                            bits &= !pending;
                        }
                        (bits != 0).then(|| Entry {
                            angle: visibility::direction(pos, c),
                            street: i as u32,
                            visible: bits,
                        })
                    })
                    .collect();
                entries.sort_by(|a, b| a.angle.total_cmp(&b.angle).then(a.street.cmp(&b.street)));
                Site {
                    angles: visibility::candidate_angles(pos, sc),
                    entries,
                }
            })
            .collect();

        let in_range = scenario
            .free_cells()
            .par_iter()
            .map(|&pos| visibility::cells_in_range(pos, sc))
            .collect();
        let priority = scenario
            .street_cells()
            .iter()
            .map(|&c| scenario.is_priority(c))
            .collect();
        let half_fov = scenario.sensor_spec().fov_rad() / 2.0;

        Ok(Problem {
            scenario,
            masks,
            weights,
            group_of,
            n_groups,
            site_of,
            sites,
            in_range,
            priority,
            half_fov,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn masks(&self) -> &[OcclusionMask] {
        &self.masks
    }

    pub fn weights(&self) -> &FitnessWeights {
        &self.weights
    }

    pub fn n_masks(&self) -> usize {
        self.masks.len()
    }

    /// Number of distinct realizations.
    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn group_of(&self, mask: usize) -> usize {
        self.group_of[mask]
    }

    fn site(&self, c: Cell) -> Option<&Site> {
        self.site_index(c).map(|i| &self.sites[i])
    }

    fn site_index(&self, c: Cell) -> Option<usize> {
        if c.x < self.scenario.width() && c.y < self.scenario.height() {
            self.site_of[c.y * self.scenario.width() + c.x].map(|i| i as usize)
        } else {
            None
        }
    }

    /// Candidate orientations at a free cell; empty for any other cell.
    pub fn angles(&self, c: Cell) -> &[f64] {
        self.site(c).map(|s| s.angles.as_slice()).unwrap_or(&[])
    }

    /// Nearest candidate orientation at `c`.
    pub fn snap(&self, c: Cell, phi: f64) -> Option<f64> {
        visibility::nearest_angle(self.angles(c), phi)
    }

    /// Street cells within range of a free cell, regardless of orientation.
    pub fn cells_in_range(&self, c: Cell) -> usize {
        self.site_index(c).map(|i| self.in_range[i]).unwrap_or(0)
    }

    pub fn is_priority(&self, street: usize) -> bool {
        self.priority[street]
    }

    /// Street indices covered by `gene` under realization `mask`.
    pub fn footprint(&self, gene: &Gene, mask: usize) -> Vec<u32> {
        self.group_footprint(gene, self.group_of[mask])
    }

    /// Street indices covered by `gene` under distinct realization `group`.
    pub fn group_footprint(&self, gene: &Gene, group: usize) -> Vec<u32> {
        let Some(site) = self.site(gene.cell()) else {
            return Vec::new();
        };
        let bit = 1u64 << group;
        let mut out = Vec::new();
        for range in self.window(site, gene.phi) {
            out.extend(
                site.entries[range]
                    .iter()
                    .filter(|e| e.visible & bit != 0)
                    .filter(|e| visibility::in_wedge(e.angle, gene.phi, self.half_fov))
                    .map(|e| e.street),
            );
        }
        out
    }

    /// Index ranges of entries whose direction may fall in the wedge.
    #[allow(clippy::single_range_in_vec_init)]
    fn window(&self, site: &Site, phi: f64) -> Vec<std::ops::Range<usize>> {
        use std::f64::consts::PI;
        let n = site.entries.len();
        if self.half_fov >= PI / 2.0 {
            return vec![0..n];
        }
        let pad = 1e-6;
        let lo = phi - self.half_fov - pad;
        let hi = phi + self.half_fov + pad;
        let idx = |a: f64| site.entries.partition_point(|e| e.angle < a);
        let idx_le = |a: f64| site.entries.partition_point(|e| e.angle <= a);
        let mut ranges = vec![idx(lo)..idx_le(hi)];
        if lo < -PI {
            ranges.push(idx(lo + 2.0 * PI)..n);
        }
        if hi > PI {
            ranges.push(0..idx_le(hi - 2.0 * PI));
        }
        ranges
    }

    pub fn state(&self, genes: &[Gene]) -> CoverageState {
        let mut st = CoverageState::empty(self);
        for g in genes {
            st.add_footprints(self, &self.footprints(g));
        }
        st
    }

    /// Footprints of `gene` under every distinct realization.
    pub fn footprints(&self, gene: &Gene) -> Vec<Vec<u32>> {
        (0..self.n_groups)
            .map(|g| self.group_footprint(gene, g))
            .collect()
    }

    pub fn fitness(&self, genes: &[Gene]) -> f64 {
        self.state(genes).fitness(self)
    }

    pub fn metrics(&self, genes: &[Gene]) -> CoverageMetrics {
        self.state(genes).metrics(self)
    }

    /// True iff every priority cell is covered at least twice in every
    /// realization.
    pub fn priority_satisfied(&self, genes: &[Gene]) -> bool {
        let st = self.state(genes);
        (0..self.n_groups).all(|g| {
            st.counts(g)
                .iter()
                .enumerate()
                .all(|(i, &k)| !self.priority[i] || k >= 2)
        })
    }

    /// Evaluates many chromosomes in parallel, preserving order.
    pub fn fitness_many(&self, chromosomes: &[&[Gene]]) -> Vec<f64> {
        chromosomes.par_iter().map(|g| self.fitness(g)).collect()
    }

    /// True iff every gene sits on a distinct free cell with a candidate
    /// orientation.
    pub fn is_valid(&self, genes: &[Gene]) -> bool {
        let mut seen = std::collections::HashSet::new();
        genes.iter().all(|g| {
            self.scenario.is_free(g.cell())
                && seen.insert(g.cell())
                && self.angles(g.cell()).contains(&g.phi)
        })
    }
}

/// Coverage counts of a configuration under every distinct realization,
/// updated incrementally as footprints are added and removed.
#[derive(Debug, Clone)]
pub struct CoverageState {
    counts: Vec<Vec<u32>>,
    hist: Vec<Vec<usize>>,
    prio_ok: Vec<usize>,
    n_sens: usize,
}

impl CoverageState {
    pub fn empty(p: &Problem) -> Self {
        let n = p.scenario.n_road();
        CoverageState {
            counts: vec![vec![0; n]; p.n_groups],
            hist: vec![vec![n]; p.n_groups],
            prio_ok: vec![0; p.n_groups],
            n_sens: 0,
        }
    }

    pub fn n_sens(&self) -> usize {
        self.n_sens
    }

    /// Counts under distinct realization `group`.
    pub fn counts(&self, group: usize) -> &[u32] {
        &self.counts[group]
    }

    pub fn add_footprints(&mut self, p: &Problem, fps: &[Vec<u32>]) {
        self.apply(p, fps, true);
    }

    pub fn remove_footprints(&mut self, p: &Problem, fps: &[Vec<u32>]) {
        self.apply(p, fps, false);
    }

    fn apply(&mut self, p: &Problem, fps: &[Vec<u32>], adding: bool) {
        for (g, fp) in fps.iter().enumerate() {
            let counts = &mut self.counts[g];
            let hist = &mut self.hist[g];
            for &s in fp {
                let s = s as usize;
                let before = counts[s];
                let after = if adding { before + 1 } else { before - 1 };
                counts[s] = after;
                hist[before as usize] -= 1;
                if hist.len() <= after as usize {
                    hist.push(0);
                }
                hist[after as usize] += 1;
                if p.priority[s] {
                    if before < 2 && after >= 2 {
                        self.prio_ok[g] += 1;
                    } else if before >= 2 && after < 2 {
                        self.prio_ok[g] -= 1;
                    }
                }
            }
        }
        if adding {
            self.n_sens += 1;
        } else {
            self.n_sens -= 1;
        }
    }

    fn ncov_table(hist: &[usize]) -> Vec<usize> {
        let top = hist.iter().rposition(|&h| h > 0).unwrap_or(0);
        let mut table = vec![0; top + 1];
        let mut acc = 0;
        for n in (0..=top).rev() {
            acc += hist[n];
            table[n] = acc;
        }
        table
    }

    fn group_scores(&self, p: &Problem) -> Vec<f64> {
        (0..self.counts.len())
            .map(|g| {
                fitness::score(
                    &Self::ncov_table(&self.hist[g]),
                    self.prio_ok[g],
                    self.n_sens,
                    &p.weights,
                )
            })
            .collect()
    }

    /// Mean score over all realizations.
    pub fn fitness(&self, p: &Problem) -> f64 {
        let per_group = self.group_scores(p);
        fitness::mean(p.group_of.iter().map(|&g| per_group[g]), p.group_of.len())
    }

    pub fn n_cov1(&self, group: usize) -> usize {
        self.counts[group].len() - self.hist[group][0]
    }

    pub fn metrics(&self, p: &Problem) -> CoverageMetrics {
        let n_road = p.scenario.n_road() as f64;
        let c = if p.scenario.n_road() == 0 {
            0.0
        } else {
            fitness::mean(
                p.group_of.iter().map(|&g| self.n_cov1(g) as f64 / n_road),
                p.group_of.len(),
            )
        };
        CoverageMetrics {
            c,
            c_eff: fitness::efficiency(&p.scenario, self.n_sens),
            n_sens: self.n_sens,
        }
    }
}
