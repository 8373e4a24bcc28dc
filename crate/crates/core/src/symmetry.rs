//! Symmetrization of solutions and translation-period search.
//!
//! A solution is augmented with its images under every element of a
//! declared symmetry group, then thinned out again by sequential ranking that
//! prefers genes appearing often in the augmented set and, after the first
//! pick, genes that continue the pattern already present in the offspring.
//!
//! Geometry is done in doubled coordinates, where the centre of cell
//! `(x, y)` sits at `(2x + 1, 2y + 1)`. That keeps rotation centres and mirror
//! axes on cell edges exact.

use std::collections::{HashMap, HashSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::Chromosome;
use crate::grid::{Cell, CellTag, Scenario};
use crate::model::Problem;
use crate::refine::local_search;
use crate::visibility::Gene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// A finite set of grid isometries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymmetryGroup {
    /// Quarter turns about a point given in doubled coordinates.
    RotationC4 { cx2: i64, cy2: i64 },
    /// Reflection in the line `x = at2 / 2` (axis `X` means the mirror
    /// flips x) or `y = at2 / 2`.
    Mirror { flips: Axis, at2: i64 },
    /// Shifts by `j * step` cells along `axis` for `|j| <= count`.
    Translation { axis: Axis, step: usize, count: usize },
}

impl SymmetryGroup {
    /// C4 about `(cx, cy)` in cell units, measured from the top-left corner.
    pub fn rotation_c4(cx: f64, cy: f64) -> Result<Self> {
        let (cx2, cy2) = (doubled(cx)?, doubled(cy)?);
        if (cx2 + cy2) % 2 != 0 {
            return Err(Error::Config(format!(
                "rotation centre ({cx}, {cy}) does not map cells onto cells"
            )));
        }
        Ok(SymmetryGroup::RotationC4 { cx2, cy2 })
    }

    pub fn mirror(flips: Axis, at: f64) -> Result<Self> {
        Ok(SymmetryGroup::Mirror {
            flips,
            at2: doubled(at)?,
        })
    }

    /// Group elements, identity first.
    pub fn elements(&self) -> Vec<Transform> {
        match *self {
            SymmetryGroup::RotationC4 { cx2, cy2 } => {
                let quarter = Transform {
                    m: [[0, -1], [1, 0]],
                    t: [cx2 + cy2, cy2 - cx2],
                };
                let mut out = vec![Transform::IDENTITY];
                for _ in 0..3 {
                    let last = *out.last().unwrap();
                    out.push(quarter.then(&last));
                }
                out
            }
            SymmetryGroup::Mirror { flips, at2 } => {
                let m = match flips {
                    Axis::X => Transform {
                        m: [[-1, 0], [0, 1]],
                        t: [2 * at2, 0],
                    },
                    Axis::Y => Transform {
                        m: [[1, 0], [0, -1]],
                        t: [0, 2 * at2],
                    },
                };
                vec![Transform::IDENTITY, m]
            }
            SymmetryGroup::Translation { axis, step, count } => {
                let mut out = vec![Transform::IDENTITY];
                for j in 1..=count as i64 {
                    for s in [j, -j] {
                        let d = 2 * s * step as i64;
                        let t = match axis {
                            Axis::X => [d, 0],
                            Axis::Y => [0, d],
                        };
                        out.push(Transform {
                            m: Transform::IDENTITY.m,
                            t,
                        });
                    }
                }
                out
            }
        }
    }
}

fn doubled(v: f64) -> Result<i64> {
    let d = v * 2.0;
    if !d.is_finite() || d.fract() != 0.0 {
        return Err(Error::Config(format!(
            "symmetry parameter {v} is not a multiple of half a cell"
        )));
    }
    Ok(d as i64)
}

/// Integer affine map on doubled coordinates: `p' = m p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transform {
    pub m: [[i64; 2]; 2],
    pub t: [i64; 2],
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        m: [[1, 0], [0, 1]],
        t: [0, 0],
    };

    /// `self` applied after `other`.
    pub fn then(&self, other: &Transform) -> Transform {
        let a = self.m;
        let b = other.m;
        let m = [
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ];
        let t = [
            a[0][0] * other.t[0] + a[0][1] * other.t[1] + self.t[0],
            a[1][0] * other.t[0] + a[1][1] * other.t[1] + self.t[1],
        ];
        Transform { m, t }
    }

    /// Image of a cell, or `None` if it falls between cells.
    pub fn cell(&self, x: i64, y: i64) -> Option<(i64, i64)> {
        let (px, py) = (2 * x + 1, 2 * y + 1);
        let qx = self.m[0][0] * px + self.m[0][1] * py + self.t[0];
        let qy = self.m[1][0] * px + self.m[1][1] * py + self.t[1];
        if qx.rem_euclid(2) != 1 || qy.rem_euclid(2) != 1 {
            return None;
        }
        Some(((qx - 1).div_euclid(2), (qy - 1).div_euclid(2)))
    }

    pub fn angle(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        let x = self.m[0][0] as f64 * c + self.m[0][1] as f64 * s;
        let y = self.m[1][0] as f64 * c + self.m[1][1] as f64 * s;
        y.atan2(x)
    }

    /// Image of a gene, snapped to a candidate orientation. `None` if the
    /// image is off the grid or not a free cell.
    pub fn gene(&self, g: &Gene, p: &Problem) -> Option<Gene> {
        let (x, y) = self.cell(g.x as i64, g.y as i64)?;
        if !p.scenario().in_bounds(x, y) {
            return None;
        }
        let c = Cell::new(x as usize, y as usize);
        if !p.scenario().is_free(c) {
            return None;
        }
        let phi = p.snap(c, self.angle(g.phi))?;
        Some(Gene::new(c.x, c.y, phi))
    }
}

type GeneKey = (usize, usize, u64);

fn key(g: &Gene) -> GeneKey {
    (g.x, g.y, g.phi.to_bits())
}

/// A solution together with its symmetry images.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub genes: Vec<Gene>,
    /// How many (gene, element) pairs produced each entry of `genes`.
    pub multiplicity: Vec<usize>,
}

/// Adds every image of every gene under every group element. Images off the
/// grid or on non-free cells are dropped. Where several images share a cell,
/// an input gene at that cell wins; otherwise the orientation produced most
/// often is kept.
pub fn augment_with_symmetry(chromosome: &Chromosome, group: &SymmetryGroup, p: &Problem) -> Augmented {
    let elements = group.elements();
    let mut counts: HashMap<GeneKey, usize> = HashMap::new();
    let mut order: Vec<Gene> = Vec::new();
    for t in &elements {
        for g in &chromosome.genes {
            if let Some(img) = t.gene(g, p) {
                let c = counts.entry(key(&img)).or_insert(0);
                if *c == 0 {
                    order.push(img);
                }
                *c += 1;
            }
        }
    }

    let inputs: HashSet<Cell> = chromosome.genes.iter().map(|g| g.cell()).collect();
    let mut chosen: HashMap<Cell, usize> = HashMap::new();
    for (i, g) in order.iter().enumerate() {
        let c = g.cell();
        let input_here = inputs.contains(&c);
        match chosen.get(&c) {
            None => {
                chosen.insert(c, i);
            }
            Some(&j) => {
                let better = if input_here {
                    // identity images come first, so the input gene is already held
                    false
                } else {
                    counts[&key(g)] > counts[&key(&order[j])]
                };
                if better {
                    chosen.insert(c, i);
                }
            }
        }
    }
    let mut keep: Vec<usize> = chosen.into_values().collect();
    keep.sort_unstable();
    Augmented {
        genes: keep.iter().map(|&i| order[i]).collect(),
        multiplicity: keep.iter().map(|&i| counts[&key(&order[i])]).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Elimination {
    pub chromosome: Chromosome,
    pub pattern_breaks: usize,
    /// Set when the break budget ran out before coverage was complete.
    pub pattern_broken: bool,
}

/// Sequential elimination by ranking on `(multiplicity, new cells)`.
///
/// The first pick is the top-ranked gene. After that only genes that some
/// group element maps an already picked gene onto are eligible; when none of
/// them adds coverage but another gene does, the best such gene is taken and
/// a pattern break is recorded. Once breaks exceed `max_pattern_breaks` the
/// partial result is returned flagged.
pub fn symmetry_eliminate(
    augmented: &Augmented,
    group: &SymmetryGroup,
    p: &Problem,
    mask: usize,
    max_pattern_breaks: usize,
) -> Elimination {
    let elements = group.elements();
    let fps: Vec<Vec<u32>> = augmented.genes.iter().map(|g| p.footprint(g, mask)).collect();
    let mut available: Vec<usize> = (0..augmented.genes.len()).collect();
    let mut uncovered = vec![true; p.scenario().n_road()];
    let mut compliant: HashSet<GeneKey> = HashSet::new();
    let mut picked: Vec<Gene> = Vec::new();
    let mut breaks = 0;
    let mut broken = false;

    loop {
        let gain = |i: usize| fps[i].iter().filter(|&&s| uncovered[s as usize]).count();
        let rank = |pool: &mut dyn Iterator<Item = usize>| {
            pool.map(|i| (augmented.multiplicity[i], gain(i), i))
                .filter(|&(_, g, _)| g > 0)
                .max_by(|a, b| {
                    (a.0, a.1)
                        .cmp(&(b.0, b.1))
                        .then(augmented.genes[b.2].tie_order(&augmented.genes[a.2]))
                })
                .map(|(_, _, i)| i)
        };

        let pick = if picked.is_empty() {
            rank(&mut available.iter().copied())
        } else {
            let in_pattern = rank(
                &mut available
                    .iter()
                    .copied()
                    .filter(|&i| compliant.contains(&key(&augmented.genes[i]))),
            );
            match in_pattern {
                Some(i) => Some(i),
                None => {
                    let any = rank(&mut available.iter().copied());
                    if any.is_some() {
                        breaks += 1;
                        if breaks > max_pattern_breaks {
                            broken = true;
                            break;
                        }
                    }
                    any
                }
            }
        };
        let Some(i) = pick else { break };

        available.retain(|&j| j != i);
        let g = augmented.genes[i];
        for &s in &fps[i] {
            uncovered[s as usize] = false;
        }
        for t in &elements {
            if let Some(img) = t.gene(&g, p) {
                compliant.insert(key(&img));
            }
        }
        // one sensor per cell
        available.retain(|&j| augmented.genes[j].cell() != g.cell());
        picked.push(g);
    }

    Elimination {
        chromosome: Chromosome::new(picked),
        pattern_breaks: breaks,
        pattern_broken: broken,
    }
}

/// Road connected components plus road runs touching the map boundary.
pub fn default_pattern_breaks(scenario: &Scenario) -> usize {
    let (w, h) = (scenario.width() as i64, scenario.height() as i64);
    let is_street = |x: i64, y: i64| scenario.get(x, y) == Some(CellTag::Street);

    let mut seen = HashSet::new();
    let mut components = 0;
    for &c in scenario.street_cells() {
        if !seen.insert(c) {
            continue;
        }
        components += 1;
        let mut queue = VecDeque::from([c]);
        while let Some(c) = queue.pop_front() {
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (x, y) = (c.x as i64 + dx, c.y as i64 + dy);
                if is_street(x, y) {
                    let n = Cell::new(x as usize, y as usize);
                    if seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
        }
    }

    let runs = |cells: Vec<(i64, i64)>| {
        let mut n = 0;
        let mut inside = false;
        for (x, y) in cells {
            let s = is_street(x, y);
            if s && !inside {
                n += 1;
            }
            inside = s;
        }
        n
    };
    let ends = runs((0..w).map(|x| (x, 0)).collect())
        + runs((0..w).map(|x| (x, h - 1)).collect())
        + runs((0..h).map(|y| (0, y)).collect())
        + runs((0..h).map(|y| (w - 1, y)).collect());
    components + ends
}

#[derive(Debug, Clone)]
pub struct Symmetrized {
    pub chromosome: Chromosome,
    pub pattern_breaks: usize,
    pub pattern_broken: bool,
    /// False when the input was kept because the symmetrized result scored
    /// lower.
    pub accepted: bool,
}

/// Augment, eliminate under realization 0, local search, and keep whichever
/// of input and result scores higher.
pub fn symmetrize(
    chromosome: &Chromosome,
    group: &SymmetryGroup,
    p: &Problem,
    max_pattern_breaks: usize,
) -> Symmetrized {
    let aug = augment_with_symmetry(chromosome, group, p);
    let elim = symmetry_eliminate(&aug, group, p, 0, max_pattern_breaks);
    let refined = local_search(&elim.chromosome, p);
    let before = p.fitness(&chromosome.genes);
    let after = refined.fitness.unwrap_or_else(|| p.fitness(&refined.genes));
    let accepted = after > before;
    Symmetrized {
        chromosome: if accepted {
            refined
        } else {
            Chromosome {
                genes: chromosome.genes.clone(),
                fitness: Some(before),
            }
        },
        pattern_breaks: elim.pattern_breaks,
        pattern_broken: elim.pattern_broken,
        accepted,
    }
}

#[derive(Debug, Clone)]
pub struct TranslationResult {
    pub period_m: f64,
    pub period_cells: usize,
    pub chromosome: Chromosome,
    /// `(period in cells, fitness)` for every period tried.
    pub scan: Vec<(usize, f64)>,
}

/// Extent of the road along `axis`, as `(min, max)` cell coordinates.
fn road_extent(scenario: &Scenario, axis: Axis) -> Option<(usize, usize)> {
    let coord = |c: &Cell| match axis {
        Axis::X => c.x,
        Axis::Y => c.y,
    };
    let s = scenario.street_cells();
    Some((s.iter().map(coord).min()?, s.iter().map(coord).max()?))
}

/// Genes whose coordinate along `axis` lies in the window of length `d`
/// starting `offset` cells into the period that is centred on the road.
pub fn motif(genes: &[Gene], scenario: &Scenario, axis: Axis, d: usize, offset: usize) -> Vec<Gene> {
    let Some((lo, hi)) = road_extent(scenario, axis) else {
        return Vec::new();
    };
    let start = (lo + hi + 1) as i64 / 2 - d as i64 / 2 + offset as i64;
    genes
        .iter()
        .filter(|g| {
            let v = match axis {
                Axis::X => g.x,
                Axis::Y => g.y,
            } as i64;
            v >= start && v < start + d as i64
        })
        .copied()
        .collect()
}

/// Repeats `motif` every `d` cells along `axis` across the whole map.
/// Copies landing on non-free or already used cells are dropped;
/// orientations are snapped at the destination.
pub fn tile(motif: &[Gene], p: &Problem, axis: Axis, d: usize) -> Chromosome {
    let sc = p.scenario();
    let len = match axis {
        Axis::X => sc.width(),
        Axis::Y => sc.height(),
    } as i64;
    let d = d as i64;
    let mut used = HashSet::new();
    let mut genes = Vec::new();
    for g in motif {
        let v = match axis {
            Axis::X => g.x,
            Axis::Y => g.y,
        } as i64;
        let first = -(v / d);
        let last = (len - 1 - v) / d;
        for j in first..=last {
            let t = Transform {
                m: Transform::IDENTITY.m,
                t: match axis {
                    Axis::X => [2 * j * d, 0],
                    Axis::Y => [0, 2 * j * d],
                },
            };
            if let Some(img) = t.gene(g, p) {
                if used.insert(img.cell()) {
                    genes.push(img);
                }
            }
        }
    }
    genes.sort_by(|a, b| a.tie_order(b));
    Chromosome::new(genes)
}

/// Tiling of the best-scoring motif for period `d`, over every phase of the
/// extraction window.
fn best_tiling(chromosome: &Chromosome, p: &Problem, axis: Axis, d: usize) -> Chromosome {
    let (mut best, mut best_f) = (Chromosome::default(), f64::NEG_INFINITY);
    for offset in 0..d {
        let m = motif(&chromosome.genes, p.scenario(), axis, d, offset);
        let tiled = tile(&m, p, axis, d);
        let f = p.fitness(&tiled.genes);
        if f > best_f {
            (best, best_f) = (tiled, f);
        }
    }
    best
}

/// Tries every period from one cell up to twice the sensor range: extracts
/// the motif of the input for that period, tiles it, refines it by local
/// search and scores it. Returns the best period, the shortest on ties.
pub fn optimize_translation(chromosome: &Chromosome, p: &Problem, axis: Option<Axis>) -> Result<TranslationResult> {
    let axis = axis.ok_or(Error::NoTranslationAxis)?;
    let sc = p.scenario();
    let max_d = ((2.0 * sc.sensor_spec().range_m / sc.grid_len()) + 1e-9).floor() as usize;
    let results: Vec<(usize, Chromosome)> = (1..=max_d.max(1))
        .into_par_iter()
        .map(|d| (d, local_search(&best_tiling(chromosome, p, axis, d), p)))
        .collect();

    let scan: Vec<(usize, f64)> = results
        .iter()
        .map(|(d, c)| (*d, c.fitness.expect("local search scores its output")))
        .collect();
    let best = scan
        .iter()
        .enumerate()
        .fold(0, |b, (i, s)| if s.1 > scan[b].1 { i } else { b });
    let (d, chromosome) = results.into_iter().nth(best).expect("non-empty scan");
    Ok(TranslationResult {
        period_m: d as f64 * sc.grid_len(),
        period_cells: d,
        chromosome,
        scan,
    })
}
