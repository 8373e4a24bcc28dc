//! Steepest-ascent local search over single-sensor moves.
//!
//! For every sensor the move set is: relocation to any free cell among the
//! twelve cells at Manhattan distance one or two, each tried at the ten
//! candidate orientations closest to the current one; re-orientation in place
//! to the ten closest candidate orientations; and deletion. Each iteration
//! applies the single best move over all sensors, until no move improves the
//! fitness.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::evolve::Chromosome;
use crate::grid::Cell;
use crate::model::Problem;
use crate::visibility::{nearest_angles, Gene};

/// The twelve cells at Manhattan distance one or two.
pub const NEIGHBOUR_OFFSETS: [(i64, i64); 12] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
    (2, 0),
    (-2, 0),
    (0, 2),
    (0, -2),
];

/// Orientations examined per location.
pub const ANGLES_PER_SITE: usize = 10;

/// Replacement for one gene; `None` deletes it.
pub type Replacement = Option<Gene>;

/// Every replacement of `genes[i]` in the move set, in a fixed order:
/// relocations (by offset, then by angular proximity), re-orientations, then
/// deletion.
pub fn move_set(genes: &[Gene], i: usize, p: &Problem) -> Vec<Replacement> {
    let g = genes[i];
    let sc = p.scenario();
    let occupied: HashSet<Cell> = genes
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, g)| g.cell())
        .collect();

    let mut moves = Vec::new();
    for (dx, dy) in NEIGHBOUR_OFFSETS {
        let (x, y) = (g.x as i64 + dx, g.y as i64 + dy);
        if !sc.in_bounds(x, y) {
            continue;
        }
        let c = Cell::new(x as usize, y as usize);
        if !sc.is_free(c) || occupied.contains(&c) {
            continue;
        }
        moves.extend(
            nearest_angles(p.angles(c), g.phi, ANGLES_PER_SITE)
                .into_iter()
                .map(|phi| Some(Gene::new(c.x, c.y, phi))),
        );
    }
    moves.extend(
        nearest_angles(p.angles(g.cell()), g.phi, ANGLES_PER_SITE + 1)
            .into_iter()
            .filter(|&phi| phi != g.phi)
            .take(ANGLES_PER_SITE)
            .map(|phi| Some(Gene::new(g.x, g.y, phi))),
    );
    moves.push(None);
    moves
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestMove {
    pub gene: usize,
    pub replacement: Replacement,
    pub fitness: f64,
}

/// Best move over all sensors that may move, or `None` if no move strictly
/// improves on `current`. Ties go to the lowest gene index, then to the
/// earliest move in [`move_set`] order.
fn best_move(
    genes: &[Gene],
    fps: &[Vec<Vec<u32>>],
    state: &crate::model::CoverageState,
    current: f64,
    p: &Problem,
    movable: &(dyn Fn(&Gene) -> bool + Sync),
) -> Option<BestMove> {
    let per_gene: Vec<Option<BestMove>> = (0..genes.len())
        .into_par_iter()
        .map(|i| {
            if !movable(&genes[i]) {
                return None;
            }
            let mut st = state.clone();
            st.remove_footprints(p, &fps[i]);
            let mut best: Option<BestMove> = None;
            for replacement in move_set(genes, i, p) {
                let f = match replacement {
                    Some(ng) => {
                        let nf = p.footprints(&ng);
                        st.add_footprints(p, &nf);
                        let f = st.fitness(p);
                        st.remove_footprints(p, &nf);
                        f
                    }
                    None => st.fitness(p),
                };
                if f > current && best.is_none_or(|b| f > b.fitness) {
                    best = Some(BestMove {
                        gene: i,
                        replacement,
                        fitness: f,
                    });
                }
            }
            best
        })
        .collect();
    per_gene.into_iter().flatten().fold(None, |acc: Option<BestMove>, m| match acc {
        Some(a) if a.fitness >= m.fitness => Some(a),
        _ => Some(m),
    })
}

#[derive(Debug, Clone)]
pub struct LocalSearchOutcome {
    pub chromosome: Chromosome,
    pub moves_applied: usize,
}

pub fn local_search(chromosome: &Chromosome, p: &Problem) -> Chromosome {
    local_search_where(chromosome, p, &|_| true).chromosome
}

/// Local search in which only genes accepted by `movable` are varied.
pub fn local_search_where(
    chromosome: &Chromosome,
    p: &Problem,
    movable: &(dyn Fn(&Gene) -> bool + Sync),
) -> LocalSearchOutcome {
    let mut genes = chromosome.genes.clone();
    let mut fps: Vec<Vec<Vec<u32>>> = genes.iter().map(|g| p.footprints(g)).collect();
    let mut state = p.state(&genes);
    let mut current = state.fitness(p);
    let mut moves_applied = 0;

    while let Some(m) = best_move(&genes, &fps, &state, current, p, movable) {
        state.remove_footprints(p, &fps[m.gene]);
        match m.replacement {
            Some(ng) => {
                let nf = p.footprints(&ng);
                state.add_footprints(p, &nf);
                genes[m.gene] = ng;
                fps[m.gene] = nf;
            }
            None => {
                genes.remove(m.gene);
                fps.remove(m.gene);
            }
        }
        current = state.fitness(p);
        debug_assert_eq!(current, m.fitness);
        moves_applied += 1;
    }

    LocalSearchOutcome {
        chromosome: Chromosome {
            genes,
            fitness: Some(current),
        },
        moves_applied,
    }
}

/// First strictly improving move found by full re-evaluation, if any.
pub fn find_improving_move(chromosome: &Chromosome, p: &Problem) -> Option<(usize, Replacement)> {
    let genes = &chromosome.genes;
    let current = p.fitness(genes);
    (0..genes.len()).find_map(|i| {
        move_set(genes, i, p).into_iter().find_map(|r| {
            let mut trial = genes.clone();
            match r {
                Some(ng) => trial[i] = ng,
                None => {
                    trial.remove(i);
                }
            }
            (p.fitness(&trial) > current).then_some((i, r))
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::default_weights;
    use crate::grid::{OcclusionMask, Scenario};

    fn problem() -> Problem {
        let s = Scenario::parse(
            "grid_len=1\nsensor_range=7\nsensor_fov_deg=60\n\
             ............\n\
             SSSSSSSSSSSS\n\
             SSSSSSSSSSSS\n\
             ............\n",
        )
        .unwrap();
        let w = default_weights(s.n_road()).unwrap();
        Problem::new(s, vec![OcclusionMask::clear()], w).unwrap()
    }

    #[test]
    fn move_set_shape() {
        let p = problem();
        let g = Gene::new(5, 0, p.angles(Cell::new(5, 0))[3]);
        let moves = move_set(&[g], 0, &p);
        // (±1,0), (±2,0) are free; everything else is street or out of bounds
        assert_eq!(moves.len(), 4 * ANGLES_PER_SITE + ANGLES_PER_SITE + 1);
        assert_eq!(moves.last(), Some(&None));
    }

    #[test]
    fn redundant_duplicate_is_deleted() {
        let p = problem();
        let c = Cell::new(0, 0);
        let g = Gene::new(0, 0, p.snap(c, 0.5).unwrap());
        let twin = Gene::new(1, 0, p.snap(Cell::new(1, 0), 0.5).unwrap());
        // a twin one cell over sees nothing the first sensor does not see
        let with_twin = Chromosome::new(vec![g, twin]);
        let out = local_search(&with_twin, &p);
        assert!(out.fitness.unwrap() >= p.fitness(&with_twin.genes));
        assert!(find_improving_move(&out, &p).is_none());
    }

    #[test]
    fn local_optimum_is_fixed_point() {
        let p = problem();
        let start = Chromosome::new(vec![Gene::new(2, 0, p.snap(Cell::new(2, 0), 0.6).unwrap())]);
        let once = local_search(&start, &p);
        let again = local_search_where(&once, &p, &|_| true);
        assert_eq!(again.moves_applied, 0);
        assert_eq!(again.chromosome.genes, once.genes);
    }

    #[test]
    fn deletion_gain_is_gamma() {
        let p = problem();
        let g = Gene::new(3, 3, p.snap(Cell::new(3, 3), -0.6).unwrap());
        // facing straight out of the map, so it covers nothing
        let blind = Gene::new(0, 3, std::f64::consts::PI);
        assert!(p.footprint(&blind, 0).is_empty());
        let base = p.fitness(&[g]);
        let with_blind = p.fitness(&[g, blind]);
        assert_eq!(base - with_blind, p.weights().gamma);
        let out = local_search(&Chromosome::new(vec![g, blind]), &p);
        assert!(out.fitness.unwrap() >= base);
        assert!(!out.genes.contains(&blind));
    }
}
