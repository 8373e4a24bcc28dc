//! Genetic search over sensor configurations.
//!
//! A generation pairs the population at random, breeds one child per pair by
//! sequential gene ranking, mutates the whole pool, and resizes it back to `N`
//! by keeping the fittest tenth, injecting fresh random chromosomes and filling
//! the rest by roulette-wheel selection. The search stops once the best
//! fitness has not changed for `stall_generations` generations.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitness::default_weights;
use crate::grid::{sample_occlusion_masks, Cell, Scenario};
use crate::model::Problem;
use crate::rng::{self, purpose, Stream};
use crate::visibility::Gene;

/// One candidate placement. Positions are unique within a chromosome.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Chromosome {
    pub genes: Vec<Gene>,
    #[serde(skip)]
    pub fitness: Option<f64>,
}

impl Chromosome {
    pub fn new(genes: Vec<Gene>) -> Self {
        Chromosome {
            genes,
            fitness: None,
        }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn has_unique_positions(&self) -> bool {
        let mut seen = HashSet::new();
        self.genes.iter().all(|g| seen.insert(g.cell()))
    }

    pub fn evaluate(&mut self, p: &Problem) -> f64 {
        *self.fitness.get_or_insert_with(|| p.fitness(&self.genes))
    }

    pub fn evaluated(mut self, p: &Problem) -> Self {
        self.evaluate(p);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub p_mut: f64,
    pub p_cross: f64,
    pub p_div: f64,
    pub stall_generations: usize,
    pub max_generations: usize,
    /// Hard cap on genes per chromosome; derived from the scenario when unset.
    pub max_sensors: Option<usize>,
    pub seed: u64,
    pub mask_count: usize,
    pub sigma_pos_cells: f64,
    pub sigma_ang_rad: f64,
    pub p_add_gene: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 150,
            p_mut: 0.1,
            p_cross: 1.0,
            p_div: 0.3,
            stall_generations: 5,
            max_generations: 500,
            max_sensors: None,
            seed: 0,
            mask_count: 4,
            sigma_pos_cells: 2.0,
            sigma_ang_rad: 0.26,
            p_add_gene: 0.1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_mut", self.p_mut),
            ("p_cross", self.p_cross),
            ("p_div", self.p_div),
            ("p_add_gene", self.p_add_gene),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.population_size < 2 {
            return Err(Error::Config("population_size must be at least 2".into()));
        }
        if self.mask_count == 0 || self.mask_count > crate::model::MAX_MASKS {
            return Err(Error::Config(format!(
                "mask_count must lie in [1, {}]",
                crate::model::MAX_MASKS
            )));
        }
        if !(self.sigma_pos_cells >= 0.0 && self.sigma_ang_rad >= 0.0) {
            return Err(Error::Config("mutation widths must be non-negative".into()));
        }
        Ok(())
    }

    /// Effective gene cap for `scenario`.
    pub fn sensor_cap(&self, scenario: &Scenario) -> usize {
        self.max_sensors
            .unwrap_or_else(|| 4 * wedge_lower_bound(scenario))
            .max(1)
    }

    /// Number of chromosomes carried over unchanged (the fittest tenth).
    pub fn n_top(&self) -> usize {
        self.population_size.div_ceil(10).max(1)
    }

    /// Number of fresh random chromosomes injected per generation.
    pub fn n_fresh(&self) -> usize {
        ((self.p_div * self.population_size as f64).round() as usize)
            .min(self.population_size - self.n_top())
    }
}

/// Sensor count needed if every wedge covered only street area without
/// overlap: `ceil(n_road l^2 / (r^2 omega / 2))`.
pub fn wedge_lower_bound(scenario: &Scenario) -> usize {
    let l = scenario.grid_len();
    let area = scenario.n_road() as f64 * l * l;
    (area / scenario.sensor_spec().wedge_area()).ceil().max(1.0) as usize
}

/// A fresh chromosome: a uniform gene count in `[1, 3 x lower bound]`, each
/// gene on a distinct uniformly drawn free cell with a uniformly drawn
/// candidate orientation.
pub fn random_chromosome(p: &Problem, cfg: &GaConfig, rng: &mut Stream) -> Chromosome {
    let sc = p.scenario();
    let free = sc.free_cells();
    let upper = (3 * wedge_lower_bound(sc))
        .min(cfg.sensor_cap(sc))
        .min(free.len())
        .max(1);
    let count = rng.random_range(1..=upper);
    let genes = rand::seq::index::sample(rng, free.len(), count)
        .into_iter()
        .filter_map(|i| random_gene_at(p, free[i], rng))
        .collect();
    Chromosome::new(genes)
}

fn random_gene_at(p: &Problem, c: Cell, rng: &mut Stream) -> Option<Gene> {
    let angles = p.angles(c);
    (!angles.is_empty()).then(|| Gene::new(c.x, c.y, angles[rng.random_range(0..angles.len())]))
}

pub fn init_population(p: &Problem, cfg: &GaConfig) -> Result<Vec<Chromosome>> {
    if p.scenario().free_cells().is_empty() {
        return Err(Error::NoFreeCells);
    }
    if p.scenario().n_road() == 0 {
        return Err(Error::EmptyStreetSet);
    }
    Ok((0..cfg.population_size)
        .map(|i| {
            let mut s = rng::stream(cfg.seed, &[purpose::INIT, i as u64]);
            random_chromosome(p, cfg, &mut s)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct RankKey {
    new_cells: usize,
    in_range: usize,
}

fn count_uncovered(fp: &[u32], uncovered: &[bool]) -> usize {
    fp.iter().filter(|&&s| uncovered[s as usize]).count()
}

/// Orders genes by the number of still-uncovered street cells they cover,
/// then by street cells in range of their position, then by `(y, x, phi)`.
pub fn rank_genes(genes: &[Gene], uncovered: &[bool], p: &Problem, mask: usize) -> Vec<Gene> {
    let mut keyed: Vec<(RankKey, Gene)> = genes
        .iter()
        .map(|g| {
            let key = RankKey {
                new_cells: count_uncovered(&p.footprint(g, mask), uncovered),
                in_range: p.cells_in_range(g.cell()),
            };
            (key, *g)
        })
        .collect();
    keyed.sort_by(|(ka, ga), (kb, gb)| kb.cmp(ka).then(ga.tie_order(gb)));
    keyed.into_iter().map(|(_, g)| g).collect()
}

/// Record of one crossover: genes in the order they entered the child with
/// the number of new cells each contributed, and contributing genes that were
/// skipped because their position was already taken.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrossoverTrace {
    pub picks: Vec<(Gene, usize)>,
    pub position_conflicts: Vec<(Gene, usize)>,
}

/// Breeds one child by sequential gene ranking over the combined parent genes.
pub fn crossover(
    a: &Chromosome,
    b: &Chromosome,
    p: &Problem,
    mask: usize,
) -> (Chromosome, CrossoverTrace) {
    let mut pool: Vec<(Gene, Vec<u32>, usize)> = a
        .genes
        .iter()
        .chain(&b.genes)
        .map(|g| (*g, p.footprint(g, mask), p.cells_in_range(g.cell())))
        .collect();
    let mut uncovered = vec![true; p.scenario().n_road()];
    let mut occupied = HashSet::new();
    let mut child = Vec::new();
    let mut trace = CrossoverTrace::default();

    loop {
        let best = pool
            .iter()
            .enumerate()
            .map(|(i, (g, fp, ir))| {
                let key = RankKey {
                    new_cells: count_uncovered(fp, &uncovered),
                    in_range: *ir,
                };
                (i, key, g)
            })
            .max_by(|(_, ka, ga), (_, kb, gb)| ka.cmp(kb).then(gb.tie_order(ga)));
        let Some((i, key, _)) = best else { break };
        if key.new_cells == 0 {
            break;
        }
        let (gene, fp, _) = pool.swap_remove(i);
        if !occupied.insert(gene.cell()) {
            trace.position_conflicts.push((gene, key.new_cells));
            continue;
        }
        for &s in &fp {
            uncovered[s as usize] = false;
        }
        trace.picks.push((gene, key.new_cells));
        child.push(gene);
    }
    (Chromosome::new(child), trace)
}

/// Gaussian mutation. Each gene mutates with probability `p_mut`; a mutating
/// gene is moved, turned or deleted with equal probability. Afterwards one
/// random gene is appended with probability `p_add_gene`. Returns the mutant
/// and the number of genes that mutated.
pub fn mutate(
    chromosome: &Chromosome,
    p: &Problem,
    cfg: &GaConfig,
    rng: &mut Stream,
) -> (Chromosome, usize) {
    let sc = p.scenario();
    let pos_noise = Normal::new(0.0, cfg.sigma_pos_cells).expect("finite sigma");
    let ang_noise = Normal::new(0.0, cfg.sigma_ang_rad).expect("finite sigma");
    let mut occupied: HashSet<Cell> = chromosome.genes.iter().map(|g| g.cell()).collect();
    let mut genes = Vec::with_capacity(chromosome.genes.len() + 1);
    let mut mutated = 0;

    for g in &chromosome.genes {
        if rng.random::<f64>() >= cfg.p_mut {
            genes.push(*g);
            continue;
        }
        mutated += 1;
        match rng.random_range(0..3u8) {
            0 => {
                let dx = pos_noise.sample(rng).round() as i64;
                let dy = pos_noise.sample(rng).round() as i64;
                let tx = (g.x as i64 + dx).clamp(0, sc.width() as i64 - 1);
                let ty = (g.y as i64 + dy).clamp(0, sc.height() as i64 - 1);
                occupied.remove(&g.cell());
                let target = Cell::new(tx as usize, ty as usize);
                let moved = nearest_free(p, target, &occupied)
                    .and_then(|c| p.snap(c, g.phi).map(|phi| Gene::new(c.x, c.y, phi)))
                    .unwrap_or(*g);
                occupied.insert(moved.cell());
                genes.push(moved);
            }
            1 => {
                let phi = p.snap(g.cell(), g.phi + ang_noise.sample(rng)).unwrap_or(g.phi);
                genes.push(Gene::new(g.x, g.y, phi));
            }
            _ => {
                occupied.remove(&g.cell());
            }
        }
    }

    if rng.random::<f64>() < cfg.p_add_gene && genes.len() < cfg.sensor_cap(sc) {
        let open: Vec<Cell> = sc
            .free_cells()
            .iter()
            .copied()
            .filter(|c| !occupied.contains(c))
            .collect();
        if !open.is_empty() {
            let c = open[rng.random_range(0..open.len())];
            if let Some(g) = random_gene_at(p, c, rng) {
                genes.push(g);
            }
        }
    }
    (Chromosome::new(genes), mutated)
}

/// Closest free cell to `target` not in `occupied`; ties go to the first cell
/// in row-major order.
fn nearest_free(p: &Problem, target: Cell, occupied: &HashSet<Cell>) -> Option<Cell> {
    p.scenario()
        .free_cells()
        .iter()
        .filter(|c| !occupied.contains(c))
        .min_by_key(|c| c.dist2(target))
        .copied()
}

/// Resizes an evaluated pool to `N`: the fittest tenth (which contains the
/// best chromosome), `round(p_div N)` fresh chromosomes, and roulette-wheel
/// draws for the remainder. Roulette weights are fitness shifted by
/// `1 - min fitness` so that every weight is at least one.
pub fn select_next_generation(
    pool: &[Chromosome],
    p: &Problem,
    cfg: &GaConfig,
    generation: u64,
) -> Result<Vec<Chromosome>> {
    let n = cfg.population_size;
    if pool.len() < n {
        return Err(Error::PoolTooSmall {
            pool: pool.len(),
            needed: n,
        });
    }
    let fit: Vec<f64> = pool
        .iter()
        .enumerate()
        .map(|(i, c)| c.fitness.ok_or(Error::Unevaluated(i)))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&i, &j| fit[j].total_cmp(&fit[i]).then(i.cmp(&j)));

    let mut next: Vec<Chromosome> = order[..cfg.n_top()].iter().map(|&i| pool[i].clone()).collect();
    for j in 0..cfg.n_fresh() {
        let mut s = rng::stream(cfg.seed, &[purpose::FRESH, generation, j as u64]);
        next.push(random_chromosome(p, cfg, &mut s));
    }

    let min = fit.iter().copied().fold(f64::INFINITY, f64::min);
    let wheel = WeightedIndex::new(fit.iter().map(|f| f - min + 1.0))
        .map_err(|e| Error::Config(format!("roulette weights: {e}")))?;
    let mut s = rng::stream(cfg.seed, &[purpose::ROULETTE, generation]);
    while next.len() < n {
        next.push(pool[wheel.sample(&mut s)].clone());
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub best: f64,
    pub mean: f64,
    pub population: usize,
    pub pool: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Stalled,
    MaxGenerations,
}

#[derive(Debug, Clone)]
pub struct GaResult {
    pub best: Chromosome,
    /// Entry 0 describes the initial population.
    pub history: Vec<GenerationStats>,
    pub generations_run: usize,
    pub seed: u64,
    pub termination: Termination,
}

/// Hooks into a running search, used by diagnostics and tests.
pub trait GaObserver {
    fn on_crossover(
        &mut self,
        _a: &Chromosome,
        _b: &Chromosome,
        _child: &Chromosome,
        _trace: &CrossoverTrace,
        _mask: usize,
    ) {
    }

    fn on_generation(&mut self, _generation: usize, _population: &[Chromosome]) {}
}

impl GaObserver for () {}

/// Builds the problem (realizations drawn from the config seed, default
/// weights) and runs the search.
pub fn run_ga(scenario: &Scenario, cfg: &GaConfig) -> Result<GaResult> {
    let p = build_problem(scenario, cfg)?;
    run_ga_on(&p, cfg, &mut ())
}

pub fn build_problem(scenario: &Scenario, cfg: &GaConfig) -> Result<Problem> {
    cfg.validate()?;
    let weights = default_weights(scenario.n_road())?;
    let masks = sample_occlusion_masks(scenario, cfg.seed, cfg.mask_count);
    Problem::new(scenario.clone(), masks, weights)
}

fn evaluate_all(pop: &mut [Chromosome], p: &Problem) {
    pop.par_iter_mut().for_each(|c| {
        c.evaluate(p);
    });
}

fn best_of(pop: &[Chromosome]) -> &Chromosome {
    pop.iter()
        .reduce(|best, c| {
            if c.fitness.unwrap_or(f64::NEG_INFINITY) > best.fitness.unwrap_or(f64::NEG_INFINITY) {
                c
            } else {
                best
            }
        })
        .expect("non-empty population")
}

fn stats(pop: &[Chromosome], pool: usize) -> GenerationStats {
    let best = best_of(pop).fitness.unwrap_or(f64::NEG_INFINITY);
    let mean = pop.iter().filter_map(|c| c.fitness).sum::<f64>() / pop.len() as f64;
    GenerationStats {
        best,
        mean,
        population: pop.len(),
        pool,
    }
}

pub fn run_ga_on(p: &Problem, cfg: &GaConfig, observer: &mut dyn GaObserver) -> Result<GaResult> {
    cfg.validate()?;
    let mut pop = init_population(p, cfg)?;
    evaluate_all(&mut pop, p);
    let mut elite = best_of(&pop).clone();
    let mut history = vec![stats(&pop, pop.len())];
    observer.on_generation(0, &pop);

    let mut stall = 0;
    let mut generation = 0;
    let mut termination = Termination::MaxGenerations;

    while generation < cfg.max_generations {
        generation += 1;
        let g = generation as u64;

        let mut pairing = rng::stream(cfg.seed, &[purpose::PAIRING, g]);
        let mut idx: Vec<usize> = (0..pop.len()).collect();
        idx.shuffle(&mut pairing);
        let pairs: Vec<(usize, usize, usize)> = idx
            .chunks_exact(2)
            .enumerate()
            .filter(|_| pairing.random::<f64>() < cfg.p_cross)
            .map(|(k, ab)| (ab[0], ab[1], k % p.n_masks()))
            .collect();
        let children: Vec<(Chromosome, CrossoverTrace)> = pairs
            .par_iter()
            .map(|&(a, b, mask)| crossover(&pop[a], &pop[b], p, mask))
            .collect();
        for (&(a, b, mask), (child, trace)) in pairs.iter().zip(&children) {
            observer.on_crossover(&pop[a], &pop[b], child, trace, mask);
        }

        let mut pool: Vec<Chromosome> = pop
            .iter()
            .cloned()
            .chain(children.into_iter().map(|(c, _)| c))
            .collect();
        pool = pool
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let mut s = rng::stream(cfg.seed, &[purpose::MUTATE, g, i as u64]);
                mutate(c, p, cfg, &mut s).0
            })
            .collect();
        pool.push(elite.clone());
        evaluate_all(&mut pool, p);
        let pool_size = pool.len();

        pop = select_next_generation(&pool, p, cfg, g)?;
        evaluate_all(&mut pop, p);
        observer.on_generation(generation, &pop);

        let prev_best = elite.fitness.expect("elite evaluated");
        let current = best_of(&pop).clone();
        history.push(stats(&pop, pool_size));
        if current.fitness == Some(prev_best) {
            stall += 1;
        } else {
            stall = 0;
        }
        if current.fitness > Some(prev_best) {
            elite = current;
        }
        if stall >= cfg.stall_generations {
            termination = Termination::Stalled;
            break;
        }
    }

    Ok(GaResult {
        best: elite,
        history,
        generations_run: generation,
        seed: cfg.seed,
        termination,
    })
}

/// Deterministic greedy placement: repeatedly adds the gene (over every free
/// cell and candidate orientation) covering the most uncovered street cells,
/// ties broken by street cells in range and then by `(y, x, phi)`, until no
/// gene adds coverage.
///
/// Gains only shrink as cells get covered, so stale heap keys are upper
/// bounds and a popped entry whose refreshed key still beats the heap top is
/// the exact maximum.
pub fn greedy_baseline(p: &Problem, mask: usize) -> Chromosome {
    let sc = p.scenario();
    let free = sc.free_cells();
    let mut uncovered = vec![true; sc.n_road()];

    type Key = (usize, usize, Reverse<(usize, usize)>);
    let initial: Vec<Key> = free
        .par_iter()
        .enumerate()
        .flat_map_iter(|(si, &c)| {
            let ir = p.cells_in_range(c);
            p.angles(c)
                .iter()
                .enumerate()
                .map(move |(ai, &phi)| (si, ai, phi, ir, c))
                .collect::<Vec<_>>()
        })
        .map(|(si, ai, phi, ir, c)| {
            let gain = p.footprint(&Gene::new(c.x, c.y, phi), mask).len();
            (gain, ir, Reverse((si, ai)))
        })
        .filter(|k| k.0 > 0)
        .collect();
    let mut heap: BinaryHeap<Key> = initial.into();

    let mut genes = Vec::new();
    let mut used: HashSet<usize> = HashSet::new();
    while let Some((_, ir, Reverse((si, ai)))) = heap.pop() {
        if used.contains(&si) {
            continue;
        }
        let c = free[si];
        let gene = Gene::new(c.x, c.y, p.angles(c)[ai]);
        let fp = p.footprint(&gene, mask);
        let gain = count_uncovered(&fp, &uncovered);
        if gain == 0 {
            continue;
        }
        let key = (gain, ir, Reverse((si, ai)));
        if heap.peek().is_some_and(|top| key.cmp(top) == Ordering::Less) {
            heap.push(key);
            continue;
        }
        for s in fp {
            uncovered[s as usize] = false;
        }
        used.insert(si);
        genes.push(gene);
    }
    Chromosome::new(genes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::OcclusionMask;

    fn problem(text: &str) -> Problem {
        let s = Scenario::parse(text).unwrap();
        let w = default_weights(s.n_road())
            .unwrap_or_else(|_| crate::fitness::FitnessWeights::new(4.0, 3.0, 2.0, 1.0).unwrap());
        Problem::new(s, vec![OcclusionMask::clear()], w).unwrap()
    }

    fn road() -> Problem {
        problem(
            "grid_len=1\nsensor_range=8\nsensor_fov_deg=60\n\
             ..............\n\
             SSSSSSSSSSSSSS\n\
             SSSSSSSSSSSSSS\n\
             ..............\n",
        )
    }

    #[test]
    fn population_size_and_determinism() {
        let p = road();
        let cfg = GaConfig {
            seed: 4,
            ..GaConfig::default()
        };
        let a = init_population(&p, &cfg).unwrap();
        assert_eq!(a.len(), 150);
        assert_eq!(a, init_population(&p, &cfg).unwrap());
        assert!(a.iter().all(|c| c.has_unique_positions() && p.is_valid(&c.genes)));
    }

    #[test]
    fn single_free_cell_gives_single_gene() {
        let p = problem("grid_len=1\nsensor_range=8\nsensor_fov_deg=60\n#.#\nSSS\n");
        let pop = init_population(&p, &GaConfig::default()).unwrap();
        assert!(pop.iter().all(|c| c.len() == 1));
    }

    #[test]
    fn no_free_cells_is_an_error() {
        let p = problem("grid_len=1\nsensor_range=8\nsensor_fov_deg=60\n###\nSSS\n");
        assert!(matches!(init_population(&p, &GaConfig::default()), Err(Error::NoFreeCells)));
    }

    #[test]
    fn rank_primary_then_secondary() {
        let p = road();
        let uncovered = vec![true; p.scenario().n_road()];
        let a = Gene::new(0, 0, 0.0);
        let b = Gene::new(6, 0, p.snap(Cell::new(6, 0), 1.2).unwrap());
        let ranked = rank_genes(&[a, b], &uncovered, &p, 0);
        let cover = |g: &Gene| p.footprint(g, 0).len();
        assert!(cover(&ranked[0]) >= cover(&ranked[1]));

        // nothing left to cover: order by cells in range, then position
        let none = vec![false; p.scenario().n_road()];
        let corner = Gene::new(0, 0, 0.0);
        let middle = Gene::new(7, 0, 0.0);
        let ranked = rank_genes(&[corner, middle], &none, &p, 0);
        assert_eq!(ranked[0], middle);
    }

    #[test]
    fn crossover_of_blind_parents_is_empty() {
        let p = problem("grid_len=1\nsensor_range=3\nsensor_fov_deg=60\n.#....\n##....\n....SS\n");
        let g = Gene::new(0, 0, p.angles(Cell::new(0, 0))[0]);
        let blind = Chromosome::new(vec![g]);
        let (child, trace) = crossover(&blind, &blind, &p, 0);
        assert!(child.is_empty());
        assert!(trace.picks.is_empty());
    }

    #[test]
    fn zero_mutation_is_identity() {
        let p = road();
        let cfg = GaConfig {
            p_mut: 0.0,
            p_add_gene: 0.0,
            ..GaConfig::default()
        };
        let c = init_population(&p, &cfg).unwrap().remove(0);
        let (m, k) = mutate(&c, &p, &cfg, &mut rng::stream(1, &[]));
        assert_eq!((m.genes, k), (c.genes, 0));
    }

    #[test]
    fn deletion_can_empty_a_chromosome() {
        let p = road();
        let cfg = GaConfig {
            p_mut: 1.0,
            p_add_gene: 0.0,
            ..GaConfig::default()
        };
        let c = Chromosome::new(vec![Gene::new(3, 0, p.angles(Cell::new(3, 0))[0])]);
        let emptied = (0..200u64).any(|s| mutate(&c, &p, &cfg, &mut rng::stream(s, &[])).0.is_empty());
        assert!(emptied);
    }

    #[test]
    fn mutation_rate_is_per_gene() {
        let p = road();
        let cfg = GaConfig {
            p_add_gene: 0.0,
            ..GaConfig::default()
        };
        let c = init_population(&p, &GaConfig { seed: 3, ..cfg.clone() }).unwrap().remove(0);
        let mut genes = 0;
        let mut mutated = 0;
        let mut s = rng::stream(77, &[]);
        while genes < 10_000 {
            let (m, k) = mutate(&c, &p, &cfg, &mut s);
            assert!(m.has_unique_positions());
            genes += c.len();
            mutated += k;
        }
        let frac = mutated as f64 / genes as f64;
        assert!((frac - 0.1).abs() <= 0.01, "mutated fraction {frac}");
    }

    #[test]
    fn selection_keeps_best_and_injects_fresh() {
        let p = road();
        let cfg = GaConfig::default();
        let mut pool = init_population(&p, &GaConfig { population_size: 225, ..cfg.clone() }).unwrap();
        evaluate_all(&mut pool, &p);
        let best = best_of(&pool).clone();
        let next = select_next_generation(&pool, &p, &cfg, 1).unwrap();
        assert_eq!(next.len(), 150);
        assert_eq!(cfg.n_fresh(), 45);
        assert!(next.contains(&best));
        let fresh = next.iter().filter(|c| c.fitness.is_none()).count();
        assert_eq!(fresh, 45);
        assert!(matches!(
            select_next_generation(&pool[..100], &p, &cfg, 1),
            Err(Error::PoolTooSmall { .. })
        ));
    }

    #[test]
    fn greedy_places_single_sensor_for_single_cell() {
        let p = problem("grid_len=1\nsensor_range=5\nsensor_fov_deg=40\n#.#\n#B#\n#S#\n");
        let g = greedy_baseline(&p, 0);
        assert_eq!(g.len(), 1);
        assert_eq!(p.metrics(&g.genes).c, 1.0);
    }

    #[test]
    fn greedy_on_hidden_street_is_empty() {
        let p = problem("grid_len=1\nsensor_range=5\nsensor_fov_deg=40\n...\n###\nSSS\n");
        let g = greedy_baseline(&p, 0);
        assert!(g.is_empty());
        assert_eq!(p.metrics(&g.genes).c, 0.0);
    }

    #[test]
    fn small_blob_reaches_full_coverage() {
        let s = Scenario::parse(
            "grid_len=1\nsensor_range=30\nsensor_fov_deg=90\n.......\n.......\n..SSS..\n..SSS..\n..SSS..\n.......\n",
        )
        .unwrap();
        let cfg = GaConfig {
            population_size: 40,
            seed: 1,
            ..GaConfig::default()
        };
        let r = run_ga(&s, &cfg).unwrap();
        let p = build_problem(&s, &cfg).unwrap();
        assert_eq!(p.metrics(&r.best.genes).c, 1.0);
        assert!(r.history.windows(2).all(|w| w[1].best >= w[0].best));
    }
}
