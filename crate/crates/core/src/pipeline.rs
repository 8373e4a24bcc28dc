//! The staged optimization: genetic search, local search, optional
//! symmetrization or translation-period search, and a final local search.

use serde::{Deserialize, Serialize};

use crate::config::{Config, SymmetryDecl};
use crate::error::Result;
use crate::evolve::{build_problem, greedy_baseline, run_ga_on, Chromosome, Termination};
use crate::grid::Scenario;
use crate::model::Problem;
use crate::refine::local_search;
use crate::symmetry::{default_pattern_breaks, optimize_translation, symmetrize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub fitness: f64,
    pub c: f64,
    pub c_eff: Option<f64>,
    pub n_sens: usize,
}

impl StageRecord {
    pub fn new(stage: &str, chromosome: &Chromosome, p: &Problem) -> Self {
        let m = p.metrics(&chromosome.genes);
        StageRecord {
            stage: stage.to_string(),
            fitness: p.fitness(&chromosome.genes),
            c: m.c,
            c_eff: m.c_eff,
            n_sens: m.n_sens,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub pattern_breaks: usize,
    pub pattern_broken: bool,
    /// Whether the symmetrized solution replaced its input.
    pub accepted: bool,
    pub period_m: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub chromosome: Chromosome,
    pub stages: Vec<StageRecord>,
    pub generations_run: usize,
    pub termination: Termination,
    pub symmetry: Option<SymmetryReport>,
}

/// Builds the problem for `scenario` from the config (seeded realizations,
/// default weights).
pub fn problem_for(scenario: &Scenario, cfg: &Config) -> Result<Problem> {
    build_problem(scenario, &cfg.ga)
}

pub fn optimize(p: &Problem, cfg: &Config) -> Result<Outcome> {
    let ga = run_ga_on(p, &cfg.ga, &mut ())?;
    let mut stages = vec![StageRecord::new("genetic", &ga.best, p)];

    let mut current = local_search(&ga.best, p);
    stages.push(StageRecord::new("local_search", &current, p));

    let mut report = None;
    match cfg.symmetry {
        Some(SymmetryDecl::Group(group)) => {
            let budget = cfg
                .max_pattern_breaks
                .unwrap_or_else(|| default_pattern_breaks(p.scenario()));
            let s = symmetrize(&current, &group, p, budget);
            report = Some(SymmetryReport {
                pattern_breaks: s.pattern_breaks,
                pattern_broken: s.pattern_broken,
                accepted: s.accepted,
                period_m: None,
            });
            current = s.chromosome;
            stages.push(StageRecord::new("symmetrize", &current, p));
        }
        Some(SymmetryDecl::Translation(axis)) => {
            let t = optimize_translation(&current, p, Some(axis))?;
            let before = p.fitness(&current.genes);
            let after = t.chromosome.fitness.unwrap_or(f64::NEG_INFINITY);
            let accepted = after > before;
            if accepted {
                current = t.chromosome;
            }
            report = Some(SymmetryReport {
                accepted,
                period_m: Some(t.period_m),
                ..Default::default()
            });
            stages.push(StageRecord::new("translation", &current, p));
        }
        None => {}
    }

    current = local_search(&current, p);
    stages.push(StageRecord::new("final_local_search", &current, p));

    Ok(Outcome {
        chromosome: current,
        stages,
        generations_run: ga.generations_run,
        termination: ga.termination,
        symmetry: report,
    })
}

/// The greedy baseline on realization 0.
pub fn baseline(p: &Problem) -> Chromosome {
    greedy_baseline(p, 0).evaluated(p)
}
