//! JSON result documents.
//!
//! A result embeds the scenario text and the config echo, so it can be
//! re-evaluated on its own: the realizations are re-sampled from the stored
//! seed and the metrics come out bit-identical.

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::evolve::{Chromosome, Termination};
use crate::grid::{Cell, Scenario};
use crate::model::Problem;
use crate::pipeline::{problem_for, Outcome, StageRecord, SymmetryReport};
use crate::visibility::Gene;

/// A gene as stored on disk, with the orientation in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneDoc {
    pub x: usize,
    pub y: usize,
    pub phi_deg: f64,
}

impl GeneDoc {
    pub fn from_gene(g: &Gene) -> Self {
        GeneDoc {
            x: g.x,
            y: g.y,
            phi_deg: g.phi.to_degrees(),
        }
    }

    /// The gene on `p`, with the orientation snapped to the nearest candidate.
    pub fn to_gene(&self, p: &Problem) -> Result<Gene> {
        let invalid = Error::InvalidGene {
            x: self.x as i64,
            y: self.y as i64,
        };
        let sc = p.scenario();
        if !sc.in_bounds(self.x as i64, self.y as i64) {
            return Err(invalid);
        }
        let c = Cell::new(self.x, self.y);
        if !sc.is_free(c) {
            return Err(invalid);
        }
        let phi = p.snap(c, self.phi_deg.to_radians()).ok_or(invalid)?;
        Ok(Gene::new(self.x, self.y, phi))
    }
}

pub fn gene_docs(genes: &[Gene]) -> Vec<GeneDoc> {
    genes.iter().map(GeneDoc::from_gene).collect()
}

pub fn genes_from_docs(docs: &[GeneDoc], p: &Problem) -> Result<Vec<Gene>> {
    docs.iter().map(|d| d.to_gene(p)).collect()
}

/// Metrics of one placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fitness: f64,
    pub c: f64,
    pub c_eff: Option<f64>,
    pub n_sens: usize,
    pub priority_satisfied: bool,
}

impl Evaluation {
    pub fn of(genes: &[Gene], p: &Problem) -> Self {
        let m = p.metrics(genes);
        Evaluation {
            fitness: p.fitness(genes),
            c: m.c,
            c_eff: m.c_eff,
            n_sens: m.n_sens,
            priority_satisfied: p.priority_satisfied(genes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDoc {
    pub scenario: String,
    pub config: String,
    pub seed: u64,
    pub genes: Vec<GeneDoc>,
    #[serde(flatten)]
    pub evaluation: Evaluation,
    pub stages: Vec<StageRecord>,
    pub generations_run: Option<usize>,
    pub termination: Option<Termination>,
    pub symmetry: Option<SymmetryReport>,
}

impl ResultDoc {
    /// A document for `genes` without any optimization trace.
    pub fn new(scenario: &Scenario, cfg: &Config, p: &Problem, genes: &[Gene]) -> Self {
        ResultDoc {
            scenario: scenario.to_text(),
            config: cfg.to_text(),
            seed: cfg.ga.seed,
            genes: gene_docs(genes),
            evaluation: Evaluation::of(genes, p),
            stages: Vec::new(),
            generations_run: None,
            termination: None,
            symmetry: None,
        }
    }

    pub fn from_outcome(scenario: &Scenario, cfg: &Config, p: &Problem, outcome: &Outcome) -> Self {
        ResultDoc {
            stages: outcome.stages.clone(),
            generations_run: Some(outcome.generations_run),
            termination: Some(outcome.termination),
            symmetry: outcome.symmetry.clone(),
            ..ResultDoc::new(scenario, cfg, p, &outcome.chromosome.genes)
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result documents serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn parse_scenario(&self) -> Result<Scenario> {
        Scenario::parse(&self.scenario)
    }

    pub fn parse_config(&self) -> Result<Config> {
        Config::parse(&self.config)
    }

    /// Rebuilds the problem from the embedded scenario and config and
    /// evaluates the stored genes.
    pub fn reevaluate(&self) -> Result<(Chromosome, Evaluation)> {
        let scenario = self.parse_scenario()?;
        let p = problem_for(&scenario, &self.parse_config()?)?;
        let genes = genes_from_docs(&self.genes, &p)?;
        let ev = Evaluation::of(&genes, &p);
        Ok((Chromosome::new(genes), ev))
    }
}

/// One side of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub c: f64,
    pub c_eff: Option<f64>,
    pub n_sens: usize,
    pub fitness: f64,
}

impl From<&Evaluation> for Summary {
    fn from(e: &Evaluation) -> Self {
        Summary {
            c: e.c,
            c_eff: e.c_eff,
            n_sens: e.n_sens,
            fitness: e.fitness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareDoc {
    pub seed: u64,
    pub pipeline: Summary,
    pub greedy: Summary,
    /// Relative efficiency gain of the pipeline over greedy placement.
    pub c_eff_gain: Option<f64>,
}

impl CompareDoc {
    pub fn new(seed: u64, pipeline: &Evaluation, greedy: &Evaluation) -> Self {
        let c_eff_gain = match (pipeline.c_eff, greedy.c_eff) {
            (Some(a), Some(b)) => Some(a / b - 1.0),
            _ => None,
        };
        CompareDoc {
            seed,
            pipeline: pipeline.into(),
            greedy: greedy.into(),
            c_eff_gain,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("comparison documents serialize");
        s.push('\n');
        s
    }
}
