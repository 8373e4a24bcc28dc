//! Fitness of a sensor configuration and the coverage/efficiency metrics.
//!
//! ```text
//! f = alpha N_cov(1) + beta N_prio - gamma N_sens + delta sum_{n>=2} N_cov(n) / (n - 1)
//! ```
//!
//! `N_cov(n)` counts street cells covered at least `n` times and `N_prio`
//! counts priority cells covered at least twice. With several occlusion
//! realizations the score is the arithmetic mean over realizations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{OcclusionMask, Scenario};
use crate::visibility::{coverage_counts, Gene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessWeights {
    /// Reward per covered street cell.
    pub alpha: f64,
    /// Reward per priority cell covered at least twice.
    pub beta: f64,
    /// Penalty per sensor.
    pub gamma: f64,
    /// Unit reward for overlapping coverage.
    pub delta: f64,
}

impl FitnessWeights {
    /// Checks `beta = alpha - delta`, `alpha > gamma` and `gamma > delta`.
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self> {
        if beta != alpha - delta {
            return Err(Error::InvalidWeights(format!(
                "beta ({beta}) must equal alpha - delta ({})",
                alpha - delta
            )));
        }
        if alpha <= gamma {
            return Err(Error::InvalidWeights(format!(
                "alpha ({alpha}) must exceed gamma ({gamma})"
            )));
        }
        if gamma <= delta {
            return Err(Error::InvalidWeights(format!(
                "gamma ({gamma}) must exceed delta ({delta})"
            )));
        }
        Ok(FitnessWeights {
            alpha,
            beta,
            gamma,
            delta,
        })
    }
}

/// `(2 n_road, 2 n_road - 1, n_road, 1)`.
pub fn default_weights(n_road: usize) -> Result<FitnessWeights> {
    if n_road == 0 {
        return Err(Error::EmptyStreetSet);
    }
    let n = n_road as f64;
    FitnessWeights::new(2.0 * n, 2.0 * n - 1.0, n, 1.0)
}

/// Score of one realization from its `N_cov` table (`ncov[n] = N_cov(n)`).
///
/// Every evaluation path in the crate funnels through here so that
/// incremental and from-scratch evaluation agree bit for bit.
pub fn score(ncov: &[usize], n_prio: usize, n_sens: usize, w: &FitnessWeights) -> f64 {
    let n1 = ncov.get(1).copied().unwrap_or(0);
    let overlap: f64 = ncov
        .iter()
        .enumerate()
        .skip(2)
        .map(|(n, &c)| c as f64 / (n - 1) as f64)
        .sum();
    w.alpha * n1 as f64 + w.beta * n_prio as f64 - w.gamma * n_sens as f64 + w.delta * overlap
}

/// Mean of per-realization scores, summed in realization order.
pub(crate) fn mean(scores: impl Iterator<Item = f64>, count: usize) -> f64 {
    scores.sum::<f64>() / count as f64
}

/// Reference evaluation straight from the geometric kernel.
pub fn evaluate_fitness(
    genes: &[Gene],
    scenario: &Scenario,
    weights: &FitnessWeights,
    masks: &[OcclusionMask],
) -> f64 {
    assert!(!masks.is_empty(), "at least one occlusion mask is required");
    let per_mask = masks.iter().map(|m| {
        let field = coverage_counts(genes, scenario, m);
        let n_prio = scenario
            .street_cells()
            .iter()
            .zip(&field.counts)
            .filter(|(c, &k)| k >= 2 && scenario.is_priority(**c))
            .count();
        score(&field.n_cov_table(), n_prio, genes.len(), weights)
    });
    mean(per_mask, masks.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageMetrics {
    /// Covered fraction of street cells, averaged over realizations.
    pub c: f64,
    /// Street area over deployed wedge area; absent without sensors.
    pub c_eff: Option<f64>,
    pub n_sens: usize,
}

/// `c_eff = n_road l^2 / (n_sens r^2 omega / 2)` with omega in radians.
pub fn efficiency(scenario: &Scenario, n_sens: usize) -> Option<f64> {
    if n_sens == 0 || scenario.n_road() == 0 {
        return None;
    }
    let l = scenario.grid_len();
    Some(scenario.n_road() as f64 * l * l / (n_sens as f64 * scenario.sensor_spec().wedge_area()))
}

pub fn coverage_metrics(
    genes: &[Gene],
    scenario: &Scenario,
    masks: &[OcclusionMask],
) -> Result<CoverageMetrics> {
    if scenario.n_road() == 0 {
        return Err(Error::EmptyStreetSet);
    }
    let n_road = scenario.n_road() as f64;
    let c = mean(
        masks
            .iter()
            .map(|m| coverage_counts(genes, scenario, m).n_cov(1) as f64 / n_road),
        masks.len(),
    );
    Ok(CoverageMetrics {
        c,
        c_eff: efficiency(scenario, genes.len()),
        n_sens: genes.len(),
    })
}
