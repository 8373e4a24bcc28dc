//! Placement optimization for directional roadside sensors on 2D grid maps.
//!
//! The pipeline runs a genetic search over sensor configurations, refines the
//! best configuration by steepest-ascent local search, optionally exploits a
//! declared map symmetry, and can stitch optimized fragments into large maps.

pub mod config;
pub mod error;
pub mod evolve;
pub mod fitness;
pub mod grid;
pub mod model;
pub mod pipeline;
pub mod refine;
pub mod render;
pub mod result;
pub mod rng;
pub mod stitch;
pub mod symmetry;
pub mod visibility;

pub use error::{Error, Result};
pub use fitness::{CoverageMetrics, FitnessWeights};
pub use grid::{Cell, CellTag, OcclusionMask, Scenario, SensorSpec};
pub use model::Problem;
pub use visibility::Gene;
