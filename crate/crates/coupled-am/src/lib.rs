//! Coupled neural associative memories: overlapping clusters of pattern
//! neurons arranged in coupled planes, message-passing recall, and the
//! density-evolution machinery that predicts the noise thresholds of the
//! constrained and unconstrained systems.
//!
//! Modules:
//! - [`poly`] — edge-perspective degree-distribution polynomials
//! - [`de`] — scalar/coupled density evolution, potentials, thresholds
//! - [`topology`] — sliding-window cluster geometry over 2D grids
//! - [`memory`] — subspace dataset synthesis and cluster weight matrices
//! - [`recall`] — intra-cluster correction and the sequential coupled sweep
//! - [`montecarlo`] — pattern-error-rate experiments with Wilson intervals
//! - [`manifest`] — reproducibility manifests for the CLI

pub mod de;
pub mod error;
pub mod exact;
pub mod manifest;
pub mod memory;
pub mod montecarlo;
pub mod poly;
pub mod recall;
pub mod rng;
pub mod topology;

pub use de::{
    de_step_coupled, de_step_matrix, de_step_scalar, energy_gap, f_func, g_func, potential_scalar,
    sufficient_coupling, threshold_coupled, threshold_uncoupled, thresholds, CouplingOperator,
    DEModel, EnergyGap, ErrorProfile, Mode, Thresholds,
};
pub use error::{Error, Result};
pub use memory::{
    build_dataset, build_generator, enumerate_patterns, null_space_weights, random_weights,
    ClusterWeights, GeneratorSpec, PatternState, StoredDataset, WeightMode, WeightsBundle,
};
pub use montecarlo::{run_plan, Architecture, ExperimentPlan, PERPoint, PERResult};
pub use poly::{default_dist, Convention, DistFile, EdgePolynomial};
pub use recall::{cluster_correct, coupled_correct, inject_noise, RecallConfig, VisitRecord};
pub use topology::{build_topology, edge_degree_distribution, CoupledTopology, GridSpec};
