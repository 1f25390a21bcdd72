//! Simulation and estimation laboratory for sublinear preferential
//! attachment (PA) trees.
//!
//! A PA tree grows one node at a time: each arriving node links to an
//! existing node `v` with probability `f(deg v) / Σ_u f(deg u)` for a
//! user supplied attachment function `f`. This crate provides
//!
//! * [`pa_model`]: attachment functions, degree censuses, snapshots and logs,
//! * [`sampler`]: an `O(log D)` degree-class sampler for the attachment step,
//! * [`generator`]: the discrete growth chain,
//! * [`ctbp`]: the continuous-time branching process embedding,
//! * [`theory`]: the Malthusian parameter, limiting degree law and true
//!   rescaled preferences `r_k = f(k)/λ*`,
//! * [`estimator`]: the snapshot-only estimator `r̂_k = N_{>k} / N_k`,
//! * [`experiments`]: seeded Monte Carlo studies emitting CSV.

pub mod ctbp;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod generator;
pub mod pa_model;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use estimator::{EstimateEntry, EstimateTable, Normalization};
pub use generator::{grow, Grower, GrowthConfig};
pub use pa_model::{
    Certificate, DegreeCensus, EvolutionLog, FunctionKind, NodeId, PaFunction, TailRule,
    TreeSnapshot, ValidationReport,
};
pub use sampler::DegreeClassIndex;
pub use theory::{MalthusianSolution, SolveOptions};
