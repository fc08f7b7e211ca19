//! Active sequential hypothesis testing by multi-stage elimination.
//!
//! A decision-maker repeatedly picks an action, draws i.i.d. samples whose
//! distribution depends on the unknown true hypothesis, and must declare the
//! hypothesis with as few samples as possible at a target error level. This
//! crate implements a deterministic elimination strategy: per action the
//! hypotheses are clustered by total variation distance, each stage runs a
//! pairwise LLR tournament among cluster representatives under the threshold
//! ln((H-1)/δ), and the winner's whole cluster survives to the next stage.
//!
//! Alongside the engine live the supporting pieces: scalar exponential-family
//! densities with closed-form divergences ([`dist`]), instance construction
//! and assumption validation ([`model`]), the clustering preprocessing with
//! real or virtual representatives ([`cluster`]), closed-form sample-count
//! predictions, lower bounds, and a brute-force optimal decision tree
//! ([`analysis`]), the Chernoff / NJ1 / GJL reference policies
//! ([`baselines`]), and a reproducible Monte Carlo experiment harness
//! ([`harness`]).

// Validation guards use `!(x > 0.0)` on purpose: the negation also rejects
// NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod baselines;
pub mod cluster;
pub mod dist;
pub mod engine;
pub mod error;
pub mod harness;
pub mod lp;
pub mod model;
pub mod quad;
pub mod seed;

pub use cluster::{ClusterPlan, EpsilonPolicy, RepSpec, VirtualRep};
pub use dist::{Density, DivergenceMethod, DivergenceValue};
pub use engine::{LlrState, RunOptions, RunTranscript, StageRecord};
pub use error::{Error, Result};
pub use harness::{Algorithm, ExperimentConfig, ExperimentResult};
pub use model::{AssumptionReport, Family, ProblemInstance, ScenarioSpec};
