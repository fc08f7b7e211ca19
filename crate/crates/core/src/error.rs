//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by instance construction, clustering, simulation, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter fell outside its admissible range (e.g. a non-positive
    /// exponential rate, a sample cost outside (0, 1)).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The hypothesis/action density matrix is structurally broken: a cell is
    /// missing, duplicated, or the header does not match the payload.
    #[error("structural error in instance: {0}")]
    Structural(String),

    /// A model assumption (separation, validity) failed for the given reason.
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    /// No action can distinguish at least two clusters of the alive set.
    /// Under the validity assumption this indicates a degenerate clustering.
    #[error("no eligible action for alive set {alive:?}")]
    NoEligibleAction { alive: Vec<usize> },

    /// A stage exceeded its sample cap without producing a winner; carries a
    /// snapshot of the pairwise LLR state for diagnosis.
    #[error("stage on action {action} exceeded the sample cap of {cap} samples")]
    RunawayStage {
        action: usize,
        cap: u64,
        snapshot: crate::engine::LlrState,
    },

    /// A posterior-threshold baseline exceeded its sample cap.
    #[error("{algorithm} run exceeded the sample cap of {cap}")]
    RunawaySearch { algorithm: &'static str, cap: u64 },

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error(
        "quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}"
    )]
    QuadratureFailure { achieved: f64, requested: f64 },

    /// The maximin linear program could not be solved.
    #[error("linear program failed: {0}")]
    Lp(String),

    /// A clustering produced a non-positive LLR drift for some contestant,
    /// so the per-stage sample prediction is undefined.
    #[error("clustering violation: {0}")]
    ClusteringViolation(String),

    /// The operation does not support the given instance (e.g. GJL on a
    /// family that is not identified by its mean).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Text formats (instance, plan, config) failed to parse.
    #[error("parse error: {0}")]
    Parse(String),

    /// Experiment configuration is inconsistent.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
