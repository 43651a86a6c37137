use thiserror::Error;

/// Error type shared by every module of the lab.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A caller-supplied parameter is outside the operation's contract
    /// (e.g. `alpha <= 1`, `m <= n`, nonpositive tolerance).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A point or stencil leaves the chart's valid region.
    #[error("domain error: {0}")]
    Domain(String),

    /// Metric is not symmetric positive definite where it must be.
    #[error("degenerate metric: {0}")]
    Degeneracy(String),

    /// Array/grid shapes disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A nominally positive solution lost positivity during a solve.
    #[error("positivity lost at t-step {step}, node {node}: u = {value:e}")]
    PositivityLoss {
        step: usize,
        node: usize,
        value: f64,
    },

    /// Explicit-scheme step size violates the stability criterion.
    #[error("stability violated: {0}")]
    Stability(String),

    /// Flux through a truncation wall exceeded its monitor tolerance.
    #[error("boundary flux {flux:e} exceeds monitor tolerance {tol:e} at t = {t}")]
    BoundaryFlux { flux: f64, tol: f64, t: f64 },

    /// A check that requires a passed flow certificate was handed a failed or
    /// mismatched one.
    #[error("certificate refused: {0}")]
    Certificate(String),

    /// Scenario configuration is malformed or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// No closed-form geodesic distance is available for the requested pair.
    #[error("analytic distance unavailable: {0}")]
    DistanceUnavailable(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
