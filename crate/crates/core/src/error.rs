use thiserror::Error;

/// Errors shared across the reduction modules.
#[derive(Debug, Error)]
pub enum CoreError {
    /// No unique shortest lattice representative (antipodal tie in a coordinate).
    #[error("distance too large for a unique shortest representative (coordinate {coord}, offset {offset})")]
    DistanceTooLarge { coord: usize, offset: f64 },

    /// The slope / node-count ratio violates the chart condition C1/r < eps0/3.
    #[error("precondition violated: C1/r = {ratio} must be below eps0/3 = {bound}")]
    PreconditionViolated { ratio: f64, bound: f64 },

    /// A broken loop left the chart: some flowed endpoint is too far from its node.
    #[error("loop out of chart: dist(q_j^-, q_j) = {dist} >= 2*eps0 = {bound} at node {node}")]
    LoopOutOfChart { node: usize, dist: f64, bound: f64 },

    /// The affine system for the added fiber point is singular.
    #[error("no unique critical fiber point when embedding an extra node")]
    NonUniqueCriticalFiberPoint,

    /// Two consecutive points are too far apart for the wedge decomposition.
    #[error("wedge not resolvable: node gap {gap} exceeds threshold {threshold}")]
    WedgeNotResolvable { gap: f64, threshold: f64 },

    /// The asymptotic slope sits inside the ill-conditioned band of the length spectrum.
    #[error("slope {mu} hits the length spectrum: lattice length {length} in the ramp ({lo}, {hi})")]
    SlopeHitsLengthSpectrum { mu: f64, length: f64, lo: f64, hi: f64 },

    /// The critical-point solver exhausted its iteration budget.
    #[error("no convergence after {iterations} iterations, residual {residual}")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A solver step left the admissible chart even after backtracking.
    #[error("solver step left the chart after backtracking to scale {scale}")]
    LeftChart { scale: f64 },

    /// A Hessian was requested away from a critical point.
    #[error("not a critical point: gradient norm {residual} exceeds {tolerance}")]
    NotCritical { residual: f64, tolerance: f64 },

    /// Inertia counts shift under a +-20% perturbation of the zero threshold.
    #[error("unstable inertia: counts ({neg},{zero},{pos}) vs ({neg_alt},{zero_alt},{pos_alt}) under threshold perturbation")]
    UnstableInertia {
        neg: usize,
        zero: usize,
        pos: usize,
        neg_alt: usize,
        zero_alt: usize,
        pos_alt: usize,
    },

    /// Phase steps of det^2 moved too fast for reliable winding accumulation.
    #[error("sampling too coarse for winding: max phase step {max_step} rad exceeds pi/2")]
    SamplingTooCoarse { max_step: f64 },

    /// A claimed standard form disagrees with the sampled winding number.
    #[error("maslov mismatch: sampled index {sampled} vs standard-form index {claimed}")]
    MismatchedMaslov { sampled: i64, claimed: i64 },

    /// The requested value window touches a critical value.
    #[error("window edge {edge} within margin {margin} of critical value {value}")]
    WindowHitsCriticalValue { edge: f64, value: f64, margin: f64 },

    /// The descent integration diverged.
    #[error("integration blow-up: state norm {norm} at time {time}")]
    IntegrationBlowUp { norm: f64, time: f64 },

    /// A critical value left the continuation window.
    #[error("critical value {value} escaped the window ({a}, {b}) at step {step}")]
    CriticalValueEscapesWindow { value: f64, a: f64, b: f64, step: usize },

    /// Invalid configuration or construction parameters.
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
