//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("points_per_axis must be a power of two >= 16, got {0}")]
    PointsNotPowerOfTwo(usize),
    #[error("dimension must be 1, 2, or 3, got {0}")]
    BadDimension(usize),
    #[error("half_width must be positive, got {0}")]
    BadHalfWidth(f64),
    #[error("Sobolev order must be nonnegative, got {0}")]
    NegativeSobolevOrder(f64),
    #[error("wavefunctions live on different grids")]
    GridMismatch,

    #[error("schedule step must be positive, got {0}")]
    BadTimeStep(f64),
    #[error("schedule span {span} is not within 0.5 steps of a multiple of dt={dt}")]
    BadScheduleSpan { span: f64, dt: f64 },
    #[error("time {t} outside trajectory range [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("trajectory snapshots too coarse: stride {stride} exceeds {max} for the requested quadrature")]
    SnapshotsTooCoarse { stride: usize, max: usize },
    #[error("boundary mass {mass:.3e} exceeded budget {budget:.3e} at t={t}")]
    BoundaryBreach { mass: f64, budget: f64, t: f64 },

    #[error("dilation by theta={theta} would push support of radius {support:.3} beyond the box (limit {limit:.3})")]
    DilationSupportEscape { theta: f64, support: f64, limit: f64 },
    #[error("dense eigen method requires dim=1 and N<=2048, got dim={dim}, N={n}")]
    DenseEigenUnavailable { dim: usize, n: usize },
    #[error("Chebyshev spectral bound {bound:.3} is below the lattice bound {required:.3}")]
    ChebyshevBoundTooSmall { bound: f64, required: f64 },
    #[error("Chebyshev order {order} exceeds the supported maximum {max}")]
    ChebyshevOrderTooLarge { order: usize, max: usize },
    #[error("group quadrature did not converge: residual {residual:.3e} above {tol:.3e}")]
    QuadratureNotConverged { residual: f64, tol: f64 },
    #[error("group quadrature only synthesizes tanh cutoff shapes")]
    QuadratureNeedsShape,
    #[error("dilated multiplier is singular on the lattice (|denominator| = {0:.3e})")]
    DilatedMultiplierSingular(f64),
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("observable `{name}` invalid at t={t}: {reason}")]
    ObservableInvalidAt { name: String, t: f64, reason: String },
    #[error("observable parameter {name}={value} outside its validity window {window}")]
    BadObservableParameter {
        name: &'static str,
        value: f64,
        window: &'static str,
    },
    #[error("exponent fit needs at least {need} points in the window, got {got}")]
    FitTooFewPoints { need: usize, got: usize },
    #[error("exponent fit window contains nonpositive values")]
    FitNonPositive,
    #[error("dyadic family is empty")]
    EmptyDyadicFamily,
    #[error("slice schedule requires T > e, got {0}")]
    SliceScheduleBadFinalTime(f64),
    #[error("slice schedule ratio must lie in (0,1), got {0}")]
    SliceScheduleBadRatio(f64),
    #[error("slice schedule exceeded the maximum length of {0}")]
    SliceScheduleTooLong(usize),
    #[error("box too small for the decay probe: packet reaches {reach:.1} but the box allows {limit:.1}")]
    BoxTooSmall { reach: f64, limit: f64 },

    #[error("config error: {0}")]
    Config(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialize(String),
}

pub type Result<T> = std::result::Result<T, Error>;
