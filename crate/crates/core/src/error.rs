use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid resolution {0} is below the minimum of 8 nodes per axis")]
    ResolutionTooCoarse(usize),
    #[error("ball radius {radius} is below half the grid spacing {spacing}")]
    EmptyBall { radius: f64, spacing: f64 },
    #[error("torus mode summands disagree on the eigenvalue ({first} vs {other})")]
    MixedEigenvalue { first: f64, other: f64 },
    #[error("gradient frame is singular at the pole; take the limit along a meridian")]
    PoleGradient,
    #[error("field has constant sign, there is no zero crossing")]
    NoZeroCrossing,
    #[error("sign {0} does not occur in the ball")]
    NoSignPresent(i8),
    #[error("sup norm requested over an empty region")]
    EmptyRegionSup,
    #[error("field vanishes on the inner ball (sup {sup:e})")]
    ZeroOnBall { sup: f64 },
    #[error("lift quadrature under-resolved: refinement moved N by {rel_change:.3e}")]
    QuadratureUnderResolved { rel_change: f64 },
    #[error("{uncovered} grid nodes are not covered by the ball family")]
    CoverageGap { uncovered: usize },
    #[error("field is one-signed; both signed parts must carry mass")]
    OneSignedField,
    #[error("supplies do not balance: {mu} vs {nu}")]
    InfeasibleFlow { mu: f64, nu: f64 },
    #[error("density profile has nonzero mean {0:e}")]
    NonZeroMean(f64),
    #[error("sinkhorn stalled: marginal error {marginal_err:e} after {iterations} iterations")]
    NotConverged { marginal_err: f64, iterations: usize },
    #[error("signed region is empty after removing the tube")]
    EmptySignedRegion,
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("power-law fit needs positive values, got {0}")]
    NonPositiveValue(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
