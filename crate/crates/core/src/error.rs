use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cube has {sites} sites, above the matrix dimension budget of {max}")]
    SizeOverflow { sites: u128, max: usize },

    #[error("cube is fully interactive; no canonical decomposition exists")]
    NoDecomposition,

    #[error("cluster scale too small: need l^2 > 2 * cover_radius (l = {l}, cover_radius = {cover_radius})")]
    ScaleTooSmall { l: i64, cover_radius: i64 },

    #[error("potential window does not cover the cube projections")]
    WindowTooSmall,

    #[error("no closed-form continuity modulus for distribution {0}")]
    UnsupportedDistribution(String),

    #[error("eigensolver failed to converge")]
    ConvergenceFailure,

    #[error("energy {energy} lies within {distance:e} of the spectrum")]
    SingularEnergy { energy: f64, distance: f64 },

    #[error("inverse residual {residual:e} above tolerance")]
    InaccurateInverse { residual: f64 },

    #[error("cubes are not weakly separable")]
    NotWeaklySeparable,

    #[error("cubes are not separable")]
    NotSeparable,

    #[error("matrix dimension {dim} exceeds budget {max}")]
    BudgetExceeded { dim: u128, max: usize },

    #[error("schedule rejected: {}", .0.join("; "))]
    InvalidSchedule(Vec<String>),

    #[error("tail sum diverges: Theta - Nd = {0} <= 1")]
    DivergentTail(f64),

    #[error("vector is identically zero")]
    ZeroVector,

    #[error("only {found} usable shells, need at least 3")]
    InsufficientShells { found: usize },

    #[error("sub-cube is not strictly interior to the big box")]
    CubeNotInterior,

    #[error("vector vanishes at the origin (or the origin is outside the box)")]
    ZeroAtOrigin,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
