use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("spectral vector must store at least one coordinate")]
    EmptyVector,

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid covariance spec: {0}")]
    InvalidCovariance(String),

    #[error("invalid potential spec: {0}")]
    InvalidPotential(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mode index {index} out of range for explicit eigenvalue list of length {len}")]
    ModeIndexOutOfRange { index: usize, len: usize },

    #[error(
        "trace series diverges: needs 2*kappa - 2*r > 1 but kappa = {kappa}, r = {r}"
    )]
    TraceDiverges { kappa: f64, r: f64 },

    #[error("no closed-form stationary law for this potential: {0}")]
    UnsupportedPotential(&'static str),

    #[error("no interior maximum of the diffusion speed inside [{lo}, {hi}]")]
    NoInteriorMaximum { lo: f64, hi: f64 },

    #[error("empty sample")]
    EmptySample,

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("time {t} outside the stored interpolant range [{lo}, {hi}]")]
    OutOfInterpolantRange { t: f64, lo: f64, hi: f64 },

    #[error(
        "interpolant stores snapshots at stride {stride}; time {t} does not land on a stored step"
    )]
    StrideMisaligned { t: f64, stride: u64 },

    #[error("trajectory too short: need {need} consecutive states, got {got}")]
    ShortTrajectory { need: usize, got: usize },
}

pub type Result<T> = core::result::Result<T, CoreError>;
