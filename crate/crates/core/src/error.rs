use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("rate domain error: |kc| = {kc} exceeds ka = {ka}")]
    RateDomain { ka: f64, kc: f64 },

    #[error("unknown product operator `{0}`")]
    UnknownOperator(String),

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("controls undefined: both r1 and r2 vanish")]
    UndefinedControls,

    #[error("rf amplitude singular: denominator {denominator:e}")]
    SingularAmplitude { denominator: f64 },

    #[error("rf phase undefined for gamma* = {0}")]
    DegenerateGamma(f64),

    #[error("trajectory did not converge within {horizon_s} s (achieved r2 = {achieved_r2})")]
    NotConverged { horizon_s: f64, achieved_r2: f64 },

    #[error("manifold trajectory left the physical region at t = {time_s} s")]
    OffManifold { time_s: f64 },

    #[error("empty waveform: {0}")]
    EmptyWaveform(String),

    #[error("non-finite state at t = {time_s} s in element {element}")]
    NonFinite { time_s: f64, element: usize },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
