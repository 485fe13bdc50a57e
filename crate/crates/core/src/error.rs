use crate::lattice::IVec3;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid mode {0}: the zero wavevector is excluded")]
    InvalidMode(IVec3),

    #[error("mode {mode} lies outside the truncation box |a_i| <= {n}")]
    OutOfRange { mode: IVec3, n: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state is not on the divergence-free subspace (residual {residual:e} > tolerance {tolerance:e})")]
    NotOnSubspace { residual: f64, tolerance: f64 },

    #[error("inconsistent state: {0}")]
    InconsistentState(String),

    #[error("non-finite values at step {step}")]
    BlowUp { step: usize },

    #[error("shear support n = {harmonic} reaches mode {mode}, outside the truncation box N = {n}")]
    TruncationTooSmall { harmonic: i32, mode: IVec3, n: u32 },

    #[error("invalid shear-flow spec: {0}")]
    InvalidShear(String),

    #[error("state is not an equilibrium (residual {0:e})")]
    NotEquilibrium(f64),

    #[error("state belongs to a different mode set")]
    ModeSetMismatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
