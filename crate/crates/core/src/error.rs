//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("evaluation point x = {x} outside [0, {length}]")]
    PointOutOfRange { x: f64, length: f64 },

    #[error("derivative order {order} not available for {space}")]
    OrderOutOfRange { order: usize, space: &'static str },

    #[error("element index {index} out of range (mesh has {count} elements)")]
    ElementOutOfRange { index: usize, count: usize },

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sampler failed at x = {x}: {reason}")]
    SamplerFailure { x: f64, reason: String },

    #[error("tangent field degenerates at x = {x}: first two components vanish")]
    DegenerateTangent { x: f64 },

    #[error("initial frame violates constraint at node {node}: {detail}")]
    InitialConstraintViolation { node: usize, detail: String },

    #[error("constraint row {row} is rank deficient")]
    RankDeficientConstraint { row: usize },

    #[error("saddle system singular at {what} {index}")]
    SingularSystem { what: &'static str, index: usize },

    #[error("solver residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("dof index {index} out of range (system has {count} dofs)")]
    DofOutOfRange { index: usize, count: usize },

    #[error("monotonicity guard exhausted at step {step}: energy still increases after {halvings} step-size halvings")]
    GuardExhausted { step: usize, halvings: usize },

    #[error("unknown configuration key `{0}`")]
    UnknownConfigKey(String),

    #[error("invalid value for `{key}`: {reason}")]
    InvalidConfigValue { key: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
