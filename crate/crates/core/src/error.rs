use alloc::string::String;

use crate::model::VertexLabel;

/// Errors raised by the controller and simulator building blocks.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("pitch {pitch} rad is within the singularity band of the Euler-rate map")]
    SingularConfiguration { pitch: f64 },
    #[error("non-positive input: {0}")]
    NonPositiveInput(&'static str),
    #[error("negative payload mass {0} kg")]
    NegativeMass(f64),
    #[error("no pivot vertex: the object is not in single support")]
    NoPivot,
    #[error("contact map lost rank")]
    RankDeficient,
    #[error("path has {found} edges, expected {expected}")]
    WrongPathLength { expected: usize, found: usize },
    #[error("invalid gait parameters: {0}")]
    InvalidParams(String),
    #[error("no admissible path from node {0}")]
    NoAdmissiblePath(usize),
    #[error("impedance damping matrix is not positive definite")]
    SingularDamping,
    #[error("hand {hand} lost contact with the object")]
    ContactLost { hand: usize },
    #[error("vertex {vertex:?} scuffed the ground ({height} m)")]
    ScuffDetected { vertex: VertexLabel, height: f64 },
    #[error("quadratic program is infeasible")]
    Infeasible,
    #[error("quadratic program hit the iteration limit")]
    MaxIterations,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
