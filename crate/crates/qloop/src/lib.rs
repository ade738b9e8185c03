//! Representations of the quantum loop algebra U_q(L(sl2)) and its Borel subalgebra,
//! with the intertwiners between them. These build transfer matrices and Q-operators
//! on twisted spin-1/2 chains.

pub mod algebras;
pub mod chainops;
pub mod intertwiners;
pub mod qcore;
pub mod representations;
pub mod traces;

pub use num_complex::Complex64 as C64;

pub use qcore::{
    BasisSpace, Grading, LinOp, QScalar, RelationReport, SpectralPoint, TruncationPolicy, Verdict, Weight,
};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("incompatible representations: {0}")]
    Incompatible(String),
    #[error("trace diverges (damping ratio {ratio:.3e})")]
    DivergentTrace { ratio: f64 },
    #[error("pole: {0}")]
    Pole(String),
    #[error("intertwiner is degenerate (nullspace dimension {nullity})")]
    DegenerateIntertwiner { nullity: usize },
    #[error("intertwiner is singular (smallest relative singular value {smallest:.3e})")]
    SingularIntertwiner { smallest: f64 },
    #[error("no intertwiner exists (smallest relative singular value {smallest:.3e})")]
    NoIntertwiner { smallest: f64 },
    #[error("truncation too small: {0}")]
    TruncationTooSmall(String),
    #[error("representation not classified: {0}")]
    Unclassified(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}
