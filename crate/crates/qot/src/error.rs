use thiserror::Error;

/// Errors produced by validation and numerical preconditions across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: ||M - M*|| = {deviation:.3e} exceeds {tol:.3e}")]
    NotHermitian { deviation: f64, tol: f64 },
    #[error("non-finite entry (NaN or Inf) in {context}")]
    NonFinite { context: &'static str },
    #[error("rank mismatch: {left} vs {right}")]
    RankMismatch { left: usize, right: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("operator is not a tangent vector: codiagonal defect {deviation:.3e}")]
    NotTangent { deviation: f64 },
    #[error("principal angle {angle} reaches the cut locus; geodesic not unique")]
    CutLocus { angle: f64 },
    #[error("tangent vectors have different base points")]
    BaseMismatch,
    #[error("Q is not a subprojection of P: ||QP - Q|| = {deviation:.3e}")]
    NotSubprojection { deviation: f64 },
    #[error("invalid density matrix: {reason}")]
    InvalidDensity { reason: String },
    #[error("measure is not normalized: integrated trace = {mass}")]
    NotNormalized { mass: f64 },
    #[error("frame {index} is not unitary: defect {deviation:.3e}")]
    BadFrame { index: usize, deviation: f64 },
    #[error("partition {index} does not sum to the eigenspace dimension")]
    BadPartition { index: usize },
    #[error("zero vector at position {index}")]
    ZeroVector { index: usize },
    #[error("transport problem is infeasible (infinite cost)")]
    Infeasible,
    #[error("potential values do not match the support ({expected} atoms, got {got})")]
    SupportMismatch { expected: usize, got: usize },
    #[error("bad tensor dimension: {size} is not a product of the declared factors")]
    BadDimension { size: usize },
    #[error("projection is not subordinate to the isometry support: defect {deviation:.3e}")]
    NotSubordinate { deviation: f64 },
    #[error("measure does not represent the first marginal: defect {deviation:.3e}")]
    NotRepresentation { deviation: f64 },
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:.3e}")]
    NotPsd { min_eig: f64 },
    #[error("path leaves the orthogonal measures at t = {time}")]
    NotOrthogonalPath { time: f64 },
    #[error("exponent p = {p} outside the supported range [1, 16]")]
    BadExponent { p: f64 },
    #[error("parse error in {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("validation failed for {path}: {reason}")]
    Validation { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
