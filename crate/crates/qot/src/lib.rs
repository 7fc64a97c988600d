//! Optimal transport between quantum states over the Grassmannian of
//! finite-rank orthogonal projections.
//!
//! A density matrix decomposes into weighted spectral projections, i.e. a
//! discrete measure on the Grassmannian. This crate computes the geodesic
//! geometry of that space (principal angles, exp/log maps, curvature checks),
//! exact discrete optimal transport between such measures with Kantorovich
//! duality, the induced state-level cost and distance, displacement
//! interpolation of states, and the tensor-product picture where a pure
//! state of a composite system acts as a family of transport plans through
//! its correlation operator.
//!
//! The `parallel` feature (on by default) runs batch solves and optimizer
//! restarts on a rayon pool; without it everything falls back to equivalent
//! sequential loops.

pub mod error;
pub mod grassmann;
pub mod linalg;
mod par;
pub mod sample;
pub mod spectral;
pub mod state_cost;
pub mod tensor;
pub mod transport;

pub use error::{Error, Result};
pub use grassmann::{DistanceScale, Projection, StiefelPoint, TangentVector};
pub use spectral::{DensityMatrix, DiscreteMeasure, MeasureClass};
pub use state_cost::{CostResult, OptimizerBudget, StatePath};
pub use tensor::{CorrelationOperator, TensorState};
pub use transport::{DualPotentials, KantorovichOperator, TransportPlan};

/// Weights below this threshold are dropped from discrete measures.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// Cap the rayon worker count (reads `QOT_THREADS` in the CLI). Calling it
/// more than once keeps the first configuration.
#[cfg(feature = "parallel")]
pub fn configure_threads(n: usize) {
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_n: usize) {}
