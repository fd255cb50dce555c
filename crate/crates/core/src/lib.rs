//! Covariance-method estimated covariance matrix.
//!
//! For an `N`x`M` complex input `A` and a `P`x`Q` sliding window, the
//! estimate is the sum over every window placement of `v * v^H`, where `v`
//! is the column stack of the window. The output is Hermitian, so only its
//! upper triangle is stored.
//!
//! Two families of estimators are provided:
//!
//! * [`baseline`]: the window-by-window outer-product sum, used as the
//!   reference.
//! * [`engine`]: a combination-based estimator that computes each distinct
//!   element product exactly once and adds it to every output index it
//!   belongs to. Work is partitioned by element offset, which also
//!   partitions the output into disjoint diagonal segments, so the parallel
//!   mode needs no synchronization on the output.
//!
//! [`analysis`] gives closed-form operation counts for both, and
//! [`schedsim`] simulates how the combination tasks load-balance over many
//! cores.

pub mod analysis;
pub mod baseline;
pub mod combinations;
pub mod engine;
mod error;
pub mod format;
pub mod matrix;
pub mod schedsim;

pub use error::{Error, Result};
pub use matrix::{ComplexScalar, CovarianceMatrix, InputMatrix, WindowSpec};
