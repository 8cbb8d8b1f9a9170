//! Approximate k-nearest-neighbor search through randomized dimension
//! reduction.
//!
//! The crate has two halves that compose:
//!
//! * [`embedding`] draws a random linear map `f(p) = sqrt(d/d') * A^T p`
//!   (Gaussian or orthonormalized columns) that preserves squared
//!   distances in expectation, plus the closed-form rules for choosing
//!   the projection dimension `d'` and the tail bounds that justify
//!   them.
//! * [`tree`] answers `(1+eps)`-approximate k-nearest-neighbor queries
//!   over any point set with a box-decomposition tree; [`index`] glues
//!   the two together: project the data, search in the projected space,
//!   and report candidates by their original-space distances.
//!
//! [`datasets`] generates the synthetic point sets used by the
//! experiments and benchmarks, and [`oracle`] holds brute-force
//! reference implementations against which everything else is tested.
//!
//! Every random choice in the crate flows through a `ChaCha8` generator
//! seeded with an explicit `u64`, so any run is reproducible
//! bit-for-bit from its seed on any platform.

// Validation deliberately writes `!(x > 0.0)` instead of `x <= 0.0`:
// the negated form also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod embedding;
mod error;
pub mod index;
pub mod oracle;
mod point;
pub mod tree;

pub use error::{Error, Result};
pub use point::{dist, sq_dist, Neighbor, PointSet};
