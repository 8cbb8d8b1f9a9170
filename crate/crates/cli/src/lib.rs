//! Experiment drivers, record handling, fitting, and self-checks
//! behind the `kann` command-line tool. The library half exists so the
//! integration tests can run experiments in-process.

// `!(x > 0.0)` is used deliberately where a NaN must count as a
// violation; `x <= 0.0` would silently accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod expk;
pub mod exptime;
pub mod fit;
pub mod record;
pub mod verify;
