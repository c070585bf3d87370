//! Structure-preserving model reduction for monotone reaction networks.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod expr;
pub mod model;
pub mod ode;
pub mod linalg;
pub mod analysis;
pub mod gramian;
pub mod balance;
pub mod simulate;
pub mod random;
pub mod pipeline;
pub mod config;
pub mod artifact;
pub mod report;
pub mod selftest;
