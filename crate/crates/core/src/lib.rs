//! Exact finite-time channels for open-system model families, random
//! initial-state ensembles, trace-distance relaxation curves and mixing-time
//! statistics, and the one-mode bottleneck formulas that predict the gap
//! between typical and worst-case mixing.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experiments;
pub mod laws;
pub mod linalg;
pub mod mixing;
pub mod models;
pub mod states;
