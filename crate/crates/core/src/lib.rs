//! Simulation of GPS spoofing against a learned UAV navigator whose position
//! comes from an EKF with an innovation-gated GPS update.

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod estimator;
pub mod geo;
pub mod gps;
pub mod nn;
pub mod policy;
pub mod world;
pub mod learner;
pub mod attack;
pub mod harness;
