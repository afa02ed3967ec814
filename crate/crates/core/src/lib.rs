//! Dynamic state estimation on a single-machine infinite-bus system.
//!
//! Kalman-type filters (EKF, UKF, CKF) and two LMI-synthesized observers
//! (an unknown-input observer and a Lipschitz observer) run against a
//! simulated two-axis generator with injectable unknown inputs and
//! measurement attacks.

// `!(a < b)` is used on purpose so NaN lands on the failing side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod filters;
pub mod harness;
pub mod lmi;
pub mod numerics;
pub mod observers;
pub mod scenario;
pub mod smib;

#[cfg(test)]
mod test_support;

pub use numerics::{Matrix, Vector};
pub use scenario::{EstimatorKind, Scenario, SignalSpec};
pub use smib::{MachineInput, MachineParams, MachineState};
