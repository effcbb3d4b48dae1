//! Reverse-mode automatic differentiation.
//!
//! [`scalar`] differentiates generic `Real` code (body kinematics, signed
//! distances, refinement losses); [`tensor`] differentiates the network.

pub mod scalar;
pub mod tensor;

pub use scalar::{ScalarTape, Var};
pub use tensor::{Graph, Mat, NodeId};
