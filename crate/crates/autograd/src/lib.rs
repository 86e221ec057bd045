//! Reverse-mode automatic differentiation over dense row-major tensors.
//!
//! A [`Graph`] is a tape: every operation on a [`Var`] evaluates eagerly and
//! records a closure that maps the output gradient to parent gradients.
//! [`Graph::backward`] replays the tape in reverse. Image tensors use the
//! NCHW layout throughout.
//!
//! The engine is generic over [`Scalar`] so the same network code runs in
//! `f32` for training and in `f64` for finite-difference gradient checks.

mod graph;
pub mod gradcheck;
mod ops;
mod scalar;
mod tensor;

pub use graph::{GradSink, Gradients, Graph, Var};
pub use scalar::{gemm, Scalar};
pub use tensor::Tensor;
