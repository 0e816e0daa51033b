//! Gradient engine: a small reverse-mode tape over the ops the forecasting
//! pipelines need, plus a finite-difference checker.

mod check;
mod graph;

pub use check::{
    compare_gradients, finite_diff_check, rel_error, Coordinate, CoordinateFailure,
    GradCheckReport,
};
pub use graph::{Gradients, Graph, NodeId};

use crate::tensor::Matrix;

/// A named trainable tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        Param {
            name: name.into(),
            value,
        }
    }
}
