//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Graph`] is rebuilt for every batch. Parameters live in a
//! [`ParamStore`] that the graph borrows; constants are copied in. Calling
//! [`Graph::backward`] on a scalar returns [`Gradients`] for every node that
//! reaches it.

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::{gradcheck, gradcheck_params, relative_error, REL_ERR_FLOOR};
pub use graph::{sigmoid, softplus, Activation, Gradients, Graph, Var};
pub use params::{ParamId, ParamStore};
pub use tensor::Tensor;
