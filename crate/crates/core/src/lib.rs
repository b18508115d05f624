//! Define-by-run differentiable programming on dense `f64` tensors.
//!
//! Programs are recorded on a [`Tape`] as they execute; [`Tape::backward`]
//! then propagates adjoints in reverse recording order. [`primitives`]
//! provides layers built from recorded ops, [`analysis`] answers structural
//! questions about recorded programs, and [`graph`] loads and perturbs
//! citation graphs for node classification.
//!
//! ```
//! use diffprog_core::{Op, Tape, Tensor};
//! use diffprog_core::tensor::Binary;
//!
//! let mut tape = Tape::new();
//! let x = tape.input(Tensor::scalar(3.0));
//! let y = tape.record(Op::Binary(Binary::Mul), &[x, x]).unwrap();
//! tape.backward(y).unwrap();
//! assert_eq!(tape.adjoint(x).unwrap().unwrap().item(), Some(6.0));
//! ```

pub mod analysis;
pub mod autodiff;
pub mod error;
pub mod graph;
pub mod optim;
pub mod primitives;
pub mod sparse;
pub mod tensor;

pub use autodiff::{gradient_check, GradCheckReport, NodeId, Op, ParamStore, Tape};
pub use error::{Error, Result};
pub use sparse::SparseMatrix;
pub use tensor::{Mask, Tensor, TensorError};
