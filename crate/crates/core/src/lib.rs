//! Lossy compression of sparse reorderable matrices and tensors into a
//! constant-size model that generalizes Kronecker powers.
//!
//! The pipeline is:
//!
//! 1. [`tensor::SparseArray`] holds the non-zeros of a non-negative tensor
//!    together with its zero-padded power-of-two dimensions.
//! 2. [`codec::ModeLayout`] encodes an entry position into the digit-tuple
//!    sequence obtained by recursively bisecting every mode.
//! 3. [`model::KronModel`] turns that sequence into a product of small
//!    positive factors (one per bisection level) whose normalized product
//!    approximates the entry; [`baseline::SeedModel`] is the position-independent
//!    variant that reduces to a Kronecker power.
//! 4. [`train`] fits either model with a sparsity-linear loss and manual
//!    reverse-mode gradients, alternating with [`order`] which permutes
//!    indices using min-hash guided pair sampling.
//!
//! The `parallel` feature (on by default) enables rayon data-parallel
//! evaluation of batches and candidate swaps. Results are bitwise
//! independent of the thread count: work is split into fixed-size chunks
//! and reduced in chunk order.

pub mod artifact;
pub mod baseline;
pub mod codec;
pub mod error;
pub mod exec;
pub mod harness;
pub mod model;
pub mod order;
pub mod rmat;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
