//! Dense networks with hand-written backpropagation.
//!
//! A model is a feature extractor (stack of dense layers with a pointwise
//! activation) followed by a linear classifier. The extractor's final
//! activation is the embedding used for prototype alignment.

pub mod checkpoint;
mod gradcheck;
mod loss;
mod matrix;
mod mlp;
mod params;

pub use gradcheck::{finite_diff_check, finite_diff_check_terms, GradCheckReport};
pub use loss::{argmax_rows, softmax_cross_entropy};
pub use matrix::Matrix;
pub use mlp::{Activation, Architecture, Dense, ForwardTrace, MlpModel};
pub use params::ParamVector;
