//! Clifford-algebra equivariant graph networks: multivector algebra,
//! reverse-mode differentiation, layers, models, datasets and training.

pub mod autodiff;
pub mod baselines;
pub mod cgegnn;
pub mod clifford;
pub mod datasets;
pub mod error;
pub mod geograph;
pub mod kv;
pub mod layers;
pub mod model;
pub mod params;
pub mod training;

pub use error::{Error, Result};
