//! Neural methods for complex data.
//!
//! * [`mlp`] and [`selection`]: one-hidden-layer perceptrons and penalized
//!   selection of the hidden-unit count.
//! * [`hmm`]: regime-switching autoregression where a hidden Markov chain
//!   picks the active perceptron and noise level.
//! * [`som`], [`variants`], [`categorical`], [`forecast`]: batch
//!   self-organizing maps for vectors, dissimilarities, kernels, categorical
//!   surveys and two-scale time series.
//! * [`metric`]: dissimilarity validation, edit distance and kernels.
//! * [`cli`]: the command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod categorical;
pub mod cli;
pub mod error;
pub mod forecast;
pub mod hmm;
pub mod io;
pub mod metric;
pub mod mlp;
pub mod optim;
pub mod rng;
pub mod selection;
pub mod som;
pub mod variants;

pub use error::{Error, Result};
