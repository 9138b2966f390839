//! Informative Horseshoe regression: Gibbs and variational inference for
//! linear and probit models whose local shrinkage scales are regressed on
//! covariate-level co-data.

pub mod error;
pub mod fast_gaussian;
pub mod g3p;
pub mod gibbs;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod selection;
pub mod simulate;
pub mod special;
pub mod vb;

pub use error::{Error, Result};
pub use model::{validate, Dataset, DrawsMeta, GibbsState, Hyperparameters, PosteriorDraws, Task};
