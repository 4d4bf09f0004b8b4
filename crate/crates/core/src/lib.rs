//! Bayes predictive densities for sparse, high-dimensional Poisson count data.
//!
//! The current observation is `X_i ~ Po(r_i θ_i)` and the future one is
//! `Y_i ~ Po(θ_i)`. Under a spike-and-slab prior with an improper power slab
//! the predictive density factorizes into zero-inflated negative binomials,
//! which this crate fits, evaluates, samples and scores under
//! Kullback–Leibler loss.
//!
//! Module map:
//!
//! * [`model`]: count vectors, sampling ratios, priors and the closed-form
//!   constants (minimax constant, optimal slab scale).
//! * [`predictive`]: the fitted predictive density and the plug-in
//!   alternative, behind the [`predictive::CountPredictive`] trait.
//! * [`slab`]: general slab densities, slab integrals and the tail
//!   robustness diagnostic.
//! * [`sparsity`]: plug-in sparsity estimators.
//! * [`risk`]: exact Kullback–Leibler risks and the minimax verification
//!   routines.
//! * [`sets`]: joint prediction sets.
//! * [`sim`]: seeded simulation scenarios and summary tables.

pub mod error;
pub mod model;
pub mod poisson;
pub mod predictive;
pub mod quadrature;
pub mod risk;
pub mod rng;
pub mod sets;
pub mod sim;
pub mod slab;
pub mod sparsity;

pub use error::{Error, Result};
pub use model::{
    constant_c, constant_k, expected_constant_under_g, mcar_constants, optimal_scale,
    ConstantsReport, CountVector, RatioDistribution, SamplingRatios, SparsitySpace,
    SpikeSlabPrior,
};
pub use predictive::{CountPredictive, PoissonPlugin, PredictiveDensity};
pub use sparsity::SparsityEstimate;
