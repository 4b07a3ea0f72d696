//! Enriched Dirichlet process mixtures of Gaussian-process experts.
//!
//! The crate provides the model types, conjugate input models, GP experts,
//! an MCMC sampler over nested partitions, posterior prediction and
//! partition summaries, plus a generator for the damped-cosine benchmark.

// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gp;
pub mod input_models;
pub mod io;
pub mod model;
pub mod prediction;
pub mod sampler;
pub mod special;
pub mod summary;
pub mod synthetic;

pub use error::{Error, Result};
pub use model::{
    ConcentrationParams, Dataset, ExpertParams, GammaConvention, HmcSettings, InputFamily, NestedPartition,
    OutputKind, PriorConfig, SamplerState, ScalarPrior,
};
