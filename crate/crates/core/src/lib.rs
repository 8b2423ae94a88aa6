//! Bayesian clustering of compositional data with a finite mixture of Dirichlet
//! distributions and latent allocations.
//!
//! Observations on the open simplex are clustered by sampling the posterior of the
//! allocations, the per-cluster Dirichlet parameters and their Gamma hyperprior with a
//! Metropolis-within-Gibbs scheme (mixture weights integrated out). Post-processing
//! resolves label switching, checks convergence and summarizes the clusters; the
//! number of clusters is chosen with ICL, BIC and DIC₅.

pub mod assignment;
pub mod dirichlet;
pub mod error;
pub mod io;
pub mod postprocess;
pub mod sampler;
pub mod select;
pub mod simplex;
pub mod synth;

pub use error::{Error, Result};
pub use postprocess::{analyze, fit, FitResult};
pub use sampler::{AllocationMode, ChainState, SamplerConfig, Trace};
pub use simplex::{AllocationVector, ClusterParams, CompositionDataset, Hyperparams, ZeroPolicy};
