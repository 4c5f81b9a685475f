//! Integrated random-partition sufficient dimension reduction.
//!
//! Estimates the central subspace of a regression of `y` on a covariate
//! vector whose dimension can far exceed the sample size:
//!
//! 1. covariates are split by random partitions into blocks of size `r`, and
//!    blocks are screened by their distance correlation with `y`;
//! 2. sliced inverse regression runs inside each screened envelope and its
//!    directions are mapped back to the ambient space as a low-rank kernel;
//! 3. kernels are averaged over partitions, summed over block sizes and
//!    (optionally) combined across envelope sizes; the leading eigenvectors
//!    of the result estimate the subspace.
//!
//! The [`simulation`], [`baselines`] and [`pipeline`] modules reproduce the
//! benchmark models and the EEG-style classification workflow.

pub mod baselines;
pub mod data;
pub mod dcor;
pub mod eeg;
pub mod error;
pub mod kernel;
pub mod lda;
pub mod linalg;
pub mod metrics;
pub mod partition;
pub mod pipeline;
pub mod rng;
pub mod select;
pub mod simulation;
pub mod sir;

pub use data::{load_csv, sample_covariance, CovarianceEstimate, Dataset, ResponseColumn};
pub use dcor::{dcor2_sample, dcov2_sample, DcorValue};
pub use error::{Result, SdrError};
pub use kernel::{
    ensemble_kernel, integrate_partitions, integrate_sizes, leading_basis, sketch_kernel, IntegratedKernel, IrpConfig,
    IrpSdr, SdrFit, SketchKernel,
};
pub use metrics::{projection_distance, trace_correlation, SubspaceScore};
pub use partition::{candidate_sizes, random_partition, screen, EnvelopeSelection, Partition};
pub use select::{select_dimension, DimensionChoice, Direction};
pub use sir::{sir_directions, sir_kernel, slice_assign, SirResult};
