//! Principal support vector machines for sufficient dimension reduction.
//!
//! The crate estimates the low-dimensional subspace (or, with a kernel, the
//! low-dimensional function space) that carries all the information a
//! predictor vector has about a response. Slicing the response produces a
//! family of binary problems; each is solved by a support vector machine
//! whose quadratic term is the predictor covariance, and the fitted normals
//! are aggregated into a candidate matrix whose leading eigenvectors span
//! the estimate.
//!
//! Module map:
//! - [`dataset`]: data container, standardization, whitening, slicing
//! - [`qp`]: the shared box-constrained dual solver
//! - [`linear`]: linear fits over slice pairs
//! - [`kernel`]: kernelized fits via a centered Gram eigenbasis
//! - [`baselines`]: sliced inverse/average-variance/directional baselines
//! - [`metrics`]: subspace distance and rank-correlation scores
//! - [`order`]: dimension selection by a BIC-type criterion with
//!   cross-validated penalty tuning
//! - [`simgen`]: synthetic model generators and the vowel data loader
//! - [`campaign`]: replication harnesses producing the comparison tables

pub mod artifact;
pub mod baselines;
pub mod campaign;
pub mod dataset;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod linear;
pub mod metrics;
pub mod order;
pub mod qp;
pub mod simgen;

pub use artifact::{
    load_artifact, save_artifact, ArtifactBody, ArtifactFile, KernelArtifact, LinearArtifact,
};
pub use baselines::{fit_dr, fit_save, fit_sir, SliceStats};
pub use campaign::{run_campaign, write_campaign, Campaign, CampaignOptions, TableId};
pub use dataset::{ColumnSpec, Dataset, MomentSummary, PairScheme, SlicePair};
pub use error::{Error, ErrorCategory, Result};
pub use kernel::{KernelBasis, KernelConfig, KernelFit, KernelSpec, PairwiseAggregate};
pub use linear::{FitMethod, Hyperplane, LinearConfig, SdrFit, SliceScheme};
pub use order::{bic_select, cvbic, BicConfig, CvbicResult, MisclassRow};
pub use qp::{DualProblem, DualSolution, SolverOptions};
pub use simgen::{ModelId, ModelSpec, ModelTruth};
