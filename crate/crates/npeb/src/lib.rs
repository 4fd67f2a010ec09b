//! Estimation of mixture means under nonignorable nonresponse.
//!
//! Strata carry latent parameters `θ_i ~ G`; observations are censored or
//! truncated by nonresponse whose probability depends on `θ_i` itself, so
//! responder-only averages are biased. This crate fits the mixing
//! distribution `G` by maximum likelihood over a dense parameter grid and
//! estimates the target mean `E_G η(θ)` by the plug-in `E_Ĝ η(θ)` — which
//! stays stable across the many maximizers `Ĝ` even when `G` itself is not
//! identifiable.
//!
//! Entry points:
//! - [`model`]: model families, outcome spaces, censored/truncated densities;
//! - [`solver`]: support grids, likelihood matrices, the EM fit;
//! - [`estimate`]: plug-in, naive and posterior-mean estimators;
//! - [`sim`]: seeded replication experiments and their reports;
//! - [`verify`]: executable checks of the estimator's structural properties;
//! - [`cli`]: the `npeb` command-line front end.
//!
//! The `examples/` directory contains one runnable walkthrough per
//! capability; start with `example1_nonidentifiability`.

pub mod cli;
pub mod estimate;
pub mod model;
pub mod sim;
pub mod solver;
pub mod verify;

pub use estimate::EstimateReport;
pub use model::{BernoulliEta, ModelError, ModelSpec, Outcome, ThetaPoint};
pub use solver::{
    GmleSolution, LikelihoodMatrix, MixtureWeights, ObservationMode, ObservationSet, SolverError,
    SupportGrid,
};
