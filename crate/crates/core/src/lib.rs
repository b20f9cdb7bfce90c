//! Assessment of hypotheses about the relative accuracy of two systems.
//!
//! The crate bundles three families of procedures over paired binary
//! outcomes (or their aggregate counts):
//!
//! * frequentist: the pooled two-proportion z-test, confidence intervals for
//!   the accuracy difference and a paired sign-flip permutation test;
//! * Bayesian: a beta-binomial model with conjugate posteriors, a
//!   random-walk Metropolis sampler, highest-density intervals with a region
//!   of practical equivalence (ROPE), and interval-null Bayes factors;
//! * simulations of common testing pathologies (stopping-intention
//!   dependence, optional stopping, prior sensitivity).
//!
//! [`io`] ties everything to a sectioned config file and emits JSON reports
//! and CSV plot data.

pub mod bayes;
pub mod error;
pub mod frequentist;
pub mod io;
pub mod mcmc;
pub mod model;
pub mod numerics;
pub mod pathology;
pub mod posterior;

pub use error::{Error, Result};
pub use model::{
    Counts, DatasetObs, Decision, DecisionValue, Direction, Hypothesis, HypothesisKind,
    ItemOutcome, LatentParams, ObservationMode, ObservationSet, PairCounts,
};
pub use numerics::RngStream;
