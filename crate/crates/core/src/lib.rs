//! Fairness-constrained reward optimization for preference learning.
//!
//! The crate trains Bradley–Terry reward models under anchored group-fairness
//! constraints (demographic parity, equalized odds, counterfactual fairness)
//! with a proxy-Lagrangian gradient descent–ascent solver, certifies the
//! result, and studies how reward-level fairness carries over to
//! KL-regularized policies on finite worlds.
//!
//! Module map:
//!
//! - [`dataset`]: preference data with demographic annotations, intersectional
//!   group indexing, CSV I/O and a synthetic generator with plantable bias.
//! - [`reward_model`]: linear / one-hidden-layer reward models, preference
//!   probabilities, NLL and analytic gradients.
//! - [`fairness`]: differentiable group proxies, anchored constraint vectors
//!   and true (all-pairs) violations.
//! - [`proxygda`]: the primal–dual solver.
//! - [`certificates`]: slack bounds, held-out certificates, pairwise bounds.
//! - [`policy`]: Gibbs policies, KL, Pinsker and reward-to-policy transfer.
//! - [`pareto`]: hyperparameter sweeps and non-dominated filtering.
//! - [`direct_alignment`]: fairness-constrained DPO / KTO / GRPO on toy worlds.
//! - [`metrics`]: ordinal, cardinal and fairness evaluation metrics.
//! - [`experiments`]: end-to-end runs producing serializable reports.

pub mod certificates;
pub mod dataset;
pub mod direct_alignment;
pub mod error;
pub mod experiments;
pub mod fairness;
pub mod metrics;
pub mod numeric;
pub mod pareto;
pub mod policy;
pub mod proxygda;
pub mod reward_model;
pub mod rng;

pub use error::{FaroError, Result};

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
