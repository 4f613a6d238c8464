//! Learning discrete Bayesian networks from data.
//!
//! Networks are DAGs over finite-state variables ([`NetworkStructure`]) with
//! one conditional table per variable ([`ParameterSet`]). The crate covers
//! exact inference, conjugate Dirichlet parameter learning, Bayesian (BD/BDe)
//! and BIC structure scores, greedy and annealing structure search,
//! equivalence classes, and EM/Gibbs methods for incomplete data.
//!
//! Conventions used throughout:
//! - states and parent configurations are 0-based indices;
//! - a parent configuration index is mixed-radix over the parents in
//!   ascending variable-index order, last parent varying fastest;
//! - a missing value is `None` inside a [`Case`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod datasets;
pub mod dirichlet;
pub mod equivalence;
pub mod error;
pub mod incomplete;
pub mod inference;
pub mod io;
pub mod network;
pub mod params;
pub mod scoring;
pub mod search;

pub use data::{count_sufficient_stats, Case, DataSet};
pub use dirichlet::{bde_priors, dirichlet_update, network_predictive, BdePriorInputs};
pub use equivalence::{compelled_edges, enumerate_equivalence_class, independence_equivalent, CausalReading};
pub use error::{Error, Result};
pub use incomplete::{em_fit, gibbs_posterior, single_case_posterior, EmMode, EmOptions, EmResult, GibbsSummary, InitPolicy};
pub use inference::{enumerate_query, query, Evidence, QueryResult};
pub use io::{Network, NetworkDocument};
pub use network::{NetworkStructure, VariableSpec};
pub use params::{joint_probability, DirichletSpec, FamilyCounts, ParameterSet};
pub use scoring::{bd_log_marginal, bic_score, log_posterior_score, Constraints, ScoreReport, StructurePrior};
pub use search::{
    greedy_search, model_average_predict, simulated_annealing, AnnealingSchedule, AnnealingStart, ChangeOp,
    FamilyPrior, SearchOutcome,
};
