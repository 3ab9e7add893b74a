//! Repeated Bayesian persuasion with a Receiver who may stop trusting the
//! announced information structure.
//!
//! - [`model`]: scenarios, information structures, beliefs and payoffs.
//! - [`switching`]: observation likelihoods, Bayes factor and the threshold rule.
//! - [`sim`]: seeded, worker-count independent Monte Carlo estimation.
//! - [`oracle`]: exact rational enumeration of the same process.
//! - [`solver`]: BP-optimal structures, the ε family and persistence verdicts.

pub mod error;
pub mod model;
pub mod oracle;
pub mod sim;
pub mod solver;
pub mod switching;

pub use error::{Error, Result};
pub use model::{
    alternative_structure, period_expected_utility, posterior, Belief, InformationStructure, Scenario, UtilityOutcome,
};
pub use sim::{SimConfig, SimulationSummary};
pub use solver::{bp_optimal, classify_persistence, epsilon_structure, BPSolution, Persistence};
pub use switching::{Comparison, HistoryTrace, Perceived, SwitchRule, SwitchState, SwitchingEngine};
