//! Evolutionary dynamics of trust-based strategies in the repeated
//! Prisoner's Dilemma.
//!
//! The pipeline runs bottom-up:
//!
//! * [`game`]: payoff table, importance `gamma`, opportunity cost `epsilon`, rounds `r`.
//! * [`strategy`]: per-round behaviour of ALLC, ALLD, TFT, TUC and TUD.
//! * [`payoff`]: closed-form expected payoff matrix.
//! * [`simulate`]: round-by-round execution, exact and Monte Carlo, used to check `payoff`.
//! * [`evolution`]: Fermi imitation, fixation probabilities and the small-mutation chain.
//! * [`metrics`]: strategy and cooperation frequencies.
//! * [`sweep`]: parameter grids, figure presets, CSV output.
//! * [`verify`]: closed-form payoffs checked against exact enumeration.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolution;
pub mod game;
pub mod metrics;
pub mod payoff;
pub mod simulate;
pub mod strategy;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use evolution::{
    fixation_probability, markov_transition_matrix, stationary_distribution, EvolutionParams,
    StationaryDistribution, TransitionMatrix,
};
pub use game::{Action, GameSpec, OneShot};
pub use metrics::{cooperation_report, CooperationReport};
pub use payoff::{analytic_entry, payoff_matrix, PayoffMatrix};
pub use simulate::{
    exact_expected_payoffs, monte_carlo_payoffs, play_match, CostConvention, MatchOutcome,
};
pub use strategy::{StrategyKind, StrategySpec, StrategyState};

/// Shortest decimal representation that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    if v == 0.0 {
        // Normalise -0.
        return "0".into();
    }
    format!("{v}")
}
