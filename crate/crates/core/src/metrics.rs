//! Strategy and cooperation frequencies derived from stationary distributions.
//!
//! In the small-mutation limit the population is almost always monomorphic,
//! so the cooperation frequency is the stationary-weighted fraction of
//! cooperative moves in each resident strategy's self-play.

use crate::error::{Error, Result};
use crate::evolution::{stationary_for_matrix, EvolutionParams, StationaryDistribution};
use crate::game::GameSpec;
use crate::payoff::payoff_matrix;
use crate::strategy::{baseline_set, standard_set, StrategyKind, StrategySpec};

/// Expected fraction of cooperative moves when `spec` plays itself for `rounds` rounds.
pub fn selfplay_cooperation_index(spec: &StrategySpec, rounds: f64) -> Result<f64> {
    if !(rounds >= 1.0) {
        return Err(Error::domain(format!("rounds must be >= 1, got {rounds}")));
    }
    spec.validate_for_rounds(rounds)?;
    Ok(match spec.kind() {
        StrategyKind::AllC | StrategyKind::TitForTat | StrategyKind::TrustCooperator => 1.0,
        StrategyKind::AllD => 0.0,
        StrategyKind::TrustDefector => f64::from(spec.theta()) / rounds,
    })
}

/// Stationary-weighted cooperation.
pub fn population_cooperation(stationary: &StationaryDistribution, indices: &[f64]) -> Result<f64> {
    if stationary.len() != indices.len() {
        return Err(Error::domain(format!(
            "{} stationary states but {} cooperation indices",
            stationary.len(),
            indices.len()
        )));
    }
    Ok(stationary
        .probabilities()
        .iter()
        .zip(indices)
        .map(|(p, c)| p * c)
        .sum())
}

/// Stationary distribution and cooperation frequency for one strategy set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub stationary: StationaryDistribution,
    pub selfplay: Vec<f64>,
    pub cooperation: f64,
}

pub fn evaluate_scenario(
    strategies: &[StrategySpec],
    game: &GameSpec,
    params: &EvolutionParams,
) -> Result<ScenarioOutcome> {
    let matrix = payoff_matrix(strategies, game)?;
    let stationary = stationary_for_matrix(&matrix, params)?;
    let selfplay = strategies
        .iter()
        .map(|s| selfplay_cooperation_index(s, game.rounds()))
        .collect::<Result<Vec<_>>>()?;
    let cooperation = population_cooperation(&stationary, &selfplay)?;
    Ok(ScenarioOutcome {
        stationary,
        selfplay,
        cooperation,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CooperationReport {
    /// Five-strategy set including TUC and TUD.
    pub with_trust: ScenarioOutcome,
    /// ALLC, ALLD and TFT only.
    pub without_trust: ScenarioOutcome,
    pub coop_with_trust: f64,
    pub coop_without_trust: f64,
    pub delta: f64,
}

impl CooperationReport {
    /// Self-play cooperation of each of the five strategies.
    pub fn per_state_coop(&self) -> impl Iterator<Item = (&str, f64)> {
        self.with_trust
            .stationary
            .labels()
            .iter()
            .map(String::as_str)
            .zip(self.with_trust.selfplay.iter().copied())
    }
}

/// Runs the pipeline with and without the trust-based strategies.
pub fn cooperation_report(
    game: &GameSpec,
    params: &EvolutionParams,
    theta: u32,
    check_prob: f64,
) -> Result<CooperationReport> {
    let trust_set = standard_set(theta, check_prob)?;
    let plain_set = baseline_set();
    let (with_trust, without_trust) = rayon::join(
        || evaluate_scenario(&trust_set, game, params),
        || evaluate_scenario(&plain_set, game, params),
    );
    let (with_trust, without_trust) = (with_trust?, without_trust?);
    let coop_with_trust = with_trust.cooperation;
    let coop_without_trust = without_trust.cooperation;
    Ok(CooperationReport {
        with_trust,
        without_trust,
        coop_with_trust,
        coop_without_trust,
        delta: coop_with_trust - coop_without_trust,
    })
}
