//! One-shot and repeated game parameters.
//!
//! A [`GameSpec`] holds the raw Prisoner's Dilemma entries, the importance
//! multiplier `gamma` and the per-check opportunity cost `epsilon`. Every
//! downstream computation reads payoffs through [`GameSpec::table`], which is
//! already scaled by `gamma`; `epsilon` is never scaled.

use crate::error::{Error, Result};

/// Row player's payoffs for the four outcomes of a single round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneShot {
    pub temptation: f64,
    pub reward: f64,
    pub punishment: f64,
    pub sucker: f64,
}

impl OneShot {
    pub fn new(temptation: f64, reward: f64, punishment: f64, sucker: f64) -> Self {
        Self {
            temptation,
            reward,
            punishment,
            sucker,
        }
    }

    /// Donation game: `T = b`, `R = b - c`, `P = 0`, `S = -c`.
    pub fn donation(benefit: f64, cost: f64) -> Self {
        Self::new(benefit, benefit - cost, 0.0, -cost)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            factor * self.temptation,
            factor * self.reward,
            factor * self.punishment,
            factor * self.sucker,
        )
    }

    /// Payoff to a player choosing `own` against `other`.
    pub fn payoff(&self, own: Action, other: Action) -> f64 {
        match (own, other) {
            (Action::Cooperate, Action::Cooperate) => self.reward,
            (Action::Cooperate, Action::Defect) => self.sucker,
            (Action::Defect, Action::Cooperate) => self.temptation,
            (Action::Defect, Action::Defect) => self.punishment,
        }
    }

    fn validate_dilemma(&self) -> Result<()> {
        if !(self.temptation > self.reward) {
            return Err(Error::DilemmaViolation("T > R"));
        }
        if !(self.reward > self.punishment) {
            return Err(Error::DilemmaViolation("R > P"));
        }
        if !(self.punishment > self.sucker) {
            return Err(Error::DilemmaViolation("P > S"));
        }
        let two_reward = 2.0 * self.reward;
        let temptation_plus_sucker = self.temptation + self.sucker;
        if !(two_reward > temptation_plus_sucker) {
            return Err(Error::AlternationDominance {
                two_reward,
                temptation_plus_sucker,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Cooperate,
    Defect,
}

impl Action {
    pub fn symbol(self) -> char {
        match self {
            Action::Cooperate => 'C',
            Action::Defect => 'D',
        }
    }
}

/// Validated repeated-game parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameSpec {
    base: OneShot,
    gamma: f64,
    epsilon: f64,
    rounds: f64,
}

impl GameSpec {
    /// Builds a game and checks `T > R > P > S` and `2R > T + S`.
    pub fn prisoners_dilemma(base: OneShot, gamma: f64, epsilon: f64, rounds: f64) -> Result<Self> {
        base.validate_dilemma()?;
        Self::unchecked_ordering(base, gamma, epsilon, rounds)
    }

    pub fn donation(benefit: f64, cost: f64, gamma: f64, epsilon: f64, rounds: f64) -> Result<Self> {
        if !(cost > 0.0) || !(benefit > cost) {
            return Err(Error::domain(format!(
                "donation game needs b > c > 0, got b = {benefit}, c = {cost}"
            )));
        }
        Self::prisoners_dilemma(OneShot::donation(benefit, cost), gamma, epsilon, rounds)
    }

    /// Skips the dilemma ordering checks, for exploring arbitrary 2x2 tables.
    /// The remaining parameter domains are still enforced.
    pub fn unchecked_ordering(base: OneShot, gamma: f64, epsilon: f64, rounds: f64) -> Result<Self> {
        let entries = [base.temptation, base.reward, base.punishment, base.sucker];
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("payoff entries must be finite"));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::domain(format!("gamma must be positive, got {gamma}")));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::domain(format!(
                "epsilon must be non-negative, got {epsilon}"
            )));
        }
        if !(rounds >= 1.0) || !rounds.is_finite() {
            return Err(Error::domain(format!("rounds must be >= 1, got {rounds}")));
        }
        Ok(Self {
            base,
            gamma,
            epsilon,
            rounds,
        })
    }

    pub fn base(&self) -> OneShot {
        self.base
    }

    /// The gamma-scaled table used by every payoff computation.
    pub fn table(&self) -> OneShot {
        self.base.scaled(self.gamma)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rounds(&self) -> f64 {
        self.rounds
    }

    /// Round count for round-by-round execution (nearest integer).
    pub fn integer_rounds(&self) -> u32 {
        self.rounds.round() as u32
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::unchecked_ordering(self.base, gamma, self.epsilon, self.rounds)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::unchecked_ordering(self.base, self.gamma, epsilon, self.rounds)
    }

    pub fn with_rounds(&self, rounds: f64) -> Result<Self> {
        Self::unchecked_ordering(self.base, self.gamma, self.epsilon, rounds)
    }
}

impl Default for GameSpec {
    /// `T = 2, R = 1, P = 0, S = -1`, `gamma = 1`, `epsilon = 0.25`, `r = 50`.
    fn default() -> Self {
        Self {
            base: OneShot::donation(2.0, 1.0),
            gamma: 1.0,
            epsilon: 0.25,
            rounds: 50.0,
        }
    }
}

/// Expected number of rounds `1 / (1 - w)` for continuation probability `w`.
pub fn expected_rounds_from_continuation(w: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&w) {
        return Err(Error::domain(format!(
            "continuation probability must lie in [0, 1), got {w}"
        )));
    }
    Ok(1.0 / (1.0 - w))
}

/// Inverse of [`expected_rounds_from_continuation`].
pub fn continuation_from_expected_rounds(rounds: f64) -> Result<f64> {
    if !(rounds >= 1.0) || !rounds.is_finite() {
        return Err(Error::domain(format!("rounds must be >= 1, got {rounds}")));
    }
    Ok(1.0 - 1.0 / rounds)
}
