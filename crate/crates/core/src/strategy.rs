//! Per-round behaviour of the five strategies.
//!
//! A player's behaviour is a pure function of its [`StrategySpec`] and its
//! current [`StrategyState`]. The only randomness (a trusting TUC's
//! occasional check) is injected as an explicit uniform draw, so the same
//! machines drive both the exact enumeration and the Monte Carlo runs.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::game::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    AllC,
    AllD,
    TitForTat,
    /// Trust-based unconditional cooperator.
    TrustCooperator,
    /// Trust-based unconditional defector.
    TrustDefector,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::AllC,
        StrategyKind::AllD,
        StrategyKind::TitForTat,
        StrategyKind::TrustCooperator,
        StrategyKind::TrustDefector,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::AllC => "ALLC",
            StrategyKind::AllD => "ALLD",
            StrategyKind::TitForTat => "TFT",
            StrategyKind::TrustCooperator => "TUC",
            StrategyKind::TrustDefector => "TUD",
        }
    }

    pub fn is_trust_based(self) -> bool {
        matches!(
            self,
            StrategyKind::TrustCooperator | StrategyKind::TrustDefector
        )
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown strategy `{s}`")))
    }
}

/// A strategy together with its trust parameters.
///
/// `theta` and `check_prob` are carried by every spec but only read for the
/// trust-based kinds; `check_prob` only for TUC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategySpec {
    kind: StrategyKind,
    theta: u32,
    check_prob: f64,
}

impl StrategySpec {
    pub fn all_c() -> Self {
        Self::plain(StrategyKind::AllC)
    }

    pub fn all_d() -> Self {
        Self::plain(StrategyKind::AllD)
    }

    pub fn tit_for_tat() -> Self {
        Self::plain(StrategyKind::TitForTat)
    }

    pub fn trust_cooperator(theta: u32, check_prob: f64) -> Result<Self> {
        Self::new(StrategyKind::TrustCooperator, theta, check_prob)
    }

    pub fn trust_defector(theta: u32) -> Result<Self> {
        Self::new(StrategyKind::TrustDefector, theta, 0.0)
    }

    /// Builds any kind; trust parameters are validated only where they are used.
    pub fn new(kind: StrategyKind, theta: u32, check_prob: f64) -> Result<Self> {
        if kind.is_trust_based() && theta < 1 {
            return Err(Error::domain(format!(
                "{kind} needs a trust threshold >= 1, got {theta}"
            )));
        }
        if kind == StrategyKind::TrustCooperator && !(0.0..=1.0).contains(&check_prob) {
            return Err(Error::domain(format!(
                "checking probability must lie in [0, 1], got {check_prob}"
            )));
        }
        Ok(Self {
            kind,
            theta,
            check_prob,
        })
    }

    fn plain(kind: StrategyKind) -> Self {
        Self {
            kind,
            theta: 0,
            check_prob: 0.0,
        }
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn theta(&self) -> u32 {
        self.theta
    }

    pub fn check_prob(&self) -> f64 {
        self.check_prob
    }

    pub fn label(&self) -> &'static str {
        self.kind.label()
    }

    /// Rejects trust thresholds that are never reached within `rounds`.
    pub fn validate_for_rounds(&self, rounds: f64) -> Result<()> {
        if self.kind.is_trust_based() && !(f64::from(self.theta) < rounds) {
            return Err(Error::domain(format!(
                "{} trust threshold {} must be below the number of rounds {rounds}",
                self.kind, self.theta
            )));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> StrategyState {
        StrategyState::default()
    }

    pub fn next_action(&self, state: &StrategyState) -> Action {
        let tft = match state.last_observed {
            Some(Action::Defect) => Action::Defect,
            _ => Action::Cooperate,
        };
        match self.kind {
            StrategyKind::AllC => Action::Cooperate,
            StrategyKind::AllD => Action::Defect,
            StrategyKind::TitForTat => tft,
            StrategyKind::TrustCooperator if state.trusting && !state.reverted => {
                Action::Cooperate
            }
            StrategyKind::TrustDefector if state.trusting => Action::Defect,
            StrategyKind::TrustCooperator | StrategyKind::TrustDefector => tft,
        }
    }

    /// Probability that the player checks the opponent's action this round.
    pub fn check_probability(&self, state: &StrategyState) -> f64 {
        match self.kind {
            StrategyKind::AllC | StrategyKind::AllD => 0.0,
            StrategyKind::TitForTat => 1.0,
            StrategyKind::TrustCooperator if state.is_relaxed() => self.check_prob,
            StrategyKind::TrustCooperator => 1.0,
            StrategyKind::TrustDefector if state.trusting => 0.0,
            StrategyKind::TrustDefector => 1.0,
        }
    }

    /// Check decision for a uniform `draw` in `[0, 1)`.
    pub fn decides_to_check(&self, state: &StrategyState, draw: f64) -> bool {
        draw < self.check_probability(state)
    }

    /// Updates the state after a checked round revealed `opponent`.
    pub fn observe(
        &self,
        state: &StrategyState,
        checked: bool,
        opponent: Action,
    ) -> Result<StrategyState> {
        if !checked {
            return Err(Error::Contract(
                "observe called for a round that was not checked".into(),
            ));
        }
        let mut next = *state;
        next.last_observed = Some(opponent);
        next.trust_level += match opponent {
            Action::Cooperate => 1,
            Action::Defect => -1,
        };
        if self.kind.is_trust_based()
            && !next.trusting
            && next.trust_level >= i64::from(self.theta)
        {
            next.trusting = true;
        }
        if self.kind == StrategyKind::TrustCooperator
            && next.trusting
            && opponent == Action::Defect
        {
            next.reverted = true;
        }
        Ok(next)
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Mutable per-match state of one player.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrategyState {
    /// Observed cooperative minus defective moves.
    pub trust_level: i64,
    /// The threshold was reached at some past round. Never cleared.
    pub trusting: bool,
    /// A trusting TUC caught a defection and plays TFT for good.
    pub reverted: bool,
    pub last_observed: Option<Action>,
}

impl StrategyState {
    /// Trusting and not reverted: the state in which TUC stops checking every round.
    pub fn is_relaxed(&self) -> bool {
        self.trusting && !self.reverted
    }
}

/// The five strategies with shared trust parameters, in canonical order.
pub fn standard_set(theta: u32, check_prob: f64) -> Result<Vec<StrategySpec>> {
    Ok(vec![
        StrategySpec::all_c(),
        StrategySpec::all_d(),
        StrategySpec::tit_for_tat(),
        StrategySpec::trust_cooperator(theta, check_prob)?,
        StrategySpec::trust_defector(theta)?,
    ])
}

/// ALLC, ALLD and TFT only.
pub fn baseline_set() -> Vec<StrategySpec> {
    vec![
        StrategySpec::all_c(),
        StrategySpec::all_d(),
        StrategySpec::tit_for_tat(),
    ]
}
