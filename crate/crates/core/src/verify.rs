//! Cross-check of the closed-form payoffs against exact enumeration.

use rayon::prelude::*;

use crate::error::Result;
use crate::game::{GameSpec, OneShot};
use crate::payoff::analytic_entry;
use crate::simulate::{exact_expected_payoffs, CostConvention};
use crate::strategy::{standard_set, StrategySpec};

/// Parameter grid for [`compare_oracles`]. Combinations with `theta >= rounds`
/// are outside the trust-based strategies' domain and are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleGrid {
    pub base: OneShot,
    pub thetas: Vec<u32>,
    pub check_probs: Vec<f64>,
    pub rounds: Vec<u32>,
    pub epsilons: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self {
            base: OneShot::donation(2.0, 1.0),
            thetas: vec![1, 3, 5, 10],
            check_probs: vec![0.0, 0.1, 0.25, 0.5, 1.0],
            rounds: vec![5, 10, 20, 50],
            epsilons: vec![0.0, 0.25, 1.0],
            gammas: vec![0.1, 1.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub row: StrategySpec,
    pub col: StrategySpec,
    pub game: GameSpec,
    pub analytic: f64,
    pub exact: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleReport {
    pub comparisons: usize,
    pub max_relative_error: f64,
    pub mismatches: Vec<Mismatch>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// `|a - b| / max(|b|, scale)`. The floor `scale` keeps entries that are
/// exactly zero from turning summation rounding into an infinite error.
pub fn relative_error(a: f64, b: f64, scale: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(scale)
    }
}

/// Largest per-round magnitude a payoff is built from.
fn payoff_scale(game: &GameSpec) -> f64 {
    let t = game.table();
    [t.temptation, t.reward, t.punishment, t.sucker, game.epsilon()]
        .into_iter()
        .fold(0.0, |m, v| m.max(v.abs()))
}

struct Point {
    theta: u32,
    p: f64,
    game: GameSpec,
    rounds: u32,
}

/// Compares [`analytic_entry`] with [`exact_expected_payoffs`] for every
/// ordered pair of the standard strategy set at every grid point.
pub fn compare_oracles(grid: &OracleGrid, tolerance: f64) -> Result<OracleReport> {
    let mut points = Vec::new();
    for &theta in &grid.thetas {
        for &p in &grid.check_probs {
            for &rounds in &grid.rounds {
                if theta >= rounds {
                    continue;
                }
                for &eps in &grid.epsilons {
                    for &gamma in &grid.gammas {
                        let game = GameSpec::prisoners_dilemma(
                            grid.base,
                            gamma,
                            eps,
                            f64::from(rounds),
                        )?;
                        points.push(Point {
                            theta,
                            p,
                            game,
                            rounds,
                        });
                    }
                }
            }
        }
    }

    let per_point = points
        .par_iter()
        .map(|pt| {
            let set = standard_set(pt.theta, pt.p)?;
            let scale = payoff_scale(&pt.game);
            let mut report = OracleReport::default();
            for row in &set {
                for col in &set {
                    let analytic = analytic_entry(row, col, &pt.game)?;
                    let (exact, _) = exact_expected_payoffs(
                        row,
                        col,
                        &pt.game,
                        pt.rounds,
                        CostConvention::ClosedForm,
                    )?;
                    let err = relative_error(exact, analytic, scale);
                    report.comparisons += 1;
                    report.max_relative_error = report.max_relative_error.max(err);
                    if !(err <= tolerance) {
                        report.mismatches.push(Mismatch {
                            row: *row,
                            col: *col,
                            game: pt.game,
                            analytic,
                            exact,
                            relative_error: err,
                        });
                    }
                }
            }
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(per_point
        .into_iter()
        .fold(OracleReport::default(), |mut acc, r| {
            acc.comparisons += r.comparisons;
            acc.max_relative_error = acc.max_relative_error.max(r.max_relative_error);
            acc.mismatches.extend(r.mismatches);
            acc
        }))
}
