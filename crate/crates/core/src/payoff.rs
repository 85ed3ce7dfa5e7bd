//! Closed-form expected per-round payoffs between the five strategies.
//!
//! Entries are per-round averages over a match of `r` rounds, evaluated on
//! the gamma-scaled table with the raw opportunity cost. The two entries
//! between TUC and TUD depend on the round at which TUC's Bernoulli(p)
//! checks first catch TUD defecting; their geometric sums are evaluated by
//! [`geometric_tail`] and [`linear_tail`].

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::format_f64;
use crate::game::GameSpec;
use crate::strategy::{StrategyKind, StrategySpec};

/// Below this checking probability the `p -> 0` limits are used directly.
const ZERO_CHECK_PROB: f64 = 1e-12;

/// `n * p` below which the binomial series replaces the closed forms.
const SERIES_CUTOFF: f64 = 0.1;

/// `sum_{i<n} (1-p)^i = (1 - (1-p)^n) / p`, extended to real `n`.
pub fn geometric_tail(n: f64, p: f64) -> f64 {
    if p < ZERO_CHECK_PROB {
        return n;
    }
    if n * p < SERIES_CUTOFF {
        // (1 - (1-p)^n) / p = sum_{k>=1} C(n,k) (-1)^(k+1) p^(k-1)
        return binomial_series(n, p, 1);
    }
    -(n * (-p).ln_1p()).exp_m1() / p
}

/// `p * sum_{i<n} (n-1-i) (1-p)^i = ((1-p)^n + n p - 1) / p`, extended to real `n`.
pub fn linear_tail(n: f64, p: f64) -> f64 {
    if p < ZERO_CHECK_PROB {
        return 0.0;
    }
    if n * p < SERIES_CUTOFF {
        // ((1-p)^n + np - 1) / p = sum_{k>=2} C(n,k) (-1)^k p^(k-1)
        return -binomial_series(n, p, 2);
    }
    ((n * (-p).ln_1p()).exp_m1() + n * p) / p
}

/// `sum_{k>=first} C(n,k) (-1)^(k+1) p^(k-1)` for small `n p`.
fn binomial_series(n: f64, p: f64, first: u32) -> f64 {
    // term_k = C(n,k) (-p)^k, starting at k = 1
    let mut term = -n * p;
    for k in 1..first {
        let k = f64::from(k);
        term *= -(n - k) * p / (k + 1.0);
    }
    let mut sum = 0.0;
    let mut k = f64::from(first);
    for _ in 0..400 {
        sum += term;
        let next = term * (-(n - k) * p / (k + 1.0));
        if next.abs() <= f64::EPSILON * 1e-3 * sum.abs() || next == 0.0 {
            break;
        }
        term = next;
        k += 1.0;
    }
    -sum / p
}

/// Shared trust threshold of a pair, if either side is trust-based.
fn pair_theta(row: &StrategySpec, col: &StrategySpec) -> Result<f64> {
    match (row.kind().is_trust_based(), col.kind().is_trust_based()) {
        (true, true) if row.theta() != col.theta() => Err(Error::domain(format!(
            "{row} and {col} must share the trust threshold, got {} and {}",
            row.theta(),
            col.theta()
        ))),
        (true, _) => Ok(f64::from(row.theta())),
        (_, true) => Ok(f64::from(col.theta())),
        _ => Ok(0.0),
    }
}

/// Expected per-round payoff of `row` against `col`.
pub fn analytic_entry(row: &StrategySpec, col: &StrategySpec, game: &GameSpec) -> Result<f64> {
    use StrategyKind::*;

    let r = game.rounds();
    row.validate_for_rounds(r)?;
    col.validate_for_rounds(r)?;
    let theta = pair_theta(row, col)?;
    let g = game.table();
    let (t, rw, pn, s) = (g.temptation, g.reward, g.punishment, g.sucker);
    let e = game.epsilon();
    let rest = r - theta;

    // Punished after the first round, checking throughout.
    let exploited_checker = (s + (r - 1.0) * pn) / r - e;
    let first_strike = (t + (r - 1.0) * pn) / r;
    // Relaxed TUC: checks every round until trust, then with probability p.
    let relaxed_truster = |p: f64| rw - theta * e / r - p * rest * e / r;

    let value = match (row.kind(), col.kind()) {
        (AllC, AllC | TitForTat | TrustCooperator) => rw,
        (AllC, AllD) => s,
        (AllC, TrustDefector) => (theta * rw + rest * s) / r,

        (AllD, AllC) => t,
        (AllD, AllD) => pn,
        (AllD, TitForTat | TrustCooperator | TrustDefector) => first_strike,

        (TitForTat, AllC | TitForTat | TrustCooperator) => rw - e,
        (TitForTat, AllD) => exploited_checker,
        (TitForTat, TrustDefector) => (theta * rw + s + (rest - 1.0) * pn) / r - e,

        (TrustCooperator, AllC | TitForTat | TrustCooperator) => {
            relaxed_truster(row.check_prob())
        }
        (TrustCooperator, AllD) => exploited_checker,
        (TrustCooperator, TrustDefector) => {
            let p = row.check_prob();
            (theta * rw - theta * e) / r
                + (s * geometric_tail(rest, p) + (pn - e) * linear_tail(rest, p)) / r
        }

        (TrustDefector, AllC) => (theta * rw + rest * t - theta * e) / r,
        (TrustDefector, AllD) => exploited_checker,
        (TrustDefector, TitForTat) => (theta * rw + t + (rest - 1.0) * pn - theta * e) / r,
        (TrustDefector, TrustCooperator) => {
            let p = col.check_prob();
            (theta * rw - theta * e) / r
                + (t * geometric_tail(rest, p) + pn * linear_tail(rest, p)) / r
        }
        (TrustDefector, TrustDefector) => (theta * rw + rest * pn - theta * e) / r,
    };
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite payoff for {row} against {col}"
        )));
    }
    Ok(value)
}

/// Per-round expected payoffs between every ordered pair of a strategy set.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    strategies: Vec<StrategySpec>,
    entries: Vec<f64>,
}

impl PayoffMatrix {
    /// Wraps precomputed row-major entries.
    pub fn from_entries(strategies: Vec<StrategySpec>, entries: Vec<f64>) -> Result<Self> {
        let s = strategies.len();
        if s == 0 {
            return Err(Error::domain("strategy set is empty"));
        }
        if entries.len() != s * s {
            return Err(Error::domain(format!(
                "{} entries for {s} strategies",
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("payoff entries must be finite".into()));
        }
        Ok(Self {
            strategies,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn strategies(&self) -> &[StrategySpec] {
        &self.strategies
    }

    pub fn labels(&self) -> Vec<&'static str> {
        self.strategies.iter().map(StrategySpec::label).collect()
    }

    /// Payoff of strategy `row` against strategy `col`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let s = self.len();
        &self.entries[row * s..(row + 1) * s]
    }

    pub fn position(&self, kind: StrategyKind) -> Option<usize> {
        self.strategies.iter().position(|s| s.kind() == kind)
    }

    /// CSV with a `strategy` header cell followed by the column labels.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy");
        for label in self.labels() {
            out.push(',');
            out.push_str(label);
        }
        out.push('\n');
        for (i, spec) in self.strategies.iter().enumerate() {
            out.push_str(spec.label());
            for v in self.row(i) {
                let _ = write!(out, ",{}", format_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}

pub fn payoff_matrix(strategies: &[StrategySpec], game: &GameSpec) -> Result<PayoffMatrix> {
    if strategies.is_empty() {
        return Err(Error::domain("strategy set is empty"));
    }
    for (i, a) in strategies.iter().enumerate() {
        if strategies[..i].iter().any(|b| b.kind() == a.kind()) {
            return Err(Error::domain(format!("strategy {a} listed twice")));
        }
    }
    let mut entries = Vec::with_capacity(strategies.len() * strategies.len());
    for row in strategies {
        for col in strategies {
            let v = analytic_entry(row, col, game).map_err(|e| Error::Pair {
                row: row.label().into(),
                col: col.label().into(),
                source: Box::new(e),
            })?;
            entries.push(v);
        }
    }
    PayoffMatrix::from_entries(strategies.to_vec(), entries)
}
