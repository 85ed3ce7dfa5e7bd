//! Pairwise-comparison imitation dynamics in a finite, well-mixed population
//! and the small-mutation Markov chain over monomorphic states.
//!
//! Fixation probabilities are evaluated in log space. Under strong selection
//! or large `gamma` they span far more than the `f64` range, so the chain
//! keeps log transition rates and the stationary distribution is obtained by
//! subtraction-free state reduction on those log rates.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format_f64;
use crate::payoff::PayoffMatrix;

/// Population size `N` and selection strength `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionParams {
    population_size: u32,
    selection_strength: f64,
}

impl EvolutionParams {
    pub fn new(population_size: u32, selection_strength: f64) -> Result<Self> {
        if population_size < 2 {
            return Err(Error::domain(format!(
                "population size must be >= 2, got {population_size}"
            )));
        }
        if !(selection_strength >= 0.0) || !selection_strength.is_finite() {
            return Err(Error::domain(format!(
                "selection strength must be finite and >= 0, got {selection_strength}"
            )));
        }
        Ok(Self {
            population_size,
            selection_strength,
        })
    }

    pub fn population_size(&self) -> u32 {
        self.population_size
    }

    pub fn selection_strength(&self) -> f64 {
        self.selection_strength
    }
}

impl Default for EvolutionParams {
    /// `N = 100`, `beta = 0.1`.
    fn default() -> Self {
        Self {
            population_size: 100,
            selection_strength: 0.1,
        }
    }
}

/// Average payoffs `(Pi_A(k), Pi_B(k))` with `k` A-players among `n`.
pub fn group_payoffs(
    matrix: &PayoffMatrix,
    a: usize,
    b: usize,
    k: u32,
    n: u32,
) -> Result<(f64, f64)> {
    if k < 1 || k + 1 > n {
        return Err(Error::domain(format!("k = {k} outside 1..={}", n.saturating_sub(1))));
    }
    let (k, n) = (f64::from(k), f64::from(n));
    let pi_a = ((k - 1.0) * matrix.get(a, a) + (n - k) * matrix.get(a, b)) / (n - 1.0);
    let pi_b = (k * matrix.get(b, a) + (n - k - 1.0) * matrix.get(b, b)) / (n - 1.0);
    Ok((pi_a, pi_b))
}

/// Probability of imitating a model whose fitness exceeds one's own by `advantage`.
pub fn fermi_probability(advantage: f64, beta: f64) -> f64 {
    let x = beta * advantage;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `(T+(k), T-(k))`: probabilities that the number of A-players grows or
/// shrinks by one in a single imitation step. Zero at `k = 0` and `k = N`.
pub fn transition_probabilities(
    matrix: &PayoffMatrix,
    a: usize,
    b: usize,
    k: u32,
    params: &EvolutionParams,
) -> Result<(f64, f64)> {
    let n = params.population_size;
    if k > n {
        return Err(Error::domain(format!("k = {k} exceeds N = {n}")));
    }
    if k == 0 || k == n {
        return Ok((0.0, 0.0));
    }
    let (pi_a, pi_b) = group_payoffs(matrix, a, b, k, n)?;
    let mixing = f64::from(n - k) / f64::from(n) * f64::from(k) / f64::from(n);
    let beta = params.selection_strength;
    Ok((
        mixing * fermi_probability(pi_a - pi_b, beta),
        mixing * fermi_probability(pi_b - pi_a, beta),
    ))
}

/// Partial sums `x_i = -beta * sum_{j<=i} (Pi_A(j) - Pi_B(j))`, i.e. the
/// logs of `prod_{j<=i} T-(j)/T+(j)`.
fn log_ratio_products(
    matrix: &PayoffMatrix,
    mutant: usize,
    resident: usize,
    params: &EvolutionParams,
) -> Result<Vec<f64>> {
    if mutant == resident {
        return Err(Error::domain("mutant and resident must differ"));
    }
    let n = params.population_size;
    let beta = params.selection_strength;
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(n as usize - 1);
    for j in 1..n {
        let (pi_a, pi_b) = group_payoffs(matrix, mutant, resident, j, n)?;
        acc -= beta * (pi_a - pi_b);
        out.push(acc);
    }
    Ok(out)
}

/// `(shift, e^-shift + sum_i e^(x_i - shift))` with `shift = max(0, max x_i)`,
/// so that `rho = e^-shift / denominator`.
fn shifted_denominator(logs: &[f64]) -> (f64, f64) {
    let shift = logs.iter().copied().fold(0.0, f64::max);
    let sum: f64 = logs.iter().map(|x| (x - shift).exp()).sum();
    (shift, (-shift).exp() + sum)
}

/// Probability that a single `mutant` takes over a population of `resident`s.
pub fn fixation_probability(
    matrix: &PayoffMatrix,
    mutant: usize,
    resident: usize,
    params: &EvolutionParams,
) -> Result<f64> {
    let logs = log_ratio_products(matrix, mutant, resident, params)?;
    let (shift, denom) = shifted_denominator(&logs);
    Ok((-shift).exp() / denom)
}

/// Natural log of [`fixation_probability`], finite even when it underflows.
pub fn log_fixation_probability(
    matrix: &PayoffMatrix,
    mutant: usize,
    resident: usize,
    params: &EvolutionParams,
) -> Result<f64> {
    let logs = log_ratio_products(matrix, mutant, resident, params)?;
    let (shift, denom) = shifted_denominator(&logs);
    Ok(-shift - denom.ln())
}

/// Transition matrix of the chain over monomorphic states.
///
/// Row `i` is the current resident strategy; the off-diagonal entry `(i, j)`
/// is `rho(mutant j, resident i) / (s - 1)`. Off-diagonal entries are stored
/// as natural logs.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    labels: Vec<String>,
    log_rates: Vec<f64>,
}

impl TransitionMatrix {
    /// Builds a matrix from plain off-diagonal probabilities (diagonal ignored).
    pub fn from_probabilities(labels: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let s = labels.len();
        if s < 2 || rows.len() != s || rows.iter().any(|r| r.len() != s) {
            return Err(Error::domain("transition matrix must be square with s >= 2"));
        }
        let mut log_rates = vec![f64::NEG_INFINITY; s * s];
        for i in 0..s {
            let mut total = 0.0;
            for j in (0..s).filter(|&j| j != i) {
                let v = rows[i][j];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::domain(format!("entry ({i}, {j}) = {v} is not a probability")));
                }
                total += v;
                log_rates[i * s + j] = v.ln();
            }
            if total > 1.0 + 1e-12 {
                return Err(Error::domain(format!("row {i} leaves with probability {total} > 1")));
            }
        }
        Ok(Self { labels, log_rates })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Log of the off-diagonal entry `(i, j)`; `-inf` on the diagonal.
    pub fn log_rate(&self, i: usize, j: usize) -> f64 {
        if i == j {
            f64::NEG_INFINITY
        } else {
            self.log_rates[i * self.len() + j]
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0 - self.exit_probability(i)
        } else {
            self.log_rate(i, j).exp()
        }
    }

    /// Probability of leaving state `i` in one step.
    pub fn exit_probability(&self, i: usize) -> f64 {
        (0..self.len())
            .filter(|&j| j != i)
            .map(|j| self.log_rate(i, j).exp())
            .sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| (0..self.len()).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("resident");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(l);
            for j in 0..self.len() {
                let _ = write!(out, ",{}", format_f64(self.get(i, j)));
            }
            out.push('\n');
        }
        out
    }
}

pub fn markov_transition_matrix(
    matrix: &PayoffMatrix,
    params: &EvolutionParams,
) -> Result<TransitionMatrix> {
    let s = matrix.len();
    if s < 2 {
        return Err(Error::domain("the chain needs at least two strategies"));
    }
    let log_share = ((s - 1) as f64).ln();
    let log_rates = (0..s * s)
        .into_par_iter()
        .map(|idx| {
            let (resident, mutant) = (idx / s, idx % s);
            if resident == mutant {
                Ok(f64::NEG_INFINITY)
            } else {
                log_fixation_probability(matrix, mutant, resident, params).map(|l| l - log_share)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransitionMatrix {
        labels: matrix.labels().into_iter().map(String::from).collect(),
        log_rates,
    })
}

/// Long-run fraction of time spent in each monomorphic state.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    labels: Vec<String>,
    probabilities: Vec<f64>,
}

impl StationaryDistribution {
    pub fn new(labels: Vec<String>, probabilities: Vec<f64>) -> Result<Self> {
        if labels.len() != probabilities.len() {
            return Err(Error::domain("labels and probabilities differ in length"));
        }
        if probabilities.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::domain("probabilities must be non-negative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("probabilities sum to {total}")));
        }
        Ok(Self {
            labels,
            probabilities,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.probabilities[i])
    }

    /// Label of the most frequent state (first one on ties).
    pub fn argmax(&self) -> &str {
        let mut best = 0;
        for (i, p) in self.probabilities.iter().enumerate() {
            if *p > self.probabilities[best] {
                best = i;
            }
        }
        &self.labels[best]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,probability\n");
        for (l, p) in self.labels.iter().zip(&self.probabilities) {
            let _ = writeln!(out, "{l},{}", format_f64(*p));
        }
        out
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn log_sum(values: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.collect();
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + values.iter().map(|v| (v - hi).exp()).sum::<f64>().ln()
}

/// Solves `pi M = pi`, `sum(pi) = 1` by Gaussian state elimination
/// (Grassmann-Taksar-Heyman) carried out on log rates.
///
/// The elimination only adds, multiplies and divides non-negative
/// quantities, and it never reads the diagonal of `M`, so it stays exact to
/// rounding however small the exit probabilities are.
pub fn stationary_distribution(transition: &TransitionMatrix) -> Result<StationaryDistribution> {
    let s = transition.len();
    if s < 2 {
        return Err(Error::domain("the chain needs at least two states"));
    }
    let mut a: Vec<Vec<f64>> = (0..s)
        .map(|i| (0..s).map(|j| transition.log_rate(i, j)).collect())
        .collect();
    for k in (1..s).rev() {
        let out = log_sum((0..k).map(|j| a[k][j]));
        if out == f64::NEG_INFINITY || out.is_nan() {
            return Err(Error::Numerical(format!(
                "chain is reducible: state {} cannot reach states {:?} after eliminating {:?}",
                transition.labels[k],
                &transition.labels[..k],
                &transition.labels[k + 1..]
            )));
        }
        for row in &mut a[..k] {
            row[k] -= out;
        }
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                a[i][j] = log_add(a[i][j], a[i][k] + a[k][j]);
            }
        }
    }
    let mut log_pi = vec![0.0; s];
    for j in 1..s {
        log_pi[j] = log_sum((0..j).map(|i| log_pi[i] + a[i][j]));
    }
    let norm = log_sum(log_pi.iter().copied());
    if !norm.is_finite() {
        return Err(Error::Numerical(format!(
            "stationary normalisation diverged (log total {norm})"
        )));
    }
    let mut probabilities: Vec<f64> = log_pi.iter().map(|l| (l - norm).exp()).collect();
    let total: f64 = probabilities.iter().sum();
    for p in &mut probabilities {
        *p /= total;
    }
    StationaryDistribution::new(transition.labels.clone(), probabilities)
}

/// Stationary distribution for a strategy set: matrix -> chain -> solve.
pub fn stationary_for_matrix(
    matrix: &PayoffMatrix,
    params: &EvolutionParams,
) -> Result<StationaryDistribution> {
    stationary_distribution(&markov_transition_matrix(matrix, params)?)
}
