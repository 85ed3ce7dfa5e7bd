//! End-to-end acceptance checks. Each test prints one PASS/FAIL line; run
//! with `--nocapture` to see them.

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use trust_evo::evolution::{stationary_for_matrix, transition_probabilities};
use trust_evo::simulate::sample_rng;
use trust_evo::strategy::standard_set;
use trust_evo::sweep::{run_sweep, Param, Preset, SweepConfig, SweepRow};
use trust_evo::verify::{compare_oracles, OracleGrid};
use trust_evo::{
    fixation_probability, markov_transition_matrix, monte_carlo_payoffs, payoff_matrix,
    stationary_distribution, CostConvention, EvolutionParams, GameSpec, StrategyKind,
};

fn report(id: u32, name: &str, start: Instant, budget: Duration, outcome: Result<String, String>) {
    let elapsed = start.elapsed();
    let outcome = outcome.and_then(|detail| {
        if elapsed <= budget {
            Ok(detail)
        } else {
            Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}"))
        }
    });
    match outcome {
        Ok(detail) => println!("PASS criterion {id} ({name}): {detail} [{elapsed:.2?}]"),
        Err(detail) => {
            println!("FAIL criterion {id} ({name}): {detail} [{elapsed:.2?}]");
            panic!("criterion {id} failed: {detail}");
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sweep(preset: Preset) -> Vec<SweepRow> {
    run_sweep(&SweepConfig::from_preset(preset)).expect("sweep runs").rows
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs()
}

#[test]
fn criterion_1_oracle_equivalence() {
    let start = Instant::now();
    let outcome = compare_oracles(&OracleGrid::default(), 1e-10)
        .map_err(|e| e.to_string())
        .and_then(|r| {
            ensure(r.passed(), || {
                let m = &r.mismatches[0];
                format!(
                    "{} mismatches, first {}/{}: analytic {} exact {}",
                    r.mismatches.len(),
                    m.row,
                    m.col,
                    m.analytic,
                    m.exact
                )
            })?;
            Ok(format!(
                "{n}/{n} comparisons within 1e-10, max relative error {:.1e}",
                r.max_relative_error,
                n = r.comparisons
            ))
        });
    report(1, "oracle equivalence", start, Duration::from_secs(10), outcome);
}

#[test]
fn criterion_2_neutral_limit() {
    let start = Instant::now();
    let check = || -> Result<String, String> {
        let full = standard_set(3, 0.25).unwrap();
        let game = GameSpec::default();
        let mut count = 0;
        for s in [2, 3, 5] {
            let matrix = payoff_matrix(&full[..s], &game).unwrap();
            for n in [10, 100] {
                let params = EvolutionParams::new(n, 0.0).unwrap();
                for i in 0..s {
                    for j in 0..s {
                        if i == j {
                            continue;
                        }
                        let rho = fixation_probability(&matrix, i, j, &params).unwrap();
                        ensure(rho == 1.0 / f64::from(n), || {
                            format!("rho = {rho} for s={s}, N={n}")
                        })?;
                        count += 1;
                    }
                }
                let pi = stationary_for_matrix(&matrix, &params).unwrap();
                let uniform = 1.0 / s as f64;
                for v in pi.probabilities() {
                    ensure((v - uniform).abs() <= 1e-12, || {
                        format!("stationary {v} for s={s}, N={n}")
                    })?;
                }
            }
        }
        Ok(format!("{count} fixation probabilities equal 1/N, distributions uniform"))
    };
    report(2, "neutral limit", start, Duration::from_secs(1), check());
}

fn fig3_rank_order(rows: &[SweepRow]) -> Result<String, String> {
    for row in rows {
        let eps = row.params.epsilon;
        let best = row.argmax();
        if eps == 0.0 {
            ensure(
                matches!(best, StrategyKind::TitForTat | StrategyKind::TrustCooperator),
                || format!("argmax {best} at epsilon 0"),
            )?;
        } else if (0.05 - 1e-9..=0.30 + 1e-9).contains(&eps) {
            ensure(best == StrategyKind::TrustCooperator, || {
                format!("argmax {best} at epsilon {eps}")
            })?;
        } else if eps >= 0.8 - 1e-9 {
            ensure(best == StrategyKind::AllD, || format!("argmax {best} at epsilon {eps}"))?;
        }
    }
    Ok(format!("rank order holds over {} epsilon values", rows.len()))
}

fn fig3_delta(rows: &[SweepRow]) -> Result<String, String> {
    let worst = rows
        .iter()
        .min_by(|a, b| a.coop_delta.total_cmp(&b.coop_delta))
        .expect("non-empty grid");
    ensure(worst.coop_delta >= 0.0, || {
        format!("coop_delta {} at epsilon {}", worst.coop_delta, worst.params.epsilon)
    })?;
    Ok(format!(
        "min coop_delta {:.4} at epsilon {}",
        worst.coop_delta, worst.params.epsilon
    ))
}

#[test]
fn criterion_3_fig3_argmax() {
    let start = Instant::now();
    let rows = sweep(Preset::Fig3);
    report(3, "fig3 argmax", start, Duration::from_secs(5), fig3_rank_order(&rows));
}

#[test]
fn criterion_4_fig3_cooperation_gain() {
    let start = Instant::now();
    let rows = sweep(Preset::Fig3);
    report(4, "fig3 coop delta", start, Duration::from_secs(10), fig3_delta(&rows));
}

/// Grid gammas at which TUC is the most frequent strategy.
fn tuc_gammas(rows: &[SweepRow], rounds: f64) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.params.rounds == rounds && r.argmax() == StrategyKind::TrustCooperator)
        .map(|r| r.params.gamma)
        .collect()
}

#[test]
fn criterion_5_fig4_importance() {
    let start = Instant::now();
    let rows = sweep(Preset::Fig4);
    let check = || -> Result<String, String> {
        let at = |rounds: f64, gamma: f64| {
            rows.iter()
                .find(|r| r.params.rounds == rounds && close(r.params.gamma, gamma))
                .map(SweepRow::argmax)
                .ok_or_else(|| format!("no grid point r={rounds}, gamma={gamma}"))
        };
        let mut failures = Vec::new();
        for (gamma, expected) in [
            (0.1, StrategyKind::AllD),
            (1.0, StrategyKind::TrustCooperator),
            (1000.0, StrategyKind::TrustDefector),
        ] {
            let got = at(20.0, gamma)?;
            if got != expected {
                failures.push(format!("r=20, gamma={gamma}: argmax {got}, expected {expected}"));
            }
        }
        let short = tuc_gammas(&rows, 20.0);
        let long = tuc_gammas(&rows, 200.0);
        let span = |g: &[f64]| match (g.first(), g.last()) {
            (Some(lo), Some(hi)) => (hi / lo).log10(),
            _ => f64::NEG_INFINITY,
        };
        if span(&long) <= span(&short) {
            failures.push(format!("TUC span r=200 {long:?} not wider than r=20 {short:?}"));
        }
        let detail = format!(
            "TUC argmax for gamma in [{:.3}, {:.3}] at r=20, [{:.3}, {:.3}] at r=200",
            short.first().copied().unwrap_or(f64::NAN),
            short.last().copied().unwrap_or(f64::NAN),
            long.first().copied().unwrap_or(f64::NAN),
            long.last().copied().unwrap_or(f64::NAN),
        );
        ensure(failures.is_empty(), || format!("{}; {detail}", failures.join("; ")))?;
        Ok(detail)
    };
    report(5, "fig4 importance", start, Duration::from_secs(30), check());
}

#[test]
fn criterion_6_fig5_trustfulness() {
    let start = Instant::now();
    let rows = sweep(Preset::Fig5);
    let check = || -> Result<String, String> {
        let series: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| close(r.params.epsilon, 0.25))
            .map(|r| (r.params.get(Param::Trustfulness), r.frequency(StrategyKind::TrustCooperator)))
            .collect();
        ensure(series.len() == 12, || format!("{} points at epsilon 0.25", series.len()))?;
        let (peak, _) = series
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .expect("non-empty");
        ensure(peak > 0 && peak + 1 < series.len(), || {
            format!("TUC mass peaks at the boundary 1/p = {}", series[peak].0)
        })?;
        let careless = rows
            .iter()
            .find(|r| close(r.params.epsilon, 0.05) && close(r.params.get(Param::Trustfulness), 50.0))
            .ok_or("no grid point epsilon=0.05, 1/p=50")?;
        ensure(careless.coop_delta < 0.0, || {
            format!("coop_delta {} at epsilon 0.05, 1/p 50", careless.coop_delta)
        })?;
        Ok(format!(
            "TUC mass peaks at 1/p = {} ({:.4}); coop_delta {:.4} at epsilon 0.05, 1/p 50",
            series[peak].0, series[peak].1, careless.coop_delta
        ))
    };
    report(6, "fig5 trustfulness", start, Duration::from_secs(30), check());
}

#[test]
fn criterion_7_threshold_robustness() {
    let start = Instant::now();
    let check = || -> Result<String, String> {
        let mut details = Vec::new();
        let mut failed = false;
        for (preset, theta) in [(Preset::AppendixTheta5, 5.0), (Preset::AppendixTheta10, 10.0)] {
            let rows = sweep(preset);
            ensure(rows.iter().all(|r| r.params.theta == theta), || {
                format!("preset {} did not fix theta", preset.name())
            })?;
            for check in [fig3_rank_order(&rows), fig3_delta(&rows)] {
                failed |= check.is_err();
                details.push(format!("theta {theta}: {}", check.unwrap_or_else(|e| e)));
            }
        }
        ensure(!failed, || details.join("; "))?;
        Ok(details.join("; "))
    };
    report(7, "threshold robustness", start, Duration::from_secs(30), check());
}

/// Fraction of `runs` birth-death processes started from one mutant that
/// end with the mutant fixed. Steps where nothing changes are skipped.
fn simulate_fixation(
    matrix: &trust_evo::PayoffMatrix,
    mutant: usize,
    resident: usize,
    params: &EvolutionParams,
    runs: u64,
    seed: u64,
) -> f64 {
    let n = params.population_size();
    let up: Vec<f64> = (0..=n)
        .map(|k| {
            let (plus, minus) = transition_probabilities(matrix, mutant, resident, k, params).unwrap();
            if plus + minus > 0.0 {
                plus / (plus + minus)
            } else {
                0.0
            }
        })
        .collect();
    let fixed: u64 = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let mut k = 1;
            while k > 0 && k < n {
                if rng.gen::<f64>() < up[k as usize] {
                    k += 1;
                } else {
                    k -= 1;
                }
            }
            u64::from(k == n)
        })
        .sum();
    fixed as f64 / runs as f64
}

#[test]
fn criterion_8_stochastic_validation() {
    let start = Instant::now();
    let check = || -> Result<String, String> {
        let runs = 100_000u64;
        let game = GameSpec::default();
        let set = standard_set(3, 0.25).unwrap();
        let matrix = payoff_matrix(&set, &game).unwrap();
        let params = EvolutionParams::new(20, 0.1).unwrap();
        let idx = |k| matrix.position(k).unwrap();
        let mut details = Vec::new();
        for (seed, (mutant, resident)) in [
            (StrategyKind::AllD, StrategyKind::AllC),
            (StrategyKind::TrustCooperator, StrategyKind::TitForTat),
            (StrategyKind::TrustDefector, StrategyKind::TrustCooperator),
        ]
        .into_iter()
        .enumerate()
        {
            let rho = fixation_probability(&matrix, idx(mutant), idx(resident), &params).unwrap();
            let freq =
                simulate_fixation(&matrix, idx(mutant), idx(resident), &params, runs, seed as u64);
            let sigma = (rho * (1.0 - rho) / runs as f64).sqrt();
            let z = (freq - rho) / sigma;
            ensure(z.abs() <= 3.0, || {
                format!("{mutant} into {resident}: simulated {freq}, rho {rho}, z {z:.2}")
            })?;
            details.push(format!("{mutant}->{resident} z={z:+.2}"));
        }

        let rounds = 50;
        for (a, b) in [
            (StrategyKind::TrustCooperator, StrategyKind::TrustDefector),
            (StrategyKind::TrustCooperator, StrategyKind::TitForTat),
            (StrategyKind::TrustCooperator, StrategyKind::TrustCooperator),
        ] {
            let (sa, sb) = (&set[idx(a)], &set[idx(b)]);
            let conv = CostConvention::ClosedForm;
            let (ea, eb) = trust_evo::exact_expected_payoffs(sa, sb, &game, rounds, conv).unwrap();
            let mc = monte_carlo_payoffs(sa, sb, &game, rounds, conv, runs, 17).unwrap();
            for (side, exact, mean, se) in [("a", ea, mc.mean_a, mc.stderr_a), ("b", eb, mc.mean_b, mc.stderr_b)] {
                let ok = if se == 0.0 {
                    (mean - exact).abs() <= 1e-12
                } else {
                    (mean - exact).abs() <= 3.0 * se
                };
                ensure(ok, || {
                    format!("{a} vs {b} side {side}: monte carlo {mean} +- {se}, exact {exact}")
                })?;
            }
            details.push(format!(
                "{a}v{b} z={:+.2}",
                if mc.stderr_a > 0.0 { (mc.mean_a - ea) / mc.stderr_a } else { 0.0 }
            ));
        }
        Ok(details.join(", "))
    };
    report(8, "stochastic validation", start, Duration::from_secs(120), check());
}

#[test]
fn criterion_9_scaling_invariance() {
    let start = Instant::now();
    let check = || -> Result<String, String> {
        let set = standard_set(3, 0.25).unwrap();
        let solve = |gamma: f64, beta: f64| {
            let game = GameSpec::default()
                .with_epsilon(0.0)
                .and_then(|g| g.with_gamma(gamma))
                .unwrap();
            let matrix = payoff_matrix(&set, &game).unwrap();
            let params = EvolutionParams::new(100, beta).unwrap();
            stationary_distribution(&markov_transition_matrix(&matrix, &params).unwrap()).unwrap()
        };
        let scaled = solve(10.0, 0.1);
        let reference = solve(1.0, 1.0);
        let diff = scaled
            .probabilities()
            .iter()
            .zip(reference.probabilities())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        ensure(diff <= 1e-10, || format!("max difference {diff:e}"))?;
        Ok(format!("max difference {diff:.1e}"))
    };
    report(9, "scaling invariance", start, Duration::from_secs(5), check());
}
