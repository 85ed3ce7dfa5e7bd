//! Round-by-round match execution.
//!
//! This is the independent check on the closed forms in [`crate::payoff`]:
//! it never evaluates a payoff formula, it only runs the behaviour machines
//! from [`crate::strategy`] and sums table payoffs and checking costs.
//! [`exact_expected_payoffs`] enumerates every realisation of the random
//! checks; [`monte_carlo_payoffs`] samples them.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format_f64;
use crate::game::{Action, GameSpec};
use crate::strategy::{StrategyKind, StrategySpec, StrategyState};

/// Upper bound on distinct joint states tracked by the exact enumeration.
pub const MAX_JOINT_STATES: usize = 1 << 20;

/// When a check costs the opportunity cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum CostConvention {
    /// Every check costs epsilon.
    ChargeEveryCheck,
    /// As the closed-form matrix: a relaxed TUC's check that catches a
    /// defection is free; every other check costs epsilon.
    #[default]
    ClosedForm,
}

impl CostConvention {
    fn charge(
        self,
        spec: &StrategySpec,
        state: &StrategyState,
        checked: bool,
        opponent: Action,
        epsilon: f64,
    ) -> f64 {
        if !checked {
            return 0.0;
        }
        let free = self == CostConvention::ClosedForm
            && spec.kind() == StrategyKind::TrustCooperator
            && state.is_relaxed()
            && opponent == Action::Defect;
        if free {
            0.0
        } else {
            epsilon
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            CostConvention::ChargeEveryCheck => "charge_every_check",
            CostConvention::ClosedForm => "closed_form",
        }
    }
}

impl std::str::FromStr for CostConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "charge_every_check" => Ok(CostConvention::ChargeEveryCheck),
            "closed_form" => Ok(CostConvention::ClosedForm),
            other => Err(Error::config(format!("unknown cost convention `{other}`"))),
        }
    }
}

/// Full trace of one match.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub rounds: u32,
    pub actions_a: Vec<Action>,
    pub actions_b: Vec<Action>,
    pub checks_a: Vec<bool>,
    pub checks_b: Vec<bool>,
    /// Payoff of each round, net of checking costs.
    pub round_payoffs_a: Vec<f64>,
    pub round_payoffs_b: Vec<f64>,
    /// Per-round averages.
    pub payoff_a: f64,
    pub payoff_b: f64,
    pub convention: CostConvention,
}

impl MatchOutcome {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("round,action_a,action_b,checked_a,checked_b,payoff_a,payoff_b\n");
        for i in 0..self.rounds as usize {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                i + 1,
                self.actions_a[i].symbol(),
                self.actions_b[i].symbol(),
                self.checks_a[i],
                self.checks_b[i],
                format_f64(self.round_payoffs_a[i]),
                format_f64(self.round_payoffs_b[i]),
            );
        }
        out
    }

    pub fn cooperations_a(&self) -> usize {
        self.actions_a.iter().filter(|&&a| a == Action::Cooperate).count()
    }

    pub fn cooperations_b(&self) -> usize {
        self.actions_b.iter().filter(|&&a| a == Action::Cooperate).count()
    }
}

/// Generator for sample `index` of a run seeded with `seed`.
///
/// ChaCha8 keyed by `seed` (via `seed_from_u64`) with the stream set to
/// `index`, so per-sample sequences are independent of scheduling.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn check_rounds(rounds: u32) -> Result<()> {
    if rounds < 1 {
        return Err(Error::domain("a match needs at least one round"));
    }
    Ok(())
}

struct Round {
    action_a: Action,
    action_b: Action,
    checked_a: bool,
    checked_b: bool,
    payoff_a: f64,
    payoff_b: f64,
}

/// Runs one match and hands every round to `record`. Returns total payoffs.
fn run_match<R: Rng>(
    a: &StrategySpec,
    b: &StrategySpec,
    game: &GameSpec,
    rounds: u32,
    convention: CostConvention,
    rng: &mut R,
    mut record: impl FnMut(Round),
) -> Result<(f64, f64)> {
    let table = game.table();
    let eps = game.epsilon();
    let (mut sa, mut sb) = (a.initial_state(), b.initial_state());
    let (mut total_a, mut total_b) = (0.0, 0.0);
    for _ in 0..rounds {
        let action_a = a.next_action(&sa);
        let action_b = b.next_action(&sb);
        // Both draws are taken every round so the stream layout is fixed.
        let draw_a: f64 = rng.gen();
        let draw_b: f64 = rng.gen();
        let checked_a = a.decides_to_check(&sa, draw_a);
        let checked_b = b.decides_to_check(&sb, draw_b);
        let payoff_a =
            table.payoff(action_a, action_b) - convention.charge(a, &sa, checked_a, action_b, eps);
        let payoff_b =
            table.payoff(action_b, action_a) - convention.charge(b, &sb, checked_b, action_a, eps);
        if checked_a {
            sa = a.observe(&sa, true, action_b)?;
        }
        if checked_b {
            sb = b.observe(&sb, true, action_a)?;
        }
        total_a += payoff_a;
        total_b += payoff_b;
        record(Round {
            action_a,
            action_b,
            checked_a,
            checked_b,
            payoff_a,
            payoff_b,
        });
    }
    Ok((total_a, total_b))
}

/// Plays one match with simultaneous moves. Deterministic given `seed`.
pub fn play_match(
    a: &StrategySpec,
    b: &StrategySpec,
    game: &GameSpec,
    rounds: u32,
    convention: CostConvention,
    seed: u64,
) -> Result<MatchOutcome> {
    check_rounds(rounds)?;
    let n = rounds as usize;
    let mut out = MatchOutcome {
        rounds,
        actions_a: Vec::with_capacity(n),
        actions_b: Vec::with_capacity(n),
        checks_a: Vec::with_capacity(n),
        checks_b: Vec::with_capacity(n),
        round_payoffs_a: Vec::with_capacity(n),
        round_payoffs_b: Vec::with_capacity(n),
        payoff_a: 0.0,
        payoff_b: 0.0,
        convention,
    };
    let mut rng = sample_rng(seed, 0);
    let (total_a, total_b) = run_match(a, b, game, rounds, convention, &mut rng, |r| {
        out.actions_a.push(r.action_a);
        out.actions_b.push(r.action_b);
        out.checks_a.push(r.checked_a);
        out.checks_b.push(r.checked_b);
        out.round_payoffs_a.push(r.payoff_a);
        out.round_payoffs_b.push(r.payoff_b);
    })?;
    out.payoff_a = total_a / f64::from(rounds);
    out.payoff_b = total_b / f64::from(rounds);
    Ok(out)
}

/// Exact per-round expected payoffs of `a` and `b`.
///
/// Propagates the probability mass of every reachable joint state round by
/// round, branching on each player's check decision and merging identical
/// joint states.
pub fn exact_expected_payoffs(
    a: &StrategySpec,
    b: &StrategySpec,
    game: &GameSpec,
    rounds: u32,
    convention: CostConvention,
) -> Result<(f64, f64)> {
    check_rounds(rounds)?;
    let table = game.table();
    let eps = game.epsilon();
    let mut mass: BTreeMap<(StrategyState, StrategyState), f64> = BTreeMap::new();
    mass.insert((a.initial_state(), b.initial_state()), 1.0);
    let (mut total_a, mut total_b) = (0.0, 0.0);

    for _ in 0..rounds {
        let mut next: BTreeMap<(StrategyState, StrategyState), f64> = BTreeMap::new();
        let (mut round_a, mut round_b) = (0.0, 0.0);
        for (&(sa, sb), &m) in &mass {
            let action_a = a.next_action(&sa);
            let action_b = b.next_action(&sb);
            let pa = a.check_probability(&sa);
            let pb = b.check_probability(&sb);
            let base_a = table.payoff(action_a, action_b);
            let base_b = table.payoff(action_b, action_a);
            for (checked_a, wa) in [(true, pa), (false, 1.0 - pa)] {
                if wa == 0.0 {
                    continue;
                }
                let na = if checked_a {
                    a.observe(&sa, true, action_b)?
                } else {
                    sa
                };
                let cost_a = convention.charge(a, &sa, checked_a, action_b, eps);
                for (checked_b, wb) in [(true, pb), (false, 1.0 - pb)] {
                    if wb == 0.0 {
                        continue;
                    }
                    let nb = if checked_b {
                        b.observe(&sb, true, action_a)?
                    } else {
                        sb
                    };
                    let cost_b = convention.charge(b, &sb, checked_b, action_a, eps);
                    let w = m * wa * wb;
                    round_a += w * (base_a - cost_a);
                    round_b += w * (base_b - cost_b);
                    *next.entry((na, nb)).or_insert(0.0) += w;
                }
            }
        }
        if next.len() > MAX_JOINT_STATES {
            return Err(Error::StateSpace(MAX_JOINT_STATES));
        }
        total_a += round_a;
        total_b += round_b;
        mass = next;
    }
    Ok((total_a / f64::from(rounds), total_b / f64::from(rounds)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub samples: u64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub stderr_a: f64,
    pub stderr_b: f64,
}

/// Sample means and standard errors of the per-round payoffs over
/// independent matches. Sample `i` uses [`sample_rng`]`(seed, i)`;
/// results are reduced in sample order, so they do not depend on threading.
pub fn monte_carlo_payoffs(
    a: &StrategySpec,
    b: &StrategySpec,
    game: &GameSpec,
    rounds: u32,
    convention: CostConvention,
    samples: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    check_rounds(rounds)?;
    if samples < 1 {
        return Err(Error::domain("need at least one sample"));
    }
    let per_round = f64::from(rounds);
    let draws: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            run_match(a, b, game, rounds, convention, &mut rng, |_| {})
                .map(|(x, y)| (x / per_round, y / per_round))
        })
        .collect::<Result<_>>()?;

    // Shifted sums around the first sample: exact for constant samples.
    let n = samples as f64;
    let (x0, y0) = draws[0];
    let (mut da, mut db, mut qa, mut qb) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &draws {
        let (dx, dy) = (x - x0, y - y0);
        da += dx;
        db += dy;
        qa += dx * dx;
        qb += dy * dy;
    }
    let stderr = |sum: f64, squares: f64| {
        if samples > 1 {
            ((squares - sum * sum / n).max(0.0) / (n - 1.0) / n).sqrt()
        } else {
            0.0
        }
    };
    let (stderr_a, stderr_b) = (stderr(da, qa), stderr(db, qb));
    let (mean_a, mean_b) = (x0 + da / n, y0 + db / n);
    Ok(MonteCarloEstimate {
        samples,
        mean_a,
        mean_b,
        stderr_a,
        stderr_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::standard_set;
    use approx::assert_relative_eq;
    use Action::{Cooperate as C, Defect as D};

    fn zero_cost() -> GameSpec {
        GameSpec::default().with_epsilon(0.0).unwrap()
    }

    #[test]
    fn tuc_against_tft_keeps_cooperating() {
        let tuc = StrategySpec::trust_cooperator(3, 0.25).unwrap();
        let out = play_match(
            &tuc,
            &StrategySpec::tit_for_tat(),
            &zero_cost(),
            10,
            CostConvention::ClosedForm,
            7,
        )
        .unwrap();
        assert!(out.actions_a.iter().chain(&out.actions_b).all(|&a| a == C));
        assert!(out.checks_a[..3].iter().all(|&c| c));
        assert!(out.checks_b.iter().all(|&c| c));
        assert_eq!(out.payoff_a, 1.0);
    }

    #[test]
    fn figure_two_narrative() {
        let tuc = StrategySpec::trust_cooperator(3, 1.0).unwrap();
        let tud = StrategySpec::trust_defector(3).unwrap();
        let out = play_match(&tuc, &tud, &GameSpec::default(), 6, CostConvention::ClosedForm, 0)
            .unwrap();
        assert_eq!(out.actions_a, vec![C, C, C, C, D, D]);
        assert_eq!(out.actions_b, vec![C, C, C, D, D, D]);
        assert_eq!(out.checks_b, vec![true, true, true, false, false, false]);
        // Round 4 check is free under the matrix convention.
        assert_eq!(out.round_payoffs_a[3], -1.0);
        assert_eq!(out.round_payoffs_a[4], -0.25);
    }

    #[test]
    fn alld_pair_never_checks() {
        let alld = StrategySpec::all_d();
        let out = play_match(&alld, &alld, &GameSpec::default(), 17, CostConvention::ClosedForm, 1)
            .unwrap();
        assert_eq!(out.payoff_a, 0.0);
        assert_eq!(out.payoff_b, 0.0);
        assert!(out.checks_a.iter().chain(&out.checks_b).all(|c| !c));
    }

    #[test]
    fn outcome_accounting() {
        let set = standard_set(3, 0.25).unwrap();
        let game = GameSpec::default();
        for a in &set {
            for b in &set {
                let out = play_match(a, b, &game, 20, CostConvention::ChargeEveryCheck, 3).unwrap();
                assert_eq!(out.actions_a.len(), 20);
                assert_eq!(out.checks_b.len(), 20);
                let table = game.table();
                let expected: f64 = (0..20)
                    .map(|i| {
                        table.payoff(out.actions_a[i], out.actions_b[i])
                            - if out.checks_a[i] { game.epsilon() } else { 0.0 }
                    })
                    .sum::<f64>()
                    / 20.0;
                assert_relative_eq!(out.payoff_a, expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn conventions_agree_without_relaxed_tuc() {
        let set = standard_set(3, 0.25).unwrap();
        let game = GameSpec::default();
        for a in &set {
            for b in &set {
                if a.kind() == StrategyKind::TrustCooperator || b.kind() == StrategyKind::TrustCooperator {
                    continue;
                }
                let x = exact_expected_payoffs(a, b, &game, 50, CostConvention::ClosedForm).unwrap();
                let y =
                    exact_expected_payoffs(a, b, &game, 50, CostConvention::ChargeEveryCheck).unwrap();
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn charging_detection_costs_exactly_one_check() {
        // Under charge-every-check TUC additionally pays epsilon in the one
        // round where it catches TUD: epsilon * P(detection) / r.
        let game = GameSpec::default();
        let tuc = StrategySpec::trust_cooperator(3, 0.25).unwrap();
        let tud = StrategySpec::trust_defector(3).unwrap();
        let (closed, _) = exact_expected_payoffs(&tuc, &tud, &game, 50, CostConvention::ClosedForm).unwrap();
        let (every, _) =
            exact_expected_payoffs(&tuc, &tud, &game, 50, CostConvention::ChargeEveryCheck).unwrap();
        let detected = 1.0 - 0.75f64.powi(47);
        assert!(every < closed);
        assert_relative_eq!(closed - every, 0.25 * detected / 50.0, max_relative = 1e-10);
    }

    #[test]
    fn exact_enumeration_is_symmetric() {
        let set = standard_set(3, 0.25).unwrap();
        let game = GameSpec::default();
        for a in &set {
            for b in &set {
                let ab = exact_expected_payoffs(a, b, &game, 20, CostConvention::ClosedForm).unwrap();
                let ba = exact_expected_payoffs(b, a, &game, 20, CostConvention::ClosedForm).unwrap();
                assert_eq!(ab.0, ba.1);
                assert_eq!(ab.1, ba.0);
            }
        }
    }

    #[test]
    fn tud_cooperates_exactly_theta_times_against_tuc() {
        let game = GameSpec::default();
        let tud = StrategySpec::trust_defector(3).unwrap();
        for p in [0.1, 0.5, 1.0] {
            let tuc = StrategySpec::trust_cooperator(3, p).unwrap();
            for seed in 0..20 {
                let out = play_match(&tuc, &tud, &game, 30, CostConvention::ClosedForm, seed).unwrap();
                assert_eq!(out.cooperations_b(), 3);
                assert!(out.cooperations_a() >= 3);
            }
        }
    }

    #[test]
    fn deterministic_pairs_have_zero_spread() {
        let tft = StrategySpec::tit_for_tat();
        let tud = StrategySpec::trust_defector(3).unwrap();
        let game = GameSpec::default();
        let mc = monte_carlo_payoffs(&tft, &tud, &game, 50, CostConvention::ClosedForm, 200, 9).unwrap();
        let exact = exact_expected_payoffs(&tft, &tud, &game, 50, CostConvention::ClosedForm).unwrap();
        assert_eq!(mc.stderr_a, 0.0);
        assert_eq!(mc.stderr_b, 0.0);
        assert_relative_eq!(mc.mean_a, exact.0, epsilon = 1e-14);
        assert_relative_eq!(mc.mean_b, exact.1, epsilon = 1e-14);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let tuc = StrategySpec::trust_cooperator(3, 0.25).unwrap();
        let tud = StrategySpec::trust_defector(3).unwrap();
        let game = GameSpec::default();
        let run = || monte_carlo_payoffs(&tuc, &tud, &game, 50, CostConvention::ClosedForm, 2_000, 42).unwrap();
        let first = run();
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(run);
        assert_eq!(first.mean_a.to_bits(), serial.mean_a.to_bits());
        assert_eq!(first.stderr_b.to_bits(), serial.stderr_b.to_bits());
    }

    #[test]
    fn monte_carlo_error_shrinks_like_inverse_sqrt() {
        let tuc = StrategySpec::trust_cooperator(3, 0.1).unwrap();
        let tud = StrategySpec::trust_defector(3).unwrap();
        let game = GameSpec::default();
        let small = monte_carlo_payoffs(&tuc, &tud, &game, 50, CostConvention::ClosedForm, 2_500, 1).unwrap();
        let large = monte_carlo_payoffs(&tuc, &tud, &game, 50, CostConvention::ClosedForm, 40_000, 1).unwrap();
        let ratio = small.stderr_a / large.stderr_a;
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
        let exact = exact_expected_payoffs(&tuc, &tud, &game, 50, CostConvention::ClosedForm).unwrap();
        assert!((large.mean_a - exact.0).abs() < 4.0 * large.stderr_a);
        assert!((large.mean_b - exact.1).abs() < 4.0 * large.stderr_b);
    }

    #[test]
    fn trace_csv() {
        let tuc = StrategySpec::trust_cooperator(3, 1.0).unwrap();
        let tud = StrategySpec::trust_defector(3).unwrap();
        let out = play_match(&tuc, &tud, &GameSpec::default(), 6, CostConvention::ClosedForm, 0).unwrap();
        let csv = out.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "round,action_a,action_b,checked_a,checked_b,payoff_a,payoff_b");
        assert_eq!(lines[4], "4,C,D,true,false,-1,2");
        assert_eq!(lines.len(), 7);
    }

    #[test]
    fn zero_rounds_rejected() {
        let tft = StrategySpec::tit_for_tat();
        assert!(play_match(&tft, &tft, &GameSpec::default(), 0, CostConvention::ClosedForm, 0).is_err());
        assert!(monte_carlo_payoffs(&tft, &tft, &GameSpec::default(), 5, CostConvention::ClosedForm, 0, 0).is_err());
    }
}
