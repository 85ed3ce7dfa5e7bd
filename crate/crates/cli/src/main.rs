use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trust_evo::evolution::{log_fixation_probability, stationary_for_matrix};
use trust_evo::game::expected_rounds_from_continuation;
use trust_evo::simulate::monte_carlo_payoffs;
use trust_evo::strategy::{baseline_set, standard_set};
use trust_evo::sweep::{parse_config, run_sweep, Layout, Param, ParamValues, Preset, SweepConfig};
use trust_evo::verify::{compare_oracles, OracleGrid};
use trust_evo::{
    cooperation_report, exact_expected_payoffs, fixation_probability, format_f64,
    markov_transition_matrix, payoff_matrix, play_match, CostConvention, Error, Result,
    StrategyKind, StrategySpec,
};

#[derive(Parser, Debug)]
#[command(name = "trust-evo", version, about = "Evolution of trust-based strategies in the repeated Prisoner's Dilemma")]
struct Cli {
    /// Seed for Monte Carlo runs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Expected per-round payoff matrix of the five strategies.
    PayoffMatrix {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Fixation probability of a single MUTANT among RESIDENTs.
    Fixation {
        mutant: StrategyKind,
        resident: StrategyKind,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Stationary distribution over monomorphic states.
    Stationary {
        /// Use ALLC, ALLD and TFT only.
        #[arg(long)]
        baseline: bool,
        /// Print the transition matrix instead.
        #[arg(long)]
        transitions: bool,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Cooperation with and without the trust-based strategies.
    CoopReport {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Parameter sweep from a preset or a config file.
    Sweep {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a default, e.g. `--set theta=5`. Repeatable.
        #[arg(long = "set", value_name = "PARAM=VALUE")]
        overrides: Vec<String>,
        #[arg(long, value_enum)]
        layout: Option<LayoutArg>,
    },
    /// Play A against B: one traced match, or Monte Carlo with `--samples`.
    Simulate {
        a: StrategyKind,
        b: StrategyKind,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value = "closed_form")]
        convention: CostConvention,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Check the closed-form payoffs against exact enumeration.
    Verify {
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LayoutArg {
    Wide,
    Long,
}

#[derive(Args, Debug, Default)]
struct ParamArgs {
    /// Use the default parameters (the same as giving no parameter flags).
    #[arg(long)]
    defaults: bool,
    #[arg(long = "T", allow_negative_numbers = true)]
    temptation: Option<f64>,
    #[arg(long = "R", allow_negative_numbers = true)]
    reward: Option<f64>,
    #[arg(long = "P", allow_negative_numbers = true)]
    punishment: Option<f64>,
    #[arg(long = "S", allow_negative_numbers = true)]
    sucker: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "w")]
    rounds: Option<f64>,
    /// Continuation probability; sets rounds to 1 / (1 - w).
    #[arg(long, allow_negative_numbers = true)]
    w: Option<f64>,
    #[arg(long = "N", alias = "population")]
    population: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long)]
    theta: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    p: Option<f64>,
    #[arg(long)]
    allow_non_dilemma: bool,
}

impl ParamArgs {
    fn values(&self) -> Result<ParamValues> {
        let mut v = ParamValues::default();
        let mut set = |param, value: Option<f64>| {
            if let Some(x) = value {
                v.set(param, x);
            }
        };
        set(Param::Temptation, self.temptation);
        set(Param::Reward, self.reward);
        set(Param::Punishment, self.punishment);
        set(Param::Sucker, self.sucker);
        set(Param::Gamma, self.gamma);
        set(Param::Epsilon, self.epsilon);
        set(Param::Rounds, self.rounds);
        set(Param::PopulationSize, self.population.map(f64::from));
        set(Param::Beta, self.beta);
        set(Param::Theta, self.theta.map(f64::from));
        set(Param::CheckProb, self.p);
        if let Some(w) = self.w {
            v.rounds = expected_rounds_from_continuation(w)?;
        }
        v.allow_non_dilemma = self.allow_non_dilemma;
        Ok(v)
    }

    fn strategies(&self) -> Result<(ParamValues, Vec<StrategySpec>)> {
        let v = self.values()?;
        let set = standard_set(v.theta_u32()?, v.check_prob)?;
        Ok((v, set))
    }
}

fn spec_for(kind: StrategyKind, values: &ParamValues) -> Result<StrategySpec> {
    let theta = if kind.is_trust_based() { values.theta_u32()? } else { 1 };
    StrategySpec::new(kind, theta, values.check_prob)
}

fn integer_rounds(values: &ParamValues) -> Result<u32> {
    let r = values.rounds;
    if r.fract() != 0.0 || !(1.0..=f64::from(u32::MAX)).contains(&r) {
        return Err(Error::Config(format!(
            "simulation needs a whole number of rounds, got {r}"
        )));
    }
    Ok(r as u32)
}

/// Opens the destination before any work so a bad path fails fast.
fn open_sink(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => File::create(p)
            .map(|f| Box::new(io::BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display()))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn sweep_config(
    preset: Option<&str>,
    config: Option<&PathBuf>,
    overrides: &[String],
    layout: Option<LayoutArg>,
    cli: &Cli,
) -> Result<SweepConfig> {
    let mut cfg = match (preset, config) {
        (Some(name), _) => SweepConfig::from_preset(Preset::from_name(name)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        (None, None) => return Err(Error::Config("need --preset or --config".into())),
    };
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected PARAM=VALUE, got `{item}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("`{value}` is not a number")))?;
        cfg.defaults.set(Param::from_name(key.trim())?, value);
    }
    if let Some(layout) = layout {
        cfg.layout = match layout {
            LayoutArg::Wide => Layout::Wide,
            LayoutArg::Long => Layout::Long,
        };
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.out.is_some() {
        cfg.output = cli.out.clone();
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let Format::Csv = cli.format;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists, in which case it is reused.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let seed = cli.seed.unwrap_or(0);

    let text = match &cli.command {
        Command::PayoffMatrix { params } => {
            let (v, set) = params.strategies()?;
            let mut sink = open_sink(cli.out.as_ref())?;
            let csv = payoff_matrix(&set, &v.game()?)?.to_csv();
            return write_all(&mut sink, &csv);
        }
        Command::Fixation {
            mutant,
            resident,
            params,
        } => {
            let (v, set) = params.strategies()?;
            if mutant == resident {
                return Err(Error::Config("mutant and resident must differ".into()));
            }
            let matrix = payoff_matrix(&set, &v.game()?)?;
            let evo = v.evolution()?;
            let (m, r) = (position(&set, *mutant), position(&set, *resident));
            let rho = fixation_probability(&matrix, m, r, &evo)?;
            let log_rho = log_fixation_probability(&matrix, m, r, &evo)?;
            format!(
                "mutant,resident,rho,log_rho\n{mutant},{resident},{},{}\n",
                format_f64(rho),
                format_f64(log_rho)
            )
        }
        Command::Stationary {
            baseline,
            transitions,
            params,
        } => {
            let v = params.values()?;
            let set = if *baseline {
                baseline_set()
            } else {
                standard_set(v.theta_u32()?, v.check_prob)?
            };
            let matrix = payoff_matrix(&set, &v.game()?)?;
            if *transitions {
                markov_transition_matrix(&matrix, &v.evolution()?)?.to_csv()
            } else {
                stationary_for_matrix(&matrix, &v.evolution()?)?.to_csv()
            }
        }
        Command::CoopReport { params } => {
            let v = params.values()?;
            let report =
                cooperation_report(&v.game()?, &v.evolution()?, v.theta_u32()?, v.check_prob)?;
            let mut out = String::from("series,value\n");
            for scenario in [&report.with_trust, &report.without_trust] {
                let prefix = if scenario.stationary.len() == 5 {
                    "freq"
                } else {
                    "baseline_freq"
                };
                for (label, p) in scenario
                    .stationary
                    .labels()
                    .iter()
                    .zip(scenario.stationary.probabilities())
                {
                    out.push_str(&format!("{prefix}_{label},{}\n", format_f64(*p)));
                }
            }
            for (name, value) in [
                ("coop_with", report.coop_with_trust),
                ("coop_without", report.coop_without_trust),
                ("coop_delta", report.delta),
            ] {
                out.push_str(&format!("{name},{}\n", format_f64(value)));
            }
            out
        }
        Command::Sweep {
            preset,
            config,
            overrides,
            layout,
        } => {
            let cfg = sweep_config(preset.as_deref(), config.as_ref(), overrides, *layout, cli)?;
            cfg.grid()?;
            let mut sink = open_sink(cfg.output.as_ref())?;
            let table = run_sweep(&cfg)?;
            return write_all(&mut sink, &table.render(cfg.layout));
        }
        Command::Simulate {
            a,
            b,
            samples,
            convention,
            params,
        } => {
            let v = params.values()?;
            let game = v.game()?;
            let rounds = integer_rounds(&v)?;
            let (sa, sb) = (spec_for(*a, &v)?, spec_for(*b, &v)?);
            if let Some(n) = samples {
                let mc = monte_carlo_payoffs(&sa, &sb, &game, rounds, *convention, *n, seed)?;
                let (ea, eb) = exact_expected_payoffs(&sa, &sb, &game, rounds, *convention)?;
                format!(
                    "player,strategy,samples,mean,stderr,exact\n\
                     a,{a},{n},{},{},{}\nb,{b},{n},{},{},{}\n",
                    format_f64(mc.mean_a),
                    format_f64(mc.stderr_a),
                    format_f64(ea),
                    format_f64(mc.mean_b),
                    format_f64(mc.stderr_b),
                    format_f64(eb),
                )
            } else {
                play_match(&sa, &sb, &game, rounds, *convention, seed)?.to_csv()
            }
        }
        Command::Verify { tolerance } => {
            let report = compare_oracles(&OracleGrid::default(), *tolerance)?;
            let n = report.comparisons;
            let tol = format!("{tolerance:e}");
            if report.passed() {
                format!("OK: {n}/{n} oracle comparisons within {tol}\n")
            } else {
                let mut sink = open_sink(cli.out.as_ref())?;
                let mut msg = format!(
                    "FAILED: {}/{n} oracle comparisons exceed {tol}\n",
                    report.mismatches.len()
                );
                for m in report.mismatches.iter().take(10) {
                    msg.push_str(&format!(
                        "  {} vs {} at gamma={} epsilon={} rounds={}: analytic {} exact {}\n",
                        m.row,
                        m.col,
                        m.game.gamma(),
                        m.game.epsilon(),
                        m.game.rounds(),
                        format_f64(m.analytic),
                        format_f64(m.exact)
                    ));
                }
                write_all(&mut sink, &msg)?;
                return Err(Error::Numerical("oracle comparison failed".into()));
            }
        }
    };
    let mut sink = open_sink(cli.out.as_ref())?;
    write_all(&mut sink, &text)
}

fn position(set: &[StrategySpec], kind: StrategyKind) -> usize {
    set.iter()
        .position(|s| s.kind() == kind)
        .expect("standard set holds every kind")
}

fn write_all(sink: &mut Box<dyn Write>, text: &str) -> Result<()> {
    sink.write_all(text.as_bytes())?;
    sink.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
