//! Parameter sweeps over the analytic pipeline.
//!
//! A sweep is a Cartesian grid over named parameters on top of a set of
//! defaults. Each grid point runs [`cooperation_report`] independently;
//! rows come back in grid order (first axis outermost) regardless of how the
//! work was scheduled.

mod config;

use std::fmt::Write as _;

use rayon::prelude::*;

pub use config::parse_config;

use crate::error::{Error, Result};
use crate::evolution::EvolutionParams;
use crate::format_f64;
use crate::game::{GameSpec, OneShot};
use crate::metrics::{cooperation_report, CooperationReport};
use crate::strategy::{standard_set, StrategyKind};

/// Sweepable parameters. Names are the config and CSV spellings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Temptation,
    Reward,
    Punishment,
    Sucker,
    Gamma,
    Epsilon,
    Rounds,
    PopulationSize,
    Beta,
    Theta,
    CheckProb,
    /// `1 / p`, the expected number of rounds between post-trust checks.
    Trustfulness,
}

impl Param {
    pub const ALL: [Param; 12] = [
        Param::Temptation,
        Param::Reward,
        Param::Punishment,
        Param::Sucker,
        Param::Gamma,
        Param::Epsilon,
        Param::Rounds,
        Param::PopulationSize,
        Param::Beta,
        Param::Theta,
        Param::CheckProb,
        Param::Trustfulness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Temptation => "T",
            Param::Reward => "R",
            Param::Punishment => "P",
            Param::Sucker => "S",
            Param::Gamma => "gamma",
            Param::Epsilon => "epsilon",
            Param::Rounds => "rounds",
            Param::PopulationSize => "N",
            Param::Beta => "beta",
            Param::Theta => "theta",
            Param::CheckProb => "p",
            Param::Trustfulness => "inv_p",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::config(format!("unknown parameter `{name}`")))
    }
}

/// One value for every parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamValues {
    pub temptation: f64,
    pub reward: f64,
    pub punishment: f64,
    pub sucker: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub rounds: f64,
    pub population_size: f64,
    pub beta: f64,
    pub theta: f64,
    pub check_prob: f64,
    /// Skip the Prisoner's Dilemma ordering checks.
    pub allow_non_dilemma: bool,
}

impl Default for ParamValues {
    fn default() -> Self {
        Self {
            temptation: 2.0,
            reward: 1.0,
            punishment: 0.0,
            sucker: -1.0,
            gamma: 1.0,
            epsilon: 0.25,
            rounds: 50.0,
            population_size: 100.0,
            beta: 0.1,
            theta: 3.0,
            check_prob: 0.25,
            allow_non_dilemma: false,
        }
    }
}

impl ParamValues {
    pub fn get(&self, param: Param) -> f64 {
        match param {
            Param::Temptation => self.temptation,
            Param::Reward => self.reward,
            Param::Punishment => self.punishment,
            Param::Sucker => self.sucker,
            Param::Gamma => self.gamma,
            Param::Epsilon => self.epsilon,
            Param::Rounds => self.rounds,
            Param::PopulationSize => self.population_size,
            Param::Beta => self.beta,
            Param::Theta => self.theta,
            Param::CheckProb => self.check_prob,
            Param::Trustfulness => 1.0 / self.check_prob,
        }
    }

    pub fn set(&mut self, param: Param, value: f64) {
        match param {
            Param::Temptation => self.temptation = value,
            Param::Reward => self.reward = value,
            Param::Punishment => self.punishment = value,
            Param::Sucker => self.sucker = value,
            Param::Gamma => self.gamma = value,
            Param::Epsilon => self.epsilon = value,
            Param::Rounds => self.rounds = value,
            Param::PopulationSize => self.population_size = value,
            Param::Beta => self.beta = value,
            Param::Theta => self.theta = value,
            Param::CheckProb => self.check_prob = value,
            Param::Trustfulness => self.check_prob = 1.0 / value,
        }
    }

    pub fn game(&self) -> Result<GameSpec> {
        let base = OneShot::new(self.temptation, self.reward, self.punishment, self.sucker);
        if self.allow_non_dilemma {
            GameSpec::unchecked_ordering(base, self.gamma, self.epsilon, self.rounds)
        } else {
            GameSpec::prisoners_dilemma(base, self.gamma, self.epsilon, self.rounds)
        }
    }

    pub fn evolution(&self) -> Result<EvolutionParams> {
        EvolutionParams::new(integer(self.population_size, "N")?, self.beta)
    }

    pub fn theta_u32(&self) -> Result<u32> {
        integer(self.theta, "theta")
    }

    /// Validates everything a grid point needs, without running the pipeline.
    pub fn validate(&self) -> Result<()> {
        let game = self.game()?;
        self.evolution()?;
        for spec in standard_set(self.theta_u32()?, self.check_prob)? {
            spec.validate_for_rounds(game.rounds())?;
        }
        Ok(())
    }

    pub fn report(&self) -> Result<CooperationReport> {
        cooperation_report(
            &self.game()?,
            &self.evolution()?,
            self.theta_u32()?,
            self.check_prob,
        )
    }
}

fn integer(v: f64, name: &str) -> Result<u32> {
    if v.fract() != 0.0 || !(v >= 0.0) || v > f64::from(u32::MAX) {
        return Err(Error::domain(format!("{name} must be a non-negative integer, got {v}")));
    }
    Ok(v as u32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: Param,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(param: Param, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config(format!("axis `{}` has no values", param.name())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(format!("axis `{}` has non-finite values", param.name())));
        }
        Ok(Self { param, values })
    }

    /// `start, start + step, ...` up to and including `stop`.
    pub fn linear(param: Param, start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(stop >= start) {
            return Err(Error::config(format!(
                "bad range {start}:{stop}:{step} for `{}`",
                param.name()
            )));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        let values = (0..count)
            .map(|i| tidy(start + i as f64 * step))
            .collect();
        Self::new(param, values)
    }

    /// `count` points evenly spaced in log10 between `start` and `stop`.
    pub fn logspace(param: Param, start: f64, stop: f64, count: usize) -> Result<Self> {
        if !(start > 0.0) || !(stop > start) || count < 2 {
            return Err(Error::config(format!(
                "bad log range {start}:{stop}:{count} for `{}`",
                param.name()
            )));
        }
        let (lo, hi) = (start.log10(), stop.log10());
        let values = (0..count)
            .map(|i| match i {
                0 => start,
                i if i == count - 1 => stop,
                i => tidy(10f64.powf(lo + (hi - lo) * i as f64 / (count - 1) as f64)),
            })
            .collect();
        Self::new(param, values)
    }
}

/// Rounds away accumulated step error (`0.15000000000000002` -> `0.15`).
fn tidy(v: f64) -> f64 {
    let scale = 10f64.powi(12 - v.abs().log10().ceil().max(0.0) as i32);
    (v * scale).round() / scale
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig3,
    Fig4,
    Fig5,
    AppendixTheta5,
    AppendixTheta10,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Fig3,
        Preset::Fig4,
        Preset::Fig5,
        Preset::AppendixTheta5,
        Preset::AppendixTheta10,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::AppendixTheta5 => "appendix_theta5",
            Preset::AppendixTheta10 => "appendix_theta10",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::config(format!("unknown preset `{name}`")))
    }

    /// Grid axes; all other parameters keep their defaults.
    pub fn axes(self) -> Vec<Axis> {
        let epsilon = || Axis::linear(Param::Epsilon, 0.0, 1.0, 0.05).expect("static grid");
        match self {
            Preset::Fig3 | Preset::AppendixTheta5 | Preset::AppendixTheta10 => vec![epsilon()],
            Preset::Fig4 => vec![
                Axis::new(Param::Rounds, vec![20.0, 50.0, 200.0]).expect("static grid"),
                Axis::logspace(Param::Gamma, 0.1, 1000.0, 25).expect("static grid"),
            ],
            Preset::Fig5 => vec![
                Axis::new(
                    Param::Trustfulness,
                    vec![1.0, 2.0, 3.0, 4.0, 5.0, 8.0, 10.0, 15.0, 20.0, 25.0, 33.0, 50.0],
                )
                .expect("static grid"),
                epsilon(),
            ],
        }
    }

    /// Overrides applied on top of the defaults.
    pub fn fixed(self) -> Vec<(Param, f64)> {
        match self {
            Preset::AppendixTheta5 => vec![(Param::Theta, 5.0)],
            Preset::AppendixTheta10 => vec![(Param::Theta, 10.0)],
            _ => Vec::new(),
        }
    }
}

/// Output layout for sweep tables.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Layout {
    /// One row per grid point.
    #[default]
    Wide,
    /// One row per grid point and series.
    Long,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub defaults: ParamValues,
    pub axes: Vec<Axis>,
    pub preset: Option<Preset>,
    pub output: Option<std::path::PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub layout: Layout,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            defaults: ParamValues::default(),
            axes: Vec::new(),
            preset: None,
            output: None,
            seed: 0,
            threads: None,
            layout: Layout::Wide,
        }
    }
}

impl SweepConfig {
    pub fn from_preset(preset: Preset) -> Self {
        let mut config = Self {
            preset: Some(preset),
            ..Self::default()
        };
        config.apply_preset();
        config
    }

    /// Replaces the axes with the preset's and applies its fixed values.
    pub fn apply_preset(&mut self) {
        if let Some(preset) = self.preset {
            self.axes = preset.axes();
            for (param, value) in preset.fixed() {
                self.defaults.set(param, value);
            }
        }
    }

    /// Every grid point in row order.
    pub fn grid(&self) -> Result<Vec<ParamValues>> {
        for (i, axis) in self.axes.iter().enumerate() {
            let clash = self.axes[..i].iter().any(|other| {
                other.param == axis.param
                    || matches!(
                        (other.param, axis.param),
                        (Param::CheckProb, Param::Trustfulness) | (Param::Trustfulness, Param::CheckProb)
                    )
            });
            if clash {
                return Err(Error::config(format!(
                    "parameter `{}` is swept twice",
                    axis.param.name()
                )));
            }
            if matches!(axis.param, Param::Gamma | Param::Trustfulness)
                && axis.values.iter().any(|v| !(*v > 0.0))
            {
                return Err(Error::config(format!(
                    "axis `{}` needs positive values",
                    axis.param.name()
                )));
            }
        }
        let mut points = vec![self.defaults];
        for axis in &self.axes {
            points = points
                .into_iter()
                .flat_map(|point| {
                    axis.values.iter().map(move |&v| {
                        let mut p = point;
                        p.set(axis.param, v);
                        p
                    })
                })
                .collect();
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: ParamValues,
    /// Stationary mass of ALLC, ALLD, TFT, TUC, TUD.
    pub frequencies: [f64; 5],
    pub coop_with: f64,
    pub coop_without: f64,
    pub coop_delta: f64,
}

impl SweepRow {
    fn from_report(params: ParamValues, report: &CooperationReport) -> Self {
        let pi = &report.with_trust.stationary;
        let frequencies = StrategyKind::ALL.map(|k| pi.get(k.label()).unwrap_or(0.0));
        Self {
            params,
            frequencies,
            coop_with: report.coop_with_trust,
            coop_without: report.coop_without_trust,
            coop_delta: report.delta,
        }
    }

    pub fn frequency(&self, kind: StrategyKind) -> f64 {
        let i = StrategyKind::ALL.iter().position(|k| *k == kind).expect("known kind");
        self.frequencies[i]
    }

    /// Most frequent strategy (first one on ties).
    pub fn argmax(&self) -> StrategyKind {
        let mut best = 0;
        for (i, f) in self.frequencies.iter().enumerate() {
            if *f > self.frequencies[best] {
                best = i;
            }
        }
        StrategyKind::ALL[best]
    }

    fn series(&self) -> [(String, f64); 8] {
        let f = |k: StrategyKind| (format!("freq_{}", k.label()), self.frequency(k));
        [
            f(StrategyKind::AllC),
            f(StrategyKind::AllD),
            f(StrategyKind::TitForTat),
            f(StrategyKind::TrustCooperator),
            f(StrategyKind::TrustDefector),
            ("coop_with".into(), self.coop_with),
            ("coop_without".into(), self.coop_without),
            ("coop_delta".into(), self.coop_delta),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

/// Parameters in CSV column order (sorted by name).
fn sorted_params() -> Vec<Param> {
    let mut params = Param::ALL.to_vec();
    params.sort_by_key(|p| p.name());
    params
}

impl SweepTable {
    fn param_header() -> String {
        sorted_params()
            .iter()
            .map(|p| format!("param:{}", p.name()))
            .collect::<Vec<_>>()
            .join(",")
    }

    fn param_cells(values: &ParamValues) -> String {
        sorted_params()
            .iter()
            .map(|p| format_f64(values.get(*p)))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::param_header();
        out.push_str(",freq_ALLC,freq_ALLD,freq_TFT,freq_TUC,freq_TUD,coop_with,coop_without,coop_delta\n");
        for row in &self.rows {
            out.push_str(&Self::param_cells(&row.params));
            for (_, v) in row.series() {
                let _ = write!(out, ",{}", format_f64(v));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_long_csv(&self) -> String {
        let mut out = Self::param_header();
        out.push_str(",series,value\n");
        for row in &self.rows {
            let cells = Self::param_cells(&row.params);
            for (name, v) in row.series() {
                let _ = writeln!(out, "{cells},{name},{}", format_f64(v));
            }
        }
        out
    }

    pub fn render(&self, layout: Layout) -> String {
        match layout {
            Layout::Wide => self.to_csv(),
            Layout::Long => self.to_long_csv(),
        }
    }
}

/// Validates the whole grid up front, then evaluates every point.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepTable> {
    let points = config.grid()?;
    for p in &points {
        p.validate().map_err(|e| match e {
            Error::Numerical(_) => e,
            other => Error::config(format!("invalid grid point: {other}")),
        })?;
    }
    let evaluate = || {
        points
            .par_iter()
            .map(|p| p.report().map(|r| SweepRow::from_report(*p, &r)))
            .collect::<Result<Vec<_>>>()
    };
    let rows = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?
            .install(evaluate)?,
        None => evaluate()?,
    };
    Ok(SweepTable { rows })
}
