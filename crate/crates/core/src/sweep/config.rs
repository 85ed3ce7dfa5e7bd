//! Flat key-value sweep configuration.
//!
//! ```text
//! # comments start with '#'
//! [game]
//! T = 2
//! R = 1
//! P = 0
//! S = -1
//! gamma = 1
//! epsilon = 0.25
//! rounds = 50
//! allow_non_dilemma = false
//!
//! [evolution]
//! N = 100
//! beta = 0.1
//!
//! [strategy]
//! theta = 3
//! p = 0.25
//!
//! [sweep]               # repeat once per axis, outermost first
//! param = epsilon
//! range = 0:1:0.05      # or: values = 0, 0.1, 0.5
//!                       # or: logspace = 0.1:1000:25
//!
//! [run]
//! preset = fig3         # replaces every [sweep] axis
//! seed = 0
//! threads = 4
//! out = results.csv
//! layout = wide         # or: long
//! ```

use std::path::PathBuf;

use super::{Axis, Layout, Param, Preset, SweepConfig};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Game,
    Evolution,
    Strategy,
    Sweep,
    Run,
}

#[derive(Default)]
struct PendingAxis {
    line: usize,
    param: Option<Param>,
    axis: Option<Axis>,
}

impl PendingAxis {
    fn finish(self) -> Result<Axis> {
        let line = self.line;
        let param = self
            .param
            .ok_or_else(|| Error::config(format!("[sweep] at line {line} has no `param`")))?;
        let axis = self
            .axis
            .ok_or_else(|| Error::config(format!("[sweep] at line {line} has no values")))?;
        Ok(Axis { param, ..axis })
    }
}

fn number(value: &str, line: usize) -> Result<f64> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("line {line}: `{value}` is not a number")))
}

fn triple(value: &str, line: usize) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::config(format!(
            "line {line}: expected start:stop:step, got `{value}`"
        )));
    }
    Ok((
        number(parts[0], line)?,
        number(parts[1], line)?,
        number(parts[2], line)?,
    ))
}

fn allowed(section: Section, param: Param) -> bool {
    use Param::*;
    match section {
        Section::Game => matches!(
            param,
            Temptation | Reward | Punishment | Sucker | Gamma | Epsilon | Rounds
        ),
        Section::Evolution => matches!(param, PopulationSize | Beta),
        Section::Strategy => matches!(param, Theta | CheckProb | Trustfulness),
        _ => false,
    }
}

/// Parses a configuration file. A preset, if named, overrides every axis.
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let mut config = SweepConfig::default();
    let mut section = Section::None;
    let mut pending: Option<PendingAxis> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|c| c.strip_suffix(']')) {
            if let Some(axis) = pending.take() {
                config.axes.push(axis.finish()?);
            }
            section = match name.trim() {
                "game" => Section::Game,
                "evolution" => Section::Evolution,
                "strategy" => Section::Strategy,
                "sweep" => {
                    pending = Some(PendingAxis {
                        line,
                        ..PendingAxis::default()
                    });
                    Section::Sweep
                }
                "run" => Section::Run,
                other => {
                    return Err(Error::config(format!("line {line}: unknown section [{other}]")))
                }
            };
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::config(format!("line {line}: expected `key = value`")))?;

        match section {
            Section::None => {
                return Err(Error::config(format!(
                    "line {line}: `{key}` appears before any section"
                )))
            }
            Section::Game if key == "allow_non_dilemma" => {
                config.defaults.allow_non_dilemma = value.parse().map_err(|_| {
                    Error::config(format!("line {line}: expected true or false"))
                })?;
            }
            Section::Game | Section::Evolution | Section::Strategy => {
                let param = Param::from_name(key)
                    .map_err(|e| Error::config(format!("line {line}: {e}")))?;
                if !allowed(section, param) {
                    return Err(Error::config(format!(
                        "line {line}: `{key}` does not belong in this section"
                    )));
                }
                config.defaults.set(param, number(value, line)?);
            }
            Section::Sweep => {
                let axis = pending.as_mut().expect("open [sweep] section");
                if axis.axis.is_some() && key != "param" {
                    return Err(Error::config(format!(
                        "line {line}: axis values given twice"
                    )));
                }
                // The axis param may come after the values; patch it in `finish`.
                let placeholder = Param::Epsilon;
                match key {
                    "param" => {
                        axis.param = Some(
                            Param::from_name(value)
                                .map_err(|e| Error::config(format!("line {line}: {e}")))?,
                        )
                    }
                    "values" => {
                        let values = value
                            .split(',')
                            .map(|v| number(v, line))
                            .collect::<Result<Vec<_>>>()?;
                        axis.axis = Some(Axis::new(placeholder, values)?);
                    }
                    "range" => {
                        let (start, stop, step) = triple(value, line)?;
                        axis.axis = Some(Axis::linear(placeholder, start, stop, step)?);
                    }
                    "logspace" => {
                        let (start, stop, count) = triple(value, line)?;
                        if count.fract() != 0.0 || count < 2.0 {
                            return Err(Error::config(format!(
                                "line {line}: logspace count must be an integer >= 2"
                            )));
                        }
                        axis.axis =
                            Some(Axis::logspace(placeholder, start, stop, count as usize)?);
                    }
                    other => {
                        return Err(Error::config(format!(
                            "line {line}: unknown sweep key `{other}`"
                        )))
                    }
                }
            }
            Section::Run => match key {
                "preset" => config.preset = Some(Preset::from_name(value)?),
                "seed" => {
                    config.seed = value.parse().map_err(|_| {
                        Error::config(format!("line {line}: seed must be an unsigned integer"))
                    })?
                }
                "threads" => {
                    let n: usize = value.parse().map_err(|_| {
                        Error::config(format!("line {line}: threads must be a positive integer"))
                    })?;
                    if n == 0 {
                        return Err(Error::config(format!("line {line}: threads must be >= 1")));
                    }
                    config.threads = Some(n);
                }
                "out" => config.output = Some(PathBuf::from(value)),
                "layout" => {
                    config.layout = match value {
                        "wide" => Layout::Wide,
                        "long" => Layout::Long,
                        other => {
                            return Err(Error::config(format!(
                                "line {line}: unknown layout `{other}`"
                            )))
                        }
                    }
                }
                other => {
                    return Err(Error::config(format!("line {line}: unknown run key `{other}`")))
                }
            },
        }
    }
    if let Some(axis) = pending.take() {
        config.axes.push(axis.finish()?);
    }
    config.apply_preset();
    Ok(config)
}
