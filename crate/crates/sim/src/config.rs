//! The `simulate` configuration file.
//!
//! ```json
//! {
//!   "instance": {"n": 2, "c": 2, "interference": "full"},
//!   "environment": {"type": "stochastic", "theta": [[0.9, 0.6], [0.6, 0.9]]},
//!   "policy": "ucb", "alpha": 2.6, "T": 10000, "replications": 20, "seed": 1
//! }
//! ```
//!
//! Tables and the instance may be given inline or as paths relative to the
//! configuration file.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use spectrum_bandit_core::environment::{AdversarialScript, ScriptKind, ThetaTable};
use spectrum_bandit_core::harness::{Environment, PolicySpec, Rate};
use spectrum_bandit_core::model::build_covering_set;
use spectrum_bandit_core::static_opt::gaps;
use spectrum_bandit_core::stochastic::GreedyConfig;
use spectrum_bandit_core::{FeedbackMode, Instance, Table};

use crate::formats::{read_instance, read_reward_path_file, read_table_file, InstanceFile};
use crate::{Result, SimError};

/// Margin above the epsilon-greedy threshold used when `d` is omitted.
pub const AUTO_D_FACTOR: f64 = 1.01;
/// Default UCB `alpha` is `n + AUTO_ALPHA_MARGIN`.
pub const AUTO_ALPHA_MARGIN: f64 = 0.6;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Source<T> {
    Inline(T),
    File(PathBuf),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RateField {
    Value(f64),
    Word(String),
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum EnvironmentFile {
    Stochastic {
        theta: Source<Vec<Vec<f64>>>,
    },
    Constant {
        table: Source<Vec<Vec<f64>>>,
    },
    Periodic {
        tables: Vec<Source<Vec<Vec<f64>>>>,
    },
    PeriodicRandom {
        #[serde(default = "two")]
        period: usize,
        #[serde(default)]
        seed: u64,
    },
    Flip {
        before: Source<Vec<Vec<f64>>>,
        after: Source<Vec<Vec<f64>>>,
        flip_at: usize,
    },
    FlipRandom {
        flip_at: usize,
        #[serde(default)]
        seed: u64,
    },
    Drifting {
        base: Source<Vec<Vec<f64>>>,
        amplitude: Source<Vec<Vec<f64>>>,
        phase: Source<Vec<Vec<f64>>>,
        period: f64,
    },
    DriftingRandom {
        period: f64,
        #[serde(default)]
        seed: u64,
    },
    Recorded {
        path: PathBuf,
    },
}

fn two() -> usize {
    2
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    instance: Source<InstanceFile>,
    environment: EnvironmentFile,
    policy: String,
    alpha: Option<f64>,
    d: Option<f64>,
    m: Option<u32>,
    eta: Option<RateField>,
    gamma: Option<RateField>,
    #[serde(rename = "T")]
    horizon: usize,
    #[serde(default = "one")]
    replications: usize,
    #[serde(default)]
    seed: u64,
    output: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub instance: Instance,
    pub environment: Environment,
    pub policy: PolicySpec,
    pub policy_name: String,
    pub horizon: usize,
    pub replications: usize,
    pub seed: u64,
    pub output: PathBuf,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(SimError::io(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}

/// Parses a configuration whose relative paths are resolved against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<ExperimentConfig> {
    let raw: ConfigFile = serde_json::from_str(text)?;
    if raw.horizon == 0 {
        return Err(SimError::validation("T must be at least 1"));
    }
    if raw.replications == 0 {
        return Err(SimError::validation("replications must be at least 1"));
    }
    let instance = match raw.instance {
        Source::Inline(file) => file.to_instance()?,
        Source::File(p) => read_instance(&base.join(p))?,
    };
    let table = |src: Source<Vec<Vec<f64>>>| -> Result<Table> {
        match src {
            Source::Inline(rows) => {
                if rows.is_empty() {
                    return Err(SimError::validation("empty table"));
                }
                Ok(Table::from_rows(&rows)?)
            }
            Source::File(p) => read_table_file(&base.join(p)),
        }
    };
    let horizon = raw.horizon;
    let script = |kind: ScriptKind| -> Result<Environment> {
        Ok(Environment::Adversarial(AdversarialScript::new(&instance, kind, horizon)?))
    };
    let stochastic = matches!(raw.environment, EnvironmentFile::Stochastic { .. });
    if raw.m.is_some() && !stochastic {
        return Err(SimError::validation("m applies to stochastic environments only"));
    }
    let padded = |t: Table| instance.pad(&t).map_err(SimError::from);
    let environment = match raw.environment {
        EnvironmentFile::Stochastic { theta } => {
            Environment::Stochastic(ThetaTable::new(&instance, &table(theta)?, raw.m.unwrap_or(1))?)
        }
        EnvironmentFile::Constant { table: t } => script(ScriptKind::Constant(padded(table(t)?)?))?,
        EnvironmentFile::Periodic { tables } => {
            let tables = tables
                .into_iter()
                .map(|t| table(t).and_then(padded))
                .collect::<Result<Vec<_>>>()?;
            script(ScriptKind::Periodic(tables))?
        }
        EnvironmentFile::PeriodicRandom { period, seed } => {
            Environment::Adversarial(AdversarialScript::periodic_random(&instance, period, horizon, seed)?)
        }
        EnvironmentFile::Flip { before, after, flip_at } => script(ScriptKind::ConstantWithFlip {
            before: padded(table(before)?)?,
            after: padded(table(after)?)?,
            flip_at,
        })?,
        EnvironmentFile::FlipRandom { flip_at, seed } => Environment::Adversarial(
            AdversarialScript::constant_with_flip_random(&instance, flip_at, horizon, seed)?,
        ),
        EnvironmentFile::Drifting {
            base: b,
            amplitude,
            phase,
            period,
        } => script(ScriptKind::Drifting {
            base: padded(table(b)?)?,
            amplitude: padded(table(amplitude)?)?,
            phase: padded(table(phase)?)?,
            period,
        })?,
        EnvironmentFile::DriftingRandom { period, seed } => {
            Environment::Adversarial(AdversarialScript::drifting_random(&instance, period, horizon, seed)?)
        }
        EnvironmentFile::Recorded { path } => {
            let tables = read_reward_path_file(&base.join(path), &instance)?;
            if tables.len() < horizon {
                return Err(SimError::validation(format!(
                    "reward path has {} rounds, T is {horizon}",
                    tables.len()
                )));
            }
            script(ScriptKind::Recorded(tables))?
        }
    };

    let only = |key: &str, present: bool, allowed: &[&str]| -> Result<()> {
        if present && !allowed.contains(&raw.policy.as_str()) {
            return Err(SimError::validation(format!("{key} does not apply to policy {}", raw.policy)));
        }
        Ok(())
    };
    only("alpha", raw.alpha.is_some(), &["ucb"])?;
    only("d", raw.d.is_some(), &["egreedy"])?;
    only("eta", raw.eta.is_some(), &["colorband1", "colorband2"])?;
    only("gamma", raw.gamma.is_some(), &["colorband1", "colorband2"])?;
    let policy = match raw.policy.as_str() {
        "ucb" => PolicySpec::Ucb {
            alpha: raw.alpha.unwrap_or(instance.links() as f64 + AUTO_ALPHA_MARGIN),
        },
        "egreedy" => PolicySpec::EpsilonGreedy {
            d: match raw.d {
                Some(d) => d,
                None => auto_d(&instance, &environment)?,
            },
        },
        "colorband1" | "colorband2" => PolicySpec::ColorBand {
            mode: if raw.policy == "colorband1" {
                FeedbackMode::Detailed
            } else {
                FeedbackMode::Aggregate
            },
            eta: rate("eta", raw.eta)?,
            gamma: rate("gamma", raw.gamma)?,
        },
        other => {
            return Err(SimError::validation(format!(
                "unknown policy {other:?}; expected ucb, egreedy, colorband1 or colorband2"
            )))
        }
    };
    Ok(ExperimentConfig {
        instance,
        environment,
        policy,
        policy_name: raw.policy,
        horizon,
        replications: raw.replications,
        seed: raw.seed,
        output: base.join(raw.output.unwrap_or_else(|| PathBuf::from("results"))),
    })
}

fn rate(key: &str, field: Option<RateField>) -> Result<Rate> {
    match field {
        None => Ok(Rate::Auto),
        Some(RateField::Value(v)) => Ok(Rate::Value(v)),
        Some(RateField::Word(w)) if w == "auto" => Ok(Rate::Auto),
        Some(RateField::Word(w)) => Err(SimError::validation(format!("{key} must be a number or \"auto\", got {w:?}"))),
    }
}

/// `AUTO_D_FACTOR` times the smallest `d` that the regret bound admits.
fn auto_d(instance: &Instance, environment: &Environment) -> Result<f64> {
    let Environment::Stochastic(theta) = environment else {
        return Err(SimError::validation("egreedy needs an explicit d outside stochastic environments"));
    };
    let g = gaps(instance, theta.theta())?;
    if !(g.min.is_finite() && g.min > 0.0) {
        return Err(SimError::validation("theta has no positive gap; give d explicitly"));
    }
    let a = build_covering_set(instance).len();
    Ok(AUTO_D_FACTOR * GreedyConfig::threshold(a, instance.links(), g.min))
}
