//! Running a policy against a reward path and accounting its regret.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversarial::{colorband1_bound, default_rates, ColorBand, ColorBandConfig, Rates};
use crate::environment::{draw_stochastic, feedback_view, AdversarialScript, ThetaTable};
use crate::geometry::compute_mu0;
use crate::math::{ln, sqrt};
use crate::model::{build_covering_set, Configuration, Instance};
use crate::policy::{FeedbackMode, FixedPolicy, Policy};
use crate::static_opt::{gaps, solve};
use crate::stochastic::{ucb_regret_constant, EpsilonGreedy, GreedyConfig, Ucb, UcbConfig};
use crate::{Error, Result, Table};

#[derive(Clone, Debug, PartialEq)]
pub enum Environment {
    Stochastic(ThetaTable),
    Adversarial(AdversarialScript),
}

impl Environment {
    /// Rewards of rounds `1..=horizon`, drawn once so that every policy can be
    /// run on the same path.
    pub fn generate_path<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> Result<Vec<Table>> {
        match self {
            Environment::Stochastic(theta) => Ok((0..horizon).map(|_| draw_stochastic(theta, rng)).collect()),
            Environment::Adversarial(script) => (1..=horizon).map(|t| script.script_step(t)).collect(),
        }
    }
}

/// A learning rate given explicitly or derived from the horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rate {
    Auto,
    Value(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum PolicySpec {
    Ucb { alpha: f64 },
    EpsilonGreedy { d: f64 },
    ColorBand { mode: FeedbackMode, eta: Rate, gamma: Rate },
    Fixed(Configuration),
    /// Plays the best static configuration: `argmax M • theta` for a
    /// stochastic environment, `argmax M • sum_t r(t)` on an adversarial path.
    Oracle,
}

impl PolicySpec {
    pub fn colorband1() -> Self {
        PolicySpec::ColorBand {
            mode: FeedbackMode::Detailed,
            eta: Rate::Auto,
            gamma: Rate::Auto,
        }
    }

    pub fn colorband2() -> Self {
        PolicySpec::ColorBand {
            mode: FeedbackMode::Aggregate,
            eta: Rate::Auto,
            gamma: Rate::Auto,
        }
    }
}

/// ColorBand rates after resolving `Auto`.
pub fn resolve_rates(instance: &Instance, mode: FeedbackMode, eta: Rate, gamma: Rate, horizon: usize) -> Result<Rates> {
    let auto = if matches!((eta, gamma), (Rate::Value(_), Rate::Value(_))) {
        None
    } else {
        let mu_min = compute_mu0(instance)?.mu_min();
        Some(default_rates(instance, mu_min, horizon as u64, mode)?)
    };
    let pick = |r: Rate, f: fn(&Rates) -> f64| match r {
        Rate::Value(v) => v,
        Rate::Auto => f(auto.as_ref().expect("resolved above")),
    };
    Ok(Rates {
        eta: pick(eta, |r| r.eta),
        gamma: pick(gamma, |r| r.gamma),
        clamped: auto.is_some_and(|r| r.clamped),
    })
}

/// Instantiates `spec`. `path` is consulted only by the oracle on an
/// adversarial environment.
pub fn build_policy(
    spec: &PolicySpec,
    instance: &Instance,
    environment: &Environment,
    path: &[Table],
) -> Result<Box<dyn Policy>> {
    Ok(match spec {
        PolicySpec::Ucb { alpha } => Box::new(Ucb::new(instance, UcbConfig { alpha: *alpha })?),
        PolicySpec::EpsilonGreedy { d } => Box::new(EpsilonGreedy::new(instance, GreedyConfig { d: *d })?),
        PolicySpec::ColorBand { mode, eta, gamma } => {
            let rates = resolve_rates(instance, *mode, *eta, *gamma, path.len())?;
            Box::new(ColorBand::new(instance, ColorBandConfig::new(rates.eta, rates.gamma, *mode))?)
        }
        PolicySpec::Fixed(config) => {
            if !crate::model::check_feasible(instance.graph(), instance.width(), config)? {
                return Err(Error::invalid("fixed configuration is infeasible"));
            }
            Box::new(FixedPolicy::new(config.clone()))
        }
        PolicySpec::Oracle => {
            let target = match environment {
                Environment::Stochastic(theta) => theta.theta().clone(),
                Environment::Adversarial(_) => total(instance, path),
            };
            Box::new(FixedPolicy::new(solve(instance, &target)?.config))
        }
    })
}

fn total(instance: &Instance, path: &[Table]) -> Table {
    let mut sum = Table::zeros(instance.links(), instance.width());
    for r in path {
        sum = sum.add(r);
    }
    sum
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub config: Configuration,
    /// Accounted reward: `M(t) • theta` for a stochastic environment (so the
    /// regret is the pseudo-regret), `M(t) • r(t)` otherwise.
    pub reward: f64,
    pub cum_reward: f64,
    pub cum_regret: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegretTrace {
    pub records: Vec<RoundRecord>,
    /// `T V(theta)` or `V(sum_t r(t))`.
    pub comparator_value: f64,
    /// `sum_t M(t) • r(t)` on the path, whatever the environment.
    pub realized_reward: f64,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }

    /// Cumulative regret after round `t`.
    pub fn regret_at(&self, t: usize) -> Option<f64> {
        t.checked_sub(1).and_then(|k| self.records.get(k)).map(|r| r.cum_regret)
    }
}

/// Runs `policy` on `path`. Stochastic regret compares with `t V(theta)`;
/// adversarial regret after round `t` compares with `V(sum_{s <= t} r(s))`.
pub fn run_policy(
    policy: &mut dyn Policy,
    instance: &Instance,
    environment: &Environment,
    path: &[Table],
    rng: &mut dyn rand::RngCore,
) -> Result<RegretTrace> {
    let mode = policy.feedback_mode();
    let mut records = Vec::with_capacity(path.len());
    let mut cum_reward = 0.0;
    let mut realized = 0.0;
    let mut running = Table::zeros(instance.links(), instance.width());
    let per_round = match environment {
        Environment::Stochastic(theta) => Some((theta.theta(), solve(instance, theta.theta())?.value)),
        Environment::Adversarial(_) => None,
    };
    let mut comparator = 0.0;
    for (k, r) in path.iter().enumerate() {
        let t = k + 1;
        let config = policy.select(rng)?;
        let feedback = feedback_view(r, &config, mode);
        policy.observe(&config, &feedback)?;
        let got = config.value(r);
        realized += got;
        let reward = match per_round {
            Some((theta, v)) => {
                comparator = t as f64 * v;
                config.value(theta)
            }
            None => {
                running = running.add(r);
                comparator = solve(instance, &running)?.value;
                got
            }
        };
        cum_reward += reward;
        records.push(RoundRecord {
            t,
            config,
            reward,
            cum_reward,
            cum_regret: comparator - cum_reward,
        });
    }
    Ok(RegretTrace {
        records,
        comparator_value: comparator,
        realized_reward: realized,
    })
}

/// Generator for replication `rep`: `stream` 0 feeds the environment, 1 the
/// policy.
pub fn replication_rng(seed: u64, rep: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
    rng.set_stream(stream);
    rng
}

/// One replication: draw the path, build the policy, run it.
pub fn run_replication(
    instance: &Instance,
    environment: &Environment,
    spec: &PolicySpec,
    horizon: usize,
    seed: u64,
    rep: u64,
) -> Result<RegretTrace> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    let path = environment.generate_path(horizon, &mut replication_rng(seed, rep, 0))?;
    let mut policy = build_policy(spec, instance, environment, &path)?;
    run_policy(policy.as_mut(), instance, environment, &path, &mut replication_rng(seed, rep, 1))
}

/// Powers of ten below the horizon, then the horizon.
pub fn checkpoints(horizon: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 10;
    while p < horizon {
        out.push(p);
        p = p.saturating_mul(10);
    }
    if horizon > 0 {
        out.push(horizon);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointStats {
    pub t: usize,
    pub mean: f64,
    /// Sample standard deviation (zero for a single replication).
    pub std: f64,
    /// `mean / ln t`.
    pub per_log: f64,
}

pub fn summarize(traces: &[RegretTrace], horizon: usize) -> Vec<CheckpointStats> {
    checkpoints(horizon)
        .into_iter()
        .map(|t| {
            let xs: Vec<f64> = traces.iter().filter_map(|tr| tr.regret_at(t)).collect();
            let (mean, std) = mean_std(&xs);
            CheckpointStats {
                t,
                mean,
                std,
                per_log: mean / ln(t as f64),
            }
        })
        .collect()
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, sqrt(var))
}

/// Theoretical constants that apply to a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundConstants {
    pub delta_min: Option<f64>,
    pub delta_max: Option<f64>,
    /// Multiplier of `ln T` in the UCB bound.
    pub ucb_constant: Option<f64>,
    /// `alpha > n + 1/2`.
    pub ucb_precondition: Option<bool>,
    /// `10 A n² / Δmin²`.
    pub greedy_threshold: Option<f64>,
    /// `d Δmax`, the multiplier of `ln T` for epsilon-greedy.
    pub greedy_constant: Option<f64>,
    pub greedy_precondition: Option<bool>,
    pub mu_min: Option<f64>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub rates_clamped: Option<bool>,
    /// Detailed-feedback ColorBand regret bound at the horizon.
    pub colorband1_bound: Option<f64>,
}

pub fn bound_constants(
    instance: &Instance,
    environment: &Environment,
    spec: &PolicySpec,
    horizon: usize,
) -> Result<BoundConstants> {
    let mut out = BoundConstants::default();
    if let Environment::Stochastic(theta) = environment {
        let g = gaps(instance, theta.theta())?;
        if g.min.is_finite() && g.min > 0.0 {
            out.delta_min = Some(g.min);
            out.delta_max = Some(g.max);
            let n = instance.links();
            match spec {
                PolicySpec::Ucb { alpha } => {
                    out.ucb_constant = Some(ucb_regret_constant(*alpha, g.max, g.min, n, instance.channels()));
                    out.ucb_precondition = Some(UcbConfig { alpha: *alpha }.satisfies_bound_precondition(n));
                }
                PolicySpec::EpsilonGreedy { d } => {
                    let a = build_covering_set(instance).len();
                    out.greedy_threshold = Some(GreedyConfig::threshold(a, n, g.min));
                    out.greedy_constant = Some(d * g.max);
                    out.greedy_precondition = Some(GreedyConfig { d: *d }.satisfies_bound_precondition(a, n, g.min));
                }
                _ => {}
            }
        }
    }
    if let PolicySpec::ColorBand { mode, eta, gamma } = spec {
        let mu_min = compute_mu0(instance)?.mu_min();
        let rates = resolve_rates(instance, *mode, *eta, *gamma, horizon)?;
        out.mu_min = Some(mu_min);
        out.eta = Some(rates.eta);
        out.gamma = Some(rates.gamma);
        out.rates_clamped = Some(rates.clamped);
        if *mode == FeedbackMode::Detailed {
            out.colorband1_bound = Some(colorband1_bound(instance.links(), mu_min, horizon as u64));
        }
    }
    Ok(out)
}
