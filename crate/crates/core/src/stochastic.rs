//! Stochastic policies with detailed feedback: a UCB variant on
//! per-(link, channel) indices and epsilon-greedy with a covering set.
//!
//! Both start by playing the covering set once, in construction order, so
//! every cell has at least one observation.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::model::{build_covering_set, Configuration, Instance};
use crate::policy::{Feedback, FeedbackMode, Policy};
use crate::static_opt::solve_ilp;
use crate::{math, Error, Result, Table};

/// Pull counts and running means per (link, channel) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct PairStats {
    pulls: Vec<u64>,
    mean: Table,
    t: u64,
}

impl PairStats {
    pub fn new(rows: usize, cols: usize) -> Self {
        PairStats {
            pulls: vec![0; rows * cols],
            mean: Table::zeros(rows, cols),
            t: 0,
        }
    }

    pub fn from_parts(pulls: Vec<u64>, mean: Table, t: u64) -> Result<Self> {
        if pulls.len() != mean.rows() * mean.cols() {
            return Err(Error::invalid("pull table does not match mean table"));
        }
        if mean.as_slice().iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::invalid("means must lie in [0, 1]"));
        }
        Ok(PairStats { pulls, mean, t })
    }

    pub fn pulls(&self, i: usize, j: usize) -> u64 {
        self.pulls[i * self.mean.cols() + j]
    }

    pub fn mean(&self) -> &Table {
        &self.mean
    }

    /// Rounds observed so far.
    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn all_pulled(&self) -> bool {
        self.pulls.iter().all(|&p| p > 0)
    }

    /// Folds one slot of detailed feedback into the statistics.
    ///
    /// `observed` must hold exactly the active pairs of `config`, each reward
    /// in `[0, 1]`. Nothing is modified when validation fails.
    pub fn update_detailed(&mut self, config: &Configuration, observed: &[(usize, usize, f64)]) -> Result<()> {
        if observed.len() != config.pairs().count() {
            return Err(Error::invalid("feedback must cover exactly the active pairs"));
        }
        for &(i, j, r) in observed {
            if i >= self.mean.rows() || j >= self.mean.cols() || !config.contains(i, j) {
                return Err(Error::invalid(alloc::format!("pair ({i}, {j}) is not active")));
            }
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::invalid(alloc::format!("reward {r} outside [0, 1]")));
            }
        }
        let cols = self.mean.cols();
        for &(i, j, r) in observed {
            let k = i * cols + j;
            self.pulls[k] += 1;
            let m = &mut self.mean[(i, j)];
            *m += (r - *m) / self.pulls[k] as f64;
        }
        self.t += 1;
        Ok(())
    }
}

/// `q_ij = mean_ij + sqrt(alpha ln t / pulls_ij)` with `t` the stats' round counter.
pub fn ucb_index(stats: &PairStats, alpha: f64) -> Result<Table> {
    ucb_index_at(stats, alpha, stats.t as f64)
}

/// [`ucb_index`] evaluated at an explicit time `t >= 1`.
pub fn ucb_index_at(stats: &PairStats, alpha: f64, t: f64) -> Result<Table> {
    if !stats.all_pulled() {
        return Err(Error::State("UCB index needs every pair pulled at least once"));
    }
    if !(t >= 1.0) {
        return Err(Error::State("UCB index needs t >= 1"));
    }
    let log_t = math::ln(t);
    let mut q = stats.mean.clone();
    for (k, v) in q.as_mut_slice().iter_mut().enumerate() {
        *v += math::sqrt(alpha * log_t / stats.pulls[k] as f64);
    }
    Ok(q)
}

/// Configuration maximizing the sum of UCB indices.
pub fn ucb_step(stats: &PairStats, instance: &Instance, alpha: f64) -> Result<Configuration> {
    let q = ucb_index(stats, alpha)?;
    Ok(solve_ilp(instance, &q)?.config)
}

/// Exploration probability `min(1, d / t)` of round `t >= 1`.
pub fn exploration_rate(d: f64, t: u64) -> f64 {
    (d / t as f64).min(1.0)
}

/// One epsilon-greedy decision for round `stats.round() + 1`.
///
/// Returns the configuration and whether it was an exploration draw from
/// the covering set.
pub fn greedy_step<R: Rng + ?Sized>(
    stats: &PairStats,
    instance: &Instance,
    covering: &[Configuration],
    d: f64,
    rng: &mut R,
) -> Result<(Configuration, bool)> {
    let eps = exploration_rate(d, stats.t + 1);
    let explore = if eps >= 1.0 {
        true
    } else if eps <= 0.0 {
        false
    } else {
        rng.gen::<f64>() < eps
    };
    if explore {
        let k = rng.gen_range(0..covering.len());
        return Ok((covering[k].clone(), true));
    }
    Ok((solve_ilp(instance, &stats.mean)?.config, false))
}

/// Exploration weight `alpha` of the UCB policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UcbConfig {
    pub alpha: f64,
}

impl UcbConfig {
    /// `n + 0.6`, just above the `alpha > n + 1/2` requirement of the regret bound.
    pub fn default_for(links: usize) -> Self {
        UcbConfig {
            alpha: links as f64 + 0.6,
        }
    }

    pub fn satisfies_bound_precondition(&self, links: usize) -> bool {
        self.alpha > links as f64 + 0.5
    }
}

/// Regret constant `4 alpha Δmax / Δmin² n³ c` multiplying `ln T` in the UCB bound.
pub fn ucb_regret_constant(alpha: f64, delta_max: f64, delta_min: f64, links: usize, channels: usize) -> f64 {
    let n = links as f64;
    4.0 * alpha * delta_max / (delta_min * delta_min) * n * n * n * channels as f64
}

/// Exploration constant `d` of epsilon-greedy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreedyConfig {
    pub d: f64,
}

impl GreedyConfig {
    /// Threshold `10 A n² / Δmin²` the exploration constant must exceed for
    /// the logarithmic regret bound.
    pub fn threshold(covering_size: usize, links: usize, delta_min: f64) -> f64 {
        let n = links as f64;
        10.0 * covering_size as f64 * n * n / (delta_min * delta_min)
    }

    pub fn satisfies_bound_precondition(&self, covering_size: usize, links: usize, delta_min: f64) -> bool {
        self.d > Self::threshold(covering_size, links, delta_min)
    }
}

fn detailed(feedback: &Feedback) -> Result<&[(usize, usize, f64)]> {
    match feedback {
        Feedback::Detailed(obs) => Ok(obs),
        Feedback::Aggregate(_) => Err(Error::invalid("policy needs detailed feedback")),
    }
}

/// UCB over per-pair indices.
#[derive(Clone, Debug)]
pub struct Ucb {
    instance: Instance,
    covering: Vec<Configuration>,
    stats: PairStats,
    alpha: f64,
}

impl Ucb {
    pub fn new(instance: &Instance, config: UcbConfig) -> Result<Self> {
        if !(config.alpha >= 0.0) {
            return Err(Error::invalid("alpha must be nonnegative"));
        }
        Ok(Ucb {
            instance: instance.clone(),
            covering: build_covering_set(instance),
            stats: PairStats::new(instance.links(), instance.width()),
            alpha: config.alpha,
        })
    }

    pub fn stats(&self) -> &PairStats {
        &self.stats
    }

    pub fn covering_set(&self) -> &[Configuration] {
        &self.covering
    }
}

impl Policy for Ucb {
    fn feedback_mode(&self) -> FeedbackMode {
        FeedbackMode::Detailed
    }

    fn select(&mut self, _rng: &mut dyn RngCore) -> Result<Configuration> {
        let t = self.stats.round() as usize;
        if t < self.covering.len() {
            return Ok(self.covering[t].clone());
        }
        ucb_step(&self.stats, &self.instance, self.alpha)
    }

    fn observe(&mut self, config: &Configuration, feedback: &Feedback) -> Result<()> {
        self.stats.update_detailed(config, detailed(feedback)?)
    }
}

/// Epsilon-greedy with `eps_t = min(1, d / t)` and uniform exploration over
/// the covering set.
#[derive(Clone, Debug)]
pub struct EpsilonGreedy {
    instance: Instance,
    covering: Vec<Configuration>,
    stats: PairStats,
    d: f64,
    explorations: u64,
}

impl EpsilonGreedy {
    pub fn new(instance: &Instance, config: GreedyConfig) -> Result<Self> {
        if !(config.d >= 0.0) {
            return Err(Error::invalid("exploration constant d must be nonnegative"));
        }
        Ok(EpsilonGreedy {
            instance: instance.clone(),
            covering: build_covering_set(instance),
            stats: PairStats::new(instance.links(), instance.width()),
            d: config.d,
            explorations: 0,
        })
    }

    pub fn stats(&self) -> &PairStats {
        &self.stats
    }

    pub fn covering_set(&self) -> &[Configuration] {
        &self.covering
    }

    /// Exploration draws made after initialization.
    pub fn explorations(&self) -> u64 {
        self.explorations
    }
}

impl Policy for EpsilonGreedy {
    fn feedback_mode(&self) -> FeedbackMode {
        FeedbackMode::Detailed
    }

    fn select(&mut self, rng: &mut dyn RngCore) -> Result<Configuration> {
        let t = self.stats.round() as usize;
        if t < self.covering.len() {
            return Ok(self.covering[t].clone());
        }
        let (config, explored) = greedy_step(&self.stats, &self.instance, &self.covering, self.d, rng)?;
        self.explorations += explored as u64;
        Ok(config)
    }

    fn observe(&mut self, config: &Configuration, feedback: &Feedback) -> Result<()> {
        self.stats.update_detailed(config, detailed(feedback)?)
    }
}
