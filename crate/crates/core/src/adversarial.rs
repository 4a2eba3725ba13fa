//! ColorBand: exponential weights over the scaled configuration polytope.
//!
//! ColorBand-1 uses detailed feedback and importance-weighted per-cell
//! estimates. ColorBand-2 sees only the slot total and estimates the reward
//! table through the pseudo-inverse of the play distribution's second
//! moment.

use alloc::vec::Vec;

use rand::RngCore;

use crate::geometry::{
    compute_mu0, covariance, decompose, kl_project, BaselineMixture, CovarianceOperator, PolytopePoint,
    ProjectionOptions, VertexMixture, DEFAULT_RANK_TOL,
};
use crate::math::{ln, sqrt};
use crate::model::{Configuration, Instance};
use crate::policy::{Feedback, FeedbackMode, Policy};
use crate::{Error, Result, Table};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColorBandConfig {
    pub eta: f64,
    pub gamma: f64,
    pub mode: FeedbackMode,
    pub projection: ProjectionOptions,
    pub rank_tol: f64,
}

impl ColorBandConfig {
    pub fn new(eta: f64, gamma: f64, mode: FeedbackMode) -> Self {
        ColorBandConfig {
            eta,
            gamma,
            mode,
            projection: ProjectionOptions::default(),
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub eta: f64,
    pub gamma: f64,
    /// The horizon was too short for the closed forms: `gamma` was capped at
    /// 1/2 or `eta` at 1.
    pub clamped: bool,
}

/// Horizon-tuned rates.
///
/// Detailed: `gamma = sqrt(mu_min^-1 ln mu_min^-1 / T)` and
/// `eta = sqrt((1 - gamma) ln mu_min^-1 / (c T))`. Aggregate: `eta = gamma`.
/// `c` is the padded channel count.
pub fn default_rates(instance: &Instance, mu_min: f64, horizon: u64, mode: FeedbackMode) -> Result<Rates> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    if !(mu_min > 0.0 && mu_min <= 1.0) {
        return Err(Error::invalid("mu_min must lie in (0, 1]"));
    }
    let inv = 1.0 / mu_min;
    let t = horizon as f64;
    let mut gamma = sqrt(inv * ln(inv) / t);
    let mut clamped = false;
    if gamma > 0.5 {
        gamma = 0.5;
        clamped = true;
    }
    let mut eta = match mode {
        FeedbackMode::Detailed => sqrt((1.0 - gamma) * ln(inv) / (instance.width() as f64 * t)),
        FeedbackMode::Aggregate => gamma,
    };
    if eta > 1.0 {
        eta = 1.0;
        clamped = true;
    }
    Ok(Rates { eta, gamma, clamped })
}

/// `4 n sqrt(mu_min^-1 T ln mu_min^-1)`, the detailed-feedback regret bound.
pub fn colorband1_bound(links: usize, mu_min: f64, horizon: u64) -> f64 {
    let inv = 1.0 / mu_min;
    4.0 * links as f64 * sqrt(inv * horizon as f64 * ln(inv))
}

/// `r_ij / P_ij` on the played cells, zero elsewhere, where `P` is the
/// cell-selection probability of the play distribution.
pub fn importance_estimate(marginal: &Table, observed: &[(usize, usize, f64)]) -> Result<Table> {
    let mut estimate = Table::zeros(marginal.rows(), marginal.cols());
    for &(i, j, r) in observed {
        let p = marginal[(i, j)];
        if !(p > 0.0) {
            return Err(Error::State("played a cell of zero probability"));
        }
        estimate[(i, j)] = r / p;
    }
    Ok(estimate)
}

/// `r Σ⁺ vec(M)` reshaped to a table.
pub fn pseudo_inverse_estimate(cov: &CovarianceOperator, config: &Configuration, reward: f64, cols: usize) -> Table {
    let m = config.to_table(cols).into_vec();
    let v: Vec<f64> = cov.apply_pinv(&m).into_iter().map(|x| reward * x).collect();
    Table::from_vec(config.links(), cols, v).expect("dimensions match")
}

/// What one update did, for diagnostics.
#[derive(Clone, Debug)]
pub struct UpdateLog {
    pub prev: Table,
    pub estimate: Table,
    /// Step size applied to the estimate: `eta` detailed, `eta / n` aggregate.
    pub step: f64,
    /// `q_{t-1} exp(step r̃)`, normalized to a distribution.
    pub tilted: Table,
    pub next: Table,
    pub projection_iterations: usize,
}

struct Pending {
    config: Configuration,
    mixture: VertexMixture,
    marginal: Table,
}

/// ColorBand state: the distribution `q_t` and the current play law.
pub struct ColorBand {
    instance: Instance,
    baseline: BaselineMixture,
    uniform: VertexMixture,
    q: PolytopePoint,
    config: ColorBandConfig,
    round: u64,
    pending: Option<Pending>,
    keep_log: bool,
    last: Option<UpdateLog>,
}

impl ColorBand {
    pub fn new(instance: &Instance, config: ColorBandConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&config.gamma) {
            return Err(Error::invalid("gamma must lie in [0, 1]"));
        }
        if !(config.eta >= 0.0 && config.eta.is_finite()) {
            return Err(Error::invalid("eta must be finite and nonnegative"));
        }
        if config.mode == FeedbackMode::Detailed && config.eta > 1.0 {
            return Err(Error::invalid("detailed-feedback eta must not exceed 1"));
        }
        let baseline = compute_mu0(instance)?;
        let uniform = baseline.uniform();
        Ok(ColorBand {
            instance: instance.clone(),
            q: baseline.mu0().clone(),
            uniform,
            baseline,
            config,
            round: 0,
            pending: None,
            keep_log: false,
            last: None,
        })
    }

    /// Keep an [`UpdateLog`] of the most recent update.
    pub fn with_log(mut self) -> Self {
        self.keep_log = true;
        self
    }

    pub fn q(&self) -> &PolytopePoint {
        &self.q
    }

    pub fn baseline(&self) -> &BaselineMixture {
        &self.baseline
    }

    pub fn config(&self) -> &ColorBandConfig {
        &self.config
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn last_update(&self) -> Option<&UpdateLog> {
        self.last.as_ref()
    }

    /// Law of the next play: `(1 - gamma)` times a decomposition of `n q`
    /// plus `gamma` times the uniform law over all configurations, whose
    /// marginal is `n mu0`.
    pub fn play_mixture(&self) -> Result<VertexMixture> {
        let gamma = self.config.gamma;
        if gamma >= 1.0 {
            return Ok(self.uniform.clone());
        }
        let own = decompose(&self.q.scaled(), &self.instance)?;
        Ok(VertexMixture::blend(&own, 1.0 - gamma, &self.uniform, gamma))
    }

    /// Samples the configuration of the next round and caches its law.
    pub fn colorband_step(&mut self, rng: &mut dyn RngCore) -> Result<Configuration> {
        let mixture = self.play_mixture()?;
        let marginal = mixture.marginal(self.instance.width());
        let config = mixture.sample(rng).clone();
        self.pending = Some(Pending {
            config: config.clone(),
            mixture,
            marginal,
        });
        Ok(config)
    }

    fn take_pending(&mut self, config: &Configuration) -> Result<Pending> {
        let pending = self.pending.take().ok_or(Error::State("update without a preceding step"))?;
        if &pending.config != config {
            return Err(Error::State("update for a configuration that was not played"));
        }
        Ok(pending)
    }

    pub fn update_detailed(&mut self, config: &Configuration, observed: &[(usize, usize, f64)]) -> Result<()> {
        if self.config.mode != FeedbackMode::Detailed {
            return Err(Error::State("detailed update on an aggregate-feedback policy"));
        }
        let pending = self.take_pending(config)?;
        let mut seen = 0;
        for &(i, j, r) in observed {
            if !config.contains(i, j) || !(0.0..=1.0).contains(&r) {
                return Err(Error::invalid("observation outside the played cells or [0, 1]"));
            }
            seen += 1;
        }
        if seen != config.pairs().count() {
            return Err(Error::invalid("observation does not cover the played cells"));
        }
        let estimate = importance_estimate(&pending.marginal, observed)?;
        self.apply(estimate, self.config.eta)
    }

    pub fn update_aggregate(&mut self, config: &Configuration, reward: f64) -> Result<()> {
        if self.config.mode != FeedbackMode::Aggregate {
            return Err(Error::State("aggregate update on a detailed-feedback policy"));
        }
        let n = self.instance.links() as f64;
        if !(0.0..=n).contains(&reward) {
            return Err(Error::invalid("aggregate reward outside [0, n]"));
        }
        let pending = self.take_pending(config)?;
        let width = self.instance.width();
        let cov = covariance(&pending.mixture, width, self.config.rank_tol);
        let estimate = pseudo_inverse_estimate(&cov, config, reward, width);
        self.apply(estimate, self.config.eta / n)
    }

    fn apply(&mut self, estimate: Table, step: f64) -> Result<()> {
        let prev = self.q.table();
        let mut tilted = prev.clone();
        for (t, r) in tilted.as_mut_slice().iter_mut().zip(estimate.as_slice()) {
            *t *= crate::math::exp(step * r);
        }
        let z = tilted.sum();
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::State("weights overflowed"));
        }
        let tilted = tilted.scaled(1.0 / z);
        let projection = kl_project(&tilted, &self.instance, self.config.projection)?;
        if self.keep_log {
            self.last = Some(UpdateLog {
                prev: prev.clone(),
                estimate,
                step,
                tilted,
                next: projection.point.table().clone(),
                projection_iterations: projection.iterations,
            });
        }
        self.q = projection.point;
        self.round += 1;
        Ok(())
    }
}

impl Policy for ColorBand {
    fn feedback_mode(&self) -> FeedbackMode {
        self.config.mode
    }

    fn select(&mut self, rng: &mut dyn RngCore) -> Result<Configuration> {
        self.colorband_step(rng)
    }

    fn observe(&mut self, config: &Configuration, feedback: &Feedback) -> Result<()> {
        match feedback {
            Feedback::Detailed(obs) => self.update_detailed(config, obs),
            Feedback::Aggregate(r) => self.update_aggregate(config, *r),
        }
    }
}
