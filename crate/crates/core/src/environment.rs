//! Reward sources: i.i.d. stochastic tables and oblivious adversarial scripts.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::divergence::aggregate_pmf;
use crate::math::sin;
use crate::model::{Configuration, Instance};
use crate::policy::{Feedback, FeedbackMode};
use crate::{Error, Result, Table};

/// Success probabilities per cell and the number of packets sent per slot.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaTable {
    theta: Table,
    m: u32,
}

impl ThetaTable {
    /// Pads `theta` to the instance width; padded cells get probability zero.
    pub fn new(instance: &Instance, theta: &Table, m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("packets per slot must be positive"));
        }
        let theta = instance.pad(theta)?;
        if theta.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("success probabilities must lie in [0, 1]"));
        }
        Ok(ThetaTable { theta, m })
    }

    pub fn theta(&self) -> &Table {
        &self.theta
    }

    pub fn packets(&self) -> u32 {
        self.m
    }
}

/// One slot of rewards: `Bin(m, theta_ij) / m` independently per cell.
pub fn draw_stochastic<R: Rng + ?Sized>(theta: &ThetaTable, rng: &mut R) -> Table {
    let m = theta.m;
    let mut r = theta.theta.clone();
    for v in r.as_mut_slice() {
        let p = *v;
        let successes = (0..m).filter(|_| rng.gen::<f64>() < p).count();
        *v = successes as f64 / m as f64;
    }
    r
}

/// How an adversarial script produces the table of round `t`.
#[derive(Clone, Debug, PartialEq)]
pub enum ScriptKind {
    Constant(Table),
    /// Round `t` plays `tables[(t - 1) % len]`.
    Periodic(Vec<Table>),
    /// `before` up to and including round `flip_at`, `after` from then on.
    ConstantWithFlip { before: Table, after: Table, flip_at: usize },
    /// `r_ij(t) = base_ij + amplitude_ij sin(2 pi t / period + phase_ij)`.
    Drifting {
        base: Table,
        amplitude: Table,
        phase: Table,
        period: f64,
    },
    /// Explicit tables for rounds `1..=T`.
    Recorded(Vec<Table>),
}

/// A reward sequence fixed in advance for rounds `1..=horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdversarialScript {
    kind: ScriptKind,
    horizon: usize,
    rows: usize,
    cols: usize,
}

impl AdversarialScript {
    /// Pads every table of `kind` to the instance width and checks that all
    /// rewards the script can emit lie in `[0, 1]`.
    pub fn new(instance: &Instance, kind: ScriptKind, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("script horizon must be positive"));
        }
        let pad = |t: &Table| instance.pad(t);
        let kind = match kind {
            ScriptKind::Constant(t) => ScriptKind::Constant(unit(pad(&t)?)?),
            ScriptKind::Periodic(ts) => {
                if ts.is_empty() {
                    return Err(Error::invalid("periodic script needs at least one table"));
                }
                ScriptKind::Periodic(ts.iter().map(|t| pad(t).and_then(unit)).collect::<Result<_>>()?)
            }
            ScriptKind::ConstantWithFlip { before, after, flip_at } => ScriptKind::ConstantWithFlip {
                before: unit(pad(&before)?)?,
                after: unit(pad(&after)?)?,
                flip_at,
            },
            ScriptKind::Drifting {
                base,
                amplitude,
                phase,
                period,
            } => {
                let (base, amplitude, phase) = (pad(&base)?, pad(&amplitude)?, pad(&phase)?);
                let ok = base
                    .as_slice()
                    .iter()
                    .zip(amplitude.as_slice())
                    .all(|(b, a)| *a >= 0.0 && b - a >= 0.0 && b + a <= 1.0);
                if !ok || !(period > 0.0) || !phase.is_finite() {
                    return Err(Error::invalid("drifting script leaves [0, 1]"));
                }
                ScriptKind::Drifting {
                    base,
                    amplitude,
                    phase,
                    period,
                }
            }
            ScriptKind::Recorded(ts) => {
                if ts.len() != horizon {
                    return Err(Error::invalid(alloc::format!(
                        "recorded script has {} rounds, horizon is {horizon}",
                        ts.len()
                    )));
                }
                ScriptKind::Recorded(ts.iter().map(|t| pad(t).and_then(unit)).collect::<Result<_>>()?)
            }
        };
        Ok(AdversarialScript {
            kind,
            horizon,
            rows: instance.links(),
            cols: instance.width(),
        })
    }

    /// Period-`period` cycle of tables drawn uniformly from `[0, 1]`.
    pub fn periodic_random(instance: &Instance, period: usize, horizon: usize, seed: u64) -> Result<Self> {
        if period == 0 {
            return Err(Error::invalid("period must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tables = (0..period).map(|_| uniform_table(instance, &mut rng)).collect();
        Self::new(instance, ScriptKind::Periodic(tables), horizon)
    }

    /// A uniform table that is replaced by a fresh one after `flip_at` rounds.
    pub fn constant_with_flip_random(instance: &Instance, flip_at: usize, horizon: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let before = uniform_table(instance, &mut rng);
        let after = uniform_table(instance, &mut rng);
        Self::new(instance, ScriptKind::ConstantWithFlip { before, after, flip_at }, horizon)
    }

    /// Sinusoidal drift around uniform base levels with random phases.
    pub fn drifting_random(instance: &Instance, period: f64, horizon: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = uniform_table(instance, &mut rng);
        let mut amplitude = base.clone();
        for a in amplitude.as_mut_slice() {
            *a = a.min(1.0 - *a) * rng.gen::<f64>();
        }
        let mut phase = base.clone();
        for p in phase.as_mut_slice() {
            *p = rng.gen::<f64>() * 2.0 * core::f64::consts::PI;
        }
        Self::new(
            instance,
            ScriptKind::Drifting {
                base,
                amplitude,
                phase,
                period,
            },
            horizon,
        )
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn kind(&self) -> &ScriptKind {
        &self.kind
    }

    /// The reward table of round `t`, `1 <= t <= horizon`.
    pub fn script_step(&self, t: usize) -> Result<Table> {
        if t == 0 || t > self.horizon {
            return Err(Error::OutOfRange { t, horizon: self.horizon });
        }
        Ok(match &self.kind {
            ScriptKind::Constant(v) => v.clone(),
            ScriptKind::Periodic(ts) => ts[(t - 1) % ts.len()].clone(),
            ScriptKind::ConstantWithFlip { before, after, flip_at } => {
                if t <= *flip_at {
                    before.clone()
                } else {
                    after.clone()
                }
            }
            ScriptKind::Drifting {
                base,
                amplitude,
                phase,
                period,
            } => {
                let angle = 2.0 * core::f64::consts::PI * t as f64 / period;
                let mut r = Table::zeros(self.rows, self.cols);
                for (k, out) in r.as_mut_slice().iter_mut().enumerate() {
                    let v = base.as_slice()[k] + amplitude.as_slice()[k] * sin(angle + phase.as_slice()[k]);
                    *out = v.clamp(0.0, 1.0);
                }
                r
            }
            ScriptKind::Recorded(ts) => ts[t - 1].clone(),
        })
    }
}

fn unit(t: Table) -> Result<Table> {
    if t.as_slice().iter().all(|v| (0.0..=1.0).contains(v)) {
        Ok(t)
    } else {
        Err(Error::invalid("adversarial rewards must lie in [0, 1]"))
    }
}

fn uniform_table<R: Rng + ?Sized>(instance: &Instance, rng: &mut R) -> Table {
    let mut t = Table::zeros(instance.links(), instance.channels());
    for v in t.as_mut_slice() {
        *v = rng.gen::<f64>();
    }
    t
}

/// What a policy in `mode` sees when `config` is played against `table`.
pub fn feedback_view(table: &Table, config: &Configuration, mode: FeedbackMode) -> Feedback {
    match mode {
        FeedbackMode::Detailed => Feedback::Detailed(config.pairs().map(|(i, j)| (i, j, table[(i, j)])).collect()),
        FeedbackMode::Aggregate => Feedback::Aggregate(config.value(table)),
    }
}

/// Law of the number of successful links under `config` with one packet
/// per slot, indexed `0..=n`.
pub fn aggregate_reward_pmf(theta: &ThetaTable, config: &Configuration) -> Result<Vec<f64>> {
    if theta.m != 1 {
        return Err(Error::invalid("aggregate law needs one packet per slot"));
    }
    if config.links() != theta.theta.rows() {
        return Err(Error::invalid("configuration does not match theta"));
    }
    Ok(aggregate_pmf(&theta.theta, config))
}
