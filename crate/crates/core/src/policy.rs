use alloc::vec::Vec;

use rand::RngCore;

use crate::model::Configuration;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeedbackMode {
    /// Per-(link, channel) rewards of the active pairs.
    Detailed,
    /// Only the total reward of the slot.
    Aggregate,
}

/// What a policy observes at the end of a slot.
#[derive(Clone, Debug, PartialEq)]
pub enum Feedback {
    Detailed(Vec<(usize, usize, f64)>),
    Aggregate(f64),
}

impl Feedback {
    pub fn total(&self) -> f64 {
        match self {
            Feedback::Detailed(obs) => obs.iter().map(|&(_, _, r)| r).sum(),
            Feedback::Aggregate(r) => *r,
        }
    }
}

/// A sequential allocation policy.
pub trait Policy {
    fn feedback_mode(&self) -> FeedbackMode;

    fn select(&mut self, rng: &mut dyn RngCore) -> Result<Configuration>;

    fn observe(&mut self, config: &Configuration, feedback: &Feedback) -> Result<()>;
}

/// Plays one configuration forever.
#[derive(Clone, Debug)]
pub struct FixedPolicy {
    config: Configuration,
}

impl FixedPolicy {
    pub fn new(config: Configuration) -> Self {
        FixedPolicy { config }
    }
}

impl Policy for FixedPolicy {
    fn feedback_mode(&self) -> FeedbackMode {
        FeedbackMode::Detailed
    }

    fn select(&mut self, _rng: &mut dyn RngCore) -> Result<Configuration> {
        Ok(self.config.clone())
    }

    fn observe(&mut self, _config: &Configuration, _feedback: &Feedback) -> Result<()> {
        Ok(())
    }
}
