//! Replications, summaries and the files `simulate` writes.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use spectrum_bandit_core::harness::{
    bound_constants, mean_std, run_replication, summarize, BoundConstants, CheckpointStats, PolicySpec, RegretTrace,
};
use spectrum_bandit_core::Error;

use crate::config::ExperimentConfig;
use crate::formats::write_trace;
use crate::{Result, SimError};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Checkpoint {
    pub t: usize,
    pub mean: f64,
    pub std: f64,
    /// `mean / ln t`.
    pub per_log: f64,
}

impl From<&CheckpointStats> for Checkpoint {
    fn from(s: &CheckpointStats) -> Self {
        Checkpoint {
            t: s.t,
            mean: s.mean,
            std: s.std,
            per_log: s.per_log,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Bounds {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ucb_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub greedy_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub greedy_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub colorband1_bound: Option<f64>,
}

impl From<&BoundConstants> for Bounds {
    fn from(b: &BoundConstants) -> Self {
        Bounds {
            delta_min: b.delta_min,
            delta_max: b.delta_max,
            ucb_constant: b.ucb_constant,
            greedy_threshold: b.greedy_threshold,
            greedy_constant: b.greedy_constant,
            mu_min: b.mu_min,
            eta: b.eta,
            gamma: b.gamma,
            colorband1_bound: b.colorband1_bound,
        }
    }
}

/// Pass/fail checks; `None` where a check does not apply.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Flags {
    pub all_replications_completed: bool,
    /// Hyperparameter condition under which the regret bound is stated.
    pub precondition: Option<bool>,
    /// ColorBand learning rates were clamped into their admissible range.
    pub rates_clamped: Option<bool>,
    /// Mean regret at `T` against the applicable bound.
    pub regret_bound: Option<bool>,
    /// `regret / ln t` at `T` within a factor 2 of its value at the previous
    /// checkpoint (stochastic policies, `T >= 1000`).
    pub log_plateau: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub rep: usize,
    pub kind: &'static str,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub policy: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub replications: usize,
    pub completed: usize,
    pub seed: u64,
    pub final_regret_mean: f64,
    pub final_regret_std: f64,
    pub checkpoints: Vec<Checkpoint>,
    pub bounds: Bounds,
    pub flags: Flags,
    pub failures: Vec<Failure>,
}

pub struct Report {
    /// One entry per replication, in replication order.
    pub traces: Vec<std::result::Result<RegretTrace, Error>>,
    pub summary: Summary,
}

/// Runs every replication (concurrently) and summarizes the completed ones.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let constants = bound_constants(&cfg.instance, &cfg.environment, &cfg.policy, cfg.horizon)?;
    let traces: Vec<_> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(&cfg.instance, &cfg.environment, &cfg.policy, cfg.horizon, cfg.seed, rep as u64))
        .collect();
    let done: Vec<RegretTrace> = traces.iter().filter_map(|t| t.as_ref().ok()).cloned().collect();
    let failures = traces
        .iter()
        .enumerate()
        .filter_map(|(rep, t)| t.as_ref().err().map(|e| (rep, e)))
        .map(|(rep, e)| Failure {
            rep,
            kind: if e.is_numerical() { "numerical" } else { "validation" },
            error: e.to_string(),
        })
        .collect::<Vec<_>>();
    let stats = summarize(&done, cfg.horizon);
    let finals: Vec<f64> = done.iter().map(RegretTrace::final_regret).collect();
    let (final_regret_mean, final_regret_std) = mean_std(&finals);
    let flags = flags(&cfg.policy, &constants, &stats, done.is_empty(), failures.is_empty());
    let summary = Summary {
        policy: cfg.policy_name.clone(),
        horizon: cfg.horizon,
        replications: cfg.replications,
        completed: done.len(),
        seed: cfg.seed,
        final_regret_mean,
        final_regret_std,
        checkpoints: stats.iter().map(Checkpoint::from).collect(),
        bounds: Bounds::from(&constants),
        flags,
        failures,
    };
    Ok(Report { traces, summary })
}

fn flags(spec: &PolicySpec, b: &BoundConstants, stats: &[CheckpointStats], none: bool, all_ok: bool) -> Flags {
    let mut f = Flags {
        all_replications_completed: all_ok,
        precondition: b.ucb_precondition.or(b.greedy_precondition),
        rates_clamped: b.rates_clamped,
        ..Flags::default()
    };
    let Some(last) = stats.last().filter(|_| !none) else {
        return f;
    };
    f.regret_bound = match spec {
        PolicySpec::Ucb { .. } => b.ucb_constant.map(|c| last.per_log < c),
        PolicySpec::EpsilonGreedy { .. } => b.greedy_constant.map(|c| last.per_log <= c),
        PolicySpec::ColorBand { .. } => b.colorband1_bound.map(|c| last.mean <= c),
        _ => None,
    };
    if matches!(spec, PolicySpec::Ucb { .. } | PolicySpec::EpsilonGreedy { .. }) && last.t >= 1000 && stats.len() >= 2 {
        let prev = &stats[stats.len() - 2];
        f.log_plateau = Some(last.per_log <= 2.0 * prev.per_log && prev.per_log <= 2.0 * last.per_log);
    }
    f
}

/// Writes `trace_<rep>.csv` for completed replications and `summary.json`.
pub fn write_report(report: &Report, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(SimError::io(dir))?;
    for (rep, trace) in report.traces.iter().enumerate() {
        if let Ok(trace) = trace {
            let path = dir.join(format!("trace_{rep}.csv"));
            let file = std::fs::File::create(&path).map_err(SimError::io(&path))?;
            write_trace(std::io::BufWriter::new(file), trace)?;
        }
    }
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&report.summary)?;
    std::fs::write(&path, text + "\n").map_err(SimError::io(&path))?;
    Ok(())
}

/// The error that decides the exit status of a run with failed replications.
pub fn first_failure(report: &Report) -> Option<SimError> {
    report.traces.iter().find_map(|t| t.as_ref().err().cloned().map(SimError::Core))
}
