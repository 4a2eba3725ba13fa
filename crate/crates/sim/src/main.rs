use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use spectrum_bandit::config::load_config;
use spectrum_bandit::experiment::{first_failure, run_experiment, write_report};
use spectrum_bandit::formats::{read_instance, read_table_file, write_table};
use spectrum_bandit::{Result, SimError};
use spectrum_bandit_core::environment::ThetaTable;
use spectrum_bandit_core::geometry::{kl_project, ProjectionOptions};
use spectrum_bandit_core::lower_bound::estimate_lower_bound_constant;
use spectrum_bandit_core::static_opt::solve;
use spectrum_bandit_core::FeedbackMode;

#[derive(Parser)]
#[command(version, about = "Channel-allocation bandit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replications described by a JSON configuration.
    Simulate {
        config: PathBuf,
        /// Output directory; overrides the configuration's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Best static configuration for a weight table.
    Solve { instance: PathBuf, weights: PathBuf },
    /// KL projection of a nonnegative table onto the allocation polytope.
    Project {
        instance: PathBuf,
        table: PathBuf,
        #[arg(long, default_value_t = ProjectionOptions::default().tol)]
        tol: f64,
        #[arg(long, default_value_t = ProjectionOptions::default().max_iters)]
        max_iters: usize,
    },
    /// Grid estimate of the asymptotic regret constant.
    LowerBound {
        instance: PathBuf,
        theta: PathBuf,
        /// Aggregate feedback instead of per-link feedback.
        #[arg(long)]
        aggregate: bool,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = load_config(&config)?;
            let report = run_experiment(&cfg)?;
            let dir = out.unwrap_or_else(|| cfg.output.clone());
            write_report(&report, &dir)?;
            let s = &report.summary;
            eprintln!(
                "{}/{} replications, final regret {:.3} +- {:.3}, written to {}",
                s.completed,
                s.replications,
                s.final_regret_mean,
                s.final_regret_std,
                dir.display()
            );
            first_failure(&report).map_or(Ok(()), Err)
        }
        Command::Solve { instance, weights } => {
            let inst = read_instance(&instance)?;
            let w = read_table_file(&weights)?;
            let sol = solve(&inst, &w)?;
            let channels: Vec<Option<usize>> = sol
                .config
                .assignment()
                .iter()
                .map(|j| j.filter(|&j| !inst.is_artificial(j)).map(|j| j + 1))
                .collect();
            let out = json!({ "config": sol.config.label(), "channels": channels, "value": sol.value });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
        Command::Project {
            instance,
            table,
            tol,
            max_iters,
        } => {
            let inst = read_instance(&instance)?;
            let target = read_table_file(&table)?;
            let p = kl_project(&target, &inst, ProjectionOptions { tol, max_iters })?;
            write_table(std::io::stdout().lock(), p.point.table()).map_err(SimError::io("<stdout>"))?;
            println!("# iterations={} residual={:e}", p.iterations, p.residual);
            Ok(())
        }
        Command::LowerBound {
            instance,
            theta,
            aggregate,
            step,
        } => {
            let inst = read_instance(&instance)?;
            let theta = ThetaTable::new(&inst, &read_table_file(&theta)?, 1)?;
            let mode = if aggregate {
                FeedbackMode::Aggregate
            } else {
                FeedbackMode::Detailed
            };
            let lb = estimate_lower_bound_constant(&theta, &inst, step, mode)?;
            let allocation: Vec<_> = lb
                .allocation
                .iter()
                .map(|(m, x)| json!({ "config": m.label(), "rate": x }))
                .collect();
            let out = json!({
                "mode": if aggregate { "aggregate" } else { "detailed" },
                "grid_step": lb.grid_step,
                "value": lb.value,
                "per_cell": lb.per_cell,
                "constraints": lb.constraints,
                "active": lb.active,
                "allocation": allocation,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
