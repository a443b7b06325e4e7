//! Command-line pipeline: generate instances, build split schedules, solve,
//! validate plans and run the split-versus-no-split comparison.
//!
//! Exit codes: 0 success, 1 infeasible result or failed validation,
//! 2 input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cashroute::costing::Weights;
use cashroute::feasibility::check_plan;
use cashroute::model::{parse_instance, parse_plan, serialize_plan, Money};
use cashroute::report::{
    compare_policies, parse_report, render_report, ReportFormat,
};
use cashroute::scenario::{generate_scenario, ingest_distance_matrix, ScenarioParams};
use cashroute::solver::{construct_plan, improve_plan, SolveConfig, SolveStatus};
use cashroute::splitting::{build_split_schedule, SplitPolicy};

#[derive(Parser)]
#[command(name = "cashroute", version, about = "ATM cash replenishment planning")]
struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Solver wall-clock cap in seconds.
    #[arg(long, global = true, default_value_t = 60.0)]
    time_limit: f64,
    /// Directory for output files that are not given explicit paths.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Split,
    NoSplit,
}

#[derive(Args)]
struct PolicyOpts {
    /// Deposit policy.
    #[arg(long, value_enum)]
    policy: PolicyArg,
    /// Smallest admissible deposit, VND (split mode).
    #[arg(long, default_value_t = 1_000_000_000)]
    lower_bound: Money,
    /// Largest admissible deposit, VND (split mode).
    #[arg(long, default_value_t = 1_400_000_000)]
    upper_bound: Money,
}

impl PolicyOpts {
    fn to_policy(&self) -> Result<SplitPolicy> {
        Ok(match self.policy {
            PolicyArg::NoSplit => SplitPolicy::no_split(),
            PolicyArg::Split => SplitPolicy::split(self.lower_bound, self.upper_bound)?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated instance from a parameter file.
    Generate {
        /// Scenario parameter JSON.
        #[arg(long)]
        params: PathBuf,
        /// Output instance path.
        #[arg(long)]
        output: PathBuf,
        /// Replace synthetic distances with a CSV matrix (km).
        #[arg(long)]
        distance_file: Option<PathBuf>,
    },
    /// Build and print the deposit split schedule for an instance.
    Split {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        policy: PolicyOpts,
        /// Write the schedule JSON here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve an instance under one policy and write the plan.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        policy: PolicyOpts,
        /// Objective weights as `w1,w2`.
        #[arg(long, default_value = "1,1", value_parser = parse_weights)]
        weights: Weights,
        /// Output plan path.
        #[arg(long)]
        output: PathBuf,
    },
    /// Check a plan against the full constraint set.
    Validate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Run both policies and report the comparison.
    Compare {
        #[arg(long)]
        instance: PathBuf,
        /// Smallest admissible deposit, VND.
        #[arg(long, default_value_t = 1_000_000_000)]
        lower_bound: Money,
        /// Largest admissible deposit, VND.
        #[arg(long, default_value_t = 1_400_000_000)]
        upper_bound: Money,
        #[arg(long, default_value = "1,1", value_parser = parse_weights)]
        weights: Weights,
    },
    /// Re-render a structured comparison report.
    Report {
        /// Report JSON produced by `compare`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Table)]
        format: FormatArg,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Table,
    Structured,
}

fn parse_weights(s: &str) -> Result<Weights, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected two comma-separated weights, e.g. 1,1".into());
    }
    let w1: f64 = parts[0].trim().parse().map_err(|e| format!("bad weight: {e}"))?;
    let w2: f64 = parts[1].trim().parse().map_err(|e| format!("bad weight: {e}"))?;
    Weights::new(w1, w2).map_err(|e| e.to_string())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Runs a command; `Ok(true)` means success, `Ok(false)` means an
/// infeasible outcome (exit 1), `Err` is an input error (exit 2).
fn run(cli: Cli) -> Result<bool> {
    let base_cfg = SolveConfig {
        seed: cli.seed,
        time_limit_secs: cli.time_limit,
        ..SolveConfig::default()
    };
    match cli.command {
        Command::Generate { params, output, distance_file } => {
            let params: ScenarioParams = serde_json::from_str(&read(&params)?)
                .context("parsing scenario parameters")?;
            let params = ScenarioParams { seed: cli.seed, ..params };
            let mut inst = generate_scenario(&params)?;
            if let Some(matrix) = distance_file {
                ingest_distance_matrix(&mut inst, &read(&matrix)?)?;
            }
            write(&output, &cashroute::model::serialize_instance(&inst))?;
            println!(
                "generated instance with {} depots, {} ATMs, {} vehicles, {} periods -> {}",
                inst.num_depots(),
                inst.num_atms(),
                inst.num_vehicles(),
                inst.periods,
                output.display()
            );
            Ok(true)
        }
        Command::Split { instance, policy, output } => {
            let inst = parse_instance(&read(&instance)?)?;
            let schedule = build_split_schedule(&inst, &policy.to_policy()?);
            for warning in schedule.fallback_warnings(&inst) {
                eprintln!("warning: {warning}");
            }
            let text = serde_json::to_string_pretty(&schedule)?;
            match output {
                Some(path) => write(&path, &text)?,
                None => println!("{text}"),
            }
            Ok(true)
        }
        Command::Solve { instance, policy, weights, output } => {
            let inst = parse_instance(&read(&instance)?)?;
            let policy = policy.to_policy()?;
            let schedule = build_split_schedule(&inst, &policy);
            let start = construct_plan(&inst, &schedule, cli.seed);
            let cfg = SolveConfig { weights, split_policy: Some(policy), ..base_cfg };
            let result = improve_plan(&inst, &start, &cfg);
            write(&output, &serialize_plan(&inst, &result.plan))?;
            println!(
                "status: {}",
                serde_json::to_value(result.status)?.as_str().unwrap_or("unknown")
            );
            println!("{}", serde_json::to_string_pretty(&result.cost)?);
            Ok(matches!(result.status, SolveStatus::Feasible | SolveStatus::Optimal))
        }
        Command::Validate { instance, plan } => {
            let inst = parse_instance(&read(&instance)?)?;
            let plan = parse_plan(&inst, &read(&plan)?)?;
            let violations = check_plan(&inst, &plan);
            for v in &violations {
                println!("{v}");
            }
            if violations.is_empty() {
                println!("plan is feasible");
            }
            Ok(violations.is_empty())
        }
        Command::Compare { instance, lower_bound, upper_bound, weights } => {
            let inst = parse_instance(&read(&instance)?)?;
            let cfg = SolveConfig { weights, ..base_cfg };
            let outcome = compare_policies(&inst, &cfg, (lower_bound, upper_bound))?;
            let dir = &cli.output_dir;
            write(&dir.join("plan_no_split.json"), &serialize_plan(&inst, &outcome.no_split_plan))?;
            write(&dir.join("plan_split.json"), &serialize_plan(&inst, &outcome.split_plan))?;
            write(
                &dir.join("report.json"),
                &render_report(&outcome.report, ReportFormat::Structured),
            )?;
            println!("{}", render_report(&outcome.report, ReportFormat::Table));
            Ok(!outcome.report.incomplete)
        }
        Command::Report { input, format } => {
            let report = parse_report(&read(&input)?)?;
            let format = match format {
                FormatArg::Table => ReportFormat::Table,
                FormatArg::Structured => ReportFormat::Structured,
            };
            println!("{}", render_report(&report, format));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
