//! The split-versus-no-split comparison experiment and its report formats.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instance, Money, Plan, SCHEMA_VERSION};
use crate::solver::{construct_plan, improve_plan, SolveConfig, SolveStatus};
use crate::splitting::{build_split_schedule, SplitPolicy};

/// Outcome of one policy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcome {
    pub status: SolveStatus,
    pub trips: u32,
    pub total_km: f64,
    pub transport_cost_vnd: Money,
    pub financial_cost_vnd: Money,
    pub total_cost_vnd: Money,
}

/// Side-by-side comparison of the two deposit policies on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub seed: u64,
    pub weights: (f64, f64),
    pub no_split: PolicyOutcome,
    pub split: PolicyOutcome,
    /// `100 * (total_no_split - total_split) / total_no_split`; `None` when
    /// either run failed.
    pub improvement_percent: Option<f64>,
    pub incomplete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failing_policy: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub report: ComparisonReport,
    pub no_split_plan: Plan,
    pub split_plan: Plan,
}

/// Runs the full pipeline under both policies with identical seed and
/// budgets. A single deposit per ATM, placed just-in-time, versus deposits
/// split into bounded parts by forecast.
pub fn compare_policies(
    inst: &Instance,
    cfg: &SolveConfig,
    deposit_bounds: (Money, Money),
) -> Result<CompareOutcome, crate::splitting::SplitError> {
    let split_policy = SplitPolicy::split(deposit_bounds.0, deposit_bounds.1)?;
    let run = |policy: SplitPolicy| {
        let schedule = build_split_schedule(inst, &policy);
        let start = construct_plan(inst, &schedule, cfg.seed);
        let run_cfg = SolveConfig { split_policy: Some(policy), weights: cfg.weights, ..cfg.clone() };
        let result = improve_plan(inst, &start, &run_cfg);
        let outcome = PolicyOutcome {
            status: result.status,
            trips: result.cost.trips,
            total_km: result.cost.total_km,
            transport_cost_vnd: result.cost.transport_cost_vnd,
            financial_cost_vnd: result.cost.financial_cost_vnd,
            total_cost_vnd: result.cost.aggregate_cost_vnd,
        };
        (outcome, result.plan)
    };
    let (no_split, no_split_plan) = run(SplitPolicy::no_split());
    let (split, split_plan) = run(split_policy);

    let ok = |s: SolveStatus| matches!(s, SolveStatus::Feasible | SolveStatus::Optimal);
    let incomplete = !ok(no_split.status) || !ok(split.status);
    let failing_policy = match (ok(no_split.status), ok(split.status)) {
        (false, false) => Some("no_split, split".to_string()),
        (false, true) => Some("no_split".to_string()),
        (true, false) => Some("split".to_string()),
        (true, true) => None,
    };
    let improvement_percent = if incomplete {
        None
    } else {
        Some(
            100.0 * (no_split.total_cost_vnd - split.total_cost_vnd) as f64
                / no_split.total_cost_vnd as f64,
        )
    };
    Ok(CompareOutcome {
        report: ComparisonReport {
            schema_version: SCHEMA_VERSION,
            seed: cfg.seed,
            weights: (cfg.weights.transport, cfg.weights.financial),
            no_split,
            split,
            improvement_percent,
            incomplete,
            failing_policy,
        },
        no_split_plan,
        split_plan,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Structured,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("invalid report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema_version {0}, expected {SCHEMA_VERSION}")]
    SchemaVersion(u32),
}

fn group_thousands(n: Money) -> String {
    let digits = n.abs().to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    if n < 0 {
        format!("-{out}")
    } else {
        out
    }
}

fn cell(outcome: &PolicyOutcome, value: String) -> String {
    if matches!(outcome.status, SolveStatus::Feasible | SolveStatus::Optimal) {
        value
    } else {
        "infeasible".to_string()
    }
}

/// Renders the report. `Table` mirrors the experiment layout (one metric
/// per row, one policy per column); `Structured` is machine-readable JSON
/// that round-trips through [`parse_report`].
pub fn render_report(report: &ComparisonReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Structured => {
            serde_json::to_string_pretty(report).expect("report serialization cannot fail")
        }
        ReportFormat::Table => {
            let ns = &report.no_split;
            let sp = &report.split;
            let rows = [
                ("metric".to_string(), "no_split".to_string(), "split".to_string()),
                (
                    "trips".to_string(),
                    cell(ns, ns.trips.to_string()),
                    cell(sp, sp.trips.to_string()),
                ),
                (
                    "total_km".to_string(),
                    cell(ns, format!("{:.1}", ns.total_km)),
                    cell(sp, format!("{:.1}", sp.total_km)),
                ),
                (
                    "transport_cost_vnd".to_string(),
                    cell(ns, group_thousands(ns.transport_cost_vnd)),
                    cell(sp, group_thousands(sp.transport_cost_vnd)),
                ),
                (
                    "financial_cost_vnd".to_string(),
                    cell(ns, group_thousands(ns.financial_cost_vnd)),
                    cell(sp, group_thousands(sp.financial_cost_vnd)),
                ),
                (
                    "total_cost_vnd".to_string(),
                    cell(ns, group_thousands(ns.total_cost_vnd)),
                    cell(sp, group_thousands(sp.total_cost_vnd)),
                ),
                (
                    "improvement_percent".to_string(),
                    report
                        .improvement_percent
                        .map(|p| format!("{p:.1}"))
                        .unwrap_or_else(|| "incomplete".to_string()),
                    String::new(),
                ),
            ];
            let w0 = rows.iter().map(|r| r.0.len()).max().unwrap();
            let w1 = rows.iter().map(|r| r.1.len()).max().unwrap();
            rows.iter()
                .map(|(a, b, c)| format!("{a:<w0$}  {b:>w1$}  {c}").trim_end().to_string())
                .collect::<Vec<_>>()
                .join("\n")
        }
    }
}

pub fn parse_report(text: &str) -> Result<ComparisonReport, ReportError> {
    let report: ComparisonReport = serde_json::from_str(text)?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(ReportError::SchemaVersion(report.schema_version));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, ScenarioParams};

    fn sample_report() -> ComparisonReport {
        ComparisonReport {
            schema_version: SCHEMA_VERSION,
            seed: 42,
            weights: (1.0, 1.0),
            no_split: PolicyOutcome {
                status: SolveStatus::Feasible,
                trips: 5,
                total_km: 326.8,
                transport_cost_vnd: 5_707_054,
                financial_cost_vnd: 36_317_446,
                total_cost_vnd: 42_024_500,
            },
            split: PolicyOutcome {
                status: SolveStatus::Feasible,
                trips: 8,
                total_km: 621.9,
                transport_cost_vnd: 16_181_443,
                financial_cost_vnd: 14_748_057,
                total_cost_vnd: 30_929_500,
            },
            improvement_percent: Some(26.400790),
            incomplete: false,
            failing_policy: None,
        }
    }

    #[test]
    fn totals_satisfy_identity() {
        let r = sample_report();
        assert_eq!(
            r.no_split.total_cost_vnd,
            r.no_split.transport_cost_vnd + r.no_split.financial_cost_vnd
        );
        assert_eq!(
            r.split.total_cost_vnd,
            r.split.transport_cost_vnd + r.split.financial_cost_vnd
        );
    }

    #[test]
    fn table_has_seven_rows() {
        let text = render_report(&sample_report(), ReportFormat::Table);
        assert_eq!(text.lines().count(), 7, "{text}");
        assert!(text.contains("5,707,054"));
        assert!(text.contains("26.4"));
    }

    #[test]
    fn structured_round_trips() {
        let report = sample_report();
        let text = render_report(&report, ReportFormat::Structured);
        let again = parse_report(&text).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn incomplete_report_marks_column() {
        let mut report = sample_report();
        report.split.status = SolveStatus::Infeasible;
        report.improvement_percent = None;
        report.incomplete = true;
        report.failing_policy = Some("split".into());
        let text = render_report(&report, ReportFormat::Table);
        assert!(text.contains("infeasible"));
        assert!(text.contains("incomplete"));
    }

    #[test]
    fn single_period_policies_coincide() {
        let mut params = ScenarioParams::table_shape(4, 11);
        params.periods = 1;
        params.total_demand_range = (2_500_000_000, 3_500_000_000);
        let inst = generate_scenario(&params).unwrap();
        let cfg = SolveConfig::with_seed(11);
        let outcome =
            compare_policies(&inst, &cfg, (1_000_000_000, 1_400_000_000)).unwrap();
        assert!(!outcome.report.incomplete);
        // with one period every deposit lands on day 1 under either policy
        assert_eq!(outcome.report.improvement_percent, Some(0.0));
        assert_eq!(
            outcome.report.no_split.total_cost_vnd,
            outcome.report.split.total_cost_vnd
        );
    }

    #[test]
    fn compare_is_reproducible() {
        let inst = generate_scenario(&ScenarioParams::table_shape(6, 3)).unwrap();
        let cfg = SolveConfig::with_seed(3);
        let a = compare_policies(&inst, &cfg, (1_000_000_000, 1_400_000_000)).unwrap();
        let b = compare_policies(&inst, &cfg, (1_000_000_000, 1_400_000_000)).unwrap();
        assert_eq!(
            render_report(&a.report, ReportFormat::Structured),
            render_report(&b.report, ReportFormat::Structured)
        );
    }
}
