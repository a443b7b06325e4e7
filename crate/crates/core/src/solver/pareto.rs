//! Weighted-sum sweep over the two objectives, filtered to the
//! non-dominated set.

use crate::costing::Weights;
use crate::model::Instance;
use crate::solver::{construct_plan, improve_plan, SolveConfig, SolveResult, SolveStatus};
use crate::splitting::{build_split_schedule, SplitPolicy};

#[derive(Debug, Clone)]
pub struct ParetoPoint {
    pub weights: Weights,
    pub result: SolveResult,
}

/// Runs the full pipeline (schedule, construct, improve) once per weight
/// pair and keeps the mutually non-dominated `(transport, financial)`
/// outcomes, sorted by transport cost ascending. Infeasible runs are
/// dropped; duplicate cost pairs keep their first weighting.
pub fn pareto_sweep(
    inst: &Instance,
    policy: &SplitPolicy,
    weight_pairs: &[Weights],
    base: &SolveConfig,
) -> Vec<ParetoPoint> {
    assert!(weight_pairs.len() >= 2, "a sweep needs at least two weight pairs");
    let schedule = build_split_schedule(inst, policy);
    let mut points: Vec<ParetoPoint> = Vec::new();
    for &weights in weight_pairs {
        let cfg = SolveConfig { weights, split_policy: Some(*policy), ..base.clone() };
        let start = construct_plan(inst, &schedule, cfg.seed);
        let result = improve_plan(inst, &start, &cfg);
        if matches!(result.status, SolveStatus::Feasible | SolveStatus::Optimal) {
            points.push(ParetoPoint { weights, result });
        }
    }
    let mut kept: Vec<ParetoPoint> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let f1 = p.result.cost.transport_cost_vnd;
        let f2 = p.result.cost.financial_cost_vnd;
        let dominated_or_dup = points.iter().enumerate().any(|(k, q)| {
            let (g1, g2) = (q.result.cost.transport_cost_vnd, q.result.cost.financial_cost_vnd);
            let dominates = g1 <= f1 && g2 <= f2 && (g1 < f1 || g2 < f2);
            let earlier_duplicate = k < i && g1 == f1 && g2 == f2;
            dominates || earlier_duplicate
        });
        if !dominated_or_dup {
            kept.push(p.clone());
        }
    }
    kept.sort_by_key(|p| (p.result.cost.transport_cost_vnd, p.result.cost.financial_cost_vnd));
    kept
}

/// Standard five-point weight ladder from transport-only to financial-only.
pub fn default_weight_ladder() -> Vec<Weights> {
    [(1.0, 0.0), (0.75, 0.25), (0.5, 0.5), (0.25, 0.75), (0.0, 1.0)]
        .into_iter()
        .map(|(t, f)| Weights { transport: t, financial: f })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atm, Depot, Vehicle};

    fn instance() -> Instance {
        let positions: [(f64, f64); 4] = [(0.0, 0.0), (2.0, 1.0), (4.0, 0.5), (1.0, 3.0)];
        let v = positions.len();
        let mut dist = vec![0i64; v * v];
        for i in 0..v {
            for j in 0..v {
                let dx = positions[i].0 - positions[j].0;
                let dy = positions[i].1 - positions[j].1;
                dist[i * v + j] = crate::model::km_to_meters((dx * dx + dy * dy).sqrt());
            }
        }
        let atms = (0..3)
            .map(|i| Atm {
                id: format!("{}", i + 1),
                initial_balance: 100,
                service_window: (0, 1440),
                service_time_min: 10,
                forecast_withdrawals: vec![100, 100, 100],
                total_demand: 300,
                coords: None,
            })
            .collect();
        Instance::assemble(
            vec![Depot { id: "01".into(), coords: None }],
            atms,
            vec![Vehicle {
                id: "1".into(),
                home_depot: "01".into(),
                capacity: 1000,
                cost_per_km: 10_000,
                speed_kmh: 60.0,
                fixed_trip_cost: 0,
            }],
            3,
            dist,
            None,
            0.05,
            (480, 1050),
            480,
            500_000,
            None,
        )
        .unwrap()
    }

    #[test]
    fn sweep_is_non_dominated_and_sorted() {
        let inst = instance();
        let policy = SplitPolicy::split(100, 200).unwrap();
        let points = pareto_sweep(&inst, &policy, &default_weight_ladder(), &SolveConfig::with_seed(2));
        assert!(!points.is_empty());
        for (i, p) in points.iter().enumerate() {
            for (k, q) in points.iter().enumerate() {
                if i == k {
                    continue;
                }
                let dominated = q.result.cost.transport_cost_vnd <= p.result.cost.transport_cost_vnd
                    && q.result.cost.financial_cost_vnd <= p.result.cost.financial_cost_vnd
                    && (q.result.cost.transport_cost_vnd < p.result.cost.transport_cost_vnd
                        || q.result.cost.financial_cost_vnd < p.result.cost.financial_cost_vnd);
                assert!(!dominated, "point {i} dominated by {k}");
            }
        }
        for w in points.windows(2) {
            assert!(w[0].result.cost.transport_cost_vnd <= w[1].result.cost.transport_cost_vnd);
            assert!(w[0].result.cost.financial_cost_vnd >= w[1].result.cost.financial_cost_vnd);
        }
    }

    #[test]
    fn endpoints_minimize_their_objective() {
        let inst = instance();
        let policy = SplitPolicy::split(100, 200).unwrap();
        let points = pareto_sweep(&inst, &policy, &default_weight_ladder(), &SolveConfig::with_seed(5));
        let min_f1 = points.iter().map(|p| p.result.cost.transport_cost_vnd).min().unwrap();
        let min_f2 = points.iter().map(|p| p.result.cost.financial_cost_vnd).min().unwrap();
        assert_eq!(points.first().unwrap().result.cost.transport_cost_vnd, min_f1);
        assert_eq!(points.last().unwrap().result.cost.financial_cost_vnd, min_f2);
    }
}
