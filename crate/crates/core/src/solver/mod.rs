//! Plan search: exact enumeration for tiny instances, cheapest-insertion
//! construction plus penalized local search at scale, and a weighted-sum
//! sweep that recovers the efficient frontier.

mod construct;
mod eval;
mod exact;
mod improve;
mod pareto;

pub use construct::construct_plan;
pub use exact::{solve_exact, ExactCaps, ExactError};
pub use improve::improve_plan;
pub use pareto::{default_weight_ladder, pareto_sweep, ParetoPoint};

use serde::{Deserialize, Serialize};

use crate::costing::Weights;
use crate::model::{CostBreakdown, Instance, Money, Plan};
use crate::splitting::SplitPolicy;

/// Local-search neighborhoods that may be explored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborhoodSet {
    pub relocate: bool,
    pub swap: bool,
    pub two_opt: bool,
    pub period_move: bool,
    pub split_k_change: bool,
}

impl Default for NeighborhoodSet {
    fn default() -> Self {
        NeighborhoodSet {
            relocate: true,
            swap: true,
            two_opt: true,
            period_move: true,
            split_k_change: true,
        }
    }
}

impl NeighborhoodSet {
    /// Routing-only moves; deposits stay exactly as scheduled.
    pub fn routing_only() -> Self {
        NeighborhoodSet {
            relocate: true,
            swap: true,
            two_opt: true,
            period_move: false,
            split_k_change: false,
        }
    }
}

/// Search configuration. Determinism contract: identical `(Instance,
/// SolveConfig)` including the seed produce identical results; the search
/// stops on deterministic iteration and restart budgets, with `time_limit`
/// as a safety backstop that normal runs never reach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub weights: Weights,
    /// Wall-clock cap in seconds, > 0.
    pub time_limit_secs: f64,
    pub seed: u64,
    pub neighborhoods: NeighborhoodSet,
    /// VND charged per unit of violation magnitude. `None` derives
    /// 10x the largest single-arc cost of the instance.
    pub penalty_per_unit: Option<f64>,
    /// Enables the split-count neighborhood when present.
    pub split_policy: Option<SplitPolicy>,
    /// Random restarts after stagnation.
    pub max_restarts: u32,
    /// Cap on candidate evaluations; `None` derives one from instance size.
    pub iteration_budget: Option<u64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            weights: Weights::default(),
            time_limit_secs: 60.0,
            seed: 0,
            neighborhoods: NeighborhoodSet::default(),
            penalty_per_unit: None,
            split_policy: None,
            max_restarts: 8,
            iteration_budget: None,
        }
    }
}

impl SolveConfig {
    pub fn with_seed(seed: u64) -> Self {
        SolveConfig { seed, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Proven best for the weighted objective (exact search only).
    Optimal,
    /// Passes every constraint; quality not proven.
    Feasible,
    Infeasible,
    /// Wall-clock limit hit before any feasible plan was found.
    Timeout,
}

/// Outcome of a solve: the plan, its cost under the configured weights, and
/// bookkeeping. `best_trace` records `(evaluations, weighted cost)` each
/// time the incumbent feasible plan improved.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub plan: Plan,
    pub cost: CostBreakdown,
    pub status: SolveStatus,
    pub iterations: u64,
    pub wall_time_secs: f64,
    pub best_trace: Vec<(u64, f64)>,
}

/// Maps every ATM to its nearest depot by distance, ties broken toward the
/// lowest depot index. The assignment is fixed across periods.
pub fn assign_depots(inst: &Instance) -> Vec<usize> {
    assert!(inst.num_depots() >= 1, "at least one depot required");
    (0..inst.num_atms())
        .map(|a| {
            let node = inst.atm_node(a);
            (0..inst.num_depots())
                .min_by_key(|&d| (inst.distance_m(d, node), d))
                .unwrap()
        })
        .collect()
}

/// Largest single-arc transport cost in VND, the base unit for the default
/// violation penalty.
pub fn max_arc_cost(inst: &Instance) -> Money {
    let v = inst.num_nodes();
    let mut max_milli: i128 = 0;
    for veh in &inst.vehicles {
        for i in 0..v {
            for j in 0..v {
                let milli = veh.cost_per_km as i128 * inst.distance_m(i, j) as i128;
                max_milli = max_milli.max(milli);
            }
        }
    }
    crate::costing::milli_to_vnd(max_milli)
}

pub(crate) fn default_penalty(inst: &Instance) -> f64 {
    (10 * max_arc_cost(inst).max(1)) as f64
}
