//! Exhaustive search for tiny instances: the verification oracle.
//!
//! Deposits are fixed by the given schedule, so the financial cost is a
//! constant and the search minimizes transport cost alone. Every ATM with a
//! deposit in a period must be visited that period by a vehicle homed at
//! the ATM's assigned depot. Per period, all vehicle assignments are
//! enumerated; per (vehicle, ATM subset) the cheapest time-feasible
//! visiting order is found by depth-first permutation search with cost
//! pruning and memoized across assignments. Periods are then combined under
//! the whole-horizon distance cap. Routes are single sequences anchored at
//! the depot, so subtours cannot occur by construction.

use std::collections::HashMap;
use std::time::Instant;

use thiserror::Error;

use crate::costing::aggregate_cost;
use crate::model::{Instance, Minutes, Money};
use crate::solver::eval::SearchState;
use crate::solver::{assign_depots, SolveConfig, SolveResult, SolveStatus};
use crate::splitting::SplitSchedule;

/// Instance-size caps the exact search enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactCaps {
    pub max_atms: usize,
    pub max_vehicles: usize,
    pub max_periods: usize,
}

impl Default for ExactCaps {
    fn default() -> Self {
        ExactCaps { max_atms: 8, max_vehicles: 2, max_periods: 2 }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExactError {
    #[error("instance exceeds exact-search caps: {atms} ATMs, {vehicles} vehicles, {periods} periods (caps {caps:?})")]
    CapsExceeded { atms: usize, vehicles: usize, periods: usize, caps: ExactCaps },
}

#[derive(Debug, Clone)]
struct BestRoute {
    cost_milli: i128,
    meters: i64,
    seq: Vec<usize>,
}

struct RouteFinder<'a> {
    inst: &'a Instance,
    deposits: &'a [Vec<Money>],
    memo: HashMap<(usize, usize, u32), Option<BestRoute>>,
    nodes_explored: u64,
}

impl<'a> RouteFinder<'a> {
    /// Cheapest time-feasible visiting order for vehicle `h` over the ATM
    /// set `mask` in period `t`; `None` when capacity or windows forbid it.
    fn best_route(&mut self, h: usize, t: usize, mask: u32) -> Option<BestRoute> {
        if mask == 0 {
            return Some(BestRoute { cost_milli: 0, meters: 0, seq: Vec::new() });
        }
        if let Some(cached) = self.memo.get(&(h, t, mask)) {
            return cached.clone();
        }
        let inst = self.inst;
        let load: Money = (0..inst.num_atms())
            .filter(|a| mask & (1 << a) != 0)
            .map(|a| self.deposits[a][t])
            .sum();
        let result = if load > inst.vehicles[h].capacity {
            None
        } else {
            let home = inst.home_depot_node(h);
            let mut best: Option<BestRoute> = None;
            let mut seq = Vec::new();
            self.dfs(h, t, mask, home, inst.depot_window.0, 0, 0, 0, &mut seq, &mut best);
            best
        };
        self.memo.insert((h, t, mask), result.clone());
        result
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &mut self,
        h: usize,
        t: usize,
        remaining: u32,
        prev: usize,
        clock: Minutes,
        travel: Minutes,
        service: Minutes,
        meters: i64,
        seq: &mut Vec<usize>,
        best: &mut Option<BestRoute>,
    ) {
        self.nodes_explored += 1;
        let inst = self.inst;
        let home = inst.home_depot_node(h);
        let per_km = inst.vehicles[h].cost_per_km as i128;
        if remaining == 0 {
            let total_meters = meters + inst.distance_m(prev, home);
            let total_travel = travel + inst.travel_time_min(h, prev, home);
            if total_travel > inst.max_route_time_min {
                return;
            }
            if inst.depot_window.0 + total_travel + service > inst.depot_window.1 {
                return;
            }
            let cost_milli =
                per_km * total_meters as i128 + inst.vehicles[h].fixed_trip_cost as i128 * 1000;
            if best.as_ref().map_or(true, |b| cost_milli < b.cost_milli) {
                *best = Some(BestRoute { cost_milli, meters: total_meters, seq: seq.clone() });
            }
            return;
        }
        // prune on cost: remaining legs cannot reduce distance
        if let Some(b) = best {
            if per_km * meters as i128 >= b.cost_milli {
                return;
            }
        }
        for a in 0..inst.num_atms() {
            if remaining & (1 << a) == 0 {
                continue;
            }
            let node = inst.atm_node(a);
            let leg = inst.travel_time_min(h, prev, node);
            let arrival = clock + leg;
            let start = arrival.max(inst.atms[a].service_window.0);
            if start > inst.atms[a].service_window.1 {
                continue;
            }
            let new_travel = travel + leg;
            if new_travel > inst.max_route_time_min {
                continue;
            }
            seq.push(node);
            self.dfs(
                h,
                t,
                remaining & !(1 << a),
                node,
                start + inst.atms[a].service_time_min,
                new_travel,
                service + inst.atms[a].service_time_min,
                meters + inst.distance_m(prev, node),
                seq,
                best,
            );
            seq.pop();
        }
    }
}

#[derive(Debug, Clone)]
struct PeriodChoice {
    cost_milli: i128,
    veh_meters: Vec<i64>,
    routes: Vec<Vec<usize>>, // per vehicle, interior sequence
}

/// Provably optimal plan for the weighted objective with deposits fixed by
/// `schedule`. Errors when the instance exceeds `caps`; returns status
/// `Infeasible` when no assignment satisfies the constraint set.
pub fn solve_exact(
    inst: &Instance,
    schedule: &SplitSchedule,
    caps: ExactCaps,
    cfg: &SolveConfig,
) -> Result<SolveResult, ExactError> {
    let start = Instant::now();
    if inst.num_atms() > caps.max_atms
        || inst.num_vehicles() > caps.max_vehicles
        || inst.periods > caps.max_periods
    {
        return Err(ExactError::CapsExceeded {
            atms: inst.num_atms(),
            vehicles: inst.num_vehicles(),
            periods: inst.periods,
            caps,
        });
    }
    let deposits = schedule.deposits_matrix(inst);
    let depot_of = assign_depots(inst);
    let mut finder = RouteFinder { inst, deposits: &deposits, memo: HashMap::new(), nodes_explored: 0 };

    // enumerate per-period assignments of forced ATMs to compatible vehicles
    let mut period_choices: Vec<Vec<PeriodChoice>> = Vec::with_capacity(inst.periods);
    for t in 0..inst.periods {
        let forced: Vec<usize> = (0..inst.num_atms()).filter(|&a| deposits[a][t] > 0).collect();
        let mut choices = Vec::new();
        let nh = inst.num_vehicles();
        let mut masks = vec![0u32; nh];
        enumerate_assignments(inst, &depot_of, &forced, 0, &mut masks, &mut |masks| {
            let mut cost = 0i128;
            let mut veh_meters = vec![0i64; nh];
            let mut routes = vec![Vec::new(); nh];
            for h in 0..nh {
                match finder.best_route(h, t, masks[h]) {
                    Some(r) => {
                        cost += r.cost_milli;
                        veh_meters[h] = r.meters;
                        routes[h] = r.seq;
                    }
                    None => return,
                }
            }
            choices.push(PeriodChoice { cost_milli: cost, veh_meters, routes });
        });
        if choices.is_empty() {
            let state = SearchState::new(inst, deposits.clone(), depot_of.clone());
            let plan = state.to_plan();
            let cost = aggregate_cost(inst, &plan, cfg.weights).expect("valid weights");
            return Ok(SolveResult {
                plan,
                cost,
                status: SolveStatus::Infeasible,
                iterations: finder.nodes_explored,
                wall_time_secs: start.elapsed().as_secs_f64(),
                best_trace: Vec::new(),
            });
        }
        // keep choices sorted by cost so the cross-period scan can cut off
        choices.sort_by(|x, y| x.cost_milli.cmp(&y.cost_milli));
        period_choices.push(choices);
    }

    // combine periods under the horizon distance cap
    let nh = inst.num_vehicles();
    let mut best: Option<(i128, Vec<usize>)> = None;
    let mut picked = vec![0usize; inst.periods];
    combine_periods(
        inst,
        &period_choices,
        0,
        0,
        &mut vec![0i64; nh],
        &mut picked,
        &mut best,
    );

    let (status, routes) = match &best {
        Some((_, picks)) => {
            let routes: Vec<Vec<Vec<usize>>> = (0..nh)
                .map(|h| {
                    (0..inst.periods)
                        .map(|t| period_choices[t][picks[t]].routes[h].clone())
                        .collect()
                })
                .collect();
            (SolveStatus::Optimal, Some(routes))
        }
        None => (SolveStatus::Infeasible, None),
    };
    let iterations = finder.nodes_explored;

    let mut state = SearchState::new(inst, deposits, depot_of);
    if let Some(routes) = routes {
        let edits: Vec<(usize, usize, Vec<usize>)> = routes
            .into_iter()
            .enumerate()
            .flat_map(|(h, per)| {
                per.into_iter().enumerate().map(move |(t, seq)| (h, t, seq))
            })
            .collect();
        state.apply(crate::solver::eval::Edit { routes: edits, deposits: vec![] });
    }
    let plan = state.to_plan();
    let cost = aggregate_cost(inst, &plan, cfg.weights).expect("valid weights");
    Ok(SolveResult {
        plan,
        cost,
        status,
        iterations,
        wall_time_secs: start.elapsed().as_secs_f64(),
        best_trace: Vec::new(),
    })
}

fn enumerate_assignments(
    inst: &Instance,
    depot_of: &[usize],
    forced: &[usize],
    idx: usize,
    masks: &mut Vec<u32>,
    emit: &mut dyn FnMut(&[u32]),
) {
    if idx == forced.len() {
        emit(masks);
        return;
    }
    let a = forced[idx];
    let mut any = false;
    for h in 0..inst.num_vehicles() {
        if inst.home_depot_idx(h) != depot_of[a] {
            continue;
        }
        any = true;
        masks[h] |= 1 << a;
        enumerate_assignments(inst, depot_of, forced, idx + 1, masks, emit);
        masks[h] &= !(1 << a);
    }
    // an ATM with no compatible vehicle kills every assignment
    let _ = any;
}

fn combine_periods(
    inst: &Instance,
    period_choices: &[Vec<PeriodChoice>],
    t: usize,
    cost_so_far: i128,
    meters: &mut Vec<i64>,
    picked: &mut Vec<usize>,
    best: &mut Option<(i128, Vec<usize>)>,
) {
    if let Some((best_cost, _)) = best {
        if cost_so_far >= *best_cost {
            return;
        }
    }
    if t == period_choices.len() {
        *best = Some((cost_so_far, picked.clone()));
        return;
    }
    for (i, choice) in period_choices[t].iter().enumerate() {
        let ok = (0..inst.num_vehicles())
            .all(|h| meters[h] + choice.veh_meters[h] <= inst.max_total_distance_m);
        // remaining periods cannot reduce distance, but a cheaper later
        // combination may still fit, so only cost prunes the scan
        if !ok {
            continue;
        }
        for h in 0..inst.num_vehicles() {
            meters[h] += choice.veh_meters[h];
        }
        picked[t] = i;
        combine_periods(inst, period_choices, t + 1, cost_so_far + choice.cost_milli, meters, picked, best);
        for h in 0..inst.num_vehicles() {
            meters[h] -= choice.veh_meters[h];
        }
    }
}
