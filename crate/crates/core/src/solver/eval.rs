//! Shared working state for construction and local search.
//!
//! Routes are kept as interior ATM sequences per (vehicle, period); the
//! depot endpoints are implied by the vehicle. All objective bookkeeping is
//! integer (milli-VND arc costs, minute and VND excesses), so candidate
//! evaluation is exact and order-independent. The penalized objective is
//!
//! `w1*f1 + w2*f2 + penalty * (sum of violation magnitudes)`
//!
//! where the magnitudes cover route lateness, capacity excess, travel-time
//! excess, depot-window excess, horizon-distance excess and inventory
//! shortfall — exactly the families a structurally sound plan can still
//! breach.

use crate::costing::Weights;
use crate::feasibility::propagate_times;
use crate::model::{Instance, Minutes, Money, Plan};

/// Cached evaluation of one (vehicle, period) route.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct RouteTerms {
    pub cost_milli: i128,
    pub meters: i64,
    /// Minutes of service-window lateness summed over stops.
    pub lateness: i64,
    /// VND above vehicle capacity.
    pub cap_excess: i64,
    /// Minutes of travel above the per-period cap.
    pub travel_excess: i64,
    /// Minutes past the depot closing for the earliest departure.
    pub return_excess: i64,
}

impl RouteTerms {
    fn penalty_units(&self) -> i128 {
        self.lateness as i128
            + self.cap_excess as i128
            + self.travel_excess as i128
            + self.return_excess as i128
    }

    pub fn feasible(&self) -> bool {
        self.penalty_units() == 0
    }
}

/// Evaluates an interior sequence for vehicle `h` in period `t` with the
/// given deposit lookup. Departure is pinned to the depot opening; service
/// starts as early as the window allows.
pub(crate) fn eval_route(
    inst: &Instance,
    h: usize,
    interior: &[usize],
    deposit: &dyn Fn(usize) -> Money,
) -> RouteTerms {
    if interior.is_empty() {
        return RouteTerms::default();
    }
    let per_km = inst.vehicles[h].cost_per_km as i128;
    let home = inst.home_depot_node(h);
    let mut meters = 0i64;
    let mut travel: Minutes = 0;
    let mut service: Minutes = 0;
    let mut lateness: Minutes = 0;
    let mut load: Money = 0;
    let mut clock = inst.depot_window.0;
    let mut prev = home;
    for &node in interior {
        let a = inst.atm_of_node(node).expect("interior nodes are ATMs");
        meters += inst.distance_m(prev, node);
        let leg = inst.travel_time_min(h, prev, node);
        travel += leg;
        let arrival = clock + leg;
        let start = arrival.max(inst.atms[a].service_window.0);
        lateness += (start - inst.atms[a].service_window.1).max(0);
        clock = start + inst.atms[a].service_time_min;
        service += inst.atms[a].service_time_min;
        load += deposit(a);
        prev = node;
    }
    meters += inst.distance_m(prev, home);
    travel += inst.travel_time_min(h, prev, home);
    let cost_milli =
        per_km * meters as i128 + inst.vehicles[h].fixed_trip_cost as i128 * 1000;
    RouteTerms {
        cost_milli,
        meters,
        lateness,
        cap_excess: (load - inst.vehicles[h].capacity).max(0),
        travel_excess: (travel - inst.max_route_time_min).max(0),
        return_excess: (inst.depot_window.0 + travel + service - inst.depot_window.1).max(0),
    }
}

/// Balance bookkeeping for one ATM: weighted flow sum (the financial-cost
/// integrand) and total inventory shortfall.
pub(crate) fn atm_balance_terms(inst: &Instance, a: usize, deposits: &[Money]) -> (i128, i64) {
    let atm = &inst.atms[a];
    let mut balance = atm.initial_balance;
    let mut weighted = inst.periods as i128 * atm.initial_balance as i128;
    let mut deficit = 0i64;
    for t in 0..inst.periods {
        let flow = deposits[t] - atm.forecast_withdrawals[t];
        weighted += (inst.periods - t) as i128 * flow as i128;
        balance += flow;
        deficit += (-balance).max(0);
    }
    (weighted, deficit)
}

/// A candidate edit: replacement interior sequences and deposit rows.
#[derive(Debug, Clone, Default)]
pub(crate) struct Edit {
    pub routes: Vec<(usize, usize, Vec<usize>)>,
    pub deposits: Vec<(usize, Vec<Money>)>,
}

#[derive(Debug, Clone)]
pub(crate) struct SearchState<'a> {
    pub inst: &'a Instance,
    /// Fixed nearest-depot assignment restricting which vehicles may serve
    /// which ATMs.
    pub depot_of_atm: Vec<usize>,
    pub routes: Vec<Vec<Vec<usize>>>,
    pub deposits: Vec<Vec<Money>>,
    route_terms: Vec<Vec<RouteTerms>>,
    veh_meters: Vec<i64>,
    atm_weighted: Vec<i128>,
    atm_deficit: Vec<i64>,
    /// Which vehicle visits each (atm, period), if any.
    pub visited_by: Vec<Vec<Option<usize>>>,
}

impl<'a> SearchState<'a> {
    pub fn new(inst: &'a Instance, deposits: Vec<Vec<Money>>, depot_of_atm: Vec<usize>) -> Self {
        let routes = vec![vec![Vec::new(); inst.periods]; inst.num_vehicles()];
        let mut state = SearchState {
            inst,
            depot_of_atm,
            routes,
            deposits,
            route_terms: vec![vec![RouteTerms::default(); inst.periods]; inst.num_vehicles()],
            veh_meters: vec![0; inst.num_vehicles()],
            atm_weighted: vec![0; inst.num_atms()],
            atm_deficit: vec![0; inst.num_atms()],
            visited_by: vec![vec![None; inst.periods]; inst.num_atms()],
        };
        state.rebuild();
        state
    }

    pub fn from_plan(inst: &'a Instance, plan: &Plan, depot_of_atm: Vec<usize>) -> Self {
        let mut state = SearchState::new(inst, plan.deposits.clone(), depot_of_atm);
        for h in 0..inst.num_vehicles() {
            for t in 0..inst.periods {
                state.routes[h][t] = plan.interior(h, t).to_vec();
            }
        }
        state.rebuild();
        state
    }

    fn rebuild(&mut self) {
        let inst = self.inst;
        for v in self.visited_by.iter_mut() {
            v.iter_mut().for_each(|e| *e = None);
        }
        for h in 0..inst.num_vehicles() {
            self.veh_meters[h] = 0;
            for t in 0..inst.periods {
                let deposits = &self.deposits;
                let terms = eval_route(inst, h, &self.routes[h][t], &|a| deposits[a][t]);
                self.veh_meters[h] += terms.meters;
                self.route_terms[h][t] = terms;
                for &node in &self.routes[h][t] {
                    if let Some(a) = inst.atm_of_node(node) {
                        self.visited_by[a][t] = Some(h);
                    }
                }
            }
        }
        for a in 0..inst.num_atms() {
            let (weighted, deficit) = atm_balance_terms(inst, a, &self.deposits[a]);
            self.atm_weighted[a] = weighted;
            self.atm_deficit[a] = deficit;
        }
    }

    pub fn f1_milli(&self) -> i128 {
        self.route_terms.iter().flatten().map(|t| t.cost_milli).sum()
    }

    pub fn f2_weighted(&self) -> i128 {
        self.atm_weighted.iter().sum()
    }

    /// Total violation magnitude in natural units.
    pub fn penalty_units(&self) -> f64 {
        let route: i128 = self.route_terms.iter().flatten().map(|t| t.penalty_units()).sum();
        let deficit: i128 = self.atm_deficit.iter().map(|&d| d as i128).sum();
        let km_excess: f64 = self
            .veh_meters
            .iter()
            .map(|&m| (m - self.inst.max_total_distance_m).max(0) as f64 / 1000.0)
            .sum();
        route as f64 + deficit as f64 + km_excess
    }

    pub fn is_clean(&self) -> bool {
        self.penalty_units() == 0.0
    }

    /// Unpenalized weighted cost.
    pub fn weighted_cost(&self, weights: Weights) -> f64 {
        let f1 = self.f1_milli() as f64 / 1000.0;
        let f2 = self.inst.interest_rate_annual / 365.0 * self.f2_weighted() as f64;
        weights.transport * f1 + weights.financial * f2
    }

    pub fn objective(&self, weights: Weights, penalty: f64) -> f64 {
        self.weighted_cost(weights) + penalty * self.penalty_units()
    }

    /// Objective the state would have after applying `edit`, without
    /// mutating anything.
    pub fn candidate_objective(&self, edit: &Edit, weights: Weights, penalty: f64) -> f64 {
        let inst = self.inst;
        let dep = |a: usize, t: usize| -> Money {
            for (aa, row) in &edit.deposits {
                if *aa == a {
                    return row[t];
                }
            }
            self.deposits[a][t]
        };

        let mut f1 = self.f1_milli();
        let mut route_pen: i128 = self
            .route_terms
            .iter()
            .flatten()
            .map(|t| t.penalty_units())
            .sum();
        let mut veh_meters = self.veh_meters.clone();

        // routes whose terms must be refreshed: every edited route, plus
        // every route carrying an ATM whose deposits change (load shifts)
        let mut touched: Vec<(usize, usize)> = edit.routes.iter().map(|&(h, t, _)| (h, t)).collect();
        for (a, _) in &edit.deposits {
            for t in 0..inst.periods {
                if let Some(h) = self.visited_by[*a][t] {
                    if !touched.contains(&(h, t)) {
                        touched.push((h, t));
                    }
                }
            }
        }
        for &(h, t) in &touched {
            let new_seq: &[usize] = edit
                .routes
                .iter()
                .find(|&&(eh, et, _)| eh == h && et == t)
                .map(|(_, _, seq)| seq.as_slice())
                .unwrap_or(&self.routes[h][t]);
            let old = &self.route_terms[h][t];
            let new = eval_route(inst, h, new_seq, &|a| dep(a, t));
            f1 += new.cost_milli - old.cost_milli;
            route_pen += new.penalty_units() - old.penalty_units();
            veh_meters[h] += new.meters - old.meters;
        }

        let mut f2 = self.f2_weighted();
        let mut deficit: i128 = self.atm_deficit.iter().map(|&d| d as i128).sum();
        for (a, row) in &edit.deposits {
            let (w, d) = atm_balance_terms(inst, *a, row);
            f2 += w - self.atm_weighted[*a];
            deficit += d as i128 - self.atm_deficit[*a] as i128;
        }

        let km_excess: f64 = veh_meters
            .iter()
            .map(|&m| (m - inst.max_total_distance_m).max(0) as f64 / 1000.0)
            .sum();
        let pen_units = route_pen as f64 + deficit as f64 + km_excess;
        let f2_cost = inst.interest_rate_annual / 365.0 * f2 as f64;
        weights.transport * (f1 as f64 / 1000.0) + weights.financial * f2_cost + penalty * pen_units
    }

    pub fn apply(&mut self, edit: Edit) {
        let inst = self.inst;
        for (h, t, seq) in edit.routes {
            for &node in &self.routes[h][t] {
                if let Some(a) = inst.atm_of_node(node) {
                    if self.visited_by[a][t] == Some(h) {
                        self.visited_by[a][t] = None;
                    }
                }
            }
            self.routes[h][t] = seq;
            for &node in &self.routes[h][t] {
                if let Some(a) = inst.atm_of_node(node) {
                    self.visited_by[a][t] = Some(h);
                }
            }
        }
        for (a, row) in edit.deposits {
            self.deposits[a] = row;
        }
        // refresh caches wholesale: edits are rare relative to evaluations
        self.rebuild();
    }

    /// True when the route for `(h, t)` with the current deposits meets
    /// every per-route constraint and the vehicle's horizon distance cap.
    pub fn route_feasible_with(&self, h: usize, t: usize, seq: &[usize]) -> bool {
        let deposits = &self.deposits;
        let terms = eval_route(self.inst, h, seq, &|a| deposits[a][t]);
        if !terms.feasible() {
            return false;
        }
        let new_meters = self.veh_meters[h] - self.route_terms[h][t].meters + terms.meters;
        new_meters <= self.inst.max_total_distance_m
    }

    /// Pure arc-cost change of inserting `node` at `pos` in `(h, t)`,
    /// in milli-VND. Used to pick insertion spots deterministically.
    pub fn insertion_delta_milli(&self, h: usize, t: usize, pos: usize, node: usize) -> i128 {
        let seq = &self.routes[h][t];
        let home = self.inst.home_depot_node(h);
        let prev = if pos == 0 { home } else { seq[pos - 1] };
        let next = if pos == seq.len() { home } else { seq[pos] };
        let per_km = self.inst.vehicles[h].cost_per_km as i128;
        let added = self.inst.distance_m(prev, node) + self.inst.distance_m(node, next);
        let removed = self.inst.distance_m(prev, next);
        let fixed = if seq.is_empty() {
            self.inst.vehicles[h].fixed_trip_cost as i128 * 1000
        } else {
            0
        };
        per_km * (added - removed) as i128 + fixed
    }

    /// Materializes the state into a full plan: depot endpoints, earliest
    /// departures, propagated stop times and route-derived depot
    /// assignments.
    pub fn to_plan(&self) -> Plan {
        let inst = self.inst;
        let mut plan = Plan::empty(inst);
        plan.deposits = self.deposits.clone();
        for h in 0..inst.num_vehicles() {
            let home = inst.home_depot_node(h);
            for t in 0..inst.periods {
                if self.routes[h][t].is_empty() {
                    continue;
                }
                let mut seq = Vec::with_capacity(self.routes[h][t].len() + 2);
                seq.push(home);
                seq.extend_from_slice(&self.routes[h][t]);
                seq.push(home);
                let departure = inst.depot_window.0;
                plan.stop_times[h][t] =
                    propagate_times(inst, &inst.vehicles[h], &seq, departure)
                        .expect("state routes are structurally valid");
                plan.routes[h][t] = seq;
                plan.departure[h][t] = Some(departure);
                for &node in &self.routes[h][t] {
                    if let Some(a) = inst.atm_of_node(node) {
                        let d = inst.home_depot_idx(h);
                        if !plan.depot_assignment[a][t].contains(&d) {
                            plan.depot_assignment[a][t].push(d);
                        }
                    }
                }
            }
        }
        plan
    }
}
