//! Penalized first-improvement local search with restart kicks.
//!
//! The objective is `w1*f1 + w2*f2 + penalty * violation magnitude`;
//! neighborhoods are scanned in a fixed order (relocate, swap, 2-opt,
//! period move, split-count change) and the first strictly improving move
//! is taken. At a local optimum the search either doubles the penalty
//! (while infeasible) or applies a random kick, up to the restart budget.
//! Stopping is governed by deterministic evaluation and restart budgets;
//! the wall-clock limit is a safety backstop only, so identical
//! configurations reproduce identical results.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::costing::aggregate_cost;
use crate::feasibility::check_plan;
use crate::model::{Instance, Money, Plan};
use crate::solver::eval::{Edit, SearchState};
use crate::solver::{assign_depots, default_penalty, SolveConfig, SolveResult, SolveStatus};
use crate::splitting::build_split_schedule;

pub(crate) fn default_budget(inst: &Instance) -> u64 {
    (2_000 * inst.num_atms() as u64 * inst.periods as u64).max(20_000)
}

struct Search<'a> {
    state: SearchState<'a>,
    cfg: &'a SolveConfig,
    penalty: f64,
    evals: u64,
    budget: u64,
    deadline: Instant,
    /// Split options per ATM (deposit rows), when the neighborhood is on.
    split_rows: Vec<Vec<Vec<Money>>>,
}

impl<'a> Search<'a> {
    fn exhausted(&self) -> bool {
        self.evals >= self.budget
            || (self.evals % 1024 == 0 && Instant::now() >= self.deadline)
    }

    fn current(&self) -> f64 {
        self.state.objective(self.cfg.weights, self.penalty)
    }

    fn try_edit(&mut self, edit: Edit, bar: f64) -> Option<Edit> {
        self.evals += 1;
        let cand = self.state.candidate_objective(&edit, self.cfg.weights, self.penalty);
        if cand < bar - 1e-9 {
            Some(edit)
        } else {
            None
        }
    }

    /// First strictly improving move in neighborhood order, or `None` at a
    /// local optimum (or when budgets run out mid-scan).
    fn find_improving(&mut self) -> Option<Edit> {
        let inst = self.state.inst;
        let bar = self.current();
        let nh = inst.num_vehicles();
        let flags = self.cfg.neighborhoods;

        if flags.relocate {
            for t in 0..inst.periods {
                for h_src in 0..nh {
                    for pos_src in 0..self.state.routes[h_src][t].len() {
                        if self.exhausted() {
                            return None;
                        }
                        let node = self.state.routes[h_src][t][pos_src];
                        let a = inst.atm_of_node(node).unwrap();
                        for h_dst in 0..nh {
                            if inst.home_depot_idx(h_dst) != self.state.depot_of_atm[a] {
                                continue;
                            }
                            let dst_len = if h_dst == h_src {
                                self.state.routes[h_dst][t].len() - 1
                            } else {
                                self.state.routes[h_dst][t].len()
                            };
                            for pos_dst in 0..=dst_len {
                                if h_dst == h_src && pos_dst == pos_src {
                                    continue;
                                }
                                let edit = relocate_edit(
                                    &self.state, t, h_src, pos_src, h_dst, pos_dst,
                                );
                                if let Some(e) = self.try_edit(edit, bar) {
                                    return Some(e);
                                }
                            }
                        }
                    }
                }
            }
        }

        if flags.swap {
            for t in 0..inst.periods {
                for h1 in 0..nh {
                    for pos1 in 0..self.state.routes[h1][t].len() {
                        if self.exhausted() {
                            return None;
                        }
                        for h2 in h1..nh {
                            let start = if h2 == h1 { pos1 + 1 } else { 0 };
                            for pos2 in start..self.state.routes[h2][t].len() {
                                let a = inst
                                    .atm_of_node(self.state.routes[h1][t][pos1])
                                    .unwrap();
                                let b = inst
                                    .atm_of_node(self.state.routes[h2][t][pos2])
                                    .unwrap();
                                if inst.home_depot_idx(h2) != self.state.depot_of_atm[a]
                                    || inst.home_depot_idx(h1) != self.state.depot_of_atm[b]
                                {
                                    continue;
                                }
                                let edit = swap_edit(&self.state, t, h1, pos1, h2, pos2);
                                if let Some(e) = self.try_edit(edit, bar) {
                                    return Some(e);
                                }
                            }
                        }
                    }
                }
            }
        }

        if flags.two_opt {
            for t in 0..inst.periods {
                for h in 0..nh {
                    let len = self.state.routes[h][t].len();
                    for i in 0..len {
                        if self.exhausted() {
                            return None;
                        }
                        for j in (i + 1)..len {
                            let mut seq = self.state.routes[h][t].clone();
                            seq[i..=j].reverse();
                            let edit = Edit { routes: vec![(h, t, seq)], deposits: vec![] };
                            if let Some(e) = self.try_edit(edit, bar) {
                                return Some(e);
                            }
                        }
                    }
                }
            }
        }

        if flags.period_move {
            for a in 0..inst.num_atms() {
                for t in 0..inst.periods {
                    if self.state.visited_by[a][t].is_none() {
                        continue;
                    }
                    if self.exhausted() {
                        return None;
                    }
                    for t2 in [t.wrapping_sub(1), t + 1] {
                        if t2 >= inst.periods {
                            continue;
                        }
                        let edit = period_move_edit(&self.state, a, t, t2);
                        if let Some(e) = self.try_edit(edit, bar) {
                            return Some(e);
                        }
                    }
                }
            }
        }

        if flags.split_k_change {
            for a in 0..inst.num_atms() {
                if self.exhausted() {
                    return None;
                }
                for k in 0..self.split_rows[a].len() {
                    let row = self.split_rows[a][k].clone();
                    if row == self.state.deposits[a] {
                        continue;
                    }
                    let edit = retarget_deposits_edit(&self.state, a, row);
                    if let Some(e) = self.try_edit(edit, bar) {
                        return Some(e);
                    }
                }
            }
        }

        None
    }
}

fn remove_node(seq: &[usize], pos: usize) -> Vec<usize> {
    let mut out = seq.to_vec();
    out.remove(pos);
    out
}

fn relocate_edit(
    state: &SearchState<'_>,
    t: usize,
    h_src: usize,
    pos_src: usize,
    h_dst: usize,
    pos_dst: usize,
) -> Edit {
    let node = state.routes[h_src][t][pos_src];
    if h_src == h_dst {
        let mut seq = remove_node(&state.routes[h_src][t], pos_src);
        seq.insert(pos_dst, node);
        Edit { routes: vec![(h_src, t, seq)], deposits: vec![] }
    } else {
        let src = remove_node(&state.routes[h_src][t], pos_src);
        let mut dst = state.routes[h_dst][t].clone();
        dst.insert(pos_dst, node);
        Edit { routes: vec![(h_src, t, src), (h_dst, t, dst)], deposits: vec![] }
    }
}

fn swap_edit(
    state: &SearchState<'_>,
    t: usize,
    h1: usize,
    pos1: usize,
    h2: usize,
    pos2: usize,
) -> Edit {
    if h1 == h2 {
        let mut seq = state.routes[h1][t].clone();
        seq.swap(pos1, pos2);
        Edit { routes: vec![(h1, t, seq)], deposits: vec![] }
    } else {
        let mut s1 = state.routes[h1][t].clone();
        let mut s2 = state.routes[h2][t].clone();
        std::mem::swap(&mut s1[pos1], &mut s2[pos2]);
        Edit { routes: vec![(h1, t, s1), (h2, t, s2)], deposits: vec![] }
    }
}

/// Moves an ATM's visit and deposit from period `t` to `t2`. When the ATM
/// is already visited in `t2` the deposits merge; otherwise the visit is
/// inserted at the cheapest arc position among compatible vehicles.
fn period_move_edit(state: &SearchState<'_>, a: usize, t: usize, t2: usize) -> Edit {
    let inst = state.inst;
    let node = inst.atm_node(a);
    let h_src = state.visited_by[a][t].expect("caller checked the visit");
    let pos_src = state.routes[h_src][t].iter().position(|&n| n == node).unwrap();
    let mut row = state.deposits[a].clone();
    let amount = row[t];
    row[t] = 0;
    row[t2] += amount;
    let mut routes = vec![(h_src, t, remove_node(&state.routes[h_src][t], pos_src))];
    if state.visited_by[a][t2].is_none() {
        if let Some((h, pos)) = cheapest_insertion_spot(state, a, t2) {
            let mut dst = state.routes[h][t2].clone();
            dst.insert(pos, node);
            routes.push((h, t2, dst));
        }
    }
    Edit { routes, deposits: vec![(a, row)] }
}

fn cheapest_insertion_spot(state: &SearchState<'_>, a: usize, t: usize) -> Option<(usize, usize)> {
    let inst = state.inst;
    let node = inst.atm_node(a);
    let mut best: Option<(i128, usize, usize)> = None;
    for h in 0..inst.num_vehicles() {
        if inst.home_depot_idx(h) != state.depot_of_atm[a] {
            continue;
        }
        for pos in 0..=state.routes[h][t].len() {
            let delta = state.insertion_delta_milli(h, t, pos, node);
            if best.map_or(true, |(bd, ..)| delta < bd) {
                best = Some((delta, h, pos));
            }
        }
    }
    best.map(|(_, h, pos)| (h, pos))
}

/// Rewrites an ATM's deposit row, adding and removing visits so deposits
/// and visits stay coupled.
fn retarget_deposits_edit(state: &SearchState<'_>, a: usize, row: Vec<Money>) -> Edit {
    let inst = state.inst;
    let node = inst.atm_node(a);
    let mut routes: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    for t in 0..inst.periods {
        let visited = state.visited_by[a][t];
        let needed = row[t] > 0;
        match (visited, needed) {
            (Some(h), false) => {
                let pos = state.routes[h][t].iter().position(|&n| n == node).unwrap();
                routes.push((h, t, remove_node(&state.routes[h][t], pos)));
            }
            (None, true) => {
                if let Some((h, pos)) = cheapest_insertion_spot(state, a, t) {
                    let mut dst = state.routes[h][t].clone();
                    dst.insert(pos, node);
                    routes.push((h, t, dst));
                }
            }
            _ => {}
        }
    }
    Edit { routes, deposits: vec![(a, row)] }
}

fn kick(state: &mut SearchState<'_>, rng: &mut ChaCha8Rng) {
    let inst = state.inst;
    let moves = 1 + inst.num_atms() / 8;
    for _ in 0..moves {
        // collect current visits deterministically
        let visits: Vec<(usize, usize)> = (0..inst.num_atms())
            .flat_map(|a| (0..inst.periods).map(move |t| (a, t)))
            .filter(|&(a, t)| state.visited_by[a][t].is_some())
            .collect();
        if visits.is_empty() {
            return;
        }
        let (a, t) = visits[rng.gen_range(0..visits.len())];
        let node = inst.atm_node(a);
        let compatible: Vec<usize> = (0..inst.num_vehicles())
            .filter(|&h| inst.home_depot_idx(h) == state.depot_of_atm[a])
            .collect();
        if compatible.is_empty() {
            continue;
        }
        let h_dst = compatible[rng.gen_range(0..compatible.len())];
        let h_src = state.visited_by[a][t].unwrap();
        let pos_src = state.routes[h_src][t].iter().position(|&n| n == node).unwrap();
        if h_src == h_dst && state.routes[h_src][t].len() <= 1 {
            continue;
        }
        let dst_len = if h_dst == h_src {
            state.routes[h_dst][t].len() - 1
        } else {
            state.routes[h_dst][t].len()
        };
        let pos_dst = rng.gen_range(0..=dst_len);
        if h_src == h_dst && pos_dst == pos_src {
            continue;
        }
        let edit = relocate_edit(state, t, h_src, pos_src, h_dst, pos_dst);
        state.apply(edit);
    }
}

/// Improves a structurally valid plan under the configured neighborhoods.
/// The result is the best feasible plan found (status `Feasible`), or the
/// final state with status `Infeasible`/`Timeout` when no feasible plan was
/// reached.
pub fn improve_plan(inst: &Instance, plan: &Plan, cfg: &SolveConfig) -> SolveResult {
    let start = Instant::now();
    let deadline = start + Duration::from_secs_f64(cfg.time_limit_secs.max(0.001));
    let depot_of = assign_depots(inst);
    let state = SearchState::from_plan(inst, plan, depot_of);
    let split_rows: Vec<Vec<Vec<Money>>> = match (&cfg.split_policy, cfg.neighborhoods.split_k_change) {
        (Some(policy), true) => {
            let schedule = build_split_schedule(inst, policy);
            let mut rows = vec![Vec::new(); inst.num_atms()];
            for split in &schedule.atms {
                rows[split.atm] = split
                    .options
                    .iter()
                    .filter(|o| o.inventory_ok)
                    .map(|o| o.deposits.clone())
                    .collect();
            }
            rows
        }
        _ => vec![Vec::new(); inst.num_atms()],
    };

    let mut search = Search {
        state,
        cfg,
        penalty: cfg.penalty_per_unit.unwrap_or_else(|| default_penalty(inst)),
        evals: 0,
        budget: cfg.iteration_budget.unwrap_or_else(|| default_budget(inst)),
        deadline,
        split_rows,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut best: Option<(f64, Vec<Vec<Vec<usize>>>, Vec<Vec<Money>>)> = None;
    let mut trace: Vec<(u64, f64)> = Vec::new();
    let note_best = |search: &Search<'_>, trace: &mut Vec<(u64, f64)>,
                         best: &mut Option<(f64, Vec<Vec<Vec<usize>>>, Vec<Vec<Money>>)>| {
        if !search.state.is_clean() {
            return;
        }
        let cost = search.state.weighted_cost(search.cfg.weights);
        if best.as_ref().map_or(true, |(b, ..)| cost < *b) {
            *best = Some((cost, search.state.routes.clone(), search.state.deposits.clone()));
            trace.push((search.evals, cost));
        }
    };

    note_best(&search, &mut trace, &mut best);
    let mut restarts = 0u32;
    loop {
        while let Some(edit) = search.find_improving() {
            search.state.apply(edit);
            note_best(&search, &mut trace, &mut best);
        }
        if search.evals >= search.budget || Instant::now() >= search.deadline {
            break;
        }
        restarts += 1;
        if restarts > cfg.max_restarts {
            break;
        }
        if !search.state.is_clean() {
            search.penalty *= 2.0;
        }
        kick(&mut search.state, &mut rng);
    }

    // materialize the incumbent
    let final_state = match &best {
        Some((_, routes, deposits)) => {
            let mut s = SearchState::new(inst, deposits.clone(), assign_depots(inst));
            let edits = routes
                .iter()
                .enumerate()
                .flat_map(|(h, per)| {
                    per.iter().enumerate().map(move |(t, seq)| (h, t, seq.clone()))
                })
                .collect();
            s.apply(Edit { routes: edits, deposits: vec![] });
            s
        }
        None => search.state.clone(),
    };
    let plan = final_state.to_plan();
    let violations = check_plan(inst, &plan);
    let status = if violations.is_empty() {
        SolveStatus::Feasible
    } else if Instant::now() >= deadline {
        SolveStatus::Timeout
    } else {
        SolveStatus::Infeasible
    };
    let cost = aggregate_cost(inst, &plan, cfg.weights).expect("valid weights");
    SolveResult {
        plan,
        cost,
        status,
        iterations: search.evals,
        wall_time_secs: start.elapsed().as_secs_f64(),
        best_trace: trace,
    }
}
