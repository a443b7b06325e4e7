//! Greedy cheapest-insertion construction over the aggregate arc-cost
//! matrix, one period at a time.
//!
//! ATMs with a scheduled deposit in a period must be visited that period.
//! Candidates are inserted at the position of least arc-cost increase among
//! the vehicles homed at their assigned depot, subject to capacity, service
//! windows, the travel-time cap, the depot window and the horizon distance
//! cap. An ATM that fits nowhere has its deposit repaired by moving it to
//! an adjacent period: earlier periods are tried first (always safe for
//! inventory), then the deposit is parked one period later. A deposit that
//! reaches the end of the horizon unplaced is dropped; the resulting plan
//! can then fail only the inventory check, which the caller flags.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{Instance, Money, Plan};
use crate::solver::eval::{Edit, SearchState};
use crate::solver::assign_depots;
use crate::splitting::SplitSchedule;

/// Builds a plan for the scheduled deposits. Deterministic per seed: the
/// seed only shuffles insertion tie-breaking order.
pub fn construct_plan(inst: &Instance, schedule: &SplitSchedule, seed: u64) -> Plan {
    construct_state(inst, schedule.deposits_matrix(inst), seed).to_plan()
}

pub(crate) fn construct_state(
    inst: &Instance,
    deposits: Vec<Vec<Money>>,
    seed: u64,
) -> SearchState<'_> {
    let depot_of = assign_depots(inst);
    let mut state = SearchState::new(inst, deposits, depot_of);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for t in 0..inst.periods {
        let mut pending: Vec<usize> =
            (0..inst.num_atms()).filter(|&a| state.deposits[a][t] > 0).collect();
        pending.shuffle(&mut rng);

        loop {
            let mut best: Option<(i128, usize, usize, usize)> = None; // (delta, pending idx, h, pos)
            for (pi, &a) in pending.iter().enumerate() {
                let node = inst.atm_node(a);
                for h in 0..inst.num_vehicles() {
                    if inst.home_depot_idx(h) != state.depot_of_atm[a] {
                        continue;
                    }
                    for pos in 0..=state.routes[h][t].len() {
                        let delta = state.insertion_delta_milli(h, t, pos, node);
                        if best.map_or(false, |(bd, ..)| delta >= bd) {
                            continue;
                        }
                        let mut seq = state.routes[h][t].clone();
                        seq.insert(pos, node);
                        if state.route_feasible_with(h, t, &seq) {
                            best = Some((delta, pi, h, pos));
                        }
                    }
                }
            }
            match best {
                Some((_, pi, h, pos)) => {
                    let a = pending.remove(pi);
                    let mut seq = state.routes[h][t].clone();
                    seq.insert(pos, inst.atm_node(a));
                    state.apply(Edit { routes: vec![(h, t, seq)], deposits: vec![] });
                }
                None => break,
            }
        }

        // repair: relocate unplaceable deposits to an adjacent period
        for a in pending {
            repair_deposit(inst, &mut state, a, t);
        }
    }
    state
}

fn repair_deposit(inst: &Instance, state: &mut SearchState<'_>, a: usize, t: usize) {
    let amount = state.deposits[a][t];

    // earlier periods first: pulling cash forward can never starve the ATM
    for t2 in (0..t).rev() {
        if try_place_in_period(inst, state, a, t, t2, amount) {
            return;
        }
    }
    if t + 1 < inst.periods {
        // park one period later; handled when that period is constructed
        let mut row = state.deposits[a].clone();
        row[t] = 0;
        row[t + 1] += amount;
        state.apply(Edit { routes: vec![], deposits: vec![(a, row)] });
        return;
    }
    // end of horizon: drop the deposit and let the inventory check flag it
    let mut row = state.deposits[a].clone();
    row[t] = 0;
    state.apply(Edit { routes: vec![], deposits: vec![(a, row)] });
}

/// Moves the deposit from `t` to `t2` when the ATM is already visited in
/// `t2` (merge) or a feasible insertion exists there.
fn try_place_in_period(
    inst: &Instance,
    state: &mut SearchState<'_>,
    a: usize,
    t: usize,
    t2: usize,
    amount: Money,
) -> bool {
    let node = inst.atm_node(a);
    let mut row = state.deposits[a].clone();
    row[t] = 0;
    row[t2] += amount;

    if let Some(h) = state.visited_by[a][t2] {
        // merge into the existing visit if the load still fits
        let seq = state.routes[h][t2].clone();
        let mut probe = state.clone();
        probe.apply(Edit { routes: vec![], deposits: vec![(a, row.clone())] });
        if probe.route_feasible_with(h, t2, &seq) {
            state.apply(Edit { routes: vec![], deposits: vec![(a, row)] });
            return true;
        }
        return false;
    }

    let mut probe = state.clone();
    probe.apply(Edit { routes: vec![], deposits: vec![(a, row.clone())] });
    let mut best: Option<(i128, usize, usize)> = None;
    for h in 0..inst.num_vehicles() {
        if inst.home_depot_idx(h) != state.depot_of_atm[a] {
            continue;
        }
        for pos in 0..=probe.routes[h][t2].len() {
            let delta = probe.insertion_delta_milli(h, t2, pos, node);
            if best.map_or(false, |(bd, ..)| delta >= bd) {
                continue;
            }
            let mut seq = probe.routes[h][t2].clone();
            seq.insert(pos, node);
            if probe.route_feasible_with(h, t2, &seq) {
                best = Some((delta, h, pos));
            }
        }
    }
    if let Some((_, h, pos)) = best {
        let mut seq = state.routes[h][t2].clone();
        seq.insert(pos, node);
        state.apply(Edit { routes: vec![(h, t2, seq)], deposits: vec![(a, row)] });
        return true;
    }
    false
}
