//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line. Run with `cargo test --test acceptance -- --nocapture`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cashroute::costing::{financial_cost, inventory_trajectory, scale_daily_interest};
use cashroute::feasibility::{check_plan, ConstraintFamily};
use cashroute::fixtures::{fig2_instance, fig2_plan};
use cashroute::model::{Instance, Minutes, Money, Plan};
use cashroute::report::{compare_policies, render_report, ReportFormat};
use cashroute::scenario::{generate_scenario, ScenarioParams, WithdrawalProfile};
use cashroute::solver::{
    construct_plan, default_weight_ladder, improve_plan, pareto_sweep, solve_exact, ExactCaps,
    NeighborhoodSet, SolveConfig, SolveStatus,
};
use cashroute::splitting::{build_split_schedule, SplitPolicy};

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {n} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} {name} failed: {detail}");
}

// --- criterion 1 -----------------------------------------------------------

#[test]
fn criterion_1_balance_sum_identity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xBA1A);
    let mut checked = 0u32;
    for case in 0..1_000u64 {
        let mut params = ScenarioParams::table_shape(1 + (case % 10) as usize, case);
        params.periods = 1 + (case % 9) as usize;
        params.withdrawal_profile = match case % 3 {
            0 => WithdrawalProfile::Uniform,
            1 => WithdrawalProfile::Frontloaded,
            _ => WithdrawalProfile::WeekendSpike,
        };
        params.total_demand_range = (1_000, 2_000_000);
        let inst = generate_scenario(&params).unwrap();
        let mut plan = Plan::empty(&inst);
        for a in 0..inst.num_atms() {
            for t in 0..inst.periods {
                // arbitrary deposits, occasionally negative: the identity
                // must hold on any plan, feasible or not
                plan.deposits[a][t] = rng.gen_range(-50_000i64..=600_000);
            }
        }
        let direct = financial_cost(&inst, &plan);
        let traj = inventory_trajectory(&inst, &plan);
        let oracle = scale_daily_interest(inst.interest_rate_annual, traj.balance_sum());
        assert_eq!(direct, oracle, "case {case}: {direct} != {oracle}");
        checked += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        1,
        "balance-sum identity",
        checked == 1_000 && elapsed < 10.0,
        &format!("{checked}/1000 exact matches in {elapsed:.2}s"),
    );
}

// --- criterion 2 -----------------------------------------------------------

#[test]
fn criterion_2_exact_oracle_equivalence() {
    let mut within = 0u32;
    let mut worst = 1.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xE8AC);
        let n_depots = rng.gen_range(1..=2usize);
        let mut params = ScenarioParams::table_shape(rng.gen_range(1..=7usize), seed);
        params.n_depots = n_depots;
        params.vehicles_per_depot = 1;
        params.periods = rng.gen_range(1..=2usize);
        params.area_extent_km = 15.0;
        params.vehicle_capacity = 100_000_000_000; // capacity never binds
        let inst = generate_scenario(&params).unwrap();
        let policy = if seed % 2 == 0 {
            SplitPolicy::no_split()
        } else {
            SplitPolicy::split(1_000_000_000, 1_400_000_000).unwrap()
        };
        let schedule = build_split_schedule(&inst, &policy);

        let per_instance = Instant::now();
        let cfg = SolveConfig {
            neighborhoods: NeighborhoodSet::routing_only(),
            time_limit_secs: 10.0,
            ..SolveConfig::with_seed(seed)
        };
        let exact = solve_exact(&inst, &schedule, ExactCaps::default(), &cfg).unwrap();
        assert_eq!(
            exact.status,
            SolveStatus::Optimal,
            "seed {seed}: exact search should find an optimum"
        );
        let heuristic = improve_plan(&inst, &construct_plan(&inst, &schedule, seed), &cfg);
        assert_eq!(heuristic.status, SolveStatus::Feasible, "seed {seed}");
        assert_eq!(
            heuristic.plan.deposits, exact.plan.deposits,
            "seed {seed}: routing-only search must keep the schedule"
        );
        let opt = exact.cost.aggregate_cost_vnd;
        let got = heuristic.cost.aggregate_cost_vnd;
        assert!(
            got >= opt,
            "seed {seed}: heuristic {got} beat the proven optimum {opt}"
        );
        let ratio = if opt == 0 { 1.0 } else { got as f64 / opt as f64 };
        worst = worst.max(ratio);
        if ratio <= 1.05 {
            within += 1;
        }
        assert!(
            per_instance.elapsed().as_secs_f64() < 10.0,
            "seed {seed}: exceeded the 10 s budget"
        );
    }
    verdict(
        2,
        "exact-oracle equivalence",
        within >= 95,
        &format!("{within}/100 within 1.05x, worst ratio {worst:.4}"),
    );
}

// --- criterion 3 -----------------------------------------------------------

/// Recomputes stop times for stops strictly after `from` along the stored
/// sequence, keeping the stored service start at `from` itself.
fn retime_after(inst: &Instance, plan: &mut Plan, h: usize, t: usize, from: usize) {
    let route = plan.routes[h][t].clone();
    let interior = &route[1..route.len() - 1];
    let mut clock = if from == usize::MAX {
        plan.departure[h][t].unwrap()
    } else {
        let a = inst.atm_of_node(interior[from]).unwrap();
        plan.stop_times[h][t][from].1 + inst.atms[a].service_time_min
    };
    let mut prev = if from == usize::MAX { route[0] } else { interior[from] };
    let begin = if from == usize::MAX { 0 } else { from + 1 };
    for pos in begin..interior.len() {
        let node = interior[pos];
        let a = inst.atm_of_node(node).unwrap();
        let arrival = clock + inst.travel_time_min(h, prev, node);
        let start = arrival.max(inst.atms[a].service_window.0);
        plan.stop_times[h][t][pos] = (arrival, start);
        clock = start + inst.atms[a].service_time_min;
        prev = node;
    }
}

fn route_travel_min(inst: &Instance, plan: &Plan, h: usize, t: usize) -> Minutes {
    plan.routes[h][t]
        .windows(2)
        .map(|w| inst.travel_time_min(h, w[0], w[1]))
        .sum()
}

fn route_duration_min(inst: &Instance, plan: &Plan, h: usize, t: usize) -> Minutes {
    let service: Minutes = plan.routes[h][t]
        .iter()
        .filter_map(|&n| inst.atm_of_node(n))
        .map(|a| inst.atms[a].service_time_min)
        .sum();
    route_travel_min(inst, plan, h, t) + service
}

fn vehicle_meters(inst: &Instance, plan: &Plan, h: usize) -> i64 {
    (0..inst.periods)
        .map(|t| {
            plan.routes[h][t]
                .windows(2)
                .map(|w| inst.distance_m(w[0], w[1]))
                .sum::<i64>()
        })
        .sum()
}

/// A feasible (instance, plan) pair with slack everywhere, or `None` when
/// this seed's construction is not clean.
fn feasible_pair(seed: u64) -> Option<(Instance, Plan)> {
    let mut params = ScenarioParams::table_shape(6, seed);
    params.periods = 3;
    params.vehicle_capacity = 100_000_000_000;
    params.total_demand_range = (2_000_000_000, 3_000_000_000);
    let inst = generate_scenario(&params).ok()?;
    let schedule = build_split_schedule(&inst, &SplitPolicy::no_split());
    let plan = construct_plan(&inst, &schedule, seed);
    if check_plan(&inst, &plan).is_empty() {
        Some((inst, plan))
    } else {
        None
    }
}

/// Applies one injected breach of `family`; `None` when this pair offers no
/// clean injection site.
fn inject(family: ConstraintFamily, inst: &mut Instance, plan: &mut Plan) -> Option<()> {
    use ConstraintFamily::*;
    // first used route and a visited (atm, period) as default sites
    let used: Vec<(usize, usize)> = (0..inst.num_vehicles())
        .flat_map(|h| (0..inst.periods).map(move |t| (h, t)))
        .filter(|&(h, t)| !plan.routes[h][t].is_empty())
        .collect();
    match family {
        C3OneVehiclePerAtm => {
            // second same-depot vehicle also visits the ATM
            for &(h, t) in &used {
                let node = *plan.routes[h][t].get(1)?;
                let depot = inst.home_depot_idx(h);
                let h2 = (0..inst.num_vehicles())
                    .find(|&x| x != h && inst.home_depot_idx(x) == depot)?;
                let home = inst.home_depot_node(h2);
                if plan.routes[h2][t].is_empty() {
                    plan.routes[h2][t] = vec![home, node, home];
                    plan.departure[h2][t] = Some(inst.depot_window.0);
                    plan.stop_times[h2][t] = vec![(0, 0)];
                } else {
                    plan.routes[h2][t].insert(1, node);
                    plan.stop_times[h2][t].insert(0, (0, 0));
                }
                retime_after(inst, plan, h2, t, usize::MAX);
                return Some(());
            }
            None
        }
        C4VehicleCapacity => {
            let &(h, t) = used.first()?;
            let a = inst.atm_of_node(plan.routes[h][t][1])?;
            let load: Money = plan.routes[h][t]
                .iter()
                .filter_map(|&n| inst.atm_of_node(n))
                .map(|x| plan.deposits[x][t])
                .sum();
            plan.deposits[a][t] += inst.vehicles[h].capacity - load + 1;
            Some(())
        }
        C5DepotFlow => {
            let &(h, t) = used.iter().find(|&&(h, _)| {
                (0..inst.num_depots()).any(|d| d != inst.home_depot_idx(h))
            })?;
            let wrong = (0..inst.num_depots()).find(|&d| d != inst.home_depot_idx(h))?;
            plan.routes[h][t][0] = wrong;
            retime_after(inst, plan, h, t, usize::MAX);
            // keep every window satisfied after the shift
            let ok = plan.stop_times[h][t].iter().zip(plan.interior(h, t)).all(
                |(&(_, w), &n)| {
                    let a = inst.atm_of_node(n).unwrap();
                    w <= inst.atms[a].service_window.1
                },
            );
            ok.then_some(())
        }
        C6ServiceAfterArrival => {
            for &(h, t) in &used {
                for pos in 0..plan.stop_times[h][t].len() {
                    let (r, w) = plan.stop_times[h][t][pos];
                    let a = inst.atm_of_node(plan.interior(h, t)[pos]).unwrap();
                    if w == r && r >= inst.atms[a].service_window.0 + 1 {
                        plan.stop_times[h][t][pos] = (r, r - 1);
                        retime_after(inst, plan, h, t, pos);
                        return Some(());
                    }
                }
            }
            None
        }
        C7ServiceWindow => {
            let &(h, t) = used.first()?;
            let last = plan.stop_times[h][t].len() - 1;
            let a = inst.atm_of_node(*plan.interior(h, t).last()?)?;
            let (r, _) = plan.stop_times[h][t][last];
            plan.stop_times[h][t][last] = (r, inst.atms[a].service_window.1 + 1);
            Some(())
        }
        C8SubtourFree => {
            let &(h, t) = used.iter().find(|&&(h, t)| plan.routes[h][t].len() > 3)?;
            let node = plan.routes[h][t][1];
            plan.routes[h][t].insert(2, node);
            plan.stop_times[h][t].insert(1, (0, 0));
            retime_after(inst, plan, h, t, usize::MAX);
            Some(())
        }
        C9RouteDuration => {
            let travels: Vec<Minutes> =
                used.iter().map(|&(h, t)| route_travel_min(inst, plan, h, t)).collect();
            let max = *travels.iter().max()?;
            if travels.iter().filter(|&&x| x == max).count() != 1 || max == 0 {
                return None;
            }
            inst.max_route_time_min = max - 1;
            Some(())
        }
        C10RouteImpliesAssignment => {
            let &(h, t) = used.first()?;
            let a = inst.atm_of_node(plan.routes[h][t][1])?;
            plan.depot_assignment[a][t].clear();
            Some(())
        }
        C11OneDepotPerAtm => {
            let &(h, t) = used.first()?;
            let a = inst.atm_of_node(plan.routes[h][t][1])?;
            let extra = (0..inst.num_depots())
                .find(|d| !plan.depot_assignment[a][t].contains(d))?;
            plan.depot_assignment[a][t].push(extra);
            Some(())
        }
        C12HorizonDistance => {
            let meters: Vec<i64> =
                (0..inst.num_vehicles()).map(|h| vehicle_meters(inst, plan, h)).collect();
            let max = *meters.iter().max()?;
            if meters.iter().filter(|&&m| m == max).count() != 1 || max == 0 {
                return None;
            }
            inst.max_total_distance_m = max - 100;
            Some(())
        }
        C13TimingConsistency => {
            let &(h, t) = used.first()?;
            let (r, w) = plan.stop_times[h][t][0];
            plan.stop_times[h][t][0] = (r - 1, w);
            Some(())
        }
        C14NonnegativeInventory => {
            // shaving a deposit moves every later balance down; pick one
            // whose suffix minimum is unique so exactly one period dips
            let traj = inventory_trajectory(inst, plan);
            for a in 0..inst.num_atms() {
                for t in (0..inst.periods).rev() {
                    if plan.deposits[a][t] <= 0 {
                        continue;
                    }
                    let suffix = &traj.balances[a][t..];
                    let min = *suffix.iter().min().unwrap();
                    if min < 0 || suffix.iter().filter(|&&b| b == min).count() != 1 {
                        continue;
                    }
                    if plan.deposits[a][t] > min + 1 {
                        plan.deposits[a][t] -= min + 1;
                        return Some(());
                    }
                }
            }
            None
        }
        C15DepartAfterOpening => {
            let &(h, t) = used.first()?;
            plan.departure[h][t] = Some(inst.depot_window.0 - 5);
            retime_after(inst, plan, h, t, usize::MAX);
            Some(())
        }
        C16ReturnBeforeClosing => {
            let &(h, t) = used.first()?;
            let duration = route_duration_min(inst, plan, h, t);
            let new_dep = inst.depot_window.1 - duration + 5;
            if new_dep < inst.depot_window.0 {
                return None;
            }
            plan.departure[h][t] = Some(new_dep);
            retime_after(inst, plan, h, t, usize::MAX);
            let ok = plan.stop_times[h][t].iter().zip(plan.interior(h, t)).all(
                |(&(_, w), &n)| {
                    let a = inst.atm_of_node(n).unwrap();
                    w <= inst.atms[a].service_window.1
                },
            );
            ok.then_some(())
        }
        C17VariableDomains => {
            let (h, t) = (0..inst.num_vehicles())
                .flat_map(|h| (0..inst.periods).map(move |t| (h, t)))
                .find(|&(h, t)| plan.routes[h][t].is_empty())?;
            plan.departure[h][t] = Some(inst.depot_window.0);
            Some(())
        }
        C18NonnegativeDeposits => {
            let traj = inventory_trajectory(inst, plan);
            let t = inst.periods - 1;
            let a = (0..inst.num_atms()).find(|&a| {
                plan.deposits[a][t] == 0 && traj.balances[a][t] >= 1
            })?;
            plan.deposits[a][t] = -1;
            Some(())
        }
    }
}

#[test]
fn criterion_3_checker_completeness() {
    let start = Instant::now();
    let mut results = Vec::new();
    for &family in ConstraintFamily::ALL.iter() {
        let mut hits = 0u32;
        let mut seed = 0u64;
        let mut attempts = 0u32;
        while hits < 50 && attempts < 400 {
            attempts += 1;
            seed += 1;
            let Some((mut inst, mut plan)) = feasible_pair(seed) else { continue };
            if inject(family, &mut inst, &mut plan).is_none() {
                continue;
            }
            let violations = check_plan(&inst, &plan);
            assert_eq!(
                violations.len(),
                1,
                "{family}: seed {seed} produced {violations:?}"
            );
            assert_eq!(violations[0].constraint, family, "seed {seed}");
            assert!(violations[0].magnitude > 0.0);
            hits += 1;
        }
        results.push((family, hits));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let total: u32 = results.iter().map(|&(_, h)| h).sum();
    let all_ok = results.iter().all(|&(_, h)| h == 50);
    let short: Vec<String> = results
        .iter()
        .filter(|&&(_, h)| h < 50)
        .map(|&(f, h)| format!("{f}={h}"))
        .collect();
    let detail = if short.is_empty() {
        format!("{total}/800 single-violation injections in {elapsed:.2}s")
    } else {
        format!("{total}/800 (short: {}) in {elapsed:.2}s", short.join(", "))
    };
    verdict(3, "checker completeness", all_ok && elapsed < 30.0, &detail);
}

// --- criteria 4, 5, 6 ------------------------------------------------------

struct ScenarioRun {
    improvement: f64,
    trips_ok: bool,
    km_ok: bool,
    financial_strictly_down: bool,
    deterministic: bool,
    within_budget: bool,
}

fn run_table_scenario(seed: u64) -> ScenarioRun {
    let inst = generate_scenario(&ScenarioParams::table_shape(28, seed)).unwrap();
    let cfg = SolveConfig { time_limit_secs: 60.0, ..SolveConfig::with_seed(seed) };
    let bounds = (1_000_000_000, 1_400_000_000);
    let start = Instant::now();
    let a = compare_policies(&inst, &cfg, bounds).unwrap();
    let within_budget = start.elapsed().as_secs_f64() < 60.0;
    let b = compare_policies(&inst, &cfg, bounds).unwrap();
    let ra = render_report(&a.report, ReportFormat::Structured);
    let rb = render_report(&b.report, ReportFormat::Structured);
    assert!(!a.report.incomplete, "seed {seed}: {:?}", a.report.failing_policy);
    ScenarioRun {
        improvement: a.report.improvement_percent.unwrap(),
        trips_ok: a.report.split.trips >= a.report.no_split.trips,
        km_ok: a.report.split.total_km >= a.report.no_split.total_km,
        financial_strictly_down: a.report.split.financial_cost_vnd
            < a.report.no_split.financial_cost_vnd,
        deterministic: ra == rb,
        within_budget,
    }
}

#[test]
fn criteria_4_5_6_table_reproduction() {
    let runs: Vec<ScenarioRun> = (0..20u64).map(run_table_scenario).collect();

    let mut improvements: Vec<f64> = runs.iter().map(|r| r.improvement).collect();
    improvements.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = (improvements[9] + improvements[10]) / 2.0;
    let budgets_ok = runs.iter().all(|r| r.within_budget);
    verdict(
        4,
        "directional cost reproduction",
        (15.0..=50.0).contains(&median) && budgets_ok,
        &format!(
            "median improvement {median:.1}% over 20 scenarios (range {:.1}%..{:.1}%)",
            improvements[0], improvements[19]
        ),
    );

    let structural = runs.iter().filter(|r| r.trips_ok && r.km_ok).count();
    let financial_all = runs.iter().filter(|r| r.financial_strictly_down).count();
    verdict(
        5,
        "split structural effects",
        structural >= 18 && financial_all == 20,
        &format!("trips&km up in {structural}/20, financial down in {financial_all}/20"),
    );

    let deterministic = runs.iter().filter(|r| r.deterministic).count();
    verdict(
        6,
        "comparison determinism",
        deterministic == 20,
        &format!("byte-identical reports in {deterministic}/20 scenarios"),
    );
}

// --- criterion 7 -----------------------------------------------------------

#[test]
fn criterion_7_fixture_fidelity() {
    let inst = fig2_instance();
    let plan = fig2_plan(&inst);
    let violations = check_plan(&inst, &plan);

    let atm2 = inst.atms.iter().position(|a| a.id == "2").unwrap();
    let route_ids: Vec<&str> =
        plan.routes[0][0].iter().map(|&n| inst.node_id(n)).collect();
    let route4_ids: Vec<&str> =
        plan.routes[3][0].iter().map(|&n| inst.node_id(n)).collect();
    let vars_ok = plan.deposits[atm2][0] == 100
        && inst.atms[atm2].forecast_withdrawals[0] == 50
        && plan.departure[0][0] == Some(570)
        && plan.stop_times[0][0][2] == (600, 605)
        && route_ids == ["01", "1", "5", "2", "3", "01"]
        && route4_ids == ["03", "7", "9", "10", "03"];
    verdict(
        7,
        "fixture fidelity",
        violations.is_empty() && vars_ok,
        &format!("{} violations, pinned variables ok: {vars_ok}", violations.len()),
    );
}

// --- criterion 8 -----------------------------------------------------------

#[test]
fn criterion_8_pareto_sweep() {
    let weights = default_weight_ladder();
    assert!(weights.len() >= 5);
    let policy = SplitPolicy::split(1_000_000_000, 1_400_000_000).unwrap();
    let mut all_ok = true;
    let mut detail = String::new();
    for seed in 0..20u64 {
        let inst = generate_scenario(&ScenarioParams::table_shape(28, seed)).unwrap();
        let points = pareto_sweep(&inst, &policy, &weights, &SolveConfig::with_seed(seed));
        let non_empty = !points.is_empty();
        let mut non_dominated = true;
        for (i, p) in points.iter().enumerate() {
            for (k, q) in points.iter().enumerate() {
                if i == k {
                    continue;
                }
                let (f1, f2) = (p.result.cost.transport_cost_vnd, p.result.cost.financial_cost_vnd);
                let (g1, g2) = (q.result.cost.transport_cost_vnd, q.result.cost.financial_cost_vnd);
                if g1 <= f1 && g2 <= f2 && (g1 < f1 || g2 < f2) {
                    non_dominated = false;
                }
            }
        }
        let sorted_tradeoff = points.windows(2).all(|w| {
            w[0].result.cost.transport_cost_vnd <= w[1].result.cost.transport_cost_vnd
                && w[0].result.cost.financial_cost_vnd >= w[1].result.cost.financial_cost_vnd
        });
        if !(non_empty && non_dominated && sorted_tradeoff) {
            all_ok = false;
            detail = format!("seed {seed}: non_empty={non_empty} non_dominated={non_dominated} sorted={sorted_tradeoff}");
            break;
        }
    }
    if detail.is_empty() {
        detail = "non-dominated, f1-sorted fronts on 20/20 scenarios".into();
    }
    verdict(8, "pareto sweep", all_ok, &detail);
}
