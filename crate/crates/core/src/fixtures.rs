//! A hand-built worked example: three depots, sixteen ATMs, and a one-day
//! plan with two routes whose timing values are pinned exactly.
//!
//! The example doubles as a regression anchor: depot areas reproduce a
//! known grouping under nearest-depot assignment, and the plan passes the
//! full constraint check with the documented variable values (departure
//! 9h30, arrival at ATM 2 at 10h00, service start 10h05, deposit 100
//! against a withdrawal of 50).

use crate::model::{Atm, Depot, Instance, Minutes, Money, Plan, Vehicle};

/// Depot and ATM positions, km. ATM ids are 1-based strings.
fn positions() -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let depots = vec![(5.0, 5.0), (25.0, 5.0), (15.0, 20.0)];
    let atms = vec![
        (4.0, 4.0),   // 1
        (6.0, 4.0),   // 2
        (6.0, 6.0),   // 3
        (4.0, 6.0),   // 4
        (5.0, 3.0),   // 5
        (23.0, 5.0),  // 6: depot 02's area
        (14.0, 19.0), // 7
        (26.0, 4.0),  // 8
        (16.0, 19.0), // 9
        (15.0, 22.0), // 10
        (3.0, 5.0),   // 11
        (25.0, 7.0),  // 12
        (13.0, 20.0), // 13
        (17.0, 20.0), // 14
        (15.0, 18.0), // 15
        (7.0, 5.0),   // 16: grouped with depot 01
    ];
    (depots, atms)
}

/// Nearest-depot grouping this geometry realizes (ATM index -> depot index).
pub fn expected_grouping() -> Vec<usize> {
    vec![0, 0, 0, 0, 0, 1, 2, 1, 2, 2, 0, 1, 2, 2, 2, 0]
}

/// The worked-example instance: V = 19 nodes, 4 vehicles, one period.
/// Travel times are explicit so the plan's clock values land exactly.
pub fn fig2_instance() -> Instance {
    let (depot_pos, atm_pos) = positions();
    let all: Vec<(f64, f64)> = depot_pos.iter().chain(atm_pos.iter()).copied().collect();
    let v = all.len();
    let mut distance_m = vec![0i64; v * v];
    for i in 0..v {
        for j in 0..v {
            if i == j {
                continue;
            }
            let dx = all[i].0 - all[j].0;
            let dy = all[i].1 - all[j].1;
            let km = (dx * dx + dy * dy).sqrt();
            distance_m[i * v + j] = ((km * 10.0).round() as i64) * 100;
        }
    }

    let depots: Vec<Depot> = depot_pos
        .iter()
        .enumerate()
        .map(|(d, &c)| Depot { id: format!("0{}", d + 1), coords: Some(c) })
        .collect();
    let atms: Vec<Atm> = atm_pos
        .iter()
        .enumerate()
        .map(|(a, &c)| {
            let id = format!("{}", a + 1);
            let is_atm2 = a == 1;
            Atm {
                id,
                initial_balance: if is_atm2 { 100 } else { 0 },
                // ATM 2 opens for service at 10h05, forcing a 5-minute wait
                service_window: if is_atm2 { (605, 1200) } else { (480, 1200) },
                service_time_min: 5,
                forecast_withdrawals: vec![if is_atm2 { 50 } else { 0 }],
                total_demand: if is_atm2 { 100 } else { 0 },
                coords: Some(c),
            }
        })
        .collect();
    let vehicles: Vec<Vehicle> = [(1, "01"), (2, "01"), (3, "02"), (4, "03")]
        .iter()
        .map(|&(i, home)| Vehicle {
            id: format!("{i}"),
            home_depot: home.to_string(),
            capacity: 1000,
            cost_per_km: 2,
            speed_kmh: 40.0,
            fixed_trip_cost: 0,
        })
        .collect();

    // travel times: distance-derived at 40 km/h, with vehicle 1's planned
    // route arcs pinned so the clock reads 9h30 / 10h00 / 10h05
    let mut travel: Vec<Minutes> = Vec::with_capacity(vehicles.len() * v * v);
    for veh in &vehicles {
        for i in 0..v {
            for j in 0..v {
                let m = distance_m[i * v + j];
                let minutes = (m as f64 * 60.0 / (veh.speed_kmh * 1000.0) + 0.5).floor() as Minutes;
                travel.push(if i == j { 0 } else { minutes });
            }
        }
    }
    let node = |id: &str| -> usize {
        if let Some(rest) = id.strip_prefix('0') {
            rest.parse::<usize>().unwrap() - 1
        } else {
            3 + id.parse::<usize>().unwrap() - 1
        }
    };
    let mut pin = |h: usize, i: &str, j: &str, minutes: Minutes| {
        travel[h * v * v + node(i) * v + node(j)] = minutes;
    };
    pin(0, "01", "1", 10);
    pin(0, "1", "5", 5);
    pin(0, "5", "2", 5);
    pin(0, "2", "3", 5);
    pin(0, "3", "01", 10);

    Instance::assemble(
        depots,
        atms,
        vehicles,
        1,
        distance_m,
        Some(travel),
        0.05,
        (570, 1050), // vehicles operate from 9h30
        480,
        2_000_000,
        Some(
            "Worked example: ATM 6 belongs to depot 02's area and ATM 16 to depot 01's; \
             nearest-depot assignment reproduces the intended grouping."
                .into(),
        ),
    )
    .expect("fixture construction is static")
}

/// The pinned example plan: vehicle 1 runs 01 -> 1 -> 5 -> 2 -> 3 -> 01
/// departing 9h30 and deposits 100 at ATM 2 (arrival 10h00, service start
/// 10h05); vehicle 4 runs 03 -> 7 -> 9 -> 10 -> 03.
pub fn fig2_plan(inst: &Instance) -> Plan {
    let node = |id: &str| inst.node_ids().position(|n| n == id).unwrap();
    let mut plan = Plan::empty(inst);
    let dep: Minutes = 570;

    let route1: Vec<usize> = ["01", "1", "5", "2", "3", "01"].iter().map(|s| node(s)).collect();
    plan.stop_times[0][0] =
        crate::feasibility::propagate_times(inst, &inst.vehicles[0], &route1, dep).unwrap();
    plan.routes[0][0] = route1;
    plan.departure[0][0] = Some(dep);

    let route4: Vec<usize> = ["03", "7", "9", "10", "03"].iter().map(|s| node(s)).collect();
    plan.stop_times[3][0] =
        crate::feasibility::propagate_times(inst, &inst.vehicles[3], &route4, dep).unwrap();
    plan.routes[3][0] = route4;
    plan.departure[3][0] = Some(dep);

    let deposits: &[(&str, Money)] = &[("2", 100)];
    for &(id, amount) in deposits {
        let a = inst.atms.iter().position(|x| x.id == id).unwrap();
        plan.deposits[a][0] = amount;
    }
    let served: [(&[&str], usize); 2] = [(&["1", "5", "2", "3"], 0), (&["7", "9", "10"], 2)];
    for (route_atms, depot) in served {
        for &id in route_atms {
            let a = inst.atms.iter().position(|x| x.id == id).unwrap();
            plan.depot_assignment[a][0] = vec![depot];
        }
    }
    plan
}
