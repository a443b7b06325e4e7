//! Plan validation against the full constraint set, plus forward time
//! propagation along routes.
//!
//! Sixteen constraint families are checked independently, so a plan that
//! breaches exactly one rule yields exactly one violation of that family.
//! To keep the families independent:
//!
//! * timing consistency (C13) checks the arrival recurrence against the
//!   stored service starts and departure, while service-after-arrival (C6)
//!   and the service window (C7) constrain the service starts themselves;
//! * structural coupling of auxiliary variables (departures, stop timing,
//!   deposits at unvisited machines) lives in C17, and the timing checks
//!   skip entries C17 already reports as missing;
//! * the serving depot for C10 is the visiting vehicle's home depot, so a
//!   wrong route endpoint is flagged by C5 alone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costing::inventory_trajectory;
use crate::model::{Instance, Minutes, Plan, Vehicle};

/// Constraint families, one per rule of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintFamily {
    /// At most one vehicle may visit an ATM per period.
    C3OneVehiclePerAtm,
    /// Deposits carried on a route must fit the vehicle capacity.
    C4VehicleCapacity,
    /// A used vehicle departs from and returns to its home depot.
    C5DepotFlow,
    /// Service may not start before arrival.
    C6ServiceAfterArrival,
    /// Service must start within the ATM's working hours.
    C7ServiceWindow,
    /// Routes are simple: no ATM is visited twice by the same route.
    C8SubtourFree,
    /// Per-period travel time must not exceed the route-time cap.
    C9RouteDuration,
    /// A visited ATM must be assigned to the visiting vehicle's depot.
    C10RouteImpliesAssignment,
    /// An ATM is served by at most one depot per period.
    C11OneDepotPerAtm,
    /// Whole-horizon distance per vehicle must not exceed the cap.
    C12HorizonDistance,
    /// Arrivals must follow the forward time recurrence.
    C13TimingConsistency,
    /// Withdrawals may never exceed the cash available at the machine.
    C14NonnegativeInventory,
    /// Departure no earlier than the depot opening.
    C15DepartAfterOpening,
    /// Departure plus route duration within the depot closing.
    C16ReturnBeforeClosing,
    /// Auxiliary variables must be coupled to the routes.
    C17VariableDomains,
    /// Deposits are nonnegative.
    C18NonnegativeDeposits,
}

impl ConstraintFamily {
    pub const ALL: [ConstraintFamily; 16] = [
        ConstraintFamily::C3OneVehiclePerAtm,
        ConstraintFamily::C4VehicleCapacity,
        ConstraintFamily::C5DepotFlow,
        ConstraintFamily::C6ServiceAfterArrival,
        ConstraintFamily::C7ServiceWindow,
        ConstraintFamily::C8SubtourFree,
        ConstraintFamily::C9RouteDuration,
        ConstraintFamily::C10RouteImpliesAssignment,
        ConstraintFamily::C11OneDepotPerAtm,
        ConstraintFamily::C12HorizonDistance,
        ConstraintFamily::C13TimingConsistency,
        ConstraintFamily::C14NonnegativeInventory,
        ConstraintFamily::C15DepartAfterOpening,
        ConstraintFamily::C16ReturnBeforeClosing,
        ConstraintFamily::C17VariableDomains,
        ConstraintFamily::C18NonnegativeDeposits,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            ConstraintFamily::C3OneVehiclePerAtm => "C3",
            ConstraintFamily::C4VehicleCapacity => "C4",
            ConstraintFamily::C5DepotFlow => "C5",
            ConstraintFamily::C6ServiceAfterArrival => "C6",
            ConstraintFamily::C7ServiceWindow => "C7",
            ConstraintFamily::C8SubtourFree => "C8",
            ConstraintFamily::C9RouteDuration => "C9",
            ConstraintFamily::C10RouteImpliesAssignment => "C10",
            ConstraintFamily::C11OneDepotPerAtm => "C11",
            ConstraintFamily::C12HorizonDistance => "C12",
            ConstraintFamily::C13TimingConsistency => "C13",
            ConstraintFamily::C14NonnegativeInventory => "C14",
            ConstraintFamily::C15DepartAfterOpening => "C15",
            ConstraintFamily::C16ReturnBeforeClosing => "C16",
            ConstraintFamily::C17VariableDomains => "C17",
            ConstraintFamily::C18NonnegativeDeposits => "C18",
        }
    }
}

impl std::fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// Where a violation occurred. `period` is `None` for horizon-wide rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Location {
    Atm { id: String, period: Option<usize> },
    Vehicle { id: String, period: Option<usize> },
    Depot { id: String, period: Option<usize> },
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (kind, id, period) = match self {
            Location::Atm { id, period } => ("atm", id, period),
            Location::Vehicle { id, period } => ("vehicle", id, period),
            Location::Depot { id, period } => ("depot", id, period),
        };
        match period {
            Some(t) => write!(f, "{kind} {id} period {}", t + 1),
            None => write!(f, "{kind} {id} horizon"),
        }
    }
}

/// One constraint breach with its magnitude in the constraint's natural
/// units (VND, km, minutes, or a count).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintFamily,
    pub location: Location,
    pub magnitude: f64,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {} excess={} — {}",
            self.constraint, self.location, self.magnitude, self.message
        )
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RouteError {
    #[error("route must start and end at the vehicle's home depot {home:?}")]
    WrongEndpoints { home: String },
    #[error("route of length 1 cannot both start and end at the depot")]
    TooShort,
    #[error("route interior contains depot node {id:?}")]
    DepotInInterior { id: String },
}

/// Forward time propagation along a route: earliest-start semantics.
///
/// Arrival at the first ATM is `departure + travel(depot, first)`; service
/// starts at `max(arrival, window open)` (waiting is allowed); the next
/// arrival adds service time and travel. Returns one `(arrival,
/// service_start)` pair per interior node; an empty route yields an empty
/// sequence. These are the values a consistent plan stores.
pub fn propagate_times(
    inst: &Instance,
    vehicle: &Vehicle,
    route: &[usize],
    departure: Minutes,
) -> Result<Vec<(Minutes, Minutes)>, RouteError> {
    if route.is_empty() {
        return Ok(Vec::new());
    }
    let h = inst
        .vehicles
        .iter()
        .position(|v| v.id == vehicle.id)
        .expect("vehicle belongs to the instance");
    let home = inst.home_depot_node(h);
    if route.len() < 2 {
        return Err(RouteError::TooShort);
    }
    if route[0] != home || *route.last().unwrap() != home {
        return Err(RouteError::WrongEndpoints { home: inst.node_id(home).to_string() });
    }
    let mut out = Vec::with_capacity(route.len() - 2);
    let mut prev = route[0];
    let mut clock = departure;
    for &node in &route[1..route.len() - 1] {
        let atm = match inst.atm_of_node(node) {
            Some(a) => a,
            None => {
                return Err(RouteError::DepotInInterior { id: inst.node_id(node).to_string() })
            }
        };
        let arrival = clock + inst.travel_time_min(h, prev, node);
        let service_start = arrival.max(inst.atms[atm].service_window.0);
        out.push((arrival, service_start));
        clock = service_start + inst.atms[atm].service_time_min;
        prev = node;
    }
    Ok(out)
}

/// Travel plus service minutes for a route, the duration the depot-window
/// rule bounds. Waiting time is not included.
fn route_duration(inst: &Instance, h: usize, route: &[usize]) -> Minutes {
    let travel: Minutes = route
        .windows(2)
        .map(|w| inst.travel_time_min(h, w[0], w[1]))
        .sum();
    let service: Minutes = route
        .iter()
        .filter_map(|&n| inst.atm_of_node(n))
        .map(|a| inst.atms[a].service_time_min)
        .sum();
    travel + service
}

fn route_travel(inst: &Instance, h: usize, route: &[usize]) -> Minutes {
    route
        .windows(2)
        .map(|w| inst.travel_time_min(h, w[0], w[1]))
        .sum()
}

/// Checks a plan against every constraint family and returns one violation
/// per breach; an empty list means the plan is feasible.
pub fn check_plan(inst: &Instance, plan: &Plan) -> Vec<Violation> {
    let mut out = Vec::new();
    let p = inst.periods;
    let nh = inst.num_vehicles();
    let na = inst.num_atms();

    let atm_loc = |a: usize, t: usize| Location::Atm {
        id: inst.atms[a].id.clone(),
        period: Some(t),
    };
    let veh_loc = |h: usize, t: usize| Location::Vehicle {
        id: inst.vehicles[h].id.clone(),
        period: Some(t),
    };

    // visits[a][t] -> (vehicle, position-in-interior) pairs
    let mut visits: Vec<Vec<Vec<(usize, usize)>>> = vec![vec![Vec::new(); p]; na];
    for h in 0..nh {
        for t in 0..p {
            for (pos, &node) in plan.interior(h, t).iter().enumerate() {
                if let Some(a) = inst.atm_of_node(node) {
                    visits[a][t].push((h, pos));
                }
            }
        }
    }

    // C3: distinct vehicles per ATM per period
    for a in 0..na {
        for t in 0..p {
            let mut vehicles: Vec<usize> = visits[a][t].iter().map(|&(h, _)| h).collect();
            vehicles.dedup();
            vehicles.sort_unstable();
            vehicles.dedup();
            if vehicles.len() > 1 {
                out.push(Violation {
                    constraint: ConstraintFamily::C3OneVehiclePerAtm,
                    location: atm_loc(a, t),
                    magnitude: (vehicles.len() - 1) as f64,
                    message: format!("visited by {} vehicles in one period", vehicles.len()),
                });
            }
        }
    }

    for h in 0..nh {
        let home = inst.home_depot_node(h);
        for t in 0..p {
            let route = &plan.routes[h][t];
            if route.is_empty() {
                continue;
            }

            // C5: endpoints and depot flow
            let mut flow_breaches = 0u32;
            if route.len() < 2 {
                flow_breaches += 1;
            } else {
                if route[0] != home {
                    flow_breaches += 1;
                }
                if *route.last().unwrap() != home {
                    flow_breaches += 1;
                }
            }
            let interior_depots = plan
                .interior(h, t)
                .iter()
                .filter(|&&n| inst.is_depot_node(n))
                .count() as u32;
            flow_breaches += interior_depots;
            if flow_breaches > 0 {
                out.push(Violation {
                    constraint: ConstraintFamily::C5DepotFlow,
                    location: veh_loc(h, t),
                    magnitude: flow_breaches as f64,
                    message: format!(
                        "route must run {home_id} -> ... -> {home_id} with no depot in between",
                        home_id = inst.node_id(home)
                    ),
                });
            }

            // C8: repeated ATM within one route
            let mut counts = std::collections::BTreeMap::new();
            for &node in plan.interior(h, t) {
                if let Some(a) = inst.atm_of_node(node) {
                    *counts.entry(a).or_insert(0u32) += 1;
                }
            }
            for (a, n) in counts {
                if n >= 2 {
                    out.push(Violation {
                        constraint: ConstraintFamily::C8SubtourFree,
                        location: atm_loc(a, t),
                        magnitude: (n - 1) as f64,
                        message: format!("visited {n} times by one route"),
                    });
                }
            }

            // C4: capacity over distinct visited ATMs
            let mut dist_atms: Vec<usize> = plan
                .interior(h, t)
                .iter()
                .filter_map(|&n| inst.atm_of_node(n))
                .collect();
            dist_atms.sort_unstable();
            dist_atms.dedup();
            let load: i64 = dist_atms.iter().map(|&a| plan.deposits[a][t]).sum();
            if load > inst.vehicles[h].capacity {
                out.push(Violation {
                    constraint: ConstraintFamily::C4VehicleCapacity,
                    location: veh_loc(h, t),
                    magnitude: (load - inst.vehicles[h].capacity) as f64,
                    message: format!(
                        "route load {load} exceeds capacity {}",
                        inst.vehicles[h].capacity
                    ),
                });
            }

            // C9: travel time cap
            let travel = route_travel(inst, h, route);
            if travel > inst.max_route_time_min {
                out.push(Violation {
                    constraint: ConstraintFamily::C9RouteDuration,
                    location: veh_loc(h, t),
                    magnitude: (travel - inst.max_route_time_min) as f64,
                    message: format!(
                        "travel time {travel} min exceeds cap {}",
                        inst.max_route_time_min
                    ),
                });
            }

            // C17: departure/timing coupling
            let interior_len = plan.interior(h, t).len();
            if plan.departure[h][t].is_none() {
                out.push(Violation {
                    constraint: ConstraintFamily::C17VariableDomains,
                    location: veh_loc(h, t),
                    magnitude: 1.0,
                    message: "used route has no departure time".into(),
                });
            }
            if plan.stop_times[h][t].len() != interior_len {
                out.push(Violation {
                    constraint: ConstraintFamily::C17VariableDomains,
                    location: veh_loc(h, t),
                    magnitude: 1.0,
                    message: format!(
                        "route has {} stops but {} timing entries",
                        interior_len,
                        plan.stop_times[h][t].len()
                    ),
                });
            }

            // C15/C16: depot operating window (only when departure exists)
            if let Some(u) = plan.departure[h][t] {
                if u < inst.depot_window.0 {
                    out.push(Violation {
                        constraint: ConstraintFamily::C15DepartAfterOpening,
                        location: veh_loc(h, t),
                        magnitude: (inst.depot_window.0 - u) as f64,
                        message: format!(
                            "departure {u} before depot opening {}",
                            inst.depot_window.0
                        ),
                    });
                }
                let duration = route_duration(inst, h, route);
                if u + duration > inst.depot_window.1 {
                    out.push(Violation {
                        constraint: ConstraintFamily::C16ReturnBeforeClosing,
                        location: veh_loc(h, t),
                        magnitude: (u + duration - inst.depot_window.1) as f64,
                        message: format!(
                            "departure {u} plus duration {duration} min passes depot closing {}",
                            inst.depot_window.1
                        ),
                    });
                }
            }

            // C6/C7/C13: per-stop timing, skipping entries C17 reported
            let timed = interior_len.min(plan.stop_times[h][t].len());
            let mut prev_node = route[0];
            for pos in 0..timed {
                let node = plan.interior(h, t)[pos];
                let a = match inst.atm_of_node(node) {
                    Some(a) => a,
                    None => {
                        prev_node = node;
                        continue; // depot in interior: C5's finding
                    }
                };
                let (arrival, start) = plan.stop_times[h][t][pos];
                if start < arrival {
                    out.push(Violation {
                        constraint: ConstraintFamily::C6ServiceAfterArrival,
                        location: atm_loc(a, t),
                        magnitude: (arrival - start) as f64,
                        message: format!("service at {start} before arrival {arrival}"),
                    });
                }
                let (open, close) = inst.atms[a].service_window;
                if start < open {
                    out.push(Violation {
                        constraint: ConstraintFamily::C7ServiceWindow,
                        location: atm_loc(a, t),
                        magnitude: (open - start) as f64,
                        message: format!("service at {start} before window opens at {open}"),
                    });
                } else if start > close {
                    out.push(Violation {
                        constraint: ConstraintFamily::C7ServiceWindow,
                        location: atm_loc(a, t),
                        magnitude: (start - close) as f64,
                        message: format!("service at {start} after window closes at {close}"),
                    });
                }
                // C13: arrival recurrence from departure / previous stop
                let expected = if pos == 0 {
                    plan.departure[h][t].map(|u| u + inst.travel_time_min(h, prev_node, node))
                } else {
                    let (_, prev_start) = plan.stop_times[h][t][pos - 1];
                    let prev_atm = inst.atm_of_node(prev_node);
                    prev_atm.map(|pa| {
                        prev_start
                            + inst.atms[pa].service_time_min
                            + inst.travel_time_min(h, prev_node, node)
                    })
                };
                if let Some(expected) = expected {
                    if arrival != expected {
                        out.push(Violation {
                            constraint: ConstraintFamily::C13TimingConsistency,
                            location: atm_loc(a, t),
                            magnitude: (arrival - expected).abs() as f64,
                            message: format!("arrival {arrival} does not match recurrence {expected}"),
                        });
                    }
                }
                prev_node = node;
            }
        }

        // C12: whole-horizon distance
        let total_m: i64 = (0..p)
            .map(|t| {
                plan.routes[h][t]
                    .windows(2)
                    .map(|w| inst.distance_m(w[0], w[1]))
                    .sum::<i64>()
            })
            .sum();
        if total_m > inst.max_total_distance_m {
            out.push(Violation {
                constraint: ConstraintFamily::C12HorizonDistance,
                location: Location::Vehicle { id: inst.vehicles[h].id.clone(), period: None },
                magnitude: (total_m - inst.max_total_distance_m) as f64 / 1000.0,
                message: format!(
                    "horizon distance {:.1} km exceeds cap {:.1} km",
                    total_m as f64 / 1000.0,
                    inst.max_total_distance_m as f64 / 1000.0
                ),
            });
        }

        // C17: departure set for an unused route
        for t in 0..p {
            if plan.routes[h][t].is_empty() {
                if plan.departure[h][t].is_some() {
                    out.push(Violation {
                        constraint: ConstraintFamily::C17VariableDomains,
                        location: veh_loc(h, t),
                        magnitude: 1.0,
                        message: "unused vehicle has a departure time".into(),
                    });
                }
                if !plan.stop_times[h][t].is_empty() {
                    out.push(Violation {
                        constraint: ConstraintFamily::C17VariableDomains,
                        location: veh_loc(h, t),
                        magnitude: 1.0,
                        message: "unused vehicle has stop timing".into(),
                    });
                }
            }
        }
    }

    // C10/C11: depot assignment coupling
    for a in 0..na {
        for t in 0..p {
            let assigned = &plan.depot_assignment[a][t];
            if assigned.len() > 1 {
                out.push(Violation {
                    constraint: ConstraintFamily::C11OneDepotPerAtm,
                    location: atm_loc(a, t),
                    magnitude: (assigned.len() - 1) as f64,
                    message: format!("assigned to {} depots in one period", assigned.len()),
                });
            }
            let mut serving: Vec<usize> = visits[a][t]
                .iter()
                .map(|&(h, _)| inst.home_depot_idx(h))
                .collect();
            serving.sort_unstable();
            serving.dedup();
            let missing = serving.iter().filter(|d| !assigned.contains(d)).count();
            if missing > 0 {
                out.push(Violation {
                    constraint: ConstraintFamily::C10RouteImpliesAssignment,
                    location: atm_loc(a, t),
                    magnitude: missing as f64,
                    message: "visited without a matching depot assignment".into(),
                });
            }
        }
    }

    // C14: cumulative withdrawals never exceed available cash
    let traj = inventory_trajectory(inst, plan);
    for a in 0..na {
        for t in 0..p {
            let bal = traj.balances[a][t];
            if bal < 0 {
                out.push(Violation {
                    constraint: ConstraintFamily::C14NonnegativeInventory,
                    location: atm_loc(a, t),
                    magnitude: (-bal) as f64,
                    message: format!("cash balance falls to {bal}"),
                });
            }
        }
    }

    // C17 (deposit coupling) and C18 (deposit domain)
    for a in 0..na {
        for t in 0..p {
            let d = plan.deposits[a][t];
            if d < 0 {
                out.push(Violation {
                    constraint: ConstraintFamily::C18NonnegativeDeposits,
                    location: atm_loc(a, t),
                    magnitude: (-d) as f64,
                    message: format!("negative deposit {d}"),
                });
            }
            if d > 0 && visits[a][t].is_empty() {
                out.push(Violation {
                    constraint: ConstraintFamily::C17VariableDomains,
                    location: atm_loc(a, t),
                    magnitude: 1.0,
                    message: format!("deposit {d} without a visit"),
                });
            }
        }
    }

    out
}

/// Explicit subset-based subtour check over all ATM subsets, usable for
/// V <= 10. For every vehicle, period, and subset S of ATMs, the number of
/// traversed arcs with both ends in S must be at most |S| - 1. Returns the
/// ATMs that appear in some over-full subset; must agree with the
/// encoding-based C8 check in `check_plan`.
pub fn subtour_subset_check(inst: &Instance, plan: &Plan) -> Vec<Violation> {
    assert!(inst.num_nodes() <= 10, "subset check is exponential; V <= 10 only");
    let na = inst.num_atms();
    let mut flagged: std::collections::BTreeSet<(usize, usize)> = Default::default();
    for h in 0..inst.num_vehicles() {
        for t in 0..inst.periods {
            let arcs = plan.arcs(h, t);
            for mask in 1u32..(1 << na) {
                let size = mask.count_ones() as usize;
                if size < 2 {
                    continue;
                }
                let inside = |node: usize| {
                    inst.atm_of_node(node)
                        .map(|a| mask & (1 << a) != 0)
                        .unwrap_or(false)
                };
                let count = arcs.iter().filter(|&&(i, j)| inside(i) && inside(j)).count();
                if count > size - 1 {
                    for a in 0..na {
                        if mask & (1 << a) != 0 {
                            let node = inst.atm_node(a);
                            let visits = plan
                                .interior(h, t)
                                .iter()
                                .filter(|&&n| n == node)
                                .count();
                            if visits >= 2 {
                                flagged.insert((a, t));
                            }
                        }
                    }
                }
            }
        }
    }
    flagged
        .into_iter()
        .map(|(a, t)| Violation {
            constraint: ConstraintFamily::C8SubtourFree,
            location: Location::Atm { id: inst.atms[a].id.clone(), period: Some(t) },
            magnitude: 1.0,
            message: "subset relaxation exceeded".into(),
        })
        .collect()
}
