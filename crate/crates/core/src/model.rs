//! Problem and solution data model.
//!
//! Units are fixed across the crate: money is integer VND, time is integer
//! minutes from midnight, distance is stored internally as integer meters
//! (serialized as fractional km). Node indexing is dense: depots first,
//! then ATMs, in instance order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Money in whole VND.
pub type Money = i64;
/// Minutes from midnight (may exceed 1440 while a route is in progress).
pub type Minutes = i64;
/// Distance in meters (1 km = 1000).
pub type Meters = i64;

pub const SCHEMA_VERSION: u32 = 1;

pub fn km_to_meters(km: f64) -> Meters {
    (km * 1000.0 + 0.5).floor() as Meters
}

pub fn meters_to_km(m: Meters) -> f64 {
    m as f64 / 1000.0
}

/// Rounds half-up to the nearest integer (-0.5 rounds to 0).
pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Depot {
    pub id: String,
    /// Opaque planar position, km. Used only by scenario generation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atm {
    pub id: String,
    /// Cash in the machine at the start of period 1, VND.
    pub initial_balance: Money,
    /// Earliest and latest minute at which unloading may begin.
    pub service_window: (Minutes, Minutes),
    /// Minutes spent at the machine once unloading starts.
    pub service_time_min: Minutes,
    /// Forecast withdrawals per period, VND; length equals the horizon.
    pub forecast_withdrawals: Vec<Money>,
    /// Planned replenishment over the whole horizon, VND.
    pub total_demand: Money,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<(f64, f64)>,
}

fn default_speed() -> f64 {
    40.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: String,
    pub home_depot: String,
    /// Maximum cash on board per trip, VND.
    pub capacity: Money,
    /// Driving cost per km, VND.
    pub cost_per_km: Money,
    /// Used to derive travel times when the instance omits them.
    #[serde(default = "default_speed")]
    pub speed_kmh: f64,
    /// Optional fixed cost charged per non-empty route. Defaults to 0 and
    /// is an extension knob, not part of the core cost model.
    #[serde(default)]
    pub fixed_trip_cost: Money,
}

/// Immutable problem input. Construct via [`Instance::assemble`] or
/// [`parse_instance`]; both resolve ids to dense node indices and derive
/// missing travel times from distance and vehicle speed.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub depots: Vec<Depot>,
    pub atms: Vec<Atm>,
    pub vehicles: Vec<Vehicle>,
    /// Number of planning periods (days), >= 1.
    pub periods: usize,
    /// Annual interest rate as a fraction, e.g. 0.05.
    pub interest_rate_annual: f64,
    /// Vehicle operating window at the depots.
    pub depot_window: (Minutes, Minutes),
    /// Per-vehicle per-period travel-time cap, minutes.
    pub max_route_time_min: Minutes,
    /// Per-vehicle whole-horizon distance cap, meters.
    pub max_total_distance_m: Meters,
    /// Free-form note carried through serialization.
    pub notes: Option<String>,
    distance_m: Vec<Meters>,
    travel_time_min: Vec<Minutes>,
    vehicle_home: Vec<usize>,
}

impl Instance {
    /// Builds an instance from parts, resolving vehicle home depots and
    /// deriving the travel-time tensor when `travel_time_min` is `None`.
    /// Structural problems (bad dimensions, unknown depot ids) are hard
    /// errors; value-level invariants are left to [`validate_instance`].
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        depots: Vec<Depot>,
        atms: Vec<Atm>,
        vehicles: Vec<Vehicle>,
        periods: usize,
        distance_m: Vec<Meters>,
        travel_time_min: Option<Vec<Minutes>>,
        interest_rate_annual: f64,
        depot_window: (Minutes, Minutes),
        max_route_time_min: Minutes,
        max_total_distance_m: Meters,
        notes: Option<String>,
    ) -> Result<Instance, ParseError> {
        let v = depots.len() + atms.len();
        if distance_m.len() != v * v {
            return Err(ParseError::Invalid {
                path: "distance_km".into(),
                message: format!(
                    "expected a {v}x{v} matrix, got {} entries",
                    distance_m.len()
                ),
            });
        }
        let mut vehicle_home = Vec::with_capacity(vehicles.len());
        for (h, veh) in vehicles.iter().enumerate() {
            match depots.iter().position(|d| d.id == veh.home_depot) {
                Some(d) => vehicle_home.push(d),
                None => {
                    return Err(ParseError::Invalid {
                        path: format!("vehicles[{h}].home_depot"),
                        message: format!("unknown depot id {:?}", veh.home_depot),
                    })
                }
            }
        }
        let travel_time_min = match travel_time_min {
            Some(t) => {
                if t.len() != vehicles.len() * v * v {
                    return Err(ParseError::Invalid {
                        path: "travel_time_min".into(),
                        message: format!(
                            "expected {}x{v}x{v} entries, got {}",
                            vehicles.len(),
                            t.len()
                        ),
                    });
                }
                t
            }
            None => derive_travel_times(&vehicles, &distance_m, v),
        };
        Ok(Instance {
            depots,
            atms,
            vehicles,
            periods,
            interest_rate_annual,
            depot_window,
            max_route_time_min,
            max_total_distance_m,
            notes,
            distance_m,
            travel_time_min,
            vehicle_home,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.depots.len() + self.atms.len()
    }

    pub fn num_depots(&self) -> usize {
        self.depots.len()
    }

    pub fn num_atms(&self) -> usize {
        self.atms.len()
    }

    pub fn num_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    /// Dense node index of ATM `a` (position in `atms`).
    pub fn atm_node(&self, a: usize) -> usize {
        self.depots.len() + a
    }

    pub fn is_depot_node(&self, node: usize) -> bool {
        node < self.depots.len()
    }

    /// ATM position for a dense node index; `None` for depot nodes.
    pub fn atm_of_node(&self, node: usize) -> Option<usize> {
        node.checked_sub(self.depots.len()).filter(|&a| a < self.atms.len())
    }

    pub fn node_id(&self, node: usize) -> &str {
        if node < self.depots.len() {
            &self.depots[node].id
        } else {
            &self.atms[node - self.depots.len()].id
        }
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.depots
            .iter()
            .map(|d| d.id.as_str())
            .chain(self.atms.iter().map(|a| a.id.as_str()))
    }

    pub fn distance_m(&self, i: usize, j: usize) -> Meters {
        self.distance_m[i * self.num_nodes() + j]
    }

    pub fn distance_km(&self, i: usize, j: usize) -> f64 {
        meters_to_km(self.distance_m(i, j))
    }

    pub fn travel_time_min(&self, h: usize, i: usize, j: usize) -> Minutes {
        let v = self.num_nodes();
        self.travel_time_min[h * v * v + i * v + j]
    }

    /// Depot index a vehicle is homed at.
    pub fn home_depot_idx(&self, h: usize) -> usize {
        self.vehicle_home[h]
    }

    /// Node index of a vehicle's home depot.
    pub fn home_depot_node(&self, h: usize) -> usize {
        self.vehicle_home[h]
    }

    /// Vehicles homed at the given depot, in instance order.
    pub fn vehicles_at_depot(&self, depot: usize) -> Vec<usize> {
        (0..self.vehicles.len())
            .filter(|&h| self.vehicle_home[h] == depot)
            .collect()
    }

    /// Replaces the distance matrix (row-major, meters) and re-derives any
    /// travel times that were distance-derived. Used by matrix ingestion.
    pub fn replace_distances(&mut self, distance_m: Vec<Meters>) -> Result<(), ParseError> {
        let v = self.num_nodes();
        if distance_m.len() != v * v {
            return Err(ParseError::Invalid {
                path: "distance".into(),
                message: format!("expected a {v}x{v} matrix, got {} entries", distance_m.len()),
            });
        }
        self.distance_m = distance_m;
        self.travel_time_min = derive_travel_times(&self.vehicles, &self.distance_m, v);
        Ok(())
    }
}

fn derive_travel_times(vehicles: &[Vehicle], distance_m: &[Meters], v: usize) -> Vec<Minutes> {
    let mut t = Vec::with_capacity(vehicles.len() * v * v);
    for veh in vehicles {
        for i in 0..v {
            for j in 0..v {
                let m = distance_m[i * v + j];
                let minutes = round_half_up(m as f64 * 60.0 / (veh.speed_kmh * 1000.0));
                t.push(if i == j { 0 } else { minutes });
            }
        }
    }
    t
}

/// One instance-level rule breach, reported with the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Defect {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Defect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Checks every instance-level invariant; an empty list means the instance
/// is well formed. Structural shape (matrix arity, id resolution) is already
/// guaranteed by construction and is not re-checked here.
pub fn validate_instance(inst: &Instance) -> Vec<Defect> {
    let mut out = Vec::new();
    let mut push = |path: String, message: String| out.push(Defect { path, message });

    if inst.periods < 1 {
        push("periods".into(), "horizon must have at least one period".into());
    }
    if !(inst.interest_rate_annual >= 0.0) || !inst.interest_rate_annual.is_finite() {
        push(
            "interest_rate_annual".into(),
            format!("must be finite and >= 0, got {}", inst.interest_rate_annual),
        );
    }
    if inst.depot_window.0 >= inst.depot_window.1 {
        push(
            "depot_window".into(),
            format!(
                "degenerate window [{}, {}]",
                inst.depot_window.0, inst.depot_window.1
            ),
        );
    }
    if inst.max_route_time_min < 0 {
        push("max_route_time_min".into(), "must be >= 0".into());
    }
    if inst.max_total_distance_m < 0 {
        push("max_total_distance_km".into(), "must be >= 0".into());
    }

    let v = inst.num_nodes();
    for i in 0..v {
        for j in 0..v {
            let d = inst.distance_m(i, j);
            if i == j && d != 0 {
                push(
                    format!("distance_km[{i}][{j}]"),
                    format!("diagonal must be zero, got {}", meters_to_km(d)),
                );
            }
            if d < 0 {
                push(
                    format!("distance_km[{i}][{j}]"),
                    format!("distance negative at ({i},{j}): {}", meters_to_km(d)),
                );
            }
        }
    }
    for h in 0..inst.num_vehicles() {
        for i in 0..v {
            for j in 0..v {
                let t = inst.travel_time_min(h, i, j);
                if i == j && t != 0 {
                    push(
                        format!("travel_time_min[{h}][{i}][{j}]"),
                        format!("diagonal must be zero, got {t}"),
                    );
                }
                if t < 0 {
                    push(
                        format!("travel_time_min[{h}][{i}][{j}]"),
                        format!("travel time negative: {t}"),
                    );
                }
            }
        }
    }

    let mut seen = std::collections::HashSet::new();
    for id in inst.node_ids() {
        if !seen.insert(id.to_string()) {
            push("ids".into(), format!("duplicate node id {id:?}"));
        }
    }
    let mut veh_seen = std::collections::HashSet::new();
    for veh in &inst.vehicles {
        if !veh_seen.insert(veh.id.clone()) {
            push("vehicles".into(), format!("duplicate vehicle id {:?}", veh.id));
        }
    }

    for (j, atm) in inst.atms.iter().enumerate() {
        let p = format!("atms[{j}]");
        if atm.service_window.0 >= atm.service_window.1 {
            push(
                format!("{p}.service_window"),
                format!(
                    "service_window degenerate: [{}, {}]",
                    atm.service_window.0, atm.service_window.1
                ),
            );
        }
        if atm.service_time_min < 0 {
            push(format!("{p}.service_time_min"), "must be >= 0".into());
        }
        if atm.initial_balance < 0 {
            push(format!("{p}.initial_balance"), "must be >= 0".into());
        }
        if atm.total_demand < 0 {
            push(format!("{p}.total_demand"), "must be >= 0".into());
        }
        if atm.forecast_withdrawals.len() != inst.periods {
            push(
                format!("{p}.forecast_withdrawals"),
                format!(
                    "length {} does not match horizon {}",
                    atm.forecast_withdrawals.len(),
                    inst.periods
                ),
            );
        }
        for (t, &m) in atm.forecast_withdrawals.iter().enumerate() {
            if m < 0 {
                push(
                    format!("{p}.forecast_withdrawals[{t}]"),
                    format!("must be >= 0, got {m}"),
                );
            }
        }
    }

    for (h, veh) in inst.vehicles.iter().enumerate() {
        let p = format!("vehicles[{h}]");
        if veh.capacity <= 0 {
            push(format!("{p}.capacity"), format!("must be > 0, got {}", veh.capacity));
        }
        if veh.cost_per_km < 0 {
            push(format!("{p}.cost_per_km"), "must be >= 0".into());
        }
        if !(veh.speed_kmh > 0.0) {
            push(format!("{p}.speed_kmh"), format!("must be > 0, got {}", veh.speed_kmh));
        }
        if veh.fixed_trip_cost < 0 {
            push(format!("{p}.fixed_trip_cost"), "must be >= 0".into());
        }
    }

    out
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema_version {0}, expected {SCHEMA_VERSION}")]
    SchemaVersion(u32),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("instance defects:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Defects(Vec<Defect>),
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    schema_version: u32,
    periods: usize,
    interest_rate_annual: f64,
    depot_window: (Minutes, Minutes),
    max_route_time_min: Minutes,
    max_total_distance_km: f64,
    depots: Vec<Depot>,
    atms: Vec<Atm>,
    vehicles: Vec<Vehicle>,
    /// V x V, row-major, node order = depots then ATMs.
    distance_km: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    travel_time_min: Option<Vec<Vec<Vec<Minutes>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    notes: Option<String>,
}

/// Parses an instance document, enforcing schema shape and every
/// instance-level invariant. Errors carry a path to the offending field.
pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let doc: InstanceDoc = serde_json::from_str(text)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(ParseError::SchemaVersion(doc.schema_version));
    }
    let v = doc.depots.len() + doc.atms.len();
    if doc.distance_km.len() != v {
        return Err(ParseError::Invalid {
            path: "distance_km".into(),
            message: format!("expected {v} rows, got {}", doc.distance_km.len()),
        });
    }
    let mut distance_m = Vec::with_capacity(v * v);
    for (i, row) in doc.distance_km.iter().enumerate() {
        if row.len() != v {
            return Err(ParseError::Invalid {
                path: format!("distance_km[{i}]"),
                message: format!("expected {v} columns, got {}", row.len()),
            });
        }
        for (j, &km) in row.iter().enumerate() {
            if !km.is_finite() {
                return Err(ParseError::Invalid {
                    path: format!("distance_km[{i}][{j}]"),
                    message: format!("entry must be finite, got {km}"),
                });
            }
            distance_m.push(km_to_meters(km));
        }
    }
    let travel = match &doc.travel_time_min {
        Some(tensor) => {
            if tensor.len() != doc.vehicles.len() {
                return Err(ParseError::Invalid {
                    path: "travel_time_min".into(),
                    message: format!(
                        "expected {} vehicle slices, got {}",
                        doc.vehicles.len(),
                        tensor.len()
                    ),
                });
            }
            let mut flat = Vec::with_capacity(doc.vehicles.len() * v * v);
            for (h, mat) in tensor.iter().enumerate() {
                if mat.len() != v {
                    return Err(ParseError::Invalid {
                        path: format!("travel_time_min[{h}]"),
                        message: format!("expected {v} rows, got {}", mat.len()),
                    });
                }
                for (i, row) in mat.iter().enumerate() {
                    if row.len() != v {
                        return Err(ParseError::Invalid {
                            path: format!("travel_time_min[{h}][{i}]"),
                            message: format!("expected {v} columns, got {}", row.len()),
                        });
                    }
                    flat.extend_from_slice(row);
                }
            }
            Some(flat)
        }
        None => None,
    };
    let inst = Instance::assemble(
        doc.depots,
        doc.atms,
        doc.vehicles,
        doc.periods,
        distance_m,
        travel,
        doc.interest_rate_annual,
        doc.depot_window,
        doc.max_route_time_min,
        km_to_meters(doc.max_total_distance_km),
        doc.notes,
    )?;
    let defects = validate_instance(&inst);
    if !defects.is_empty() {
        return Err(ParseError::Defects(defects));
    }
    Ok(inst)
}

/// Serializes an instance to its document form. `parse_instance` of the
/// output reproduces the instance field-for-field.
pub fn serialize_instance(inst: &Instance) -> String {
    let v = inst.num_nodes();
    let distance_km = (0..v)
        .map(|i| (0..v).map(|j| inst.distance_km(i, j)).collect())
        .collect();
    let travel_time_min = Some(
        (0..inst.num_vehicles())
            .map(|h| {
                (0..v)
                    .map(|i| (0..v).map(|j| inst.travel_time_min(h, i, j)).collect())
                    .collect()
            })
            .collect(),
    );
    let doc = InstanceDoc {
        schema_version: SCHEMA_VERSION,
        periods: inst.periods,
        interest_rate_annual: inst.interest_rate_annual,
        depot_window: inst.depot_window,
        max_route_time_min: inst.max_route_time_min,
        max_total_distance_km: meters_to_km(inst.max_total_distance_m),
        depots: inst.depots.clone(),
        atms: inst.atms.clone(),
        vehicles: inst.vehicles.clone(),
        distance_km,
        travel_time_min,
        notes: inst.notes.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("instance serialization cannot fail")
}

/// A complete multi-period solution.
///
/// Routes are full node sequences including both depot endpoints; an empty
/// sequence means the vehicle is unused that period (the `z` flag is derived
/// from this). `stop_times` holds one `(arrival, service_start)` pair per
/// interior route node. `depot_assignment` lists the serving depot(s) per
/// ATM and period; a well-formed plan has at most one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    /// `[vehicle][period]` -> node sequence (depot, atms..., depot) or empty.
    pub routes: Vec<Vec<Vec<usize>>>,
    /// `[atm][period]` -> serving depot indices.
    pub depot_assignment: Vec<Vec<Vec<usize>>>,
    /// `[atm][period]` -> deposit amount, VND.
    pub deposits: Vec<Vec<Money>>,
    /// `[vehicle][period]` -> departure minute, present iff the route is used.
    pub departure: Vec<Vec<Option<Minutes>>>,
    /// `[vehicle][period]` -> per interior stop `(arrival, service_start)`.
    pub stop_times: Vec<Vec<Vec<(Minutes, Minutes)>>>,
}

impl Plan {
    pub fn empty(inst: &Instance) -> Plan {
        let h = inst.num_vehicles();
        let a = inst.num_atms();
        let p = inst.periods;
        Plan {
            routes: vec![vec![Vec::new(); p]; h],
            depot_assignment: vec![vec![Vec::new(); p]; a],
            deposits: vec![vec![0; p]; a],
            departure: vec![vec![None; p]; h],
            stop_times: vec![vec![Vec::new(); p]; h],
        }
    }

    /// True when vehicle `h` runs a route in period `t`.
    pub fn route_used(&self, h: usize, t: usize) -> bool {
        !self.routes[h][t].is_empty()
    }

    /// Interior (ATM) portion of a route; empty when unused.
    pub fn interior<'a>(&'a self, h: usize, t: usize) -> &'a [usize] {
        let r = &self.routes[h][t];
        if r.len() <= 2 {
            &[]
        } else {
            &r[1..r.len() - 1]
        }
    }

    /// Directed arcs traversed by vehicle `h` in period `t`.
    pub fn arcs(&self, h: usize, t: usize) -> Vec<(usize, usize)> {
        self.routes[h][t].windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Number of non-empty (vehicle, period) routes.
    pub fn trips(&self) -> u32 {
        self.routes
            .iter()
            .flat_map(|per| per.iter())
            .filter(|r| !r.is_empty())
            .count() as u32
    }
}

#[derive(Serialize, Deserialize)]
struct VehicleRoutesDoc {
    vehicle: String,
    by_period: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct AtmSeriesDoc<T> {
    atm: String,
    by_period: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct StopDoc {
    node: String,
    arrival: Minutes,
    service_start: Minutes,
}

#[derive(Serialize, Deserialize)]
struct VehicleTimingDoc {
    vehicle: String,
    by_period: Vec<Option<PeriodTimingDoc>>,
}

#[derive(Serialize, Deserialize)]
struct PeriodTimingDoc {
    departure: Minutes,
    stops: Vec<StopDoc>,
}

#[derive(Serialize, Deserialize)]
struct PlanDoc {
    schema_version: u32,
    routes: Vec<VehicleRoutesDoc>,
    deposits: Vec<AtmSeriesDoc<Money>>,
    depot_assignment: Vec<AtmSeriesDoc<Vec<String>>>,
    timing: Vec<VehicleTimingDoc>,
}

/// Parses a plan document against its instance, resolving node and vehicle
/// ids to dense indices. Unknown ids and arity mismatches are errors.
pub fn parse_plan(inst: &Instance, text: &str) -> Result<Plan, ParseError> {
    let doc: PlanDoc = serde_json::from_str(text)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(ParseError::SchemaVersion(doc.schema_version));
    }
    let node_index = |id: &str, path: &str| -> Result<usize, ParseError> {
        inst.node_ids()
            .position(|n| n == id)
            .ok_or_else(|| ParseError::Invalid {
                path: path.to_string(),
                message: format!("unknown node id {id:?}"),
            })
    };
    let mut plan = Plan::empty(inst);

    for (k, vr) in doc.routes.iter().enumerate() {
        let h = inst
            .vehicles
            .iter()
            .position(|v| v.id == vr.vehicle)
            .ok_or_else(|| ParseError::Invalid {
                path: format!("routes[{k}].vehicle"),
                message: format!("unknown vehicle id {:?}", vr.vehicle),
            })?;
        if vr.by_period.len() != inst.periods {
            return Err(ParseError::Invalid {
                path: format!("routes[{k}].by_period"),
                message: format!(
                    "expected {} periods, got {}",
                    inst.periods,
                    vr.by_period.len()
                ),
            });
        }
        for (t, seq) in vr.by_period.iter().enumerate() {
            let mut nodes = Vec::with_capacity(seq.len());
            for id in seq {
                nodes.push(node_index(id, &format!("routes[{k}].by_period[{t}]"))?);
            }
            plan.routes[h][t] = nodes;
        }
    }

    for (k, ds) in doc.deposits.iter().enumerate() {
        let a = inst
            .atms
            .iter()
            .position(|x| x.id == ds.atm)
            .ok_or_else(|| ParseError::Invalid {
                path: format!("deposits[{k}].atm"),
                message: format!("unknown ATM id {:?}", ds.atm),
            })?;
        if ds.by_period.len() != inst.periods {
            return Err(ParseError::Invalid {
                path: format!("deposits[{k}].by_period"),
                message: format!("expected {} periods, got {}", inst.periods, ds.by_period.len()),
            });
        }
        plan.deposits[a] = ds.by_period.clone();
    }

    for (k, da) in doc.depot_assignment.iter().enumerate() {
        let a = inst
            .atms
            .iter()
            .position(|x| x.id == da.atm)
            .ok_or_else(|| ParseError::Invalid {
                path: format!("depot_assignment[{k}].atm"),
                message: format!("unknown ATM id {:?}", da.atm),
            })?;
        if da.by_period.len() != inst.periods {
            return Err(ParseError::Invalid {
                path: format!("depot_assignment[{k}].by_period"),
                message: format!("expected {} periods, got {}", inst.periods, da.by_period.len()),
            });
        }
        for (t, ids) in da.by_period.iter().enumerate() {
            let mut depots = Vec::with_capacity(ids.len());
            for id in ids {
                let d = inst
                    .depots
                    .iter()
                    .position(|x| &x.id == id)
                    .ok_or_else(|| ParseError::Invalid {
                        path: format!("depot_assignment[{k}].by_period[{t}]"),
                        message: format!("unknown depot id {id:?}"),
                    })?;
                depots.push(d);
            }
            plan.depot_assignment[a][t] = depots;
        }
    }

    for (k, vt) in doc.timing.iter().enumerate() {
        let h = inst
            .vehicles
            .iter()
            .position(|v| v.id == vt.vehicle)
            .ok_or_else(|| ParseError::Invalid {
                path: format!("timing[{k}].vehicle"),
                message: format!("unknown vehicle id {:?}", vt.vehicle),
            })?;
        if vt.by_period.len() != inst.periods {
            return Err(ParseError::Invalid {
                path: format!("timing[{k}].by_period"),
                message: format!("expected {} periods, got {}", inst.periods, vt.by_period.len()),
            });
        }
        for (t, entry) in vt.by_period.iter().enumerate() {
            if let Some(pt) = entry {
                plan.departure[h][t] = Some(pt.departure);
                plan.stop_times[h][t] = pt
                    .stops
                    .iter()
                    .map(|s| (s.arrival, s.service_start))
                    .collect();
            }
        }
    }

    Ok(plan)
}

pub fn serialize_plan(inst: &Instance, plan: &Plan) -> String {
    let routes = inst
        .vehicles
        .iter()
        .enumerate()
        .map(|(h, v)| VehicleRoutesDoc {
            vehicle: v.id.clone(),
            by_period: (0..inst.periods)
                .map(|t| {
                    plan.routes[h][t]
                        .iter()
                        .map(|&n| inst.node_id(n).to_string())
                        .collect()
                })
                .collect(),
        })
        .collect();
    let deposits = inst
        .atms
        .iter()
        .enumerate()
        .map(|(a, atm)| AtmSeriesDoc {
            atm: atm.id.clone(),
            by_period: plan.deposits[a].clone(),
        })
        .collect();
    let depot_assignment = inst
        .atms
        .iter()
        .enumerate()
        .map(|(a, atm)| AtmSeriesDoc {
            atm: atm.id.clone(),
            by_period: (0..inst.periods)
                .map(|t| {
                    plan.depot_assignment[a][t]
                        .iter()
                        .map(|&d| inst.depots[d].id.clone())
                        .collect()
                })
                .collect(),
        })
        .collect();
    let timing = inst
        .vehicles
        .iter()
        .enumerate()
        .map(|(h, v)| VehicleTimingDoc {
            vehicle: v.id.clone(),
            by_period: (0..inst.periods)
                .map(|t| {
                    plan.departure[h][t].map(|departure| PeriodTimingDoc {
                        departure,
                        stops: plan
                            .interior(h, t)
                            .iter()
                            .zip(&plan.stop_times[h][t])
                            .map(|(&n, &(arrival, service_start))| StopDoc {
                                node: inst.node_id(n).to_string(),
                                arrival,
                                service_start,
                            })
                            .collect(),
                    })
                })
                .collect(),
        })
        .collect();
    let doc = PlanDoc {
        schema_version: SCHEMA_VERSION,
        routes,
        deposits,
        depot_assignment,
        timing,
    };
    serde_json::to_string_pretty(&doc).expect("plan serialization cannot fail")
}

/// Plan evaluation summary for one weight pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Distance-proportional operating cost (plus any fixed trip costs), VND.
    pub transport_cost_vnd: Money,
    /// Interest on end-of-period cash balances, VND.
    pub financial_cost_vnd: Money,
    /// w1 * transport + w2 * financial, rounded half-up to whole VND.
    pub aggregate_cost_vnd: Money,
    /// Non-empty (vehicle, period) routes.
    pub trips: u32,
    pub total_km: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_doc() -> String {
        r#"{
            "schema_version": 1,
            "periods": 1,
            "interest_rate_annual": 0.05,
            "depot_window": [510, 1050],
            "max_route_time_min": 480,
            "max_total_distance_km": 500.0,
            "depots": [{"id": "01"}],
            "atms": [{
                "id": "1",
                "initial_balance": 100,
                "service_window": [540, 1200],
                "service_time_min": 10,
                "forecast_withdrawals": [50],
                "total_demand": 200
            }],
            "vehicles": [{
                "id": "1",
                "home_depot": "01",
                "capacity": 1000,
                "cost_per_km": 2
            }],
            "distance_km": [[0.0, 5.0], [5.0, 0.0]]
        }"#
        .to_string()
    }

    #[test]
    fn parses_minimal_instance() {
        let inst = parse_instance(&minimal_doc()).unwrap();
        assert_eq!(inst.num_nodes(), 2);
        assert_eq!(inst.distance_m(0, 1), 5000);
        assert_eq!(inst.vehicles[0].speed_kmh, 40.0);
        // derived travel time: 5 km at 40 km/h = 7.5 min -> 8
        assert_eq!(inst.travel_time_min(0, 0, 1), 8);
        assert_eq!(inst.travel_time_min(0, 1, 1), 0);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let doc = minimal_doc().replace(
            "[[0.0, 5.0], [5.0, 0.0]]",
            "[[0.0, 5.0, 1.0], [5.0, 0.0, 1.0], [1.0, 1.0, 0.0]]",
        );
        let err = parse_instance(&doc).unwrap_err();
        match err {
            ParseError::Invalid { path, .. } => assert_eq!(path, "distance_km"),
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_home_depot() {
        let doc = minimal_doc().replace("\"home_depot\": \"01\"", "\"home_depot\": \"02\"");
        let err = parse_instance(&doc).unwrap_err();
        match err {
            ParseError::Invalid { path, .. } => assert_eq!(path, "vehicles[0].home_depot"),
            other => panic!("expected home depot error, got {other:?}"),
        }
    }

    #[test]
    fn validate_flags_degenerate_window() {
        let mut inst = parse_instance(&minimal_doc()).unwrap();
        inst.atms[0].service_window = (600, 600);
        let defects = validate_instance(&inst);
        assert!(defects.iter().any(|d| d.message.contains("service_window degenerate")));
    }

    #[test]
    fn validate_flags_negative_distance() {
        let doc = minimal_doc().replace("[[0.0, 5.0], [5.0, 0.0]]", "[[0.0, -1.0], [5.0, 0.0]]");
        let err = parse_instance(&doc).unwrap_err();
        match err {
            ParseError::Defects(ds) => {
                assert!(ds.iter().any(|d| d.message.contains("distance negative at (0,1)")))
            }
            other => panic!("expected defects, got {other:?}"),
        }
    }

    #[test]
    fn instance_round_trips() {
        let inst = parse_instance(&minimal_doc()).unwrap();
        let text = serialize_instance(&inst);
        let again = parse_instance(&text).unwrap();
        assert_eq!(inst, again);
        // serialization is stable once normalized
        assert_eq!(text, serialize_instance(&again));
    }

    #[test]
    fn plan_round_trips() {
        let inst = parse_instance(&minimal_doc()).unwrap();
        let mut plan = Plan::empty(&inst);
        plan.routes[0][0] = vec![0, 1, 0];
        plan.depot_assignment[0][0] = vec![0];
        plan.deposits[0][0] = 100;
        plan.departure[0][0] = Some(510);
        plan.stop_times[0][0] = vec![(518, 540)];
        let text = serialize_plan(&inst, &plan);
        let again = parse_plan(&inst, &text).unwrap();
        assert_eq!(plan, again);
    }

    #[test]
    fn plan_rejects_unknown_node() {
        let inst = parse_instance(&minimal_doc()).unwrap();
        let mut plan = Plan::empty(&inst);
        plan.routes[0][0] = vec![0, 1, 0];
        let text = serialize_plan(&inst, &plan).replace("\"1\",", "\"99\",");
        assert!(parse_plan(&inst, &text).is_err());
    }

    #[test]
    fn arcs_match_route_sequence() {
        let inst = parse_instance(&minimal_doc()).unwrap();
        let mut plan = Plan::empty(&inst);
        plan.routes[0][0] = vec![0, 1, 0];
        assert_eq!(plan.arcs(0, 0), vec![(0, 1), (1, 0)]);
        assert_eq!(plan.interior(0, 0), &[1]);
        assert_eq!(plan.trips(), 1);
    }

    #[test]
    fn round_half_up_behaviour() {
        assert_eq!(round_half_up(2.5), 3);
        assert_eq!(round_half_up(2.4999), 2);
        assert_eq!(round_half_up(-0.5), 0);
        assert_eq!(round_half_up(-0.6), -1);
    }
}
