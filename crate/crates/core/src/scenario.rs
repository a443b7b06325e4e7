//! Simulated instance generation and external distance-matrix ingestion.
//!
//! Generation places depots and ATMs uniformly in a square service area,
//! rounds Euclidean distances to 0.1 km, draws each ATM's horizon demand
//! from a configured range and spreads its withdrawals over the horizon by
//! profile. The initial machine balance covers exactly the first day, so
//! replenishment activity always falls inside the horizon. Everything is
//! deterministic per seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Atm, Depot, Instance, Meters, Minutes, Money, Vehicle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WithdrawalProfile {
    /// Near-equal withdrawals every day.
    Uniform,
    /// Heavier withdrawals early in the horizon.
    Frontloaded,
    /// Sixth and seventh day of each week withdraw double.
    WeekendSpike,
}

fn default_vehicle_capacity() -> Money {
    20_000_000_000
}
fn default_cost_per_km() -> Money {
    15_000
}
fn default_speed() -> f64 {
    40.0
}
fn default_service_time() -> Minutes {
    10
}
fn default_atm_window() -> (Minutes, Minutes) {
    (540, 1200) // 9h00 - 20h00
}
fn default_depot_window() -> (Minutes, Minutes) {
    (510, 1050) // 8h30 - 17h30
}
fn default_max_route_time() -> Minutes {
    480
}
fn default_max_total_distance() -> f64 {
    2_000.0
}

/// Knobs for the simulated-instance generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub n_atms: usize,
    pub n_depots: usize,
    pub vehicles_per_depot: usize,
    pub periods: usize,
    /// Horizon replenishment demand per ATM, VND (inclusive range).
    pub total_demand_range: (Money, Money),
    /// Admissible single-deposit bounds, VND; carried into split policies.
    pub per_deposit_range: (Money, Money),
    pub interest_rate: f64,
    /// Side of the square service area, km.
    pub area_extent_km: f64,
    pub withdrawal_profile: WithdrawalProfile,
    pub seed: u64,
    #[serde(default = "default_vehicle_capacity")]
    pub vehicle_capacity: Money,
    #[serde(default = "default_cost_per_km")]
    pub vehicle_cost_per_km: Money,
    #[serde(default = "default_speed")]
    pub vehicle_speed_kmh: f64,
    #[serde(default = "default_service_time")]
    pub service_time_min: Minutes,
    #[serde(default = "default_atm_window")]
    pub atm_window: (Minutes, Minutes),
    #[serde(default = "default_depot_window")]
    pub depot_window: (Minutes, Minutes),
    #[serde(default = "default_max_route_time")]
    pub max_route_time_min: Minutes,
    #[serde(default = "default_max_total_distance")]
    pub max_total_distance_km: f64,
}

impl ScenarioParams {
    /// The experiment shape used throughout the comparison runs: two
    /// depots, two vehicles each, a seven-day horizon, 2.5-3.5 billion VND
    /// per ATM and 5%/year interest.
    pub fn table_shape(n_atms: usize, seed: u64) -> ScenarioParams {
        ScenarioParams {
            n_atms,
            n_depots: 2,
            vehicles_per_depot: 2,
            periods: 7,
            total_demand_range: (2_500_000_000, 3_500_000_000),
            per_deposit_range: (1_000_000_000, 1_400_000_000),
            interest_rate: 0.05,
            area_extent_km: 30.0,
            withdrawal_profile: WithdrawalProfile::Uniform,
            seed,
            vehicle_capacity: default_vehicle_capacity(),
            vehicle_cost_per_km: default_cost_per_km(),
            vehicle_speed_kmh: default_speed(),
            service_time_min: default_service_time(),
            atm_window: default_atm_window(),
            depot_window: default_depot_window(),
            max_route_time_min: default_max_route_time(),
            max_total_distance_km: default_max_total_distance(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_atms < 1 || self.n_depots < 1 || self.vehicles_per_depot < 1 {
            return Err(ScenarioError::BadParams("counts must be >= 1".into()));
        }
        if self.periods < 1 {
            return Err(ScenarioError::BadParams("periods must be >= 1".into()));
        }
        if self.total_demand_range.0 > self.total_demand_range.1
            || self.total_demand_range.0 <= 0
        {
            return Err(ScenarioError::BadParams("empty total_demand_range".into()));
        }
        if self.per_deposit_range.0 > self.per_deposit_range.1 || self.per_deposit_range.0 <= 0 {
            return Err(ScenarioError::BadParams("empty per_deposit_range".into()));
        }
        if !(self.area_extent_km > 0.0) {
            return Err(ScenarioError::BadParams("area_extent_km must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario parameters: {0}")]
    BadParams(String),
    #[error("distance table: {0}")]
    Distance(String),
}

/// Integer apportionment of `total` over weights by largest remainder, so
/// the parts sum exactly to `total`.
fn apportion(total: Money, weights: &[f64]) -> Vec<Money> {
    let wsum: f64 = weights.iter().sum();
    let mut parts: Vec<Money> = Vec::with_capacity(weights.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(weights.len());
    let mut assigned: Money = 0;
    for (i, &w) in weights.iter().enumerate() {
        let exact = total as f64 * w / wsum;
        let floor = exact.floor() as Money;
        parts.push(floor);
        assigned += floor;
        remainders.push((i, exact - floor as f64));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut leftover = total - assigned;
    for &(i, _) in &remainders {
        if leftover == 0 {
            break;
        }
        parts[i] += 1;
        leftover -= 1;
    }
    parts
}

fn profile_weights(profile: WithdrawalProfile, p: usize) -> Vec<f64> {
    match profile {
        WithdrawalProfile::Uniform => vec![1.0; p],
        WithdrawalProfile::Frontloaded => (0..p).map(|t| (p - t) as f64).collect(),
        WithdrawalProfile::WeekendSpike => (0..p)
            .map(|t| if t % 7 == 5 || t % 7 == 6 { 2.0 } else { 1.0 })
            .collect(),
    }
}

/// Generates a simulated instance. The same parameters (seed included)
/// produce a byte-identical serialized instance.
pub fn generate_scenario(params: &ScenarioParams) -> Result<Instance, ScenarioError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let extent = params.area_extent_km;
    let n = params.n_depots + params.n_atms;

    let positions: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen::<f64>() * extent, rng.gen::<f64>() * extent))
        .collect();
    let mut distance_m = vec![0i64; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dx = positions[i].0 - positions[j].0;
            let dy = positions[i].1 - positions[j].1;
            let km = (dx * dx + dy * dy).sqrt();
            // 0.1 km grid, symmetric by construction
            distance_m[i * n + j] = ((km * 10.0).round() as Meters) * 100;
        }
    }

    let depots: Vec<Depot> = (0..params.n_depots)
        .map(|d| Depot { id: format!("0{}", d + 1), coords: Some(positions[d]) })
        .collect();

    let weights = profile_weights(params.withdrawal_profile, params.periods);
    let atms: Vec<Atm> = (0..params.n_atms)
        .map(|a| {
            let total =
                rng.gen_range(params.total_demand_range.0..=params.total_demand_range.1);
            let withdrawals = apportion(total, &weights);
            Atm {
                id: format!("{}", a + 1),
                initial_balance: withdrawals[0],
                service_window: params.atm_window,
                service_time_min: params.service_time_min,
                forecast_withdrawals: withdrawals,
                total_demand: total,
                coords: Some(positions[params.n_depots + a]),
            }
        })
        .collect();

    let vehicles: Vec<Vehicle> = (0..params.n_depots)
        .flat_map(|d| {
            (0..params.vehicles_per_depot).map(move |k| (d, d * params.vehicles_per_depot + k))
        })
        .map(|(d, i)| Vehicle {
            id: format!("{}", i + 1),
            home_depot: format!("0{}", d + 1),
            capacity: params.vehicle_capacity,
            cost_per_km: params.vehicle_cost_per_km,
            speed_kmh: params.vehicle_speed_kmh,
            fixed_trip_cost: 0,
        })
        .collect();

    Instance::assemble(
        depots,
        atms,
        vehicles,
        params.periods,
        distance_m,
        None,
        params.interest_rate,
        params.depot_window,
        params.max_route_time_min,
        crate::model::km_to_meters(params.max_total_distance_km),
        None,
    )
    .map_err(|e| ScenarioError::BadParams(e.to_string()))
}

/// Parses a comma-delimited distance table (km) with a header row of node
/// ids and replaces the instance's distances.
///
/// The header must name every instance node exactly once; rows follow the
/// header order and are remapped to instance order. Asymmetric tables are
/// accepted; the diagonal is forced to zero. Negative, NaN or infinite
/// entries and dimension mismatches are rejected with the offending cell.
pub fn ingest_distance_matrix(inst: &mut Instance, text: &str) -> Result<(), ScenarioError> {
    let v = inst.num_nodes();
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| ScenarioError::Distance("empty table".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if header.len() != v {
        return Err(ScenarioError::Distance(format!(
            "header names {} nodes, instance has {v}",
            header.len()
        )));
    }
    // header id -> instance node index
    let mut order = Vec::with_capacity(v);
    for id in &header {
        let idx = inst
            .node_ids()
            .position(|n| n == id)
            .ok_or_else(|| ScenarioError::Distance(format!("unknown node id {id:?} in header")))?;
        if order.contains(&idx) {
            return Err(ScenarioError::Distance(format!("duplicate node id {id:?} in header")));
        }
        order.push(idx);
    }

    let mut matrix = vec![0i64; v * v];
    let mut rows = 0usize;
    for (r, line) in lines.enumerate() {
        if r >= v {
            rows += 1;
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
        if cells.len() != v {
            return Err(ScenarioError::Distance(format!(
                "row {} has {} columns, expected {v}",
                r + 1,
                cells.len()
            )));
        }
        for (c, cell) in cells.iter().enumerate() {
            let km: f64 = cell.parse().map_err(|_| {
                ScenarioError::Distance(format!("row {}, column {}: not a number: {cell:?}", r + 1, c + 1))
            })?;
            if !km.is_finite() {
                return Err(ScenarioError::Distance(format!(
                    "row {}, column {}: entry must be finite, got {km}",
                    r + 1,
                    c + 1
                )));
            }
            if km < 0.0 {
                return Err(ScenarioError::Distance(format!(
                    "row {}, column {}: negative distance {km}",
                    r + 1,
                    c + 1
                )));
            }
            let (i, j) = (order[r], order[c]);
            matrix[i * v + j] = if i == j { 0 } else { crate::model::km_to_meters(km) };
        }
        rows += 1;
    }
    if rows != v {
        return Err(ScenarioError::Distance(format!("table has {rows} rows, expected {v}")));
    }
    inst.replace_distances(matrix)
        .map_err(|e| ScenarioError::Distance(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{serialize_instance, validate_instance};

    #[test]
    fn table_shape_is_clean_and_sized() {
        let inst = generate_scenario(&ScenarioParams::table_shape(28, 1)).unwrap();
        assert_eq!(inst.num_nodes(), 30);
        assert_eq!(inst.num_vehicles(), 4);
        assert!(validate_instance(&inst).is_empty());
    }

    #[test]
    fn larger_shape_is_clean() {
        let inst = generate_scenario(&ScenarioParams::table_shape(58, 2)).unwrap();
        assert_eq!(inst.num_nodes(), 60);
        assert!(validate_instance(&inst).is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_scenario(&ScenarioParams::table_shape(28, 5)).unwrap();
        let b = generate_scenario(&ScenarioParams::table_shape(28, 5)).unwrap();
        assert_eq!(serialize_instance(&a), serialize_instance(&b));
    }

    #[test]
    fn withdrawals_sum_to_demand() {
        for profile in [
            WithdrawalProfile::Uniform,
            WithdrawalProfile::Frontloaded,
            WithdrawalProfile::WeekendSpike,
        ] {
            let mut params = ScenarioParams::table_shape(10, 3);
            params.withdrawal_profile = profile;
            let inst = generate_scenario(&params).unwrap();
            for atm in &inst.atms {
                let sum: Money = atm.forecast_withdrawals.iter().sum();
                assert_eq!(sum, atm.total_demand);
                assert!(atm.total_demand >= params.total_demand_range.0);
                assert!(atm.total_demand <= params.total_demand_range.1);
            }
        }
    }

    #[test]
    fn uniform_profile_is_flat() {
        let inst = generate_scenario(&ScenarioParams::table_shape(12, 4)).unwrap();
        for atm in &inst.atms {
            let max = atm.forecast_withdrawals.iter().max().unwrap();
            let min = atm.forecast_withdrawals.iter().min().unwrap();
            assert!(max - min <= 1, "uniform spread too wide: {:?}", atm.forecast_withdrawals);
        }
    }

    #[test]
    fn initial_balance_covers_day_one() {
        let inst = generate_scenario(&ScenarioParams::table_shape(6, 9)).unwrap();
        for atm in &inst.atms {
            assert_eq!(atm.initial_balance, atm.forecast_withdrawals[0]);
        }
    }

    #[test]
    fn ingest_asymmetric_table() {
        let mut params = ScenarioParams::table_shape(1, 0);
        params.n_depots = 1;
        let mut inst = generate_scenario(&params).unwrap();
        ingest_distance_matrix(&mut inst, "01,1\n0,5\n4,0\n").unwrap();
        assert_eq!(inst.distance_m(0, 1), 5000);
        assert_eq!(inst.distance_m(1, 0), 4000);
    }

    #[test]
    fn ingest_rejects_wrong_dimension() {
        let mut inst = generate_scenario(&ScenarioParams::table_shape(2, 0)).unwrap();
        let err = ingest_distance_matrix(&mut inst, "01,02,1\n0,1,2\n1,0,3\n2,3,0\n").unwrap_err();
        assert!(err.to_string().contains("header names 3 nodes, instance has 4"));
    }

    #[test]
    fn ingest_rejects_negative_entry_by_cell() {
        let mut params = ScenarioParams::table_shape(1, 0);
        params.n_depots = 1;
        let mut inst = generate_scenario(&params).unwrap();
        let err = ingest_distance_matrix(&mut inst, "01,1\n0,5\n-4,0\n").unwrap_err();
        assert!(err.to_string().contains("row 2, column 1"), "{err}");
    }

    #[test]
    fn ingest_forces_zero_diagonal() {
        let mut params = ScenarioParams::table_shape(1, 0);
        params.n_depots = 1;
        let mut inst = generate_scenario(&params).unwrap();
        ingest_distance_matrix(&mut inst, "01,1\n9,5\n4,9\n").unwrap();
        assert_eq!(inst.distance_m(0, 0), 0);
        assert_eq!(inst.distance_m(1, 1), 0);
    }
}
