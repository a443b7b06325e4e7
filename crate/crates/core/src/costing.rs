//! Objective evaluation: transport cost, financial (inventory interest)
//! cost, and the cash-balance trajectory the financial cost is built on.
//!
//! All evaluation is total: infeasible plans (negative balances, overloaded
//! routes) still get a cost so search can traverse them under penalties.
//! Money stays in integer VND; arc costs are accumulated in milli-VND
//! (cost_per_km * meters) and rounded half-up once per plan, and the daily
//! interest factor is applied last, rounded half-up to whole VND.

use serde::{Deserialize, Serialize};

use crate::model::{round_half_up, CostBreakdown, Instance, Money, Plan};

/// Objective weights `(transport, financial)`. Both nonnegative, not both
/// zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub transport: f64,
    pub financial: f64,
}

impl Weights {
    pub fn new(transport: f64, financial: f64) -> Result<Weights, WeightError> {
        if !(transport >= 0.0) || !(financial >= 0.0) {
            return Err(WeightError::Negative);
        }
        if transport == 0.0 && financial == 0.0 {
            return Err(WeightError::BothZero);
        }
        Ok(Weights { transport, financial })
    }
}

impl Default for Weights {
    fn default() -> Self {
        // equal weighting: total cost = transport + financial
        Weights { transport: 1.0, financial: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum WeightError {
    #[error("objective weights must be >= 0")]
    Negative,
    #[error("objective weights must not both be zero")]
    BothZero,
}

/// End-of-period cash balances per ATM: `B[j][t] = I0 + sum_{k<=t} (d - m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InventoryTrajectory {
    pub balances: Vec<Vec<Money>>,
}

impl InventoryTrajectory {
    /// Sum of all end-of-period balances, the quantity the financial cost
    /// scales by the daily interest rate.
    pub fn balance_sum(&self) -> i128 {
        self.balances
            .iter()
            .flat_map(|row| row.iter())
            .map(|&b| b as i128)
            .sum()
    }
}

/// Recomputes the balance recurrence from instance and plan alone. Negative
/// balances are reported as-is; rejecting them is the feasibility module's
/// job.
pub fn inventory_trajectory(inst: &Instance, plan: &Plan) -> InventoryTrajectory {
    let balances = inst
        .atms
        .iter()
        .enumerate()
        .map(|(j, atm)| {
            let mut bal = atm.initial_balance;
            (0..inst.periods)
                .map(|t| {
                    bal += plan.deposits[j][t] - atm.forecast_withdrawals[t];
                    bal
                })
                .collect()
        })
        .collect();
    InventoryTrajectory { balances }
}

/// Exact transport cost of one route in milli-VND. `cost_per_km` VND per km
/// times meters is exactly milli-VND, so no rounding happens here.
pub fn route_transport_cost_milli(inst: &Instance, h: usize, route: &[usize]) -> i128 {
    if route.is_empty() {
        return 0;
    }
    let per_km = inst.vehicles[h].cost_per_km as i128;
    let arcs: i128 = route
        .windows(2)
        .map(|w| per_km * inst.distance_m(w[0], w[1]) as i128)
        .sum();
    arcs + inst.vehicles[h].fixed_trip_cost as i128 * 1000
}

/// Whole-plan transport cost in milli-VND; the exact quantity underlying
/// `transport_cost`. Route costs add with no rounding at this scale.
pub fn transport_cost_milli(inst: &Instance, plan: &Plan) -> i128 {
    (0..inst.num_vehicles())
        .flat_map(|h| (0..inst.periods).map(move |t| (h, t)))
        .map(|(h, t)| route_transport_cost_milli(inst, h, &plan.routes[h][t]))
        .sum()
}

/// Transport objective: sum of `cost_per_km * distance` over every traversed
/// arc (plus fixed trip costs when configured), rounded half-up to VND.
pub fn transport_cost(inst: &Instance, plan: &Plan) -> Money {
    milli_to_vnd(transport_cost_milli(inst, plan))
}

pub fn milli_to_vnd(milli: i128) -> Money {
    // integer half-up rounding, exact for the full i128 range
    let (q, r) = (milli.div_euclid(1000), milli.rem_euclid(1000));
    (q + if r >= 500 { 1 } else { 0 }) as Money
}

/// Applies the daily interest factor `rate / 365` to a balance sum and
/// rounds half-up to whole VND. Shared by the financial objective and the
/// balance-sum identity so both sides scale identically.
pub fn scale_daily_interest(annual_rate: f64, balance_sum: i128) -> Money {
    round_half_up(annual_rate / 365.0 * balance_sum as f64)
}

/// Financial objective: interest on cash held in the machines, computed in
/// the weighted-coefficient form `sum_j [p*(I0 + d1 - m1) + (p-1)*(d2 - m2)
/// + ... + (dp - mp)]` scaled by the daily rate. Algebraically this equals
/// the daily rate times the sum of all end-of-period balances.
pub fn financial_cost(inst: &Instance, plan: &Plan) -> Money {
    scale_daily_interest(inst.interest_rate_annual, financial_balance_weighted(inst, plan))
}

/// The integer part of the financial objective before interest scaling.
pub fn financial_balance_weighted(inst: &Instance, plan: &Plan) -> i128 {
    let p = inst.periods as i128;
    inst.atms
        .iter()
        .enumerate()
        .map(|(j, atm)| {
            let init = p * atm.initial_balance as i128;
            let flows: i128 = (0..inst.periods)
                .map(|t| {
                    let coeff = p - t as i128;
                    coeff * (plan.deposits[j][t] - atm.forecast_withdrawals[t]) as i128
                })
                .sum();
            init + flows
        })
        .sum()
}

pub fn total_distance_m(inst: &Instance, plan: &Plan) -> i64 {
    (0..inst.num_vehicles())
        .flat_map(|h| (0..inst.periods).map(move |t| (h, t)))
        .map(|(h, t)| {
            plan.routes[h][t]
                .windows(2)
                .map(|w| inst.distance_m(w[0], w[1]))
                .sum::<i64>()
        })
        .sum()
}

/// Evaluates both objectives and the weighted aggregate. Errors only when
/// the weights are invalid.
pub fn aggregate_cost(
    inst: &Instance,
    plan: &Plan,
    weights: Weights,
) -> Result<CostBreakdown, WeightError> {
    // re-validate: Weights is constructible literally
    let weights = Weights::new(weights.transport, weights.financial)?;
    let transport = transport_cost(inst, plan);
    let financial = financial_cost(inst, plan);
    let aggregate = round_half_up(
        weights.transport * transport as f64 + weights.financial * financial as f64,
    );
    Ok(CostBreakdown {
        transport_cost_vnd: transport,
        financial_cost_vnd: financial,
        aggregate_cost_vnd: aggregate,
        trips: plan.trips(),
        total_km: total_distance_m(inst, plan) as f64 / 1000.0,
    })
}

/// Continuous weighted objective used by the solver for plan comparison:
/// no terminal rounding, so two plans compare consistently at any scale.
pub fn weighted_objective(inst: &Instance, plan: &Plan, weights: Weights) -> f64 {
    let f1 = transport_cost_milli(inst, plan) as f64 / 1000.0;
    let f2 = inst.interest_rate_annual / 365.0 * financial_balance_weighted(inst, plan) as f64;
    weights.transport * f1 + weights.financial * f2
}
