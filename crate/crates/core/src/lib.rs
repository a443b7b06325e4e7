//! Routing and scheduling library for ATM cash replenishment.
//!
//! A bank replenishes a network of ATMs from a set of cash depots over a
//! planning horizon of daily periods. Every plan is scored on two costs:
//! distance-proportional vehicle operating cost and interest paid on cash
//! sitting in the machines. The library models the problem ([`model`]),
//! evaluates plans ([`costing`]), validates them against the full
//! constraint set ([`feasibility`]), decomposes replenishment demand into
//! bounded per-period deposits ([`splitting`]), searches for good plans
//! ([`solver`]), generates simulated instances ([`scenario`]) and runs the
//! split-versus-no-split comparison experiment ([`report`]).

pub mod costing;
pub mod feasibility;
pub mod fixtures;
pub mod model;
pub mod report;
pub mod scenario;
pub mod solver;
pub mod splitting;

pub use model::{Atm, CostBreakdown, Depot, Instance, Plan, Vehicle};
