//! Energy storage participation in electricity markets: technology models,
//! profit-maximizing plans for regulation, contingency and peak-shaving
//! programs, tracked-slot heuristics, and real-time regulation policies.

pub mod config;
pub mod error;
pub mod ess;
pub mod heuristics;
pub mod online;
pub mod programs;
pub mod traces;

pub use config::RunConfig;
pub use error::{CoreError, Result};
pub use ess::{
    amortized_prices, check_feasibility, daily_cost, per_slot_self_discharge, simulate_schedule, Capacities,
    DailyPrices, EssTechnology, Schedule, Violation, ViolationKind,
};
pub use heuristics::{fix_int_select, min_cap_select, rand_select, required_tracked, select, Heuristic, TrackedSet};
pub use online::{
    battery_step, estimate_reserve, holdout, init_battery_policy, init_ucfw_policy, run_online, ucfw_step,
    BatteryPolicy, HoldoutConfig, HoldoutReport, OnlinePolicy, OnlineResult, PolicyKind, UcFwPolicy,
};
pub use programs::{optimize, sweep, ProgramKind, ProgramPlan, ProgramSpec};
pub use traces::{Trace, TraceKind};
