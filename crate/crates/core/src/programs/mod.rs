//! Market-participation linear programs: regulation service reserves (RSR),
//! contingency reserves (CR) and peak shaving (PS).
//!
//! Every program shares one block of storage variables and constraints
//! (capacities, charge, discharge, grid power and stored energy); the
//! programs differ in how the reserve `R` is tied to that block and in the
//! revenue term. Each builder returns the LP together with the indices of
//! its variables so that [`optimize`] can read a [`ProgramPlan`] back out.

mod cr;
mod ps;
mod rsr;
mod sweep;

pub use cr::{build_cr_lp, cr_revenue, CrSpec};
pub use ps::{build_ps_lp, ps_daily_price, ps_realized_reduction, PsParams, PsSpec};
pub use rsr::{build_rsr_lp, rsr_revenue, tracking_ok, RsrParams, RsrSpec};
pub use sweep::{sweep, SweepAxis, SweepCell, SweepGrid};

use esskit_lp::{solve, LpProblem, LpSolution, LpStatus, Relation};
use serde::{Deserialize, Serialize};

use crate::error::{contract, CoreError, Result};
use crate::ess::{
    amortized_prices, daily_cost, per_slot_self_discharge, simulate_schedule, Capacities,
    DailyPrices, EssTechnology, Schedule,
};
use crate::heuristics::TrackedSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramKind {
    Rsr,
    Cr,
    Ps,
}

impl std::fmt::Display for ProgramKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProgramKind::Rsr => "rsr",
            ProgramKind::Cr => "cr",
            ProgramKind::Ps => "ps",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProgramSpec {
    Rsr(RsrSpec),
    Cr(CrSpec),
    Ps(PsSpec),
}

impl ProgramSpec {
    pub fn kind(&self) -> ProgramKind {
        match self {
            ProgramSpec::Rsr(_) => ProgramKind::Rsr,
            ProgramSpec::Cr(_) => ProgramKind::Cr,
            ProgramSpec::Ps(_) => ProgramKind::Ps,
        }
    }

    fn caps_mut(&mut self) -> (&mut Option<Capacities>, &mut Option<Capacities>) {
        match self {
            ProgramSpec::Rsr(s) => (&mut s.params.cap_bounds, &mut s.params.fixed_caps),
            ProgramSpec::Cr(s) => (&mut s.cap_bounds, &mut s.fixed_caps),
            ProgramSpec::Ps(s) => (&mut s.params.cap_bounds, &mut s.params.fixed_caps),
        }
    }
}

/// Allowed range of each capacity variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapLimits {
    pub p: (f64, f64),
    pub e: (f64, f64),
}

impl CapLimits {
    pub fn from_spec(cap_bounds: Option<Capacities>, fixed_caps: Option<Capacities>) -> Result<Self> {
        let mut lim = CapLimits {
            p: (0.0, f64::INFINITY),
            e: (0.0, f64::INFINITY),
        };
        if let Some(b) = cap_bounds {
            if b.p_cap < 0.0 || b.e_cap < 0.0 {
                return Err(contract("cap_bounds must be >= 0"));
            }
            lim.p.1 = b.p_cap;
            lim.e.1 = b.e_cap;
        }
        if let Some(f) = fixed_caps {
            if f.p_cap < 0.0 || f.e_cap < 0.0 {
                return Err(contract("fixed_caps must be >= 0"));
            }
            lim.p = (f.p_cap, f.p_cap);
            lim.e = (f.e_cap, f.e_cap);
        }
        Ok(lim)
    }
}

/// Indices of the shared storage variables.
#[derive(Debug, Clone, PartialEq)]
pub struct EssVars {
    pub p_cap: usize,
    pub e_cap: usize,
    pub reserve: usize,
    pub charge: Vec<usize>,
    pub discharge: Vec<usize>,
    pub net_power: Vec<usize>,
    /// `e_0 ..= e_T`.
    pub energy: Vec<usize>,
}

/// A built program LP and where its variables live.
#[derive(Debug, Clone)]
pub struct ProgramLp {
    pub problem: LpProblem,
    pub vars: EssVars,
    /// Absolute tracking-error variables (RSR only).
    pub penalty: Vec<usize>,
    pub slot_hours: f64,
    pub prices: DailyPrices,
}

/// Adds capacities, the reserve and per-slot storage variables together with
/// the grid-power definition, the energy recursion, rate limits, the
/// depth-of-discharge band and the discharge ramp limit.
pub(crate) fn add_ess_block(
    p: &mut LpProblem,
    tech: &EssTechnology,
    slots: usize,
    slot_hours: f64,
    limits: &CapLimits,
    prices: &DailyPrices,
) -> EssVars {
    let p_cap = p.add_named_var("p_cap", -prices.power_price_per_day, limits.p.0, limits.p.1);
    let e_cap = p.add_named_var("e_cap", -prices.energy_price_per_day, limits.e.0, limits.e.1);
    let reserve = p.add_named_var("reserve", 0.0, 0.0, f64::INFINITY);
    let inf = f64::INFINITY;
    let mut vars = EssVars {
        p_cap,
        e_cap,
        reserve,
        charge: Vec::with_capacity(slots),
        discharge: Vec::with_capacity(slots),
        net_power: Vec::with_capacity(slots),
        energy: Vec::with_capacity(slots + 1),
    };
    vars.energy.push(p.add_named_var("e_0", 0.0, 0.0, inf));
    for t in 1..=slots {
        vars.charge.push(p.add_named_var(format!("r_{t}"), 0.0, 0.0, inf));
        vars.discharge.push(p.add_named_var(format!("d_{t}"), 0.0, 0.0, inf));
        vars.net_power.push(p.add_named_var(format!("u_{t}"), 0.0, -inf, inf));
        vars.energy.push(p.add_named_var(format!("e_{t}"), 0.0, 0.0, inf));
    }

    let eta = tech.charge_efficiency;
    let mu = per_slot_self_discharge(tech, slot_hours);
    let gamma = tech.charge_rate_ratio;
    let floor = 1.0 - tech.depth_of_discharge;
    for k in 0..slots {
        let (r, d, u) = (vars.charge[k], vars.discharge[k], vars.net_power[k]);
        let (e_prev, e) = (vars.energy[k], vars.energy[k + 1]);
        p.add_constraint(vec![(u, 1.0), (r, -1.0 / eta), (d, 1.0)], Relation::Eq, 0.0);
        p.add_constraint(
            vec![(e, 1.0), (e_prev, -(1.0 - mu)), (r, -slot_hours), (d, slot_hours)],
            Relation::Eq,
            0.0,
        );
        p.add_constraint(vec![(r, 1.0), (p_cap, -1.0 / gamma)], Relation::Le, 0.0);
        p.add_constraint(vec![(d, 1.0), (p_cap, -1.0)], Relation::Le, 0.0);
    }
    for &e in &vars.energy {
        p.add_constraint(vec![(e, 1.0), (e_cap, -1.0)], Relation::Le, 0.0);
        if floor > 0.0 {
            p.add_constraint(vec![(e, 1.0), (e_cap, -floor)], Relation::Ge, 0.0);
        }
    }
    if let Some(step_per_kw) = tech.ramp_limit(1.0, slot_hours) {
        for k in 1..slots {
            p.add_constraint(
                vec![(vars.discharge[k], 1.0), (vars.discharge[k - 1], -1.0), (p_cap, -step_per_kw)],
                Relation::Le,
                0.0,
            );
        }
    }
    vars
}

/// Result of optimizing one program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramPlan {
    pub program: ProgramKind,
    pub tech: String,
    pub lp_status: LpStatus,
    pub caps: Capacities,
    pub reserve: f64,
    pub revenue_per_day: f64,
    pub cost_per_day: f64,
    pub profit_per_day: f64,
    /// Objective value reported by the LP; equals the profit up to solver
    /// tolerance.
    pub lp_objective: f64,
    /// Slots (1-based) that charge and discharge at once.
    pub simultaneous_slots: Vec<usize>,
    pub schedule: Schedule,
}

pub(crate) struct Extracted {
    pub caps: Capacities,
    pub reserve: f64,
    pub schedule: Schedule,
}

/// Reads capacities, the reserve and the schedule out of an optimal solution.
/// Rates are clipped at zero and the energy path is recomputed from them so
/// the schedule satisfies the recursion exactly.
pub(crate) fn extract(
    lp: &ProgramLp,
    sol: &LpSolution,
    tech: &EssTechnology,
) -> Result<Extracted> {
    let x = &sol.primal;
    let v = &lp.vars;
    let charge: Vec<f64> = v.charge.iter().map(|&j| x[j].max(0.0)).collect();
    let discharge: Vec<f64> = v.discharge.iter().map(|&j| x[j].max(0.0)).collect();
    let schedule = simulate_schedule(tech, x[v.energy[0]], &charge, &discharge, lp.slot_hours)?;
    Ok(Extracted {
        caps: Capacities::new(x[v.p_cap].max(0.0), x[v.e_cap].max(0.0)),
        reserve: x[v.reserve].max(0.0),
        schedule,
    })
}

pub(crate) fn solve_program(lp: &ProgramLp) -> Result<LpSolution> {
    let sol = solve(&lp.problem)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        s => Err(CoreError::NotOptimal(s)),
    }
}

pub(crate) fn prices_for(tech: &EssTechnology, cycles_per_day: f64) -> Result<DailyPrices> {
    if !(cycles_per_day >= 0.0) {
        return Err(contract("cycles_per_day must be >= 0"));
    }
    Ok(amortized_prices(tech, cycles_per_day))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble(
    program: ProgramKind,
    tech: &EssTechnology,
    lp: &ProgramLp,
    sol: &LpSolution,
    ex: Extracted,
    revenue: f64,
) -> ProgramPlan {
    let cost = daily_cost(&lp.prices, &ex.caps);
    ProgramPlan {
        program,
        tech: tech.name.clone(),
        lp_status: sol.status,
        caps: ex.caps,
        reserve: ex.reserve,
        revenue_per_day: revenue,
        cost_per_day: cost,
        profit_per_day: revenue - cost,
        lp_objective: sol.objective_value,
        simultaneous_slots: ex.schedule.simultaneous_slots(1e-9),
        schedule: ex.schedule,
    }
}

/// Builds, solves and reads back one program. `tracked` applies to RSR only
/// and defaults to every slot.
pub fn optimize(
    tech: &EssTechnology,
    spec: &ProgramSpec,
    tracked: Option<&TrackedSet>,
) -> Result<ProgramPlan> {
    tech.validate()?;
    match spec {
        ProgramSpec::Rsr(s) => rsr::optimize_rsr(tech, s, tracked),
        ProgramSpec::Cr(s) => cr::optimize_cr(tech, s),
        ProgramSpec::Ps(s) => ps::optimize_ps(tech, s),
    }
}
