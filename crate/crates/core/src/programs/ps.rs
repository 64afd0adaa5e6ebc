use esskit_lp::{LpProblem, Relation};
use serde::{Deserialize, Serialize};

use super::{add_ess_block, assemble, extract, prices_for, solve_program, CapLimits, ProgramKind, ProgramLp, ProgramPlan};
use crate::error::{contract, Result};
use crate::ess::{Capacities, EssTechnology};
use crate::traces::{Trace, TraceKind};

const DAYS_PER_MONTH: f64 = 30.4;

fn default_capex_horizon() -> f64 {
    3650.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsParams {
    /// Demand charge per kW of monthly peak.
    pub opex_peak_price: f64,
    /// Infrastructure cost per W of peak.
    pub capex_peak_price: f64,
    #[serde(default = "default_capex_horizon")]
    pub capex_horizon_days: f64,
    pub cycles_per_day: f64,
    #[serde(default)]
    pub cap_bounds: Option<Capacities>,
    #[serde(default)]
    pub fixed_caps: Option<Capacities>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsSpec {
    #[serde(flatten)]
    pub params: PsParams,
    pub power_trace: Trace,
}

/// Value of one kW of shaved peak per day.
pub fn ps_daily_price(params: &PsParams) -> f64 {
    params.opex_peak_price / DAYS_PER_MONTH + params.capex_peak_price * 1000.0 / params.capex_horizon_days
}

/// `max(p) - max(p + u)`: the peak reduction a schedule actually achieves.
pub fn ps_realized_reduction(power: &[f64], net_power: &[f64]) -> f64 {
    let before = power.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let after = power
        .iter()
        .zip(net_power)
        .map(|(&p, &u)| p + u)
        .fold(f64::NEG_INFINITY, f64::max);
    before - after
}

pub fn build_ps_lp(tech: &EssTechnology, spec: &PsSpec) -> Result<ProgramLp> {
    let params = &spec.params;
    let trace = &spec.power_trace;
    if trace.kind != TraceKind::PowerKw || trace.is_empty() {
        return Err(contract("peak shaving needs a nonempty power trace"));
    }
    if !(params.capex_horizon_days > 0.0) || !(params.opex_peak_price >= 0.0) || !(params.capex_peak_price >= 0.0) {
        return Err(contract("peak-shaving prices must be >= 0 and capex_horizon_days > 0"));
    }
    let prices = prices_for(tech, params.cycles_per_day)?;
    let limits = CapLimits::from_spec(params.cap_bounds, params.fixed_caps)?;
    let slot_hours = trace.slot_hours();
    let slots = trace.len();
    let mut p = LpProblem::new();
    let vars = add_ess_block(&mut p, tech, slots, slot_hours, &limits, &prices);
    p.objective[vars.reserve] = ps_daily_price(params);

    let peak = trace.values.iter().copied().fold(0.0, f64::max);
    for (k, &load) in trace.values.iter().enumerate() {
        let u = vars.net_power[k];
        p.set_bounds(u, -load, f64::INFINITY);
        p.add_constraint(vec![(u, 1.0), (vars.reserve, 1.0)], Relation::Le, peak - load);
    }
    p.add_constraint(
        vec![(vars.energy[0], 1.0), (vars.energy[slots], -1.0)],
        Relation::Eq,
        0.0,
    );
    Ok(ProgramLp {
        problem: p,
        vars,
        penalty: Vec::new(),
        slot_hours,
        prices,
    })
}

pub(crate) fn optimize_ps(tech: &EssTechnology, spec: &PsSpec) -> Result<ProgramPlan> {
    let lp = build_ps_lp(tech, spec)?;
    let sol = solve_program(&lp)?;
    let ex = extract(&lp, &sol, tech)?;
    let revenue = ps_daily_price(&spec.params) * ex.reserve;
    Ok(assemble(ProgramKind::Ps, tech, &lp, &sol, ex, revenue))
}
