use esskit_lp::{add_abs_penalty, LpProblem, Relation};
use serde::{Deserialize, Serialize};

use super::{add_ess_block, assemble, extract, prices_for, solve_program, CapLimits, ProgramKind, ProgramLp, ProgramPlan};
use crate::error::{contract, Result};
use crate::ess::{Capacities, EssTechnology};
use crate::heuristics::TrackedSet;
use crate::traces::{Trace, TraceKind};

fn default_hours_per_day() -> f64 {
    24.0
}

/// Market terms of a regulation reserve offer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsrParams {
    /// Price per kWh of reserve.
    pub reserve_price: f64,
    /// Weight of the mean absolute tracking error.
    pub penalty_coeff: f64,
    /// Allowed relative deviation from `R * beta`.
    pub rho1: f64,
    /// Fraction of slots that must stay inside the band.
    pub rho2: f64,
    pub cycles_per_day: f64,
    #[serde(default = "default_hours_per_day")]
    pub hours_per_day: f64,
    #[serde(default)]
    pub cap_bounds: Option<Capacities>,
    #[serde(default)]
    pub fixed_caps: Option<Capacities>,
    /// Adds `e_0 = e_T`.
    #[serde(default)]
    pub periodic: bool,
    /// Pins `e_0`; free within the energy band when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_energy: Option<f64>,
}

impl RsrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho1 > 0.0 && self.rho1 < 1.0) {
            return Err(contract(format!("rho1 must be in (0, 1), got {}", self.rho1)));
        }
        if !(self.rho2 > 0.0 && self.rho2 <= 1.0) {
            return Err(contract(format!("rho2 must be in (0, 1], got {}", self.rho2)));
        }
        if !(self.reserve_price >= 0.0) || !(self.penalty_coeff >= 0.0) {
            return Err(contract("reserve_price and penalty_coeff must be >= 0"));
        }
        if self.initial_energy.is_some_and(|e| !(e >= 0.0)) {
            return Err(contract("initial_energy must be >= 0"));
        }
        if !(self.hours_per_day > 0.0) {
            return Err(contract("hours_per_day must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsrSpec {
    #[serde(flatten)]
    pub params: RsrParams,
    pub signal: Trace,
}

/// Daily RSR revenue: `H * price * (R - theta * mean |u_t - R beta_t|)`.
pub fn rsr_revenue(params: &RsrParams, beta: &[f64], reserve: f64, net_power: &[f64]) -> f64 {
    let t = beta.len().max(1) as f64;
    let err: f64 = beta
        .iter()
        .zip(net_power)
        .map(|(&b, &u)| (u - reserve * b).abs())
        .sum();
    params.hours_per_day * params.reserve_price * (reserve - params.penalty_coeff * err / t)
}

/// Whether `u` stays within the band `|u - R beta| <= rho1 R |beta|`.
pub fn tracking_ok(u: f64, reserve: f64, beta: f64, rho1: f64, tol: f64) -> bool {
    (u - reserve * beta).abs() <= rho1 * reserve * beta.abs() + tol
}

pub fn build_rsr_lp(
    tech: &EssTechnology,
    spec: &RsrSpec,
    tracked: Option<&TrackedSet>,
) -> Result<ProgramLp> {
    let params = &spec.params;
    params.validate()?;
    if spec.signal.kind != TraceKind::RsrSignal || spec.signal.is_empty() {
        return Err(contract("RSR needs a nonempty regulation signal"));
    }
    let beta = &spec.signal.values;
    let slots = beta.len();
    let mask = match tracked {
        Some(set) => {
            set.validate()?;
            if set.total_slots != slots {
                return Err(contract(format!(
                    "tracked set covers {} slots but the signal has {slots}",
                    set.total_slots
                )));
            }
            if params.rho2 >= 1.0 && !set.is_complete() {
                return Err(contract("rho2 = 1 requires every slot to be tracked"));
            }
            set.mask()
        }
        None => vec![true; slots],
    };

    let prices = prices_for(tech, params.cycles_per_day)?;
    let limits = CapLimits::from_spec(params.cap_bounds, params.fixed_caps)?;
    let slot_hours = spec.signal.slot_hours();
    let mut p = LpProblem::new();
    let vars = add_ess_block(&mut p, tech, slots, slot_hours, &limits, &prices);
    let h_pi = params.hours_per_day * params.reserve_price;
    p.objective[vars.reserve] = h_pi;
    let weight = params.penalty_coeff * h_pi / slots as f64;
    let mut penalty = Vec::with_capacity(slots);
    for k in 0..slots {
        let u = vars.net_power[k];
        let expr = [(u, 1.0), (vars.reserve, -beta[k])];
        penalty.push(add_abs_penalty(&mut p, &expr, weight)?);
        if mask[k] {
            let band = params.rho1 * beta[k].abs();
            p.add_constraint(
                vec![(u, 1.0), (vars.reserve, -beta[k] - band)],
                Relation::Le,
                0.0,
            );
            p.add_constraint(
                vec![(u, 1.0), (vars.reserve, -beta[k] + band)],
                Relation::Ge,
                0.0,
            );
        }
    }
    if let Some(e0) = params.initial_energy {
        p.set_bounds(vars.energy[0], e0, e0);
    }
    if params.periodic {
        p.add_constraint(
            vec![(vars.energy[0], 1.0), (vars.energy[slots], -1.0)],
            Relation::Eq,
            0.0,
        );
    }
    Ok(ProgramLp {
        problem: p,
        vars,
        penalty,
        slot_hours,
        prices,
    })
}

pub(crate) fn optimize_rsr(
    tech: &EssTechnology,
    spec: &RsrSpec,
    tracked: Option<&TrackedSet>,
) -> Result<ProgramPlan> {
    let lp = build_rsr_lp(tech, spec, tracked)?;
    let sol = solve_program(&lp)?;
    let ex = extract(&lp, &sol, tech)?;
    let revenue = rsr_revenue(&spec.params, &spec.signal.values, ex.reserve, &ex.schedule.net_power);
    Ok(assemble(ProgramKind::Rsr, tech, &lp, &sol, ex, revenue))
}
