use esskit_lp::{LpProblem, Relation};
use serde::{Deserialize, Serialize};

use super::{add_ess_block, assemble, extract, prices_for, solve_program, CapLimits, ProgramKind, ProgramLp, ProgramPlan};
use crate::error::{contract, Result};
use crate::ess::{Capacities, EssTechnology};

/// A once-a-day contingency call. The store is full at the end of slot
/// `window_start` and discharges at `R` during slots
/// `window_start + 1 ..= window_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrSpec {
    /// Price per kW of reserve per day.
    pub reserve_price: f64,
    pub window_start: usize,
    pub window_end: usize,
    pub slot_seconds: f64,
    pub horizon_slots: usize,
    pub cycles_per_day: f64,
    #[serde(default)]
    pub cap_bounds: Option<Capacities>,
    #[serde(default)]
    pub fixed_caps: Option<Capacities>,
}

impl CrSpec {
    pub fn window_hours(&self) -> f64 {
        (self.window_end - self.window_start) as f64 * self.slot_seconds / 3600.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_start >= self.window_end {
            return Err(contract("contingency window is empty"));
        }
        if self.window_end > self.horizon_slots {
            return Err(contract(format!(
                "window end {} beyond horizon of {} slots",
                self.window_end, self.horizon_slots
            )));
        }
        if !(self.slot_seconds > 0.0) || !(self.reserve_price >= 0.0) {
            return Err(contract("slot_seconds must be > 0 and reserve_price >= 0"));
        }
        Ok(())
    }
}

pub fn cr_revenue(spec: &CrSpec, reserve: f64) -> f64 {
    spec.reserve_price * reserve
}

/// Before the window the store is held full, so charging there only
/// replaces self-discharge. After the window the store is idle.
pub fn build_cr_lp(tech: &EssTechnology, spec: &CrSpec) -> Result<ProgramLp> {
    spec.validate()?;
    let prices = prices_for(tech, spec.cycles_per_day)?;
    let limits = CapLimits::from_spec(spec.cap_bounds, spec.fixed_caps)?;
    let slot_hours = spec.slot_seconds / 3600.0;
    let mut p = LpProblem::new();
    let vars = add_ess_block(&mut p, tech, spec.horizon_slots, slot_hours, &limits, &prices);
    p.objective[vars.reserve] = spec.reserve_price;

    for t in 0..=spec.window_start {
        p.add_constraint(vec![(vars.energy[t], 1.0), (vars.e_cap, -1.0)], Relation::Eq, 0.0);
    }
    for t in 1..=spec.horizon_slots {
        let (r, d) = (vars.charge[t - 1], vars.discharge[t - 1]);
        if t <= spec.window_start {
            p.set_bounds(d, 0.0, 0.0);
        } else if t <= spec.window_end {
            p.set_bounds(r, 0.0, 0.0);
            p.add_constraint(vec![(d, 1.0), (vars.reserve, -1.0)], Relation::Eq, 0.0);
        } else {
            p.set_bounds(r, 0.0, 0.0);
            p.set_bounds(d, 0.0, 0.0);
        }
    }
    Ok(ProgramLp {
        problem: p,
        vars,
        penalty: Vec::new(),
        slot_hours,
        prices,
    })
}

pub(crate) fn optimize_cr(tech: &EssTechnology, spec: &CrSpec) -> Result<ProgramPlan> {
    let lp = build_cr_lp(tech, spec)?;
    let sol = solve_program(&lp)?;
    let ex = extract(&lp, &sol, tech)?;
    let revenue = cr_revenue(spec, ex.reserve);
    Ok(assemble(ProgramKind::Cr, tech, &lp, &sol, ex, revenue))
}
