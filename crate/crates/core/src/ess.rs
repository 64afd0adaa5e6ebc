//! Storage technology parameters, amortized equipment cost and
//! state-of-charge dynamics.
//!
//! Rates are in kW, energies in kWh and slot lengths in hours. Stored energy
//! follows
//!
//! ```text
//! e_t = (1 - mu_slot) * e_{t-1} + (r_t - d_t) * slot_hours
//! u_t = r_t / eta - d_t
//! ```
//!
//! where `r_t` is the energy entering the store, `d_t` the energy leaving it
//! and `u_t` the power drawn from the grid.

use serde::{Deserialize, Serialize};

use crate::error::{contract, CoreError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssTechnology {
    pub name: String,
    /// Price per kW of power capacity.
    pub power_price: f64,
    /// Price per kWh of energy capacity.
    pub energy_price: f64,
    pub float_life_days: f64,
    pub cycle_life: f64,
    pub self_discharge_per_hour: f64,
    pub charge_efficiency: f64,
    /// Discharge capacity over charge capacity.
    pub charge_rate_ratio: f64,
    pub depth_of_discharge: f64,
    /// Seconds to ramp discharge from zero to full power; 0 means instant.
    pub ramp_time_seconds: f64,
}

impl EssTechnology {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (
                self.charge_efficiency > 0.0 && self.charge_efficiency <= 1.0,
                "charge_efficiency must be in (0, 1]",
            ),
            (self.charge_rate_ratio >= 1.0, "charge_rate_ratio must be >= 1"),
            (
                self.depth_of_discharge > 0.0 && self.depth_of_discharge <= 1.0,
                "depth_of_discharge must be in (0, 1]",
            ),
            (
                (0.0..1.0).contains(&self.self_discharge_per_hour),
                "self_discharge_per_hour must be in [0, 1)",
            ),
            (self.float_life_days > 0.0, "float_life_days must be > 0"),
            (self.cycle_life > 0.0, "cycle_life must be > 0"),
            (self.ramp_time_seconds >= 0.0, "ramp_time_seconds must be >= 0"),
            (
                self.power_price >= 0.0 && self.energy_price >= 0.0,
                "equipment prices must be >= 0",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(contract(format!("technology `{}`: {msg}", self.name)));
            }
        }
        Ok(())
    }

    /// Largest discharge increase allowed between consecutive slots, or
    /// `None` when the technology ramps instantly.
    pub fn ramp_limit(&self, p_cap: f64, slot_hours: f64) -> Option<f64> {
        (self.ramp_time_seconds > 0.0)
            .then(|| p_cap * slot_hours * 3600.0 / self.ramp_time_seconds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Capacities {
    pub p_cap: f64,
    pub e_cap: f64,
}

impl Capacities {
    pub fn new(p_cap: f64, e_cap: f64) -> Self {
        Self { p_cap, e_cap }
    }

    /// Energy band `[(1 - DoD) E, E]`.
    pub fn energy_band(&self, tech: &EssTechnology) -> (f64, f64) {
        ((1.0 - tech.depth_of_discharge) * self.e_cap, self.e_cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyPrices {
    pub power_price_per_day: f64,
    pub energy_price_per_day: f64,
}

pub fn per_slot_self_discharge(tech: &EssTechnology, slot_hours: f64) -> f64 {
    1.0 - (1.0 - tech.self_discharge_per_hour).powf(slot_hours)
}

/// Equipment prices spread over the effective life
/// `min(float life, cycle life / cycles per day)`.
pub fn amortized_prices(tech: &EssTechnology, cycles_per_day: f64) -> DailyPrices {
    let life = if cycles_per_day > 0.0 {
        tech.float_life_days.min(tech.cycle_life / cycles_per_day)
    } else {
        tech.float_life_days
    };
    DailyPrices {
        power_price_per_day: tech.power_price / life,
        energy_price_per_day: tech.energy_price / life,
    }
}

pub fn daily_cost(prices: &DailyPrices, caps: &Capacities) -> f64 {
    prices.power_price_per_day * caps.p_cap + prices.energy_price_per_day * caps.e_cap
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub slot_hours: f64,
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    pub net_power: Vec<f64>,
    /// `e_0 ..= e_T`.
    pub stored_energy: Vec<f64>,
}

impl Schedule {
    pub fn len(&self) -> usize {
        self.charge.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charge.is_empty()
    }

    /// Slots (1-based) where the store charges and discharges at once.
    pub fn simultaneous_slots(&self, tol: f64) -> Vec<usize> {
        self.charge
            .iter()
            .zip(&self.discharge)
            .enumerate()
            .filter(|(_, (&r, &d))| r > tol && d > tol)
            .map(|(t, _)| t + 1)
            .collect()
    }

    /// Largest absolute residual of the energy recursion.
    pub fn recursion_residual(&self, tech: &EssTechnology) -> f64 {
        let mu = per_slot_self_discharge(tech, self.slot_hours);
        (0..self.len())
            .map(|t| {
                let expect = (1.0 - mu) * self.stored_energy[t]
                    + (self.charge[t] - self.discharge[t]) * self.slot_hours;
                (self.stored_energy[t + 1] - expect).abs()
            })
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t,r_kw,d_kw,u_kw,e_kwh`; row `t = 0` carries only
    /// the initial energy.
    pub fn to_csv(&self, beta: Option<&[f64]>) -> String {
        let mut out = String::from("t,r_kw,d_kw,u_kw,e_kwh");
        if beta.is_some() {
            out.push_str(",beta");
        }
        out.push('\n');
        out.push_str(&format!("0,,,,{}", self.stored_energy[0]));
        if beta.is_some() {
            out.push(',');
        }
        out.push('\n');
        for t in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{},{}",
                t + 1,
                self.charge[t],
                self.discharge[t],
                self.net_power[t],
                self.stored_energy[t + 1]
            ));
            if let Some(b) = beta {
                out.push_str(&format!(",{}", b[t]));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the energy recursion from `e0` without enforcing capacities.
pub fn simulate_schedule(
    tech: &EssTechnology,
    e0: f64,
    charge: &[f64],
    discharge: &[f64],
    slot_hours: f64,
) -> Result<Schedule> {
    if charge.len() != discharge.len() {
        return Err(CoreError::LengthMismatch {
            what: "discharge",
            got: discharge.len(),
            expected: charge.len(),
        });
    }
    if !(slot_hours > 0.0) {
        return Err(contract("slot_hours must be > 0"));
    }
    if charge.iter().chain(discharge).any(|&v| !(v >= 0.0)) {
        return Err(contract("charge and discharge rates must be >= 0"));
    }
    let mu = per_slot_self_discharge(tech, slot_hours);
    let eta = tech.charge_efficiency;
    let mut stored = Vec::with_capacity(charge.len() + 1);
    stored.push(e0);
    let mut e = e0;
    for (&r, &d) in charge.iter().zip(discharge) {
        e = (1.0 - mu) * e + (r - d) * slot_hours;
        stored.push(e);
    }
    Ok(Schedule {
        slot_hours,
        charge: charge.to_vec(),
        discharge: discharge.to_vec(),
        net_power: charge.iter().zip(discharge).map(|(&r, &d)| r / eta - d).collect(),
        stored_energy: stored,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    ChargeNegative,
    ChargeAboveLimit,
    DischargeNegative,
    DischargeAboveLimit,
    EnergyBelowDod,
    EnergyAboveCapacity,
    Ramp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Rate slots are 1-based; energy slots index `e_0 ..= e_T`.
    pub slot: usize,
    pub kind: ViolationKind,
    pub magnitude: f64,
}

/// Lists every capacity, depth-of-discharge and ramp violation exceeding
/// `tol`. An empty list means the schedule is feasible.
pub fn check_feasibility(
    sched: &Schedule,
    tech: &EssTechnology,
    caps: &Capacities,
    tol: f64,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |slot, kind, excess: f64| {
        if excess > tol {
            out.push(Violation {
                slot,
                kind,
                magnitude: excess,
            });
        }
    };
    let r_max = caps.p_cap / tech.charge_rate_ratio;
    for t in 0..sched.len() {
        let (r, d) = (sched.charge[t], sched.discharge[t]);
        flag(t + 1, ViolationKind::ChargeNegative, -r);
        flag(t + 1, ViolationKind::ChargeAboveLimit, r - r_max);
        flag(t + 1, ViolationKind::DischargeNegative, -d);
        flag(t + 1, ViolationKind::DischargeAboveLimit, d - caps.p_cap);
    }
    let (lo, hi) = caps.energy_band(tech);
    for (t, &e) in sched.stored_energy.iter().enumerate() {
        flag(t, ViolationKind::EnergyBelowDod, lo - e);
        flag(t, ViolationKind::EnergyAboveCapacity, e - hi);
    }
    if let Some(step) = tech.ramp_limit(caps.p_cap, sched.slot_hours) {
        for t in 1..sched.len() {
            flag(
                t + 1,
                ViolationKind::Ramp,
                sched.discharge[t] - sched.discharge[t - 1] - step,
            );
        }
    }
    out
}
