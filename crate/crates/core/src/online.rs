//! Real-time regulation policies and the hold-out evaluation harness.
//!
//! A policy sees one signal value per slot and returns the slot's charge
//! and discharge. Every desired action passes through the same safety clamp
//! (rate limits, depth-of-discharge band, discharge ramp), so a policy can
//! never leave the feasible region when the region is reachable at all.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::ess::{check_feasibility, per_slot_self_discharge, simulate_schedule, Capacities, EssTechnology, Schedule};
use crate::heuristics::{ceil_guarded, required_tracked, select, Heuristic, TrackedSet};
use crate::programs::{optimize, rsr_revenue, tracking_ok, ProgramSpec, RsrParams, RsrSpec};
use crate::traces::Trace;

/// Tolerance for counting band hits and capacity violations online.
const ONLINE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotAction {
    pub charge: f64,
    pub discharge: f64,
    pub net_power: f64,
}

/// Mutable per-run state shared by the shipped policies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub prev_discharge: f64,
    /// Slots where the desired action was cut back by the safety clamp.
    pub clamped_slots: usize,
    /// Slots spent restoring the stored energy toward the target.
    pub restore_slots: usize,
}

pub trait OnlinePolicy {
    fn reserve(&self) -> f64;
    fn target_energy(&self) -> f64;
    fn state(&self) -> &PolicyState;
    /// Chooses the action for 1-based slot `t`.
    fn step(
        &mut self,
        t: usize,
        e_prev: f64,
        beta: f64,
        tech: &EssTechnology,
        caps: &Capacities,
        slot_hours: f64,
    ) -> SlotAction;
    /// Called after each slot; adaptive policies may retune thresholds here.
    fn observe(&mut self, _t: usize, _beta: f64, _action: &SlotAction) {}
}

/// Energy target `DoD * E / (2 (1 - mu))`, kept inside the energy band.
pub fn target_energy(tech: &EssTechnology, caps: &Capacities, slot_hours: f64) -> f64 {
    let mu = per_slot_self_discharge(tech, slot_hours);
    let (lo, hi) = caps.energy_band(tech);
    (tech.depth_of_discharge * caps.e_cap / (2.0 * (1.0 - mu))).clamp(lo, hi)
}

/// Turns a desired grid power into a safe action: charge within
/// `P / gamma` and headroom, discharge within `P`, the DoD floor and the
/// ramp limit, and a forced charge when self-discharge alone would cross
/// the floor.
fn realize(
    desired_u: f64,
    e_prev: f64,
    tech: &EssTechnology,
    caps: &Capacities,
    slot_hours: f64,
    state: &mut PolicyState,
) -> SlotAction {
    let mu = per_slot_self_discharge(tech, slot_hours);
    let eta = tech.charge_efficiency;
    let (lo, hi) = caps.energy_band(tech);
    let decayed = (1.0 - mu) * e_prev;
    let r_max = (caps.p_cap / tech.charge_rate_ratio).min((hi - decayed) / slot_hours).max(0.0);
    let mut d_max = caps.p_cap.min((decayed - lo) / slot_hours).max(0.0);
    if let Some(step) = tech.ramp_limit(caps.p_cap, slot_hours) {
        d_max = d_max.min(state.prev_discharge + step);
    }
    let r_min = ((lo - decayed) / slot_hours).max(0.0).min(r_max);

    let (charge, discharge) = if r_min > 0.0 {
        ((eta * desired_u).clamp(r_min, r_max), 0.0)
    } else if desired_u >= 0.0 {
        ((eta * desired_u).min(r_max), 0.0)
    } else {
        (0.0, (-desired_u).min(d_max))
    };
    let action = SlotAction {
        charge,
        discharge,
        net_power: charge / eta - discharge,
    };
    if (action.net_power - desired_u).abs() > ONLINE_TOL {
        state.clamped_slots += 1;
    }
    state.prev_discharge = discharge;
    action
}

/// Desired grid power that brings the next stored energy to `target`
/// without overshooting it.
fn restore_power(target: f64, e_prev: f64, tech: &EssTechnology, slot_hours: f64) -> f64 {
    let mu = per_slot_self_discharge(tech, slot_hours);
    let rate = (target - (1.0 - mu) * e_prev) / slot_hours;
    if rate >= 0.0 {
        rate / tech.charge_efficiency
    } else {
        rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryPolicy {
    pub theta0: f64,
    pub theta1: f64,
    pub reserve: f64,
    pub target_energy: f64,
    #[serde(default)]
    pub state: PolicyState,
}

/// Smallest `q` among `|beta|` such that at least a `rho2` fraction of the
/// history lies at or below `q`.
fn magnitude_quantile(hist: &[f64], rho2: f64) -> f64 {
    let mut mags: Vec<f64> = hist.iter().map(|b| b.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let k = required_tracked(mags.len(), rho2).max(1);
    mags[k - 1]
}

fn check_rhos(rho1: f64, rho2: f64) -> Result<()> {
    if !(rho1 > 0.0 && rho1 < 1.0) || !(rho2 > 0.0 && rho2 <= 1.0) {
        return Err(contract(format!("need rho1 in (0, 1) and rho2 in (0, 1], got {rho1}, {rho2}")));
    }
    Ok(())
}

pub fn init_battery_policy(
    hist: &Trace,
    rho1: f64,
    rho2: f64,
    tech: &EssTechnology,
    caps: &Capacities,
    reserve: f64,
) -> Result<BatteryPolicy> {
    if hist.is_empty() {
        return Err(contract("battery policy needs a nonempty signal history"));
    }
    check_rhos(rho1, rho2)?;
    let theta0 = magnitude_quantile(&hist.values, rho2);
    Ok(BatteryPolicy {
        theta0,
        theta1: (1.0 - rho1) * theta0,
        reserve: reserve.max(0.0),
        target_energy: target_energy(tech, caps, hist.slot_hours()),
        state: PolicyState::default(),
    })
}

/// Rule 1 tracks inside `theta1`, rule 2 caps at `theta1 R` up to
/// `theta0`, rule 3 restores the stored energy beyond `theta0`, rule 4 is
/// the safety clamp.
pub fn battery_step(
    policy: &mut BatteryPolicy,
    e_prev: f64,
    beta: f64,
    tech: &EssTechnology,
    caps: &Capacities,
    slot_hours: f64,
) -> SlotAction {
    let r = policy.reserve;
    let mag = beta.abs();
    // Without a reserve there is nothing to track or restore for.
    let desired = if r == 0.0 {
        0.0
    } else if mag < policy.theta1 {
        r * beta
    } else if mag <= policy.theta0 {
        policy.theta1 * r * beta.signum()
    } else {
        policy.state.restore_slots += 1;
        restore_power(policy.target_energy, e_prev, tech, slot_hours)
    };
    realize(desired, e_prev, tech, caps, slot_hours, &mut policy.state)
}

impl OnlinePolicy for BatteryPolicy {
    fn reserve(&self) -> f64 {
        self.reserve
    }

    fn target_energy(&self) -> f64 {
        self.target_energy
    }

    fn state(&self) -> &PolicyState {
        &self.state
    }

    fn step(
        &mut self,
        _t: usize,
        e_prev: f64,
        beta: f64,
        tech: &EssTechnology,
        caps: &Capacities,
        slot_hours: f64,
    ) -> SlotAction {
        battery_step(self, e_prev, beta, tech, caps, slot_hours)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcFwPolicy {
    /// Slots between energy restorations; `None` never restores.
    pub adjust_interval: Option<usize>,
    pub theta1: f64,
    pub reserve: f64,
    pub target_energy: f64,
    #[serde(default)]
    pub state: PolicyState,
}

pub fn init_ucfw_policy(
    rho1: f64,
    rho2: f64,
    tech: &EssTechnology,
    caps: &Capacities,
    reserve: f64,
    slot_hours: f64,
) -> Result<UcFwPolicy> {
    check_rhos(rho1, rho2)?;
    let adjust_interval = (rho2 < 1.0).then(|| ceil_guarded(1.0 / (1.0 - rho2)).max(1.0) as usize);
    Ok(UcFwPolicy {
        adjust_interval,
        theta1: 1.0 - rho1,
        reserve: reserve.max(0.0),
        target_energy: target_energy(tech, caps, slot_hours),
        state: PolicyState::default(),
    })
}

pub fn ucfw_step(
    policy: &mut UcFwPolicy,
    t: usize,
    e_prev: f64,
    beta: f64,
    tech: &EssTechnology,
    caps: &Capacities,
    slot_hours: f64,
) -> SlotAction {
    let r = policy.reserve;
    let desired = if r == 0.0 {
        0.0
    } else if policy.adjust_interval.is_some_and(|k| t.is_multiple_of(k)) {
        policy.state.restore_slots += 1;
        restore_power(policy.target_energy, e_prev, tech, slot_hours)
    } else if beta.abs() < policy.theta1 {
        r * beta
    } else {
        policy.theta1 * r * beta.signum()
    };
    realize(desired, e_prev, tech, caps, slot_hours, &mut policy.state)
}

impl OnlinePolicy for UcFwPolicy {
    fn reserve(&self) -> f64 {
        self.reserve
    }

    fn target_energy(&self) -> f64 {
        self.target_energy
    }

    fn state(&self) -> &PolicyState {
        &self.state
    }

    fn step(
        &mut self,
        t: usize,
        e_prev: f64,
        beta: f64,
        tech: &EssTechnology,
        caps: &Capacities,
        slot_hours: f64,
    ) -> SlotAction {
        ucfw_step(self, t, e_prev, beta, tech, caps, slot_hours)
    }
}

/// `lambda * min(history)`.
pub fn estimate_reserve(history: &[f64], lambda: f64) -> Result<f64> {
    if history.is_empty() {
        return Err(contract("reserve history is empty"));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(contract(format!("lambda must be in [0, 1], got {lambda}")));
    }
    Ok(lambda * history.iter().copied().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineResult {
    pub reserve_kw: f64,
    pub schedule: Schedule,
    pub revenue_per_day: f64,
    pub tracked_ok_count: usize,
    pub tracked_ok_fraction: f64,
    pub violations: usize,
    pub feasible: bool,
}

/// Steps `policy` over `signal` from the policy's target energy.
pub fn run_online(
    policy: &mut dyn OnlinePolicy,
    signal: &Trace,
    tech: &EssTechnology,
    caps: &Capacities,
    params: &RsrParams,
) -> Result<OnlineResult> {
    params.validate()?;
    let slot_hours = signal.slot_hours();
    let mu = per_slot_self_discharge(tech, slot_hours);
    let reserve = policy.reserve();
    let e0 = policy.target_energy();
    let mut e = e0;
    let mut charge = Vec::with_capacity(signal.len());
    let mut discharge = Vec::with_capacity(signal.len());
    for (k, &beta) in signal.values.iter().enumerate() {
        let a = policy.step(k + 1, e, beta, tech, caps, slot_hours);
        policy.observe(k + 1, beta, &a);
        e = (1.0 - mu) * e + (a.charge - a.discharge) * slot_hours;
        charge.push(a.charge);
        discharge.push(a.discharge);
    }
    let schedule = simulate_schedule(tech, e0, &charge, &discharge, slot_hours)?;
    let violations = check_feasibility(&schedule, tech, caps, ONLINE_TOL).len();
    let tracked_ok_count = signal
        .values
        .iter()
        .zip(&schedule.net_power)
        .filter(|(&b, &u)| tracking_ok(u, reserve, b, params.rho1, ONLINE_TOL))
        .count();
    let revenue_per_day = rsr_revenue(params, &signal.values, reserve, &schedule.net_power);
    let feasible = violations == 0 && tracked_ok_count >= required_tracked(signal.len(), params.rho2);
    Ok(OnlineResult {
        reserve_kw: reserve,
        tracked_ok_fraction: tracked_ok_count as f64 / signal.len().max(1) as f64,
        schedule,
        revenue_per_day,
        tracked_ok_count,
        violations,
        feasible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Battery,
    Ucfw,
}

impl PolicyKind {
    /// Ultra-capacitors and flywheels use the fixed-interval policy.
    pub fn for_tech(name: &str) -> Self {
        match name {
            "uc" | "fw" => PolicyKind::Ucfw,
            _ => PolicyKind::Battery,
        }
    }

    /// Offline heuristic paired with the policy when `rho2 < 1`.
    pub fn offline_heuristic(self) -> Heuristic {
        match self {
            PolicyKind::Battery => Heuristic::MinCap,
            PolicyKind::Ucfw => Heuristic::FixInt,
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "battery" => Ok(PolicyKind::Battery),
            "ucfw" => Ok(PolicyKind::Ucfw),
            _ => Err(format!("unknown policy `{s}` (expected battery or ucfw)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutConfig {
    pub window_hours: usize,
    pub lambda: f64,
    pub policy: PolicyKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourReport {
    /// 0-based hour of the signal.
    pub hour: usize,
    pub offline_reserve_kw: f64,
    pub offline_revenue: f64,
    pub reserve_kw: f64,
    pub revenue: f64,
    pub tracked_ok_fraction: f64,
    pub violations: usize,
    pub feasible: bool,
    /// Online schedule of the hour; not serialized.
    #[serde(skip)]
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub tech: String,
    pub policy: PolicyKind,
    pub lambda: f64,
    /// Offline optimal reserve of every hour.
    pub offline_reserves_kw: Vec<f64>,
    pub hours: Vec<HourReport>,
    pub feasible_hours: usize,
    pub total_violations: usize,
    pub online_revenue: f64,
    pub offline_revenue: f64,
}

struct OfflineHour {
    reserve: f64,
    revenue: f64,
}

fn offline_hour(
    hour_signal: &Trace,
    tech: &EssTechnology,
    caps: &Capacities,
    params: &RsrParams,
    heuristic: Heuristic,
    seed: u64,
) -> Result<OfflineHour> {
    let mut p = params.clone();
    p.fixed_caps = Some(*caps);
    p.cap_bounds = None;
    p.initial_energy = Some(target_energy(tech, caps, hour_signal.slot_hours()));
    let tracked: Option<TrackedSet> = if p.rho2 < 1.0 {
        Some(select(heuristic, &hour_signal.values, p.rho2, seed)?)
    } else {
        None
    };
    let spec = ProgramSpec::Rsr(RsrSpec {
        params: p,
        signal: hour_signal.clone(),
    });
    let plan = optimize(tech, &spec, tracked.as_ref())?;
    Ok(OfflineHour {
        reserve: plan.reserve,
        revenue: plan.revenue_per_day,
    })
}

/// For each of the last `window_hours` hours of a `2 * window_hours` signal:
/// estimate the reserve from the offline optima of the preceding
/// `window_hours` hours, initialize the policy from that history and run it.
pub fn holdout(
    signal: &Trace,
    tech: &EssTechnology,
    caps: &Capacities,
    params: &RsrParams,
    cfg: &HoldoutConfig,
) -> Result<HoldoutReport> {
    let per_hour = 3600.0 / signal.slot_seconds;
    if per_hour.fract() != 0.0 || per_hour < 1.0 {
        return Err(contract("slot length must divide one hour"));
    }
    let per_hour = per_hour as usize;
    let w = cfg.window_hours;
    if w == 0 || signal.len() < 2 * w * per_hour {
        return Err(contract(format!(
            "hold-out needs {} hours of signal, got {:.2}",
            2 * w,
            signal.len() as f64 / per_hour as f64
        )));
    }
    estimate_reserve(&[0.0], cfg.lambda)?;
    let heuristic = cfg.policy.offline_heuristic();
    let hour = |h: usize| signal.window(h * per_hour, (h + 1) * per_hour);

    use rayon::prelude::*;
    let offline: Vec<OfflineHour> = (0..2 * w)
        .into_par_iter()
        .map(|h| offline_hour(&hour(h), tech, caps, params, heuristic, cfg.seed.wrapping_add(h as u64)))
        .collect::<Result<_>>()?;
    let reserves: Vec<f64> = offline.iter().map(|o| o.reserve).collect();

    let mut hours = Vec::with_capacity(w);
    for h in w..2 * w {
        let reserve = estimate_reserve(&reserves[h - w..h], cfg.lambda)?;
        let test = hour(h);
        let result = match cfg.policy {
            PolicyKind::Battery => {
                let hist = signal.window((h - w) * per_hour, h * per_hour);
                let mut pol = init_battery_policy(&hist, params.rho1, params.rho2, tech, caps, reserve)?;
                run_online(&mut pol, &test, tech, caps, params)?
            }
            PolicyKind::Ucfw => {
                let mut pol = init_ucfw_policy(params.rho1, params.rho2, tech, caps, reserve, test.slot_hours())?;
                run_online(&mut pol, &test, tech, caps, params)?
            }
        };
        hours.push(HourReport {
            hour: h,
            offline_reserve_kw: offline[h].reserve,
            offline_revenue: offline[h].revenue,
            reserve_kw: reserve,
            revenue: result.revenue_per_day,
            tracked_ok_fraction: result.tracked_ok_fraction,
            violations: result.violations,
            feasible: result.feasible,
            schedule: result.schedule,
        });
    }
    Ok(HoldoutReport {
        tech: tech.name.clone(),
        policy: cfg.policy,
        lambda: cfg.lambda,
        offline_reserves_kw: reserves,
        feasible_hours: hours.iter().filter(|h| h.feasible).count(),
        total_violations: hours.iter().map(|h| h.violations).sum(),
        online_revenue: hours.iter().map(|h| h.revenue).sum(),
        offline_revenue: hours.iter().map(|h| h.offline_revenue).sum(),
        hours,
    })
}
