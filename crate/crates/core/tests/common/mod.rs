//! Shared oracles and instance generators for the integration tests.
#![allow(dead_code)]

pub mod vertex;

use esskit_core::ess::{amortized_prices, daily_cost, per_slot_self_discharge};
use esskit_core::programs::{tracking_ok, CrSpec, PsParams, PsSpec, RsrParams, RsrSpec};
use esskit_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tech(name: &str) -> EssTechnology {
    EssTechnology {
        name: name.into(),
        power_price: 100.0,
        energy_price: 1000.0,
        float_life_days: 365.0,
        cycle_life: 1e6,
        self_discharge_per_hour: 0.01,
        charge_efficiency: 0.9,
        charge_rate_ratio: 2.0,
        depth_of_discharge: 0.8,
        ramp_time_seconds: 0.0,
    }
}

pub fn signal(slot_seconds: f64, values: Vec<f64>) -> Trace {
    Trace::new(TraceKind::RsrSignal, slot_seconds, values).unwrap()
}

pub fn rsr_params(fixed: Option<Capacities>) -> RsrParams {
    RsrParams {
        reserve_price: 0.1,
        penalty_coeff: 1.0,
        rho1: 0.2,
        rho2: 1.0,
        cycles_per_day: 1.0,
        hours_per_day: 24.0,
        cap_bounds: None,
        fixed_caps: fixed,
        periodic: false,
        initial_energy: None,
    }
}

/// Interval of grid power `u` reachable with net stored-energy rate `x`
/// (`r - d`), allowing simultaneous charge and discharge.
pub fn net_power_interval(x: f64, tech: &EssTechnology, caps: &Capacities) -> Option<(f64, f64)> {
    let eta = tech.charge_efficiency;
    let r_max = caps.p_cap / tech.charge_rate_ratio;
    let d_max = caps.p_cap;
    if x >= 0.0 {
        // r = x + d, d in [0, min(d_max, r_max - x)]
        let extra = d_max.min(r_max - x);
        (extra >= -1e-12).then(|| (x / eta, x / eta + extra.max(0.0) * (1.0 / eta - 1.0)))
    } else {
        // d = r - x, r in [0, min(r_max, d_max + x)]
        let extra = r_max.min(d_max + x);
        (extra >= -1e-12).then(|| (x, x + extra.max(0.0) * (1.0 / eta - 1.0)))
    }
}

pub fn intersect(a: (f64, f64), b: (f64, f64)) -> Option<(f64, f64)> {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    (lo <= hi + 1e-12).then_some((lo, hi.max(lo)))
}

pub fn energy_grid(tech: &EssTechnology, caps: &Capacities, steps: usize) -> Vec<f64> {
    let (lo, hi) = caps.energy_band(tech);
    (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect()
}

/// Exhaustive search for the RSR profit at fixed caps: `R` in steps of 1%
/// of `P_cap` up to `r_range`, stored energy on a grid of 1% of the band,
/// and the exact best grid power within each energy transition.
pub fn rsr_grid_oracle(
    tech: &EssTechnology,
    caps: &Capacities,
    beta: &[f64],
    tracked: &[bool],
    slot_hours: f64,
    params: &RsrParams,
    r_range: f64,
) -> f64 {
    let grid = energy_grid(tech, caps, 100);
    let mu = per_slot_self_discharge(tech, slot_hours);
    let h_pi = params.hours_per_day * params.reserve_price;
    let weight = params.penalty_coeff * h_pi / beta.len() as f64;
    let cost = daily_cost(&amortized_prices(tech, params.cycles_per_day), caps);
    let mut best = f64::NEG_INFINITY;
    let step = caps.p_cap / 100.0;
    for k in 0..=(r_range / step).round() as usize {
        let r = step * k as f64;
        let mut pen = vec![0.0f64; grid.len()];
        for (t, &b) in beta.iter().enumerate() {
            let target = r * b;
            let band = (target - params.rho1 * r * b.abs(), target + params.rho1 * r * b.abs());
            let mut next = vec![f64::INFINITY; grid.len()];
            for (i, &e) in grid.iter().enumerate() {
                if !pen[i].is_finite() {
                    continue;
                }
                for (j, &e2) in grid.iter().enumerate() {
                    let x = (e2 - (1.0 - mu) * e) / slot_hours;
                    let Some(mut iv) = net_power_interval(x, tech, caps) else { continue };
                    if tracked[t] {
                        match intersect(iv, band) {
                            Some(v) => iv = v,
                            None => continue,
                        }
                    }
                    let dist = (iv.0 - target).max(target - iv.1).max(0.0);
                    next[j] = next[j].min(pen[i] + weight * dist);
                }
            }
            pen = next;
        }
        let min_pen = pen.iter().copied().fold(f64::INFINITY, f64::min);
        if min_pen.is_finite() {
            best = best.max(h_pi * r - min_pen - cost);
        }
    }
    best
}

/// Largest `R` on a 1% grid of `P` for which some periodic schedule on a 1%
/// energy grid keeps `0 <= p + u <= max(p) - R`.
pub fn ps_grid_oracle(tech: &EssTechnology, caps: &Capacities, power: &[f64], slot_hours: f64) -> f64 {
    let grid = energy_grid(tech, caps, 100);
    let mu = per_slot_self_discharge(tech, slot_hours);
    let peak = power.iter().copied().fold(0.0, f64::max);
    let mut best = 0.0;
    for k in 0..=100 {
        let r = caps.p_cap * k as f64 / 100.0;
        let feasible = (0..grid.len()).any(|start| {
            let mut reach = vec![false; grid.len()];
            reach[start] = true;
            for &p in power {
                let allowed = (-p, peak - r - p);
                let mut next = vec![false; grid.len()];
                for (&e, _) in grid.iter().zip(&reach).filter(|(_, &ok)| ok) {
                    for (j, &e2) in grid.iter().enumerate() {
                        let x = (e2 - (1.0 - mu) * e) / slot_hours;
                        let ok = net_power_interval(x, tech, caps).and_then(|iv| intersect(iv, allowed));
                        next[j] |= ok.is_some();
                    }
                }
                reach = next;
            }
            reach[start]
        });
        if feasible {
            best = r;
        }
    }
    best
}

pub fn ps_spec(power: Vec<f64>, slot_seconds: f64, fixed: Option<Capacities>) -> PsSpec {
    PsSpec {
        params: PsParams {
            opex_peak_price: 12.0,
            capex_peak_price: 10.0,
            capex_horizon_days: 3650.0,
            cycles_per_day: 1.0,
            cap_bounds: None,
            fixed_caps: fixed,
        },
        power_trace: Trace::new(TraceKind::PowerKw, slot_seconds, power).unwrap(),
    }
}


macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

/// T = 3 regulation instances against [`rsr_grid_oracle`]: all slots
/// tracked, then two partial tracked sets.
pub fn check_rsr_grid() -> Result<(), String> {
    let t = tech("x");
    let caps = Capacities::new(100.0, 20.0);
    let beta = vec![0.5, -0.5, 0.0];
    let slot_hours = 0.25;
    for tracked in [vec![true, true, true], vec![true, false, true], vec![false, true, true]] {
        let mut params = rsr_params(Some(caps));
        let set = if tracked.iter().all(|&b| b) {
            None
        } else {
            params.rho2 = 2.0 / 3.0;
            let slots: Vec<usize> = (1..=3).filter(|&k| tracked[k - 1]).collect();
            Some(TrackedSet {
                slots,
                rho2: 2.0 / 3.0,
                total_slots: 3,
            })
        };
        let spec = ProgramSpec::Rsr(RsrSpec {
            params: params.clone(),
            signal: signal(900.0, beta.clone()),
        });
        let plan = optimize(&t, &spec, set.as_ref()).map_err(|e| e.to_string())?;
        let oracle = rsr_grid_oracle(&t, &caps, &beta, &tracked, slot_hours, &params, 3.0 * caps.p_cap);
        let rel = (plan.profit_per_day - oracle) / plan.profit_per_day.abs();
        ensure!(plan.profit_per_day >= oracle - 1e-6, "{tracked:?}: lp {} < grid {oracle}", plan.profit_per_day);
        ensure!(rel <= 0.02, "{tracked:?}: lp {} grid {oracle} R {}", plan.profit_per_day, plan.reserve);
    }
    Ok(())
}

/// T = 4 peak-shaving instances against [`ps_grid_oracle`], plus a hand
/// check of the energy-limited case.
pub fn check_ps_grid() -> Result<(), String> {
    let t = EssTechnology {
        self_discharge_per_hour: 0.0,
        charge_rate_ratio: 1.0,
        depth_of_discharge: 1.0,
        ..tech("x")
    };
    let power = vec![100.0, 100.0, 40.0, 40.0];
    for caps in [Capacities::new(30.0, 40.0), Capacities::new(30.0, 80.0), Capacities::new(15.0, 100.0)] {
        let spec = ps_spec(power.clone(), 3600.0, Some(caps));
        let plan = optimize(&t, &ProgramSpec::Ps(spec.clone()), None).map_err(|e| e.to_string())?;
        let r_grid = ps_grid_oracle(&t, &caps, &power, 1.0);
        let price = programs::ps_daily_price(&spec.params);
        let cost = daily_cost(&amortized_prices(&t, 1.0), &caps);
        let oracle = price * r_grid - cost;
        ensure!(plan.reserve >= r_grid - 1e-6, "{caps:?}: R {} < grid {r_grid}", plan.reserve);
        ensure!((plan.reserve - r_grid) <= 0.02 * plan.reserve, "{caps:?}: R {} grid {r_grid}", plan.reserve);
        let rel = (plan.profit_per_day - oracle).abs() / plan.profit_per_day.abs();
        ensure!(rel <= 0.02, "{caps:?}: profit {} grid {oracle}", plan.profit_per_day);
    }
    // Two peak slots share 40 kWh.
    let spec = ProgramSpec::Ps(ps_spec(power, 3600.0, Some(Capacities::new(30.0, 40.0))));
    let plan = optimize(&t, &spec, None).map_err(|e| e.to_string())?;
    ensure!((plan.reserve - 20.0).abs() < 1e-6, "hand check R {} != 20", plan.reserve);
    Ok(())
}

/// One randomized program instance for the feasibility-closure suite.
#[derive(Debug, Clone)]
pub struct Instance {
    pub tech: EssTechnology,
    pub spec: ProgramSpec,
    pub tracked: Option<TrackedSet>,
}

pub fn random_tech(rng: &mut ChaCha8Rng) -> EssTechnology {
    EssTechnology {
        name: "rand".into(),
        power_price: rng.gen_range(50.0..600.0),
        energy_price: rng.gen_range(50.0..5000.0),
        float_life_days: rng.gen_range(365.0..4000.0),
        cycle_life: rng.gen_range(1e3..1e5),
        self_discharge_per_hour: if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..0.02) },
        charge_efficiency: rng.gen_range(0.6..=1.0),
        charge_rate_ratio: rng.gen_range(1.0..4.0),
        depth_of_discharge: rng.gen_range(0.5..=1.0),
        ramp_time_seconds: if rng.gen_bool(0.6) { 0.0 } else { rng.gen_range(60.0..900.0) },
    }
}

fn random_caps(rng: &mut ChaCha8Rng) -> (Option<Capacities>, Option<Capacities>) {
    let caps = Capacities::new(rng.gen_range(10.0..1000.0), rng.gen_range(1.0..1000.0));
    if rng.gen_bool(0.5) {
        (None, Some(caps))
    } else {
        (Some(caps), None)
    }
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tech = random_tech(&mut rng);
    let slot_seconds = [4.0, 60.0, 300.0, 900.0][rng.gen_range(0..4)];
    let (cap_bounds, fixed_caps) = random_caps(&mut rng);
    match seed % 3 {
        0 => {
            let slots = rng.gen_range(3..=16);
            let mut b: f64 = rng.gen_range(-1.0..=1.0);
            let beta: Vec<f64> = (0..slots)
                .map(|_| {
                    b = (b + rng.gen_range(-0.4..=0.4)).clamp(-1.0, 1.0);
                    b
                })
                .collect();
            let rho2 = [1.0, 0.9, 0.75][rng.gen_range(0..3)];
            let heuristic = [Heuristic::Rand, Heuristic::MinCap, Heuristic::FixInt][rng.gen_range(0..3)];
            let tracked = (rho2 < 1.0).then(|| select(heuristic, &beta, rho2, seed).unwrap());
            let params = RsrParams {
                reserve_price: rng.gen_range(0.01..1.0),
                penalty_coeff: rng.gen_range(0.0..2.0),
                rho1: rng.gen_range(0.05..0.5),
                rho2,
                cycles_per_day: rng.gen_range(1.0..500.0),
                hours_per_day: 24.0,
                cap_bounds,
                fixed_caps,
                periodic: rng.gen_bool(0.3),
                initial_energy: None,
            };
            Instance {
                tech,
                spec: ProgramSpec::Rsr(RsrSpec {
                    params,
                    signal: signal(slot_seconds, beta),
                }),
                tracked,
            }
        }
        1 => {
            let horizon = rng.gen_range(3..=12);
            let window_start = rng.gen_range(1..horizon);
            let window_end = rng.gen_range(window_start + 1..=horizon);
            let spec = CrSpec {
                reserve_price: rng.gen_range(0.0..20.0),
                window_start,
                window_end,
                slot_seconds,
                horizon_slots: horizon,
                cycles_per_day: 1.0,
                cap_bounds,
                fixed_caps,
            };
            Instance {
                tech,
                spec: ProgramSpec::Cr(spec),
                tracked: None,
            }
        }
        _ => {
            let slots = rng.gen_range(3..=16);
            let power: Vec<f64> = (0..slots).map(|_| rng.gen_range(0.0..1000.0)).collect();
            let spec = PsSpec {
                params: PsParams {
                    opex_peak_price: rng.gen_range(0.0..30.0),
                    capex_peak_price: rng.gen_range(0.0..20.0),
                    capex_horizon_days: 3650.0,
                    cycles_per_day: rng.gen_range(0.5..3.0),
                    cap_bounds,
                    fixed_caps,
                },
                power_trace: Trace::new(TraceKind::PowerKw, slot_seconds, power).unwrap(),
            };
            Instance {
                tech,
                spec: ProgramSpec::Ps(spec),
                tracked: None,
            }
        }
    }
}

/// Checks an optimal plan against the model it came from: capacity, band
/// and ramp limits, the tracking band on tracked slots, the energy
/// recursion and a revenue recomputed from the schedule.
pub fn check_plan(inst: &Instance, plan: &ProgramPlan, tol: f64) -> Result<(), String> {
    let tech = &inst.tech;
    let sched = &plan.schedule;
    let v = check_feasibility(sched, tech, &plan.caps, tol);
    ensure!(v.is_empty(), "violations {v:?}");
    let residual = sched.recursion_residual(tech);
    ensure!(residual <= 1e-9, "recursion residual {residual}");
    let (revenue, cycles) = match &inst.spec {
        ProgramSpec::Rsr(s) => {
            let p = &s.params;
            let beta = &s.signal.values;
            let r = plan.reserve;
            let mask = inst.tracked.as_ref().map_or(vec![true; beta.len()], |t| t.mask());
            for t in 0..beta.len() {
                let u = sched.net_power[t];
                ensure!(
                    !mask[t] || tracking_ok(u, r, beta[t], p.rho1, tol),
                    "slot {}: u {u} outside band around {}",
                    t + 1,
                    r * beta[t]
                );
            }
            let err: f64 = (0..beta.len()).map(|t| (sched.net_power[t] - r * beta[t]).abs()).sum();
            let rev = p.hours_per_day * p.reserve_price * (r - p.penalty_coeff * err / beta.len() as f64);
            (rev, p.cycles_per_day)
        }
        ProgramSpec::Cr(s) => {
            for t in s.window_start..s.window_end {
                ensure!(sched.discharge[t] >= plan.reserve - tol, "window slot {} short", t + 1);
            }
            (s.reserve_price * plan.reserve, s.cycles_per_day)
        }
        ProgramSpec::Ps(s) => {
            let p = &s.power_trace.values;
            let shaved = programs::ps_realized_reduction(p, &sched.net_power);
            ensure!(shaved >= plan.reserve - tol, "shaved {shaved} < R {}", plan.reserve);
            for t in 0..p.len() {
                ensure!(p[t] + sched.net_power[t] >= -tol, "slot {} exports", t + 1);
            }
            let e = &sched.stored_energy;
            ensure!((e[0] - e[e.len() - 1]).abs() <= tol, "e_0 {} != e_T {}", e[0], e[e.len() - 1]);
            (programs::ps_daily_price(&s.params) * plan.reserve, s.params.cycles_per_day)
        }
    };
    let profit = revenue - daily_cost(&amortized_prices(tech, cycles), &plan.caps);
    let scale = plan.lp_objective.abs().max(1.0);
    ensure!(
        (profit - plan.lp_objective).abs() <= 1e-6 * scale,
        "recomputed profit {profit} vs objective {}",
        plan.lp_objective
    );
    ensure!((profit - plan.profit_per_day).abs() <= 1e-6 * scale, "reported profit {}", plan.profit_per_day);
    Ok(())
}
