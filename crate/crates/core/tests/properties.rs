use esskit_core::heuristics::fix_int_violations;
use esskit_core::programs::{build_rsr_lp, RsrParams, RsrSpec};
use esskit_core::traces::{downsample, gen_power_trace, gen_rsr_signal, PowerTraceParams, RsrSignalParams};
use esskit_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::*;

fn lp_cases() -> ProptestConfig {
    ProptestConfig::with_cases(48)
}

fn rates(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..100.0f64, len)
}

fn rsr_instance(seed: u64, slots: usize) -> (EssTechnology, RsrSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tech = random_tech(&mut rng);
    let mut b: f64 = 0.0;
    let beta: Vec<f64> = (0..slots)
        .map(|_| {
            b = (b + rng.gen_range(-0.4..=0.4)).clamp(-1.0, 1.0);
            b
        })
        .collect();
    let params = RsrParams {
        reserve_price: rng.gen_range(0.05..1.0),
        penalty_coeff: rng.gen_range(0.0..2.0),
        rho1: rng.gen_range(0.05..0.5),
        rho2: 1.0,
        cycles_per_day: rng.gen_range(1.0..300.0),
        hours_per_day: 24.0,
        cap_bounds: None,
        fixed_caps: Some(Capacities::new(rng.gen_range(10.0..500.0), rng.gen_range(1.0..200.0))),
        periodic: false,
        initial_energy: None,
    };
    (tech, RsrSpec { params, signal: signal(60.0, beta) })
}

fn solve_rsr(tech: &EssTechnology, spec: &RsrSpec, tracked: Option<&TrackedSet>) -> Option<ProgramPlan> {
    optimize(tech, &ProgramSpec::Rsr(spec.clone()), tracked).ok()
}

proptest! {
    #[test]
    fn simulation_is_linear(
        seed in any::<u64>(),
        ra in rates(12), da in rates(12), rb in rates(12), db in rates(12),
        ea in 0.0..500.0f64, eb in 0.0..500.0f64,
        slot_seconds in prop::sample::select(vec![4.0, 60.0, 900.0]),
    ) {
        let tech = random_tech(&mut ChaCha8Rng::seed_from_u64(seed));
        let h = slot_seconds / 3600.0;
        let a = simulate_schedule(&tech, ea, &ra, &da, h).unwrap();
        let b = simulate_schedule(&tech, eb, &rb, &db, h).unwrap();
        let sum = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p + q).collect::<Vec<f64>>();
        let ab = simulate_schedule(&tech, ea + eb, &sum(&ra, &rb), &sum(&da, &db), h).unwrap();
        for t in 0..=12 {
            let expect = a.stored_energy[t] + b.stored_energy[t];
            prop_assert!((ab.stored_energy[t] - expect).abs() <= 1e-9 * expect.abs().max(1.0));
        }
        prop_assert!(ab.recursion_residual(&tech) <= 1e-9);
    }

    #[test]
    fn amortized_prices_rise_with_cycles(seed in any::<u64>(), c1 in 0.0..1000.0f64, c2 in 0.0..1000.0f64) {
        let tech = random_tech(&mut ChaCha8Rng::seed_from_u64(seed));
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        let a = amortized_prices(&tech, lo);
        let b = amortized_prices(&tech, hi);
        prop_assert!(b.power_price_per_day >= a.power_price_per_day);
        prop_assert!(b.energy_price_per_day >= a.energy_price_per_day);
    }

    #[test]
    fn ramp_flag_iff_step_exceeded(d in prop::collection::vec(0.0..50.0f64, 2..20), ramp in 1.0..600.0f64) {
        let tech = EssTechnology {
            ramp_time_seconds: ramp,
            self_discharge_per_hour: 0.0,
            depth_of_discharge: 1.0,
            ..tech("x")
        };
        let caps = Capacities::new(50.0, 1e9);
        let h = 60.0 / 3600.0;
        let step = 50.0 * 60.0 / ramp;
        let charge = vec![0.0; d.len()];
        let sched = simulate_schedule(&tech, 1e8, &charge, &d, h).unwrap();
        let flagged: Vec<usize> = check_feasibility(&sched, &tech, &caps, 1e-9)
            .into_iter()
            .filter(|v| v.kind == ViolationKind::Ramp)
            .map(|v| v.slot)
            .collect();
        let expect: Vec<usize> = (1..d.len()).filter(|&t| d[t] - d[t - 1] > step + 1e-9).map(|t| t + 1).collect();
        prop_assert_eq!(flagged, expect);
    }

    #[test]
    fn heuristic_cardinality_and_shape(
        beta in prop::collection::vec(-1.0..=1.0f64, 1..200),
        rho2 in 0.05..=1.0f64,
        seed in any::<u64>(),
    ) {
        let n = beta.len();
        let k = required_tracked(n, rho2);
        prop_assert_eq!(k, (rho2 * n as f64 - 1e-9).ceil() as usize);
        for h in [Heuristic::Rand, Heuristic::MinCap, Heuristic::FixInt] {
            let set = select(h, &beta, rho2, seed).unwrap();
            prop_assert_eq!(set.slots.len(), k);
            prop_assert!(set.slots.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(set.slots.iter().all(|&s| (1..=n).contains(&s)));
        }
        let mask = min_cap_select(&beta, rho2).unwrap().mask();
        let tracked_max = (0..n).filter(|&i| mask[i]).map(|i| beta[i].abs()).fold(0.0, f64::max);
        let skipped_min = (0..n).filter(|&i| !mask[i]).map(|i| beta[i].abs()).fold(f64::INFINITY, f64::min);
        prop_assert!(tracked_max <= skipped_min);

        let v = fix_int_violations(n, rho2).unwrap();
        if !v.is_empty() {
            let (lo, hi) = (n / v.len(), n.div_ceil(v.len()));
            prop_assert_eq!(*v.last().unwrap(), n);
            prop_assert!(v[0] <= hi);
            for w in v.windows(2) {
                prop_assert!(w[1] - w[0] >= lo && w[1] - w[0] <= hi, "{:?}", v);
            }
        }
    }

    #[test]
    fn rand_subsets_nest(n in 1usize..300, a in 0.05..=1.0f64, b in 0.05..=1.0f64, seed in any::<u64>()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let small = rand_select(n, lo, seed).unwrap();
        let big = rand_select(n, hi, seed).unwrap().mask();
        prop_assert!(small.slots.iter().all(|&s| big[s - 1]));
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>(), tau in 50.0..300.0f64, mr in 0.0..0.1f64) {
        let p = RsrSignalParams { slots: 500, slot_seconds: 4.0, tau, mean_reversion: mr, seed };
        prop_assert_eq!(gen_rsr_signal(&p).unwrap(), gen_rsr_signal(&p).unwrap());
        let q = PowerTraceParams { seed, ..PowerTraceParams::default() };
        prop_assert_eq!(gen_power_trace(&q).unwrap(), gen_power_trace(&q).unwrap());
    }

    #[test]
    fn pure_walk_respects_increment_bound(seed in any::<u64>(), tau in 4.0..300.0f64, slot_seconds in 1.0..10.0f64) {
        let p = RsrSignalParams { slots: 2000, slot_seconds, tau, mean_reversion: 0.0, seed };
        let s = gen_rsr_signal(&p).unwrap();
        prop_assert_eq!(s.values[0], 0.0);
        let bound = slot_seconds / tau;
        prop_assert!(s.values.windows(2).all(|w| (w[1] - w[0]).abs() <= bound));
        prop_assert!(s.values.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn downsample_factors_compose(values in prop::collection::vec(-1.0..=1.0f64, 1..400), f in 1usize..6, g in 1usize..6) {
        let t = Trace::new(TraceKind::RsrSignal, 4.0, values).unwrap();
        let (once, _) = downsample(&t, f * g).unwrap();
        let (twice, _) = downsample(&downsample(&t, f).unwrap().0, g).unwrap();
        prop_assert_eq!(once.len(), twice.len());
        prop_assert_eq!(once.slot_seconds, twice.slot_seconds);
        for (a, b) in once.values.iter().zip(&twice.values) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn csv_round_trips(values in prop::collection::vec(0.0..1e6f64, 1..100), slot_seconds in 0.1..3600.0f64) {
        let t = Trace::new(TraceKind::PowerKw, slot_seconds, values).unwrap();
        prop_assert_eq!(Trace::from_csv(&t.to_csv(), "mem").unwrap(), t);
    }
}

proptest! {
    #![proptest_config(lp_cases())]

    /// Dropping tracked slots can only help.
    #[test]
    fn fewer_tracked_slots_never_lower_profit(seed in any::<u64>(), rho2 in 0.5..0.95f64) {
        let (tech, mut spec) = rsr_instance(seed, 10);
        let Some(full) = solve_rsr(&tech, &spec, None) else { return Ok(()) };
        spec.params.rho2 = rho2;
        let small = rand_select(10, rho2, seed).unwrap();
        let relaxed = solve_rsr(&tech, &spec, Some(&small)).expect("relaxation of a solved LP");
        prop_assert!(relaxed.profit_per_day >= full.profit_per_day - 1e-6 * full.profit_per_day.abs().max(1.0));
    }

    #[test]
    fn penalty_weight_never_raises_profit(seed in any::<u64>(), extra in 0.0..3.0f64) {
        let (tech, mut spec) = rsr_instance(seed, 10);
        let Some(a) = solve_rsr(&tech, &spec, None) else { return Ok(()) };
        spec.params.penalty_coeff += extra;
        let b = solve_rsr(&tech, &spec, None).unwrap();
        prop_assert!(b.profit_per_day <= a.profit_per_day + 1e-6 * a.profit_per_day.abs().max(1.0));
    }

    /// Scaling every price by `alpha` scales the optimum and keeps the
    /// original reserve optimal.
    #[test]
    fn price_scaling_keeps_argmax(seed in any::<u64>(), alpha in 0.1..10.0f64) {
        let (tech, spec) = rsr_instance(seed, 8);
        let Some(base) = solve_rsr(&tech, &spec, None) else { return Ok(()) };
        let mut t2 = tech.clone();
        t2.power_price *= alpha;
        t2.energy_price *= alpha;
        let mut s2 = spec.clone();
        s2.params.reserve_price *= alpha;
        let scaled = solve_rsr(&t2, &s2, None).unwrap();
        let scale = (alpha * base.profit_per_day).abs().max(1.0);
        prop_assert!((scaled.profit_per_day - alpha * base.profit_per_day).abs() <= 1e-6 * scale);

        let mut lp = build_rsr_lp(&t2, &s2, None).unwrap();
        lp.problem.set_bounds(lp.vars.reserve, base.reserve, base.reserve);
        let pinned = esskit_lp::solve(&lp.problem).unwrap();
        prop_assert!(pinned.is_optimal());
        prop_assert!((pinned.objective_value - scaled.lp_objective).abs() <= 1e-6 * scale);
    }

    #[test]
    fn online_policies_stay_safe_and_replay(seed in any::<u64>(), frac in 0.0..1.0f64, battery in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tech = random_tech(&mut rng);
        let caps = Capacities::new(rng.gen_range(10.0..500.0), rng.gen_range(1.0..200.0));
        let sig = gen_rsr_signal(&RsrSignalParams { slots: 240, slot_seconds: 15.0, tau: 100.0, mean_reversion: 0.02, seed }).unwrap();
        let hist = sig.window(0, 120);
        let live = sig.window(120, 240);
        let params = RsrParams { rho2: 0.9, ..rsr_params(Some(caps)) };
        let reserve = frac * caps.p_cap;
        let run = || -> OnlineResult {
            let mut policy: Box<dyn OnlinePolicy> = if battery {
                Box::new(init_battery_policy(&hist, 0.2, 0.9, &tech, &caps, reserve).unwrap())
            } else {
                Box::new(init_ucfw_policy(0.2, 0.9, &tech, &caps, reserve, live.slot_hours()).unwrap())
            };
            run_online(policy.as_mut(), &live, &tech, &caps, &params).unwrap()
        };
        let a = run();
        prop_assert_eq!(a.violations, 0);
        prop_assert!(check_feasibility(&a.schedule, &tech, &caps, 1e-9).is_empty());
        prop_assert!(a.schedule.charge.iter().zip(&a.schedule.discharge).all(|(r, d)| r * d == 0.0));
        prop_assert_eq!(a.schedule, run().schedule);
    }

    /// With room to spare the battery policy delivers `R beta` exactly below
    /// `theta1` and the capped value between the thresholds.
    #[test]
    fn battery_tracks_exactly_with_headroom(seed in any::<u64>()) {
        let tech = EssTechnology {
            self_discharge_per_hour: 0.0,
            ramp_time_seconds: 0.0,
            ..tech("x")
        };
        let reserve = 10.0;
        let caps = Capacities::new(reserve * tech.charge_rate_ratio * 2.0, 1e7);
        let sig = gen_rsr_signal(&RsrSignalParams { slots: 200, slot_seconds: 15.0, tau: 60.0, mean_reversion: 0.02, seed }).unwrap();
        let hist = sig.window(0, 100);
        let live = sig.window(100, 200);
        let mut policy = init_battery_policy(&hist, 0.2, 0.9, &tech, &caps, reserve).unwrap();
        let (t0, t1) = (policy.theta0, policy.theta1);
        let out = run_online(&mut policy, &live, &tech, &caps, &rsr_params(Some(caps))).unwrap();
        for (b, u) in live.values.iter().zip(&out.schedule.net_power) {
            if b.abs() < t1 {
                prop_assert!((u - reserve * b).abs() <= 1e-9, "beta {} u {}", b, u);
            } else if b.abs() <= t0 {
                prop_assert!((u - t1 * reserve * b.signum()).abs() <= 1e-9);
            }
        }
    }

    /// A feasible online run is a feasible point of the offline LP that
    /// tracks the same slots, so the offline revenue is at least as high.
    #[test]
    fn online_never_beats_offline(seed in any::<u64>(), frac in 0.01..0.3f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Keep e_m = DoD E / 2 inside the band.
        let tech = EssTechnology {
            ramp_time_seconds: 0.0,
            depth_of_discharge: rng.gen_range(0.7..=1.0),
            ..random_tech(&mut rng)
        };
        let caps = Capacities::new(rng.gen_range(50.0..500.0), rng.gen_range(50.0..500.0));
        let sig = gen_rsr_signal(&RsrSignalParams { slots: 60, slot_seconds: 60.0, tau: 600.0, mean_reversion: 0.02, seed }).unwrap();
        let hist = sig.window(0, 30);
        let live = sig.window(30, 60);
        let rho2 = 0.7;
        let params = RsrParams { rho2, ..rsr_params(Some(caps)) };
        let mut policy = init_battery_policy(&hist, 0.2, 0.9, &tech, &caps, frac * caps.p_cap).unwrap();
        let online = run_online(&mut policy, &live, &tech, &caps, &params).unwrap();
        if !online.feasible {
            return Ok(());
        }
        let need = required_tracked(live.len(), rho2);
        let slots: Vec<usize> = live
            .values
            .iter()
            .zip(&online.schedule.net_power)
            .enumerate()
            .filter(|(_, (&b, &u))| programs::tracking_ok(u, online.reserve_kw, b, params.rho1, 0.0))
            .map(|(k, _)| k + 1)
            .take(need)
            .collect();
        prop_assume!(slots.len() == need);
        let set = TrackedSet { slots, rho2, total_slots: live.len() };
        let spec = RsrSpec {
            params: RsrParams { initial_energy: Some(online.schedule.stored_energy[0]), ..params.clone() },
            signal: live.clone(),
        };
        let offline = solve_rsr(&tech, &spec, Some(&set)).expect("online schedule is a feasible point");
        prop_assert!(online.revenue_per_day <= offline.revenue_per_day + 1e-6 * offline.revenue_per_day.abs().max(1.0));
    }
}

#[test]
fn feasibility_closure_over_random_programs() {
    let mut solved = 0;
    for seed in 0..600u64 {
        let inst = random_instance(seed);
        if let Ok(plan) = optimize(&inst.tech, &inst.spec, inst.tracked.as_ref()) {
            check_plan(&inst, &plan, 1e-6).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            solved += 1;
        }
    }
    assert!(solved >= 100, "only {solved} solved instances");
}

#[test]
fn online_edge_cases() {
    let tech = tech("x");
    let caps = Capacities::new(100.0, 50.0);
    let sig = gen_rsr_signal(&RsrSignalParams { slots: 120, slot_seconds: 30.0, tau: 100.0, mean_reversion: 0.02, seed: 3 }).unwrap();
    let params = RsrParams { rho2: 0.9, ..rsr_params(Some(caps)) };
    let mut zero = init_battery_policy(&sig, 0.2, 0.9, &tech, &caps, 0.0).unwrap();
    let out = run_online(&mut zero, &sig, &tech, &caps, &params).unwrap();
    assert!(out.feasible && out.violations == 0);
    assert_eq!(out.revenue_per_day, 0.0);
    assert_eq!(out.tracked_ok_count, sig.len());

    // Without self-discharge a zero signal never leaves e_m.
    let lossless = EssTechnology { self_discharge_per_hour: 0.0, ..tech.clone() };
    let flat = Trace::new(TraceKind::RsrSignal, 30.0, vec![0.0; 60]).unwrap();
    let mut uc = init_ucfw_policy(0.2, 0.9, &lossless, &caps, 40.0, flat.slot_hours()).unwrap();
    let mut bat = init_battery_policy(&sig, 0.2, 0.9, &lossless, &caps, 40.0).unwrap();
    for p in [&mut uc as &mut dyn OnlinePolicy, &mut bat] {
        let out = run_online(p, &flat, &lossless, &caps, &params).unwrap();
        assert_eq!(out.tracked_ok_count, 60);
        assert!(out.schedule.net_power.iter().all(|&u| u == 0.0));
        assert!((out.revenue_per_day - 24.0 * 0.1 * 40.0).abs() < 1e-12);
    }

    assert_eq!(estimate_reserve(&[5.0, 3.0, 4.0], 0.0).unwrap(), 0.0);
    assert!(estimate_reserve(&[5.0], 1.5).is_err());
}

#[test]
fn default_signal_is_near_zero_mean() {
    for seed in 0..20 {
        let s = gen_rsr_signal(&RsrSignalParams { seed, ..RsrSignalParams::default() }).unwrap();
        let mean = s.values.iter().sum::<f64>() / s.len() as f64;
        assert!(mean.abs() <= 0.05, "seed {seed}: mean {mean}");
        let cycles = traces::estimate_cycles_per_day(&s).unwrap();
        assert!((100.0..=1000.0).contains(&cycles), "seed {seed}: {cycles} cycles/day");
    }
}
