//! Uniformly sampled time series: regulation signals and facility power.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    RsrSignal,
    PowerKw,
}

impl TraceKind {
    fn column(self) -> &'static str {
        match self {
            TraceKind::RsrSignal => "beta",
            TraceKind::PowerKw => "power_kw",
        }
    }

    fn check(self, v: f64) -> Option<&'static str> {
        match self {
            _ if !v.is_finite() => Some("value is not finite"),
            TraceKind::RsrSignal if !(-1.0..=1.0).contains(&v) => Some("signal outside [-1, 1]"),
            TraceKind::PowerKw if v < 0.0 => Some("negative power"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub slot_seconds: f64,
    pub values: Vec<f64>,
    pub kind: TraceKind,
}

impl Trace {
    pub fn new(kind: TraceKind, slot_seconds: f64, values: Vec<f64>) -> Result<Self> {
        if !(slot_seconds > 0.0) {
            return Err(contract("slot_seconds must be > 0"));
        }
        if let Some((i, msg)) = values
            .iter()
            .enumerate()
            .find_map(|(i, &v)| kind.check(v).map(|m| (i, m)))
        {
            return Err(contract(format!("trace value {} ({}): {msg}", i + 1, values[i])));
        }
        Ok(Self {
            slot_seconds,
            values,
            kind,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slot_hours(&self) -> f64 {
        self.slot_seconds / 3600.0
    }

    /// Slots `start..end` (0-based, half-open) as a new trace.
    pub fn window(&self, start: usize, end: usize) -> Trace {
        Trace {
            slot_seconds: self.slot_seconds,
            values: self.values[start..end].to_vec(),
            kind: self.kind,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("t,{}\n# slot_seconds={}\n", self.kind.column(), self.slot_seconds);
        for (t, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{v:?}", t + 1);
        }
        out
    }

    /// Parses the CSV produced by [`Trace::to_csv`]. `origin` names the
    /// source in error messages.
    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let err = |line: usize, msg: String| CoreError::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let kind = match lines.next() {
            Some((_, "t,beta")) => TraceKind::RsrSignal,
            Some((_, "t,power_kw")) => TraceKind::PowerKw,
            Some((n, other)) => {
                return Err(err(n, format!("expected header `t,beta` or `t,power_kw`, got `{other}`")))
            }
            None => return Err(err(1, "missing header".into())),
        };
        let slot_seconds = match lines.next() {
            Some((n, l)) => {
                let v = l
                    .strip_prefix("# slot_seconds=")
                    .ok_or_else(|| err(n, "expected `# slot_seconds=<number>`".into()))?;
                let s: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| err(n, format!("bad slot length `{v}`")))?;
                if !(s > 0.0) {
                    return Err(err(n, "slot_seconds must be > 0".into()));
                }
                s
            }
            None => return Err(err(2, "missing `# slot_seconds=` line".into())),
        };
        let mut values = Vec::new();
        for (n, l) in lines {
            if l.is_empty() {
                continue;
            }
            let (t, v) = l
                .split_once(',')
                .ok_or_else(|| err(n, format!("expected `t,value`, got `{l}`")))?;
            let t: usize = t
                .trim()
                .parse()
                .map_err(|_| err(n, format!("bad slot index `{t}`")))?;
            if t != values.len() + 1 {
                return Err(err(n, format!("slot index {t} out of order, expected {}", values.len() + 1)));
            }
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| err(n, format!("bad number `{v}`")))?;
            if let Some(msg) = kind.check(v) {
                return Err(err(n, format!("{msg}: {v}")));
            }
            values.push(v);
        }
        Ok(Self {
            slot_seconds,
            values,
            kind,
        })
    }
}

pub fn load_csv(path: &Path) -> Result<Trace> {
    let text = std::fs::read_to_string(path)?;
    Trace::from_csv(&text, &path.display().to_string())
}

pub fn save_csv(trace: &Trace, path: &Path) -> Result<()> {
    std::fs::write(path, trace.to_csv())?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsrSignalParams {
    pub slots: usize,
    pub slot_seconds: f64,
    /// Increments are bounded by `slot_seconds / tau`.
    pub tau: f64,
    /// Fraction of the current value pulled back toward zero every slot.
    pub mean_reversion: f64,
    pub seed: u64,
}

impl Default for RsrSignalParams {
    fn default() -> Self {
        Self {
            slots: 21_600,
            slot_seconds: 4.0,
            tau: 200.0,
            mean_reversion: 0.005,
            seed: 0,
        }
    }
}

/// Bounded-increment random walk in `[-1, 1]` starting from zero.
pub fn gen_rsr_signal(params: &RsrSignalParams) -> Result<Trace> {
    if params.slots == 0 {
        return Err(contract("signal needs at least one slot"));
    }
    if !(params.tau > 0.0) || !(0.0..=1.0).contains(&params.mean_reversion) {
        return Err(contract("tau must be > 0 and mean_reversion in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let step = params.slot_seconds / params.tau;
    let mut values = Vec::with_capacity(params.slots);
    let mut beta: f64 = 0.0;
    values.push(beta);
    for _ in 1..params.slots {
        let delta = if step.is_finite() && step > 0.0 {
            rng.gen_range(-step..=step)
        } else {
            0.0
        };
        beta = (beta * (1.0 - params.mean_reversion) + delta).clamp(-1.0, 1.0);
        values.push(beta);
    }
    Trace::new(TraceKind::RsrSignal, params.slot_seconds, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTraceParams {
    pub slots: usize,
    pub slot_seconds: f64,
    pub peak_kw: f64,
    /// Night-time load as a fraction of the peak.
    pub base_fraction: f64,
    /// Each sample is scaled by a factor drawn from `[1 - noise, 1]`.
    pub noise_fraction: f64,
    pub seed: u64,
}

impl Default for PowerTraceParams {
    fn default() -> Self {
        Self {
            slots: 96,
            slot_seconds: 900.0,
            peak_kw: 1000.0,
            base_fraction: 0.35,
            noise_fraction: 0.05,
            seed: 0,
        }
    }
}

/// Hours of the day spanned by the daytime half-sine.
const DAY_START_HOUR: f64 = 6.0;
const DAY_END_HOUR: f64 = 22.0;

/// Diurnal load: flat base at night, half-sine hump during the day, with
/// downward multiplicative noise, rescaled so the maximum equals the peak.
pub fn gen_power_trace(params: &PowerTraceParams) -> Result<Trace> {
    if params.slots == 0 || !(params.peak_kw > 0.0) {
        return Err(contract("power trace needs slots > 0 and peak_kw > 0"));
    }
    if !(0.0..1.0).contains(&params.base_fraction) || !(0.0..1.0).contains(&params.noise_fraction) {
        return Err(contract("base_fraction and noise_fraction must be in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let base = params.base_fraction * params.peak_kw;
    let slot_h = params.slot_seconds / 3600.0;
    let mut values: Vec<f64> = (0..params.slots)
        .map(|t| {
            let hour = ((t as f64 + 0.5) * slot_h).rem_euclid(24.0);
            let phase = (hour - DAY_START_HOUR) / (DAY_END_HOUR - DAY_START_HOUR);
            let hump = if (0.0..=1.0).contains(&phase) {
                (std::f64::consts::PI * phase).sin()
            } else {
                0.0
            };
            let clean = base + (params.peak_kw - base) * hump;
            clean * (1.0 - params.noise_fraction * rng.gen::<f64>())
        })
        .collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        let scale = params.peak_kw / max;
        for v in &mut values {
            *v = (*v * scale).min(params.peak_kw);
        }
        // Pin the argmax exactly despite rounding in the scale.
        if let Some(i) = values.iter().position(|&v| v == values.iter().copied().fold(0.0, f64::max)) {
            values[i] = params.peak_kw;
        }
    }
    Trace::new(TraceKind::PowerKw, params.slot_seconds, values)
}

/// Block means over `factor` slots. The second value is true when a
/// trailing remainder was dropped.
pub fn downsample(trace: &Trace, factor: usize) -> Result<(Trace, bool)> {
    if factor == 0 {
        return Err(contract("downsample factor must be >= 1"));
    }
    let blocks = trace.len() / factor;
    let values = (0..blocks)
        .map(|b| trace.values[b * factor..(b + 1) * factor].iter().sum::<f64>() / factor as f64)
        .collect();
    Ok((
        Trace {
            slot_seconds: trace.slot_seconds * factor as f64,
            values,
            kind: trace.kind,
        },
        !trace.len().is_multiple_of(factor),
    ))
}

/// Half the number of sign changes per day of signal, measured over the
/// `T - 1` slot transitions. Zeros do not break a run of equal sign.
pub fn estimate_cycles_per_day(trace: &Trace) -> Result<f64> {
    if trace.kind != TraceKind::RsrSignal {
        return Err(contract("cycle estimation needs a regulation signal"));
    }
    let mut changes = 0usize;
    let mut last_sign = 0.0;
    for &v in &trace.values {
        if v != 0.0 {
            let s = v.signum();
            if last_sign != 0.0 && s != last_sign {
                changes += 1;
            }
            last_sign = s;
        }
    }
    if trace.len() < 2 {
        return Ok(0.0);
    }
    let days = (trace.len() - 1) as f64 * trace.slot_seconds / 86_400.0;
    Ok(changes as f64 / 2.0 / days)
}
