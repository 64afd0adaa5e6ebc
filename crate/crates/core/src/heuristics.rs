//! Offline choice of the slots on which the tracking band is enforced when
//! only a fraction `rho2` of slots must track the signal.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// Guard for ceilings of products that should be integral, e.g.
/// `0.7 * 10 = 7.000000000000001`.
const CEIL_SLACK: f64 = 1e-9;

pub(crate) fn ceil_guarded(x: f64) -> f64 {
    (x - CEIL_SLACK).ceil()
}

/// Number of slots that must track: `ceil(rho2 * T)`.
pub fn required_tracked(total_slots: usize, rho2: f64) -> usize {
    (ceil_guarded(rho2 * total_slots as f64).max(0.0) as usize).min(total_slots)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    Rand,
    MinCap,
    FixInt,
}

impl std::str::FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rand" => Ok(Heuristic::Rand),
            "mincap" => Ok(Heuristic::MinCap),
            "fixint" => Ok(Heuristic::FixInt),
            _ => Err(format!("unknown heuristic `{s}` (expected rand, mincap or fixint)")),
        }
    }
}

/// Sorted 1-based slot indices on which tracking is enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedSet {
    pub slots: Vec<usize>,
    pub rho2: f64,
    pub total_slots: usize,
}

impl TrackedSet {
    pub fn all(total_slots: usize) -> Self {
        Self {
            slots: (1..=total_slots).collect(),
            rho2: 1.0,
            total_slots,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.slots.len() == self.total_slots
    }

    /// Membership mask indexed by 0-based slot.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.total_slots];
        for &s in &self.slots {
            m[s - 1] = true;
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(contract("tracked slots must be strictly ascending"));
        }
        if self.slots.first().is_some_and(|&s| s == 0)
            || self.slots.last().is_some_and(|&s| s > self.total_slots)
        {
            return Err(contract(format!("tracked slots must lie in [1, {}]", self.total_slots)));
        }
        Ok(())
    }
}

fn check_rho2(rho2: f64) -> Result<()> {
    if rho2 > 0.0 && rho2 <= 1.0 {
        Ok(())
    } else {
        Err(contract(format!("rho2 must be in (0, 1], got {rho2}")))
    }
}

/// Uniform random subset. The subsets for one seed are nested as `rho2`
/// grows because they are prefixes of one shuffled order.
pub fn rand_select(total_slots: usize, rho2: f64, seed: u64) -> Result<TrackedSet> {
    check_rho2(rho2)?;
    let mut order: Vec<usize> = (1..=total_slots).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut slots = order[..required_tracked(total_slots, rho2)].to_vec();
    slots.sort_unstable();
    Ok(TrackedSet {
        slots,
        rho2,
        total_slots,
    })
}

/// Slots with the smallest `|beta|`, ties to the lower index.
pub fn min_cap_select(signal: &[f64], rho2: f64) -> Result<TrackedSet> {
    check_rho2(rho2)?;
    let mut order: Vec<usize> = (0..signal.len()).collect();
    order.sort_by(|&a, &b| signal[a].abs().total_cmp(&signal[b].abs()));
    let mut slots: Vec<usize> = order[..required_tracked(signal.len(), rho2)]
        .iter()
        .map(|&i| i + 1)
        .collect();
    slots.sort_unstable();
    Ok(TrackedSet {
        slots,
        rho2,
        total_slots: signal.len(),
    })
}

/// Violation slots `ceil(k T / V)` for `k = 1..=V`, `V = T - ceil(rho2 T)`.
pub fn fix_int_violations(total_slots: usize, rho2: f64) -> Result<Vec<usize>> {
    check_rho2(rho2)?;
    let v = total_slots - required_tracked(total_slots, rho2);
    Ok((1..=v)
        .map(|k| (k * total_slots).div_ceil(v))
        .collect())
}

pub fn fix_int_select(total_slots: usize, rho2: f64) -> Result<TrackedSet> {
    let violations = fix_int_violations(total_slots, rho2)?;
    let mut skip = violations.iter().peekable();
    let slots = (1..=total_slots)
        .filter(|s| {
            if skip.peek() == Some(&s) {
                skip.next();
                false
            } else {
                true
            }
        })
        .collect();
    Ok(TrackedSet {
        slots,
        rho2,
        total_slots,
    })
}

/// Applies `heuristic` to `signal`; `seed` only matters for [`Heuristic::Rand`].
pub fn select(heuristic: Heuristic, signal: &[f64], rho2: f64, seed: u64) -> Result<TrackedSet> {
    match heuristic {
        Heuristic::Rand => rand_select(signal.len(), rho2, seed),
        Heuristic::MinCap => min_cap_select(signal, rho2),
        Heuristic::FixInt => fix_int_select(signal.len(), rho2),
    }
}
