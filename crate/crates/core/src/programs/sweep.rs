use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{optimize, ProgramKind, ProgramSpec};
use crate::error::{contract, CoreError, Result};
use crate::ess::{Capacities, EssTechnology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    PCap,
    ECap,
    ReservePrice,
    OpexPrice,
    CapexPrice,
    /// Technology price per kW of power capacity.
    PowerPrice,
    /// Technology price per kWh of energy capacity.
    EnergyPrice,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PCap => "p_cap",
            SweepAxis::ECap => "e_cap",
            SweepAxis::ReservePrice => "reserve_price",
            SweepAxis::OpexPrice => "opex_price",
            SweepAxis::CapexPrice => "capex_price",
            SweepAxis::PowerPrice => "power_price",
            SweepAxis::EnergyPrice => "energy_price",
        }
    }

    fn applies_to(self, program: ProgramKind) -> bool {
        match self {
            SweepAxis::ReservePrice => program != ProgramKind::Ps,
            SweepAxis::OpexPrice | SweepAxis::CapexPrice => program == ProgramKind::Ps,
            _ => true,
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            SweepAxis::PCap,
            SweepAxis::ECap,
            SweepAxis::ReservePrice,
            SweepAxis::OpexPrice,
            SweepAxis::CapexPrice,
            SweepAxis::PowerPrice,
            SweepAxis::EnergyPrice,
        ]
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| format!("unknown sweep axis `{s}`"))
    }
}

/// One grid point: the profit when the LP was optimal, otherwise the
/// failure as text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub profit_per_day: Option<f64>,
    pub reserve: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axis1: SweepAxis,
    pub values1: Vec<f64>,
    pub axis2: Option<SweepAxis>,
    pub values2: Vec<f64>,
    /// `cells[i][j]` for `values1[i]`, `values2[j]`; one column when 1-D.
    pub cells: Vec<Vec<SweepCell>>,
}

impl SweepGrid {
    /// Profit grid with axis values in the first row and column. Failed
    /// cells hold their status.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.axis2 {
            Some(a2) => {
                let _ = write!(out, "{}\\{}", self.axis1.name(), a2.name());
                for v in &self.values2 {
                    let _ = write!(out, ",{v}");
                }
            }
            None => out.push_str(&format!("{},profit_per_day", self.axis1.name())),
        }
        out.push('\n');
        for (v1, row) in self.values1.iter().zip(&self.cells) {
            let _ = write!(out, "{v1}");
            for c in row {
                match c.profit_per_day {
                    Some(p) => {
                        let _ = write!(out, ",{p}");
                    }
                    None => {
                        let _ = write!(out, ",{}", c.status);
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Capacity held for the unswept side of a capacity axis: the fixed value,
/// else the upper bound.
fn base_caps(spec: &mut ProgramSpec) -> Option<Capacities> {
    let (bounds, fixed) = spec.caps_mut();
    fixed.or(*bounds)
}

fn apply(axis: SweepAxis, value: f64, tech: &mut EssTechnology, spec: &mut ProgramSpec) {
    match axis {
        SweepAxis::PCap | SweepAxis::ECap => {
            let base = base_caps(spec).unwrap_or(Capacities::new(value, value));
            let caps = if axis == SweepAxis::PCap {
                Capacities::new(value, base.e_cap)
            } else {
                Capacities::new(base.p_cap, value)
            };
            *spec.caps_mut().1 = Some(caps);
        }
        SweepAxis::ReservePrice => match spec {
            ProgramSpec::Rsr(s) => s.params.reserve_price = value,
            ProgramSpec::Cr(s) => s.reserve_price = value,
            ProgramSpec::Ps(_) => {}
        },
        SweepAxis::OpexPrice => {
            if let ProgramSpec::Ps(s) = spec {
                s.params.opex_peak_price = value;
            }
        }
        SweepAxis::CapexPrice => {
            if let ProgramSpec::Ps(s) = spec {
                s.params.capex_peak_price = value;
            }
        }
        SweepAxis::PowerPrice => tech.power_price = value,
        SweepAxis::EnergyPrice => tech.energy_price = value,
    }
}

fn run_point(
    tech: &EssTechnology,
    spec: &ProgramSpec,
    points: &[(SweepAxis, f64)],
) -> SweepCell {
    let mut tech = tech.clone();
    let mut spec = spec.clone();
    for &(axis, value) in points {
        apply(axis, value, &mut tech, &mut spec);
    }
    match optimize(&tech, &spec, None) {
        Ok(plan) => SweepCell {
            profit_per_day: Some(plan.profit_per_day),
            reserve: Some(plan.reserve),
            status: "optimal".into(),
        },
        Err(CoreError::NotOptimal(s)) => SweepCell {
            profit_per_day: None,
            reserve: None,
            status: s.to_string(),
        },
        Err(e) => SweepCell {
            profit_per_day: None,
            reserve: None,
            status: format!("error: {e}"),
        },
    }
}

/// Optimizes once per grid point. A capacity axis fixes that capacity; the
/// other one is held at its fixed value or, failing that, its bound. Points
/// run in parallel on the current rayon pool and a failing point is recorded
/// in its cell.
pub fn sweep(
    tech: &EssTechnology,
    spec: &ProgramSpec,
    axis1: (SweepAxis, &[f64]),
    axis2: Option<(SweepAxis, &[f64])>,
) -> Result<SweepGrid> {
    let program = spec.kind();
    for (axis, values) in std::iter::once(axis1).chain(axis2) {
        if values.is_empty() {
            return Err(contract(format!("grid for `{}` is empty", axis.name())));
        }
        if !axis.applies_to(program) {
            return Err(contract(format!(
                "axis `{}` does not apply to program `{program}`",
                axis.name()
            )));
        }
    }
    if let Some((a2, _)) = axis2 {
        if a2 == axis1.0 {
            return Err(contract("sweep axes must differ"));
        }
    }
    let axes: Vec<SweepAxis> = std::iter::once(axis1.0).chain(axis2.map(|a| a.0)).collect();
    let both_caps = axes.contains(&SweepAxis::PCap) && axes.contains(&SweepAxis::ECap);
    let one_cap = axes.iter().any(|a| matches!(a, SweepAxis::PCap | SweepAxis::ECap));
    if one_cap && !both_caps && base_caps(&mut spec.clone()).is_none() {
        return Err(contract(
            "a single capacity axis needs the other capacity fixed or bounded in the spec",
        ));
    }
    let values2: Vec<f64> = axis2.map_or(vec![f64::NAN], |(_, v)| v.to_vec());
    let points: Vec<(usize, usize)> = (0..axis1.1.len())
        .flat_map(|i| (0..values2.len()).map(move |j| (i, j)))
        .collect();
    let flat: Vec<SweepCell> = points
        .par_iter()
        .map(|&(i, j)| {
            let mut pts = vec![(axis1.0, axis1.1[i])];
            if let Some((a2, _)) = axis2 {
                pts.push((a2, values2[j]));
            }
            run_point(tech, spec, &pts)
        })
        .collect();
    let cols = values2.len();
    let cells = flat.chunks(cols).map(|c| c.to_vec()).collect();
    Ok(SweepGrid {
        axis1: axis1.0,
        values1: axis1.1.to_vec(),
        axis2: axis2.map(|(a, _)| a),
        values2: axis2.map_or(Vec::new(), |(_, v)| v.to_vec()),
        cells,
    })
}
