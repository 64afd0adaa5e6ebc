//! Problem description: a maximization objective over individually bounded
//! variables, subject to sparse linear rows.

use serde::{Deserialize, Serialize};

use crate::error::LpError;

/// Relation of a constraint row to its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

/// A sparse row: `(variable index, coefficient)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub row: SparseRow,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.row.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A linear program in maximization form. Bounds use `f64::INFINITY` /
/// `f64::NEG_INFINITY` for unbounded sides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub var_bounds: Vec<(f64, f64)>,
    pub constraints: Vec<Constraint>,
    pub names: Option<Vec<String>>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a variable and returns its index.
    pub fn add_var(&mut self, objective: f64, lower: f64, upper: f64) -> usize {
        self.push_var(objective, lower, upper, None)
    }

    pub fn add_named_var(
        &mut self,
        name: impl Into<String>,
        objective: f64,
        lower: f64,
        upper: f64,
    ) -> usize {
        self.push_var(objective, lower, upper, Some(name.into()))
    }

    fn push_var(&mut self, objective: f64, lower: f64, upper: f64, name: Option<String>) -> usize {
        let idx = self.num_vars;
        self.num_vars += 1;
        self.objective.push(objective);
        self.var_bounds.push((lower, upper));
        match (&mut self.names, name) {
            (Some(names), name) => names.push(name.unwrap_or_else(|| format!("x{idx}"))),
            (None, Some(name)) => {
                let mut names: Vec<String> = (0..idx).map(|j| format!("x{j}")).collect();
                names.push(name);
                self.names = Some(names);
            }
            (None, None) => {}
        }
        idx
    }

    /// Appends a constraint row and returns its index. Duplicate variable
    /// entries in `row` are summed.
    pub fn add_constraint(&mut self, row: SparseRow, relation: Relation, rhs: f64) -> usize {
        let mut row = row;
        row.sort_by_key(|&(j, _)| j);
        row.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        self.constraints.push(Constraint { row, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.var_bounds[var] = (lower, upper);
    }

    pub fn name(&self, var: usize) -> String {
        self.names
            .as_ref()
            .and_then(|n| n.get(var).cloned())
            .unwrap_or_else(|| format!("x{var}"))
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(0.0, f64::max);
        let bounds = self
            .var_bounds
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.objective.len() != self.num_vars {
            return Err(LpError::LengthMismatch {
                what: "objective",
                got: self.objective.len(),
                expected: self.num_vars,
            });
        }
        if self.var_bounds.len() != self.num_vars {
            return Err(LpError::LengthMismatch {
                what: "var_bounds",
                got: self.var_bounds.len(),
                expected: self.num_vars,
            });
        }
        if let Some(names) = &self.names {
            if names.len() != self.num_vars {
                return Err(LpError::LengthMismatch {
                    what: "names",
                    got: names.len(),
                    expected: self.num_vars,
                });
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("objective".into()));
        }
        for (var, &(lower, upper)) in self.var_bounds.iter().enumerate() {
            if lower.is_nan() || upper.is_nan() || lower == f64::INFINITY || upper == f64::NEG_INFINITY
            {
                return Err(LpError::NonFinite(format!("bounds of variable {var}")));
            }
            if lower > upper {
                return Err(LpError::InvertedBounds { var, lower, upper });
            }
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("rhs of constraint {row}")));
            }
            for &(var, a) in &c.row {
                if var >= self.num_vars {
                    return Err(LpError::VariableOutOfRange {
                        row,
                        var,
                        num_vars: self.num_vars,
                    });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite(format!("constraint {row}")));
                }
            }
        }
        Ok(())
    }
}

/// Linearizes a weighted absolute value `weight * |expr|` subtracted from the
/// objective: appends `s >= 0` with `s >= expr` and `s >= -expr` and returns
/// the index of `s`.
pub fn add_abs_penalty(p: &mut LpProblem, expr: &[(usize, f64)], weight: f64) -> Result<usize, LpError> {
    if !(weight >= 0.0) {
        return Err(LpError::NegativeWeight(weight));
    }
    let s = p.add_var(-weight, 0.0, f64::INFINITY);
    // s - expr >= 0
    let mut upper: SparseRow = vec![(s, 1.0)];
    upper.extend(expr.iter().map(|&(j, a)| (j, -a)));
    p.add_constraint(upper, Relation::Ge, 0.0);
    // s + expr >= 0
    let mut lower: SparseRow = vec![(s, 1.0)];
    lower.extend_from_slice(expr);
    p.add_constraint(lower, Relation::Ge, 0.0);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_entries_are_summed() {
        let mut p = LpProblem::new();
        let x = p.add_var(1.0, 0.0, 1.0);
        p.add_constraint(vec![(x, 1.0), (x, 2.0)], Relation::Le, 3.0);
        assert_eq!(p.constraints[0].row, vec![(x, 3.0)]);
    }

    #[test]
    fn validate_catches_bad_index_and_bounds() {
        let mut p = LpProblem::new();
        p.add_var(1.0, 0.0, 1.0);
        p.constraints.push(Constraint {
            row: vec![(3, 1.0)],
            relation: Relation::Le,
            rhs: 0.0,
        });
        assert!(matches!(p.validate(), Err(LpError::VariableOutOfRange { var: 3, .. })));
        p.constraints.clear();
        p.set_bounds(0, 2.0, 1.0);
        assert!(matches!(p.validate(), Err(LpError::InvertedBounds { .. })));
    }

    #[test]
    fn names_backfill_when_first_named_var_arrives_late() {
        let mut p = LpProblem::new();
        p.add_var(0.0, 0.0, 1.0);
        p.add_named_var("y", 0.0, 0.0, 1.0);
        assert_eq!(p.names.as_deref(), Some(&["x0".to_string(), "y".to_string()][..]));
    }

    #[test]
    fn negative_penalty_weight_rejected() {
        let mut p = LpProblem::new();
        let x = p.add_var(0.0, 0.0, 1.0);
        assert_eq!(add_abs_penalty(&mut p, &[(x, 1.0)], -1.0), Err(LpError::NegativeWeight(-1.0)));
    }
}
