//! Exact linear programming for individually bounded variables.
//!
//! Problems are stated in maximization form with sparse constraint rows and
//! per-variable bounds (either side may be infinite). [`solve`] runs a small
//! presolve (fixed columns, singleton rows) followed by a two-phase primal
//! revised simplex on a sparse LU factorization, and returns primal values,
//! one dual per constraint and reduced costs.
//!
//! ```
//! use esskit_lp::{solve, LpProblem, LpStatus, Relation};
//!
//! let mut p = LpProblem::new();
//! let x = p.add_var(1.0, 0.0, f64::INFINITY);
//! let y = p.add_var(1.0, 0.0, f64::INFINITY);
//! p.add_constraint(vec![(x, 1.0), (y, 2.0)], Relation::Le, 4.0);
//! p.add_constraint(vec![(x, 3.0), (y, 1.0)], Relation::Le, 6.0);
//! let sol = solve(&p).unwrap();
//! assert_eq!(sol.status, LpStatus::Optimal);
//! assert!((sol.objective_value - 2.8).abs() < 1e-9);
//! ```

mod dump;
mod error;
mod lu;
mod presolve;
mod problem;
mod simplex;

pub use dump::{parse_dump, write_dump};
pub use error::LpError;
pub use problem::{add_abs_penalty, Constraint, LpProblem, Relation, SparseRow};

use serde::{Deserialize, Serialize};

/// Smallest pivot element accepted in the ratio test.
pub const PIVOT_TOL: f64 = 1e-9;
/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-7;
/// Dual feasibility (optimality) tolerance.
pub const OPT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

/// Result of [`solve`]. The value vectors are only populated for
/// [`LpStatus::Optimal`]; otherwise they are empty and the objective is NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// Sensitivity of the optimal objective to each constraint's rhs.
    pub duals: Vec<f64>,
    /// `objective_j - sum_i duals_i * a_ij`.
    pub reduced_costs: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        Self {
            status,
            primal: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            objective_value: f64::NAN,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `p`. Errors are reserved for malformed input and for exhausting
/// the iteration budget; infeasibility and unboundedness are statuses.
pub fn solve(p: &LpProblem) -> Result<LpSolution, LpError> {
    p.validate()?;
    let reduced = match presolve::presolve(p) {
        presolve::Reduced::Infeasible => {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, 0))
        }
        presolve::Reduced::Model(r) => r,
    };
    let res = simplex::solve(&reduced.model);
    let status = match res.outcome {
        simplex::Outcome::Optimal => LpStatus::Optimal,
        simplex::Outcome::Infeasible => {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, res.iterations))
        }
        simplex::Outcome::Unbounded => {
            return Ok(LpSolution::without_point(LpStatus::Unbounded, res.iterations))
        }
        simplex::Outcome::IterationLimit => return Err(LpError::IterationLimit(res.iterations)),
    };
    let (primal, duals) = reduced.postsolve(p, &res.x[..reduced.model.n], &res.pi);
    let mut reduced_costs = p.objective.clone();
    for (c, &y) in p.constraints.iter().zip(&duals) {
        if y != 0.0 {
            for &(j, a) in &c.row {
                reduced_costs[j] -= y * a;
            }
        }
    }
    let objective_value = p.objective_value(&primal);
    Ok(LpSolution {
        status,
        primal,
        duals,
        reduced_costs,
        objective_value,
        iterations: res.iterations,
    })
}
