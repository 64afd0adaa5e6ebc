//! Removes fixed columns and turns singleton rows into bounds, then maps the
//! reduced solution (and its duals) back onto the original problem.

use crate::problem::{LpProblem, Relation};
use crate::simplex::Model;
use crate::FEAS_TOL;

#[derive(Debug)]
pub(crate) enum Reduced {
    Infeasible,
    Model(Presolved),
}

#[derive(Debug)]
pub(crate) struct Presolved {
    pub model: Model,
    /// Original column of each reduced column.
    pub kept_cols: Vec<usize>,
    /// Original row of each reduced row.
    pub kept_rows: Vec<usize>,
    /// Tightened bounds of every original column.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub lo_src: Vec<Option<usize>>,
    pub hi_src: Vec<Option<usize>>,
    /// Value of each column removed as fixed.
    pub fixed: Vec<Option<f64>>,
    /// Removed singleton rows in removal order: `(row, column, coefficient)`.
    pub singletons: Vec<(usize, usize, f64)>,
}

pub(crate) fn presolve(p: &LpProblem) -> Reduced {
    let n = p.num_vars;
    let rows = p.constraints.len();
    let mut lo: Vec<f64> = p.var_bounds.iter().map(|b| b.0).collect();
    let mut hi: Vec<f64> = p.var_bounds.iter().map(|b| b.1).collect();
    let mut lo_src = vec![None; n];
    let mut hi_src = vec![None; n];
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    let mut row_removed = vec![false; rows];
    let mut singletons = Vec::new();

    loop {
        let mut changed = false;
        for j in 0..n {
            if fixed[j].is_none() && lo[j] == hi[j] {
                fixed[j] = Some(lo[j]);
                changed = true;
            }
        }
        for (i, c) in p.constraints.iter().enumerate() {
            if row_removed[i] {
                continue;
            }
            let mut rhs = c.rhs;
            let mut live: Option<(usize, f64)> = None;
            let mut live_count = 0;
            for &(j, a) in &c.row {
                if a == 0.0 {
                    continue;
                }
                match fixed[j] {
                    Some(v) => rhs -= a * v,
                    None => {
                        live_count += 1;
                        live = Some((j, a));
                    }
                }
            }
            match live_count {
                0 => {
                    let tol = FEAS_TOL * (1.0 + c.rhs.abs());
                    let ok = match c.relation {
                        Relation::Le => rhs >= -tol,
                        Relation::Ge => rhs <= tol,
                        Relation::Eq => rhs.abs() <= tol,
                    };
                    if !ok {
                        return Reduced::Infeasible;
                    }
                    row_removed[i] = true;
                    changed = true;
                }
                1 => {
                    let (j, a) = live.expect("one live entry");
                    let bound = rhs / a;
                    let (sets_upper, sets_lower) = match (c.relation, a > 0.0) {
                        (Relation::Eq, _) => (true, true),
                        (Relation::Le, true) | (Relation::Ge, false) => (true, false),
                        (Relation::Le, false) | (Relation::Ge, true) => (false, true),
                    };
                    if sets_upper && bound < hi[j] {
                        hi[j] = bound;
                        hi_src[j] = Some(i);
                    }
                    if sets_lower && bound > lo[j] {
                        lo[j] = bound;
                        lo_src[j] = Some(i);
                    }
                    if lo[j] > hi[j] {
                        if lo[j] - hi[j] > FEAS_TOL * (1.0 + lo[j].abs()) {
                            return Reduced::Infeasible;
                        }
                        // Crossed within tolerance: pin at the row-derived side.
                        if lo_src[j] == Some(i) {
                            hi[j] = lo[j];
                        } else {
                            lo[j] = hi[j];
                        }
                    }
                    row_removed[i] = true;
                    singletons.push((i, j, a));
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }

    let kept_cols: Vec<usize> = (0..n).filter(|&j| fixed[j].is_none()).collect();
    let kept_rows: Vec<usize> = (0..rows).filter(|&i| !row_removed[i]).collect();
    let mut col_of = vec![usize::MAX; n];
    for (k, &j) in kept_cols.iter().enumerate() {
        col_of[j] = k;
    }

    let nr = kept_cols.len();
    let mr = kept_rows.len();
    let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nr];
    let mut row_lo = Vec::with_capacity(mr);
    let mut row_hi = Vec::with_capacity(mr);
    for (ri, &i) in kept_rows.iter().enumerate() {
        let c = &p.constraints[i];
        let mut rhs = c.rhs;
        for &(j, a) in &c.row {
            if a == 0.0 {
                continue;
            }
            match fixed[j] {
                Some(v) => rhs -= a * v,
                None => entries[col_of[j]].push((ri, a)),
            }
        }
        let (l, h) = match c.relation {
            Relation::Le => (f64::NEG_INFINITY, rhs),
            Relation::Ge => (rhs, f64::INFINITY),
            Relation::Eq => (rhs, rhs),
        };
        row_lo.push(l);
        row_hi.push(h);
    }

    let mut model = Model {
        n: nr,
        m: mr,
        ..Default::default()
    };
    model.col_start.push(0);
    for (k, &j) in kept_cols.iter().enumerate() {
        model.cost.push(-p.objective[j]);
        model.lo.push(lo[j]);
        model.hi.push(hi[j]);
        for &(r, a) in &entries[k] {
            model.col_row.push(r);
            model.col_val.push(a);
        }
        model.col_start.push(model.col_row.len());
    }
    model.lo.extend(row_lo);
    model.hi.extend(row_hi);

    Reduced::Model(Presolved {
        model,
        kept_cols,
        kept_rows,
        lo,
        hi,
        lo_src,
        hi_src,
        fixed,
        singletons,
    })
}

impl Presolved {
    /// Maps reduced primal values and multipliers back to the original
    /// problem. Returns `(primal, duals)` with duals in maximization sign
    /// convention (`d objective / d rhs`).
    pub fn postsolve(&self, p: &LpProblem, x: &[f64], pi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = p.num_vars;
        let mut primal = vec![0.0; n];
        for j in 0..n {
            if let Some(v) = self.fixed[j] {
                primal[j] = v;
            }
        }
        for (k, &j) in self.kept_cols.iter().enumerate() {
            primal[j] = x[k];
        }
        let mut duals = vec![0.0; p.constraints.len()];
        for (ri, &i) in self.kept_rows.iter().enumerate() {
            duals[i] = -pi[ri];
        }

        // Column-wise view of the original rows for reduced-cost sums.
        let mut col_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, c) in p.constraints.iter().enumerate() {
            for &(j, a) in &c.row {
                col_rows[j].push((i, a));
            }
        }
        let mut assigned = vec![false; p.constraints.len()];
        for &i in &self.kept_rows {
            assigned[i] = true;
        }
        for &(i, j, a) in self.singletons.iter().rev() {
            let rc = p.objective[j]
                - col_rows[j]
                    .iter()
                    .filter(|&&(r, _)| assigned[r] && r != i)
                    .map(|&(r, coef)| duals[r] * coef)
                    .sum::<f64>();
            let eq = p.constraints[i].relation == Relation::Eq;
            let tol = FEAS_TOL * (1.0 + primal[j].abs());
            let at_hi = self.hi_src[j] == Some(i) && primal[j] >= self.hi[j] - tol;
            let at_lo = self.lo_src[j] == Some(i) && primal[j] <= self.lo[j] + tol;
            let takes = if eq {
                at_hi || at_lo
            } else {
                (at_hi && rc > 0.0) || (at_lo && rc < 0.0)
            };
            duals[i] = if takes { rc / a } else { 0.0 };
            assigned[i] = true;
        }
        (primal, duals)
    }
}
