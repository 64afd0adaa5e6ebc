//! Primal revised simplex over the bounded computational form
//! `A x - w = 0`, `lo <= (x, w) <= hi`, minimizing `c^T x`.
//!
//! Each row gets a logical variable `w_i` carrying the row's bounds, so the
//! all-logical basis is always available as a starting point. Phase one
//! minimizes the sum of bound infeasibilities of the basic variables with
//! costs recomputed every iteration; phase two uses the true costs.

use crate::lu::Factor;
use crate::{FEAS_TOL, OPT_TOL, PIVOT_TOL};

/// Basis updates between refactorizations.
const REFACTOR_EVERY: usize = 100;
/// Steps shorter than this count as degenerate.
const DEGENERATE_STEP: f64 = 1e-12;
/// Consecutive degenerate pivots (per variable) before Bland's rule kicks in.
const BLAND_AFTER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Free nonbasic variable resting at zero.
    Free,
}

/// Internal model, already in minimization form.
#[derive(Debug, Clone, Default)]
pub(crate) struct Model {
    pub n: usize,
    pub m: usize,
    /// Costs of structural variables (length `n`).
    pub cost: Vec<f64>,
    /// Bounds of all `n + m` variables; logicals follow structurals.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub col_start: Vec<usize>,
    pub col_row: Vec<usize>,
    pub col_val: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Result {
    pub outcome: Outcome,
    /// Values of all `n + m` variables.
    pub x: Vec<f64>,
    /// Simplex multipliers `B^{-T} c_B` (minimization sign convention).
    pub pi: Vec<f64>,
    pub iterations: usize,
}

struct Solver<'a> {
    model: &'a Model,
    basis: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    factor: Factor,
    work: Vec<f64>,
    bland: bool,
    degenerate_run: usize,
}

pub(crate) fn solve(model: &Model) -> Result {
    let n = model.n;
    let m = model.m;
    let total = n + m;
    let mut state = vec![VarState::AtLower; total];
    let mut x = vec![0.0; total];
    for j in 0..n {
        let (lo, hi) = (model.lo[j], model.hi[j]);
        if lo.is_finite() {
            x[j] = lo;
            state[j] = VarState::AtLower;
        } else if hi.is_finite() {
            x[j] = hi;
            state[j] = VarState::AtUpper;
        } else {
            state[j] = VarState::Free;
        }
    }
    let basis: Vec<usize> = (n..total).collect();
    for &j in &basis {
        state[j] = VarState::Basic;
    }
    let mut solver = Solver {
        model,
        basis,
        state,
        x,
        factor: Factor::default(),
        work: Vec::with_capacity(m),
        bland: false,
        degenerate_run: 0,
    };
    solver.run()
}

impl<'a> Solver<'a> {
    fn column(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let n = self.model.n;
        if j < n {
            for e in self.model.col_start[j]..self.model.col_start[j + 1] {
                out[self.model.col_row[e]] = self.model.col_val[e];
            }
        } else {
            out[j - n] = -1.0;
        }
    }

    fn sparse_column(&self, j: usize) -> Vec<(usize, f64)> {
        let n = self.model.n;
        if j < n {
            (self.model.col_start[j]..self.model.col_start[j + 1])
                .map(|e| (self.model.col_row[e], self.model.col_val[e]))
                .collect()
        } else {
            vec![(j - n, -1.0)]
        }
    }

    fn cost(&self, j: usize) -> f64 {
        if j < self.model.n {
            self.model.cost[j]
        } else {
            0.0
        }
    }

    /// `y^T a_j` for the full-width column `j`.
    fn dot_column(&self, y: &[f64], j: usize) -> f64 {
        let n = self.model.n;
        if j < n {
            (self.model.col_start[j]..self.model.col_start[j + 1])
                .map(|e| y[self.model.col_row[e]] * self.model.col_val[e])
                .sum()
        } else {
            -y[j - n]
        }
    }

    fn nonbasic_at_bound(&mut self, j: usize) {
        let (lo, hi) = (self.model.lo[j], self.model.hi[j]);
        if lo.is_finite() {
            self.x[j] = lo;
            self.state[j] = VarState::AtLower;
        } else if hi.is_finite() {
            self.x[j] = hi;
            self.state[j] = VarState::AtUpper;
        } else {
            self.x[j] = 0.0;
            self.state[j] = VarState::Free;
        }
    }

    fn refactor(&mut self) {
        let m = self.model.m;
        loop {
            let cols: Vec<Vec<(usize, f64)>> =
                self.basis.iter().map(|&j| self.sparse_column(j)).collect();
            match Factor::new(m, &cols) {
                Ok(f) => {
                    self.factor = f;
                    break;
                }
                Err(singular) => {
                    // Swap dependent columns for the logicals of uncovered rows.
                    for (&pos, &row) in singular.positions.iter().zip(&singular.rows) {
                        let leaving = self.basis[pos];
                        self.nonbasic_at_bound(leaving);
                        let logical = self.model.n + row;
                        self.basis[pos] = logical;
                        self.state[logical] = VarState::Basic;
                    }
                }
            }
        }
        self.recompute_basics();
    }

    fn recompute_basics(&mut self) {
        let m = self.model.m;
        let n = self.model.n;
        let mut rhs = vec![0.0; m];
        for j in 0..n + m {
            if self.state[j] == VarState::Basic || self.x[j] == 0.0 {
                continue;
            }
            let v = self.x[j];
            if j < n {
                for e in self.model.col_start[j]..self.model.col_start[j + 1] {
                    rhs[self.model.col_row[e]] -= self.model.col_val[e] * v;
                }
            } else {
                rhs[j - n] += v;
            }
        }
        self.factor.ftran(&mut rhs, &mut self.work);
        for (k, &j) in self.basis.iter().enumerate() {
            self.x[j] = rhs[k];
        }
    }

    /// Fills phase costs for the basis; returns true when some basic
    /// variable is outside its bounds.
    fn basic_costs(&self, cb: &mut [f64]) -> bool {
        let mut infeasible = false;
        for (k, &j) in self.basis.iter().enumerate() {
            let v = self.x[j];
            cb[k] = if v < self.model.lo[j] - FEAS_TOL {
                infeasible = true;
                -1.0
            } else if v > self.model.hi[j] + FEAS_TOL {
                infeasible = true;
                1.0
            } else {
                0.0
            };
        }
        if !infeasible {
            for (k, &j) in self.basis.iter().enumerate() {
                cb[k] = self.cost(j);
            }
        }
        infeasible
    }

    /// Chooses an entering variable and its direction (+1 increase, -1 decrease).
    fn price(&self, y: &[f64], phase_one: bool) -> Option<(usize, f64)> {
        let total = self.model.n + self.model.m;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..total {
            let st = self.state[j];
            if st == VarState::Basic || self.model.lo[j] == self.model.hi[j] {
                continue;
            }
            let c = if phase_one { 0.0 } else { self.cost(j) };
            let d = c - self.dot_column(y, j);
            let dir = match st {
                VarState::AtLower if d < -OPT_TOL => 1.0,
                VarState::AtUpper if d > OPT_TOL => -1.0,
                VarState::Free if d.abs() > OPT_TOL => -d.signum(),
                _ => continue,
            };
            if self.bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, bd)| d.abs() > bd) {
                best = Some((j, dir, d.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn run(&mut self) -> Result {
        let n = self.model.n;
        let m = self.model.m;
        let total = n + m;
        let max_iter = 20_000 + 50 * total;
        self.refactor();

        let mut cb = vec![0.0; m];
        let mut y = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut iterations = 0;
        let mut verified = false;

        loop {
            if self.factor.num_etas() >= REFACTOR_EVERY {
                self.refactor();
            }
            let phase_one = self.basic_costs(&mut cb);
            y.copy_from_slice(&cb);
            self.factor.btran(&mut y, &mut self.work);

            let Some((q, dir)) = self.price(&y, phase_one) else {
                // Confirm on a fresh factorization before terminating.
                if !verified && self.factor.num_etas() > 0 {
                    self.refactor();
                    verified = true;
                    continue;
                }
                let outcome = if phase_one {
                    Outcome::Infeasible
                } else {
                    Outcome::Optimal
                };
                return self.finish(outcome, y, iterations);
            };
            verified = false;
            iterations += 1;
            if iterations > max_iter {
                return self.finish(Outcome::IterationLimit, y, iterations);
            }

            self.column(q, &mut alpha);
            self.factor.ftran(&mut alpha, &mut self.work);

            let leave = self.ratio_test(&alpha, dir, phase_one);
            let flip = self.model.hi[q] - self.model.lo[q];
            let step = match leave {
                Some((_, theta, _)) if theta < flip => theta,
                _ if flip.is_finite() => {
                    // Bound flip of the entering variable.
                    self.apply_step(q, dir, flip, &alpha);
                    self.state[q] = if dir > 0.0 {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.x[q] = if dir > 0.0 {
                        self.model.hi[q]
                    } else {
                        self.model.lo[q]
                    };
                    self.note_step(flip);
                    continue;
                }
                None => {
                    if phase_one {
                        // Numerical trouble: a phase-one direction must be blocked.
                        self.refactor();
                        continue;
                    }
                    return self.finish(Outcome::Unbounded, y, iterations);
                }
                Some((_, theta, _)) => theta,
            };
            let (r, _, to_upper) = leave.expect("step with leaving variable");
            self.apply_step(q, dir, step, &alpha);
            let leaving = self.basis[r];
            if to_upper {
                self.x[leaving] = self.model.hi[leaving];
                self.state[leaving] = VarState::AtUpper;
            } else {
                self.x[leaving] = self.model.lo[leaving];
                self.state[leaving] = VarState::AtLower;
            }
            self.basis[r] = q;
            self.state[q] = VarState::Basic;
            self.factor.push_eta(r, &alpha);
            self.note_step(step);
        }
    }

    fn note_step(&mut self, step: f64) {
        if step < DEGENERATE_STEP {
            self.degenerate_run += 1;
            if self.degenerate_run > BLAND_AFTER * (self.model.n + self.model.m).max(1) {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
            self.bland = false;
        }
    }

    fn apply_step(&mut self, q: usize, dir: f64, step: f64, alpha: &[f64]) {
        if step == 0.0 {
            return;
        }
        self.x[q] += dir * step;
        for (k, &j) in self.basis.iter().enumerate() {
            if alpha[k] != 0.0 {
                self.x[j] -= dir * step * alpha[k];
            }
        }
    }

    /// Returns `(position, step, leaves_at_upper)` for the blocking basic
    /// variable, or `None` when no basic variable limits the step.
    fn ratio_test(&self, alpha: &[f64], dir: f64, phase_one: bool) -> Option<(usize, f64, bool)> {
        // Candidate: (position, distance, |rate|, to_upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (k, &j) in self.basis.iter().enumerate() {
            let a = alpha[k];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let rate = -dir * a;
            let v = self.x[j];
            let (lo, hi) = (self.model.lo[j], self.model.hi[j]);
            let target = if rate < 0.0 {
                if phase_one && v > hi + FEAS_TOL {
                    Some((v - hi, true))
                } else if phase_one && v < lo - FEAS_TOL {
                    None
                } else if lo.is_finite() {
                    Some((v - lo, false))
                } else {
                    None
                }
            } else if phase_one && v < lo - FEAS_TOL {
                Some((lo - v, false))
            } else if phase_one && v > hi + FEAS_TOL {
                None
            } else if hi.is_finite() {
                Some((hi - v, true))
            } else {
                None
            };
            if let Some((dist, to_upper)) = target {
                cands.push((k, dist.max(0.0), rate.abs(), to_upper));
            }
        }
        if cands.is_empty() {
            return None;
        }
        if self.bland {
            // Textbook ratio test; ties broken by smallest variable index.
            let mut best: Option<(usize, f64, bool)> = None;
            for &(k, dist, rate, up) in &cands {
                let t = dist / rate;
                let better = match best {
                    None => true,
                    Some((bk, bt, _)) => {
                        t < bt - 1e-15 || (t <= bt + 1e-15 && self.basis[k] < self.basis[bk])
                    }
                };
                if better {
                    best = Some((k, t, up));
                }
            }
            return best;
        }
        // Harris two-pass ratio test.
        let theta_max = cands
            .iter()
            .map(|&(_, dist, rate, _)| (dist + FEAS_TOL) / rate)
            .fold(f64::INFINITY, f64::min);
        let mut best: Option<(usize, f64, bool, f64)> = None;
        for &(k, dist, rate, up) in &cands {
            let t = dist / rate;
            if t <= theta_max && best.is_none_or(|(_, _, _, br)| rate > br) {
                best = Some((k, t, up, rate));
            }
        }
        best.map(|(k, t, up, _)| (k, t, up))
    }

    fn finish(&mut self, outcome: Outcome, y: Vec<f64>, iterations: usize) -> Result {
        let pi = if outcome == Outcome::Optimal {
            let mut cb: Vec<f64> = self.basis.iter().map(|&j| self.cost(j)).collect();
            self.factor.btran(&mut cb, &mut self.work);
            cb
        } else {
            y
        };
        // Snap basic values that drifted within tolerance back onto bounds.
        if outcome == Outcome::Optimal {
            for &j in &self.basis {
                let (lo, hi) = (self.model.lo[j], self.model.hi[j]);
                if self.x[j] < lo {
                    self.x[j] = lo;
                } else if self.x[j] > hi {
                    self.x[j] = hi;
                }
            }
        }
        Result {
            outcome,
            x: std::mem::take(&mut self.x),
            pi,
            iterations,
        }
    }
}
