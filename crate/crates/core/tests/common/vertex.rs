//! Brute-force LP optimum by enumerating basic solutions.

use esskit_lp::{LpProblem, Relation};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A hyperplane `a . x = b` that may bound the feasible region.
struct Plane {
    a: Vec<f64>,
    b: f64,
    forced: bool,
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for k in col..n {
                        a[r][k] -= f * a[col][k];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Best objective over all basic feasible solutions, or `None` when the
/// problem has none. Every variable must have a finite lower bound so that
/// a nonempty feasible region always has a vertex.
pub fn vertex_oracle(p: &LpProblem) -> Option<f64> {
    let n = p.num_vars;
    let mut planes = Vec::new();
    for c in &p.constraints {
        let mut a = vec![0.0; n];
        for &(j, v) in &c.row {
            a[j] += v;
        }
        planes.push(Plane {
            a,
            b: c.rhs,
            forced: c.relation == Relation::Eq,
        });
    }
    for (j, &(lo, hi)) in p.var_bounds.iter().enumerate() {
        for bound in [lo, hi] {
            if bound.is_finite() {
                let mut a = vec![0.0; n];
                a[j] = 1.0;
                planes.push(Plane {
                    a,
                    b: bound,
                    forced: false,
                });
            }
        }
    }
    let forced: Vec<usize> = (0..planes.len()).filter(|&i| planes[i].forced).collect();
    let free: Vec<usize> = (0..planes.len()).filter(|&i| !planes[i].forced).collect();
    if forced.len() > n {
        return None;
    }
    let mut best: Option<f64> = None;
    for_each_subset(free.len(), n - forced.len(), &mut |pick| {
        let idx: Vec<usize> = forced.iter().copied().chain(pick.iter().map(|&k| free[k])).collect();
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].a.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| planes[i].b).collect();
        let Some(x) = gauss_solve(a, b) else { return };
        if p.max_violation(&x) > 1e-9 {
            return;
        }
        let v = p.objective_value(&x);
        if best.is_none_or(|bv| v > bv) {
            best = Some(v);
        }
    });
    best
}

/// Dense random instance: every variable in `[0, inf)`, one all-positive
/// `<=` row keeps the region bounded, the rest mix all three relations.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LpProblem {
    let mut p = LpProblem::new();
    for _ in 0..n {
        p.add_var(rng.gen_range(-1.0..1.0), 0.0, f64::INFINITY);
    }
    let cap: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(0.2..1.0))).collect();
    p.add_constraint(cap, Relation::Le, rng.gen_range(5.0..10.0));
    for _ in 1..m {
        let row: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.gen_range(-1.0..1.0))).collect();
        let u: f64 = rng.gen();
        let (rel, rhs) = if u < 0.6 {
            (Relation::Le, rng.gen_range(0.0..3.0))
        } else if u < 0.85 {
            (Relation::Ge, rng.gen_range(-3.0..1.0))
        } else {
            (Relation::Eq, rng.gen_range(-1.0..1.0))
        };
        p.add_constraint(row, rel, rhs);
    }
    p
}
