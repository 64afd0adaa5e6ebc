//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! The factorization is a right-looking Gaussian elimination on the basis
//! columns, choosing pivots by Markowitz count with threshold partial
//! pivoting. Singleton columns and rows are taken first so the (typically
//! dominant) triangular part of a basis produces no fill at all. Basis
//! changes between refactorizations are appended as eta columns.

/// Smallest pivot magnitude accepted during factorization.
const ABS_PIVOT_TOL: f64 = 1e-11;
/// Threshold for relative pivot size within a column.
const REL_PIVOT_TOL: f64 = 0.1;
/// Number of candidate columns inspected per Markowitz search.
const SEARCH_COLS: usize = 4;

/// Result of a failed factorization: basis positions and rows that could not
/// be pivoted. Both lists have the same length.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Default)]
pub(crate) struct Factor {
    m: usize,
    // Row eliminations: for each, `b[idx] -= val * b[pivot_row]`.
    l_pivot_row: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    // Upper factor in pivot order.
    u_row: Vec<usize>,
    u_col: Vec<usize>,
    u_piv: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    // Product-form updates.
    eta_pos: Vec<usize>,
    eta_piv: Vec<f64>,
    eta_start: Vec<usize>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
}

/// Bucketed set of indices keyed by a small count, with lazy deletion.
struct Buckets {
    lists: Vec<Vec<usize>>,
}

impl Buckets {
    fn new(max: usize) -> Self {
        Self {
            lists: vec![Vec::new(); max + 2],
        }
    }

    fn push(&mut self, count: usize, idx: usize) {
        if count >= self.lists.len() {
            self.lists.resize(count + 1, Vec::new());
        }
        self.lists[count].push(idx);
    }
}

impl Factor {
    /// Factorizes the `m x m` matrix whose columns are given sparsely as
    /// `(row, value)` lists. Column `k` corresponds to basis position `k`.
    pub fn new(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (c, col) in columns.iter().enumerate() {
            for &(r, v) in col {
                if v != 0.0 {
                    rows[r].push((c, v));
                    cols[c].push(r);
                }
            }
        }
        let mut col_count: Vec<usize> = cols.iter().map(Vec::len).collect();
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut col_buckets = Buckets::new(m);
        let mut row_buckets = Buckets::new(m);
        for c in 0..m {
            col_buckets.push(col_count[c], c);
        }
        for r in 0..m {
            row_buckets.push(rows[r].len(), r);
        }

        let mut f = Factor {
            m,
            ..Default::default()
        };
        f.l_start.push(0);
        f.u_start.push(0);
        f.eta_start.push(0);

        // Position of a column within the row being updated (1-based, 0 = absent).
        let mut mark = vec![0usize; m];

        for _step in 0..m {
            let pivot = Self::find_pivot(
                &rows,
                &cols,
                &col_count,
                &row_active,
                &col_active,
                &mut col_buckets,
                &mut row_buckets,
            );
            let Some((r, c, v)) = pivot else { break };

            // Eliminate column c from every other active row.
            let pivot_row = std::mem::take(&mut rows[r]);
            f.l_pivot_row.push(r);
            let col_rows = std::mem::take(&mut cols[c]);
            for &i in &col_rows {
                if i == r || !row_active[i] {
                    continue;
                }
                let row_i = &mut rows[i];
                let Some(at) = row_i.iter().position(|&(cj, _)| cj == c) else {
                    continue;
                };
                let a_ic = row_i.swap_remove(at).1;
                let mult = a_ic / v;
                f.l_idx.push(i);
                f.l_val.push(mult);
                for (k, &(cj, _)) in row_i.iter().enumerate() {
                    mark[cj] = k + 1;
                }
                for &(cj, w) in &pivot_row {
                    if cj == c {
                        continue;
                    }
                    let at = mark[cj];
                    if at > 0 {
                        row_i[at - 1].1 -= mult * w;
                    } else {
                        row_i.push((cj, -mult * w));
                        cols[cj].push(i);
                        col_count[cj] += 1;
                        col_buckets.push(col_count[cj], cj);
                    }
                }
                for &(cj, _) in row_i.iter() {
                    mark[cj] = 0;
                }
                row_buckets.push(row_i.len(), i);
            }
            f.l_start.push(f.l_idx.len());

            row_active[r] = false;
            col_active[c] = false;
            col_count[c] = 0;
            for &(cj, w) in &pivot_row {
                if cj == c {
                    continue;
                }
                col_count[cj] -= 1;
                col_buckets.push(col_count[cj], cj);
                f.u_idx.push(cj);
                f.u_val.push(w);
            }
            f.u_row.push(r);
            f.u_col.push(c);
            f.u_piv.push(v);
            f.u_start.push(f.u_idx.len());
        }

        if f.u_row.len() < m {
            let positions: Vec<usize> = (0..m).filter(|&c| col_active[c]).collect();
            let rows_left: Vec<usize> = (0..m).filter(|&r| row_active[r]).collect();
            return Err(Singular {
                positions,
                rows: rows_left,
            });
        }
        Ok(f)
    }

    #[allow(clippy::too_many_arguments)]
    fn find_pivot(
        rows: &[Vec<(usize, f64)>],
        cols: &[Vec<usize>],
        col_count: &[usize],
        row_active: &[bool],
        col_active: &[bool],
        col_buckets: &mut Buckets,
        row_buckets: &mut Buckets,
    ) -> Option<(usize, usize, f64)> {
        let entry = |r: usize, c: usize| -> f64 {
            rows[r]
                .iter()
                .find(|&&(cj, _)| cj == c)
                .map(|&(_, v)| v)
                .unwrap_or(0.0)
        };
        let col_max = |c: usize| -> f64 {
            cols[c]
                .iter()
                .filter(|&&r| row_active[r])
                .map(|&r| entry(r, c).abs())
                .fold(0.0, f64::max)
        };

        // Column singletons.
        while let Some(&c) = col_buckets.lists[1].last() {
            if !col_active[c] || col_count[c] != 1 {
                col_buckets.lists[1].pop();
                continue;
            }
            let r = *cols[c].iter().find(|&&r| row_active[r]).expect("counted row");
            let v = entry(r, c);
            if v.abs() >= ABS_PIVOT_TOL {
                return Some((r, c, v));
            }
            // Numerically zero singleton: leave it for the singular report.
            col_buckets.lists[1].pop();
            break;
        }

        // Row singletons.
        while let Some(&r) = row_buckets.lists[1].last() {
            if !row_active[r] || rows[r].len() != 1 {
                row_buckets.lists[1].pop();
                continue;
            }
            let (c, v) = rows[r][0];
            if v.abs() >= ABS_PIVOT_TOL && v.abs() >= REL_PIVOT_TOL * col_max(c) {
                return Some((r, c, v));
            }
            row_buckets.lists[1].pop();
            break;
        }

        // Markowitz search over the sparsest columns.
        let mut best: Option<(usize, usize, f64, usize)> = None;
        let mut inspected = 0;
        for count in 1..col_buckets.lists.len() {
            let mut k = 0;
            while k < col_buckets.lists[count].len() {
                let c = col_buckets.lists[count][k];
                if !col_active[c] || col_count[c] != count {
                    col_buckets.lists[count].swap_remove(k);
                    continue;
                }
                k += 1;
                let cmax = col_max(c);
                if cmax < ABS_PIVOT_TOL {
                    continue;
                }
                inspected += 1;
                for &r in &cols[c] {
                    if !row_active[r] {
                        continue;
                    }
                    let v = entry(r, c);
                    if v.abs() < REL_PIVOT_TOL * cmax || v.abs() < ABS_PIVOT_TOL {
                        continue;
                    }
                    let cost = (rows[r].len() - 1) * (count - 1);
                    let better = match best {
                        None => true,
                        Some((_, _, bv, bc)) => cost < bc || (cost == bc && v.abs() > bv.abs()),
                    };
                    if better {
                        best = Some((r, c, v, cost));
                    }
                }
                if inspected >= SEARCH_COLS {
                    break;
                }
            }
            if inspected >= SEARCH_COLS {
                break;
            }
            if let Some((_, _, _, cost)) = best {
                // No later bucket can beat a zero-cost pivot.
                if cost == 0 {
                    break;
                }
            }
        }
        best.map(|(r, c, v, _)| (r, c, v))
    }

    pub fn num_etas(&self) -> usize {
        self.eta_pos.len()
    }

    /// Solves `B x = b` in place: on entry `b` is indexed by row, on exit by
    /// basis position.
    pub fn ftran(&self, b: &mut [f64], work: &mut Vec<f64>) {
        let m = self.m;
        for k in 0..self.l_pivot_row.len() {
            let val = b[self.l_pivot_row[k]];
            if val != 0.0 {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    b[self.l_idx[e]] -= self.l_val[e] * val;
                }
            }
        }
        work.clear();
        work.resize(m, 0.0);
        for k in (0..m).rev() {
            let mut s = b[self.u_row[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[e] * work[self.u_idx[e]];
            }
            work[self.u_col[k]] = s / self.u_piv[k];
        }
        b.copy_from_slice(work);
        for k in 0..self.eta_pos.len() {
            let p = self.eta_pos[k];
            let xp = b[p] / self.eta_piv[k];
            b[p] = xp;
            if xp != 0.0 {
                for e in self.eta_start[k]..self.eta_start[k + 1] {
                    b[self.eta_idx[e]] -= self.eta_val[e] * xp;
                }
            }
        }
    }

    /// Solves `B^T y = c` in place: on entry `c` is indexed by basis position,
    /// on exit by row.
    pub fn btran(&self, c: &mut [f64], work: &mut Vec<f64>) {
        let m = self.m;
        for k in (0..self.eta_pos.len()).rev() {
            let p = self.eta_pos[k];
            let mut s = c[p];
            for e in self.eta_start[k]..self.eta_start[k + 1] {
                s -= self.eta_val[e] * c[self.eta_idx[e]];
            }
            c[p] = s / self.eta_piv[k];
        }
        work.clear();
        work.resize(m, 0.0);
        for k in 0..m {
            let z = c[self.u_col[k]] / self.u_piv[k];
            work[self.u_row[k]] = z;
            if z != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_idx[e]] -= self.u_val[e] * z;
                }
            }
        }
        c.copy_from_slice(work);
        for k in (0..self.l_pivot_row.len()).rev() {
            let mut s = 0.0;
            for e in self.l_start[k]..self.l_start[k + 1] {
                s += self.l_val[e] * c[self.l_idx[e]];
            }
            c[self.l_pivot_row[k]] -= s;
        }
    }

    /// Records the replacement of basis position `pos` by a column whose
    /// FTRAN image is `alpha` (indexed by basis position).
    pub fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        self.eta_pos.push(pos);
        self.eta_piv.push(alpha[pos]);
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a.abs() > 1e-13 {
                self.eta_idx.push(i);
                self.eta_val.push(a);
            }
        }
        self.eta_start.push(self.eta_idx.len());
    }
}
