//! Sparse LU factorization of simplex bases with product-form updates.
//!
//! The basis is factored by right-looking Gaussian elimination with a
//! Markowitz pivot search and column threshold pivoting. Between
//! refactorizations each basis change is appended as an eta column.

const THRESHOLD: f64 = 0.01;
const ABS_PIVOT_TOL: f64 = 1e-11;
const SEARCH_COLUMNS: usize = 4;

/// Columns/rows that could not be pivoted because the basis is singular.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    /// Basis positions left without a pivot.
    pub positions: Vec<usize>,
    /// Rows left without a pivot.
    pub rows: Vec<usize>,
}

#[derive(Debug, Default)]
struct Eta {
    position: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

/// Doubly linked buckets of indices keyed by their active nonzero count.
struct Buckets {
    head: Vec<usize>,
    next: Vec<usize>,
    prev: Vec<usize>,
    count: Vec<usize>,
    active: Vec<bool>,
}

const NIL: usize = usize::MAX;

impl Buckets {
    fn new(counts: &[usize], max_count: usize) -> Self {
        let n = counts.len();
        let mut b = Buckets {
            head: vec![NIL; max_count + 2],
            next: vec![NIL; n],
            prev: vec![NIL; n],
            count: counts.to_vec(),
            active: vec![true; n],
        };
        for i in 0..n {
            b.link(i);
        }
        b
    }

    fn ensure(&mut self, c: usize) {
        if c >= self.head.len() {
            self.head.resize(c + 1, NIL);
        }
    }

    fn link(&mut self, i: usize) {
        let c = self.count[i];
        self.ensure(c);
        let h = self.head[c];
        self.next[i] = h;
        self.prev[i] = NIL;
        if h != NIL {
            self.prev[h] = i;
        }
        self.head[c] = i;
    }

    fn unlink(&mut self, i: usize) {
        let c = self.count[i];
        let (p, n) = (self.prev[i], self.next[i]);
        if p != NIL {
            self.next[p] = n;
        } else {
            self.head[c] = n;
        }
        if n != NIL {
            self.prev[n] = p;
        }
    }

    fn set(&mut self, i: usize, c: usize) {
        if !self.active[i] || self.count[i] == c {
            self.count[i] = c;
            return;
        }
        self.unlink(i);
        self.count[i] = c;
        self.link(i);
    }

    fn remove(&mut self, i: usize) {
        if self.active[i] {
            self.unlink(i);
            self.active[i] = false;
        }
    }
}

/// `B = L^{-1}`-style elimination record plus row-oriented `U`.
#[derive(Debug, Default)]
pub(crate) struct LuFactor {
    m: usize,
    // Elimination multipliers, one block per pivot step.
    l_pivot_row: Vec<usize>,
    l_start: Vec<usize>,
    l_index: Vec<usize>,
    l_value: Vec<f64>,
    // Pivot rows of U in elimination order.
    u_row: Vec<usize>,
    u_col: Vec<usize>,
    u_diag: Vec<f64>,
    u_start: Vec<usize>,
    u_index: Vec<usize>,
    u_value: Vec<f64>,
    etas: Vec<Eta>,
}

impl LuFactor {
    /// Factors the `m x m` matrix whose column `k` is `columns[k]`.
    pub fn factor(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (k, col) in columns.iter().enumerate() {
            for &(r, v) in col {
                if v != 0.0 {
                    rows[r].push((k, v));
                    col_rows[k].push(r);
                }
            }
        }
        let row_counts: Vec<usize> = rows.iter().map(Vec::len).collect();
        let col_counts: Vec<usize> = col_rows.iter().map(Vec::len).collect();
        let max_count = row_counts
            .iter()
            .chain(&col_counts)
            .copied()
            .max()
            .unwrap_or(0);
        let mut rb = Buckets::new(&row_counts, max_count);
        let mut cb = Buckets::new(&col_counts, max_count);

        let mut f = LuFactor {
            m,
            l_start: vec![0],
            u_start: vec![0],
            ..Default::default()
        };
        let mut row_active = vec![true; m];
        // Scatter map for merging pivot row into target rows.
        let mut slot: Vec<usize> = vec![NIL; m];

        for _ in 0..m {
            let Some((p, q)) = select_pivot(&rows, &col_rows, &row_active, &mut rb, &mut cb) else {
                break;
            };
            if p == NIL {
                // Column q has no usable entry.
                cb.remove(q);
                continue;
            }

            let pivot_row = std::mem::take(&mut rows[p]);
            let diag = pivot_row
                .iter()
                .find(|&&(c, _)| c == q)
                .map(|&(_, v)| v)
                .expect("pivot entry present");
            row_active[p] = false;
            rb.remove(p);
            cb.remove(q);
            for &(c, _) in &pivot_row {
                if c != q && cb.active[c] {
                    let nc = cb.count[c] - 1;
                    cb.set(c, nc);
                }
            }

            // Eliminate column q from the remaining rows.
            let targets = std::mem::take(&mut col_rows[q]);
            for &k in &targets {
                if k == p || !row_active[k] {
                    continue;
                }
                let row_k = &mut rows[k];
                let Some(idx) = row_k.iter().position(|&(c, _)| c == q) else {
                    continue;
                };
                let a_kq = row_k.swap_remove(idx).1;
                let mult = a_kq / diag;
                f.l_index.push(k);
                f.l_value.push(mult);
                for (s, &(c, _)) in row_k.iter().enumerate() {
                    slot[c] = s;
                }
                for &(c, v) in &pivot_row {
                    if c == q {
                        continue;
                    }
                    let s = slot[c];
                    if s != NIL && s < row_k.len() && row_k[s].0 == c {
                        row_k[s].1 -= mult * v;
                    } else {
                        row_k.push((c, -mult * v));
                        col_rows[c].push(k);
                        if cb.active[c] {
                            let nc = cb.count[c] + 1;
                            cb.set(c, nc);
                        }
                    }
                }
                for &(c, _) in row_k.iter() {
                    slot[c] = NIL;
                }
                let len = row_k.len();
                rb.set(k, len);
            }

            f.l_pivot_row.push(p);
            f.l_start.push(f.l_index.len());
            f.u_row.push(p);
            f.u_col.push(q);
            f.u_diag.push(diag);
            for &(c, v) in &pivot_row {
                if c != q {
                    f.u_index.push(c);
                    f.u_value.push(v);
                }
            }
            f.u_start.push(f.u_index.len());
        }

        if f.u_row.len() < m {
            let pivoted_cols: std::collections::HashSet<usize> = f.u_col.iter().copied().collect();
            let mut positions: Vec<usize> = (0..m).filter(|c| !pivoted_cols.contains(c)).collect();
            positions.sort_unstable();
            let rows_left: Vec<usize> = (0..m).filter(|&r| row_active[r]).collect();
            return Err(Singular {
                positions,
                rows: rows_left,
            });
        }
        Ok(f)
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Records that basis position `position` was replaced by a column whose
    /// FTRAN image is `alpha`.
    pub fn push_eta(&mut self, position: usize, alpha: &[f64]) {
        let pivot = alpha[position];
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != position && v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta {
            position,
            pivot,
            entries,
        });
    }

    /// Solves `B x = b` in place; `b` is indexed by row on entry and by basis
    /// position on exit.
    pub fn ftran(&self, b: &mut [f64], scratch: &mut Vec<f64>) {
        let m = self.m;
        for k in 0..self.l_pivot_row.len() {
            let v = b[self.l_pivot_row[k]];
            if v != 0.0 {
                for t in self.l_start[k]..self.l_start[k + 1] {
                    b[self.l_index[t]] -= self.l_value[t] * v;
                }
            }
        }
        scratch.clear();
        scratch.resize(m, 0.0);
        for k in (0..self.u_row.len()).rev() {
            let mut s = b[self.u_row[k]];
            for t in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_value[t] * scratch[self.u_index[t]];
            }
            scratch[self.u_col[k]] = s / self.u_diag[k];
        }
        b.copy_from_slice(scratch);
        for eta in &self.etas {
            let xr = b[eta.position] / eta.pivot;
            if xr != 0.0 {
                for &(i, a) in &eta.entries {
                    b[i] -= a * xr;
                }
            }
            b[eta.position] = xr;
        }
    }

    /// Solves `y' B = c'` in place; `c` is indexed by basis position on entry
    /// and by row on exit.
    pub fn btran(&self, c: &mut [f64], scratch: &mut Vec<f64>) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.position];
            for &(i, a) in &eta.entries {
                s -= a * c[i];
            }
            c[eta.position] = s / eta.pivot;
        }
        scratch.clear();
        scratch.resize(m, 0.0);
        for k in 0..self.u_row.len() {
            let z = c[self.u_col[k]] / self.u_diag[k];
            scratch[self.u_row[k]] = z;
            if z != 0.0 {
                for t in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_index[t]] -= self.u_value[t] * z;
                }
            }
        }
        for k in (0..self.l_pivot_row.len()).rev() {
            let mut s = 0.0;
            for t in self.l_start[k]..self.l_start[k + 1] {
                s += self.l_value[t] * scratch[self.l_index[t]];
            }
            scratch[self.l_pivot_row[k]] -= s;
        }
        c.copy_from_slice(scratch);
    }
}

fn entry(rows: &[Vec<(usize, f64)>], r: usize, c: usize) -> Option<f64> {
    rows[r].iter().find(|&&(k, _)| k == c).map(|&(_, v)| v)
}

/// Returns `(row, col)`; `row == NIL` flags an empty column.
fn select_pivot(
    rows: &[Vec<(usize, f64)>],
    col_rows: &[Vec<usize>],
    row_active: &[bool],
    rb: &mut Buckets,
    cb: &mut Buckets,
) -> Option<(usize, usize)> {
    // Empty column: singular.
    if cb.head.first().copied().unwrap_or(NIL) != NIL {
        return Some((NIL, cb.head[0]));
    }
    // Column singletons never fill in.
    let mut c = cb.head.get(1).copied().unwrap_or(NIL);
    while c != NIL {
        let next = cb.next[c];
        if let Some(r) = col_rows[c]
            .iter()
            .copied()
            .find(|&r| row_active[r] && entry(rows, r, c).is_some())
        {
            let v = entry(rows, r, c).unwrap();
            if v.abs() > ABS_PIVOT_TOL {
                return Some((r, c));
            }
        }
        c = next;
    }
    // Row singletons never fill in either.
    let mut r = rb.head.get(1).copied().unwrap_or(NIL);
    while r != NIL {
        let next = rb.next[r];
        let (c, v) = rows[r][0];
        if cb.active[c] && v.abs() > ABS_PIVOT_TOL {
            let cmax = column_max(rows, col_rows, row_active, c);
            if v.abs() >= THRESHOLD * cmax {
                return Some((r, c));
            }
        }
        r = next;
    }

    let mut best: Option<(usize, usize, usize, f64)> = None;
    let mut examined = 0;
    for count in 1..cb.head.len() {
        let mut c = cb.head[count];
        while c != NIL {
            let cmax = column_max(rows, col_rows, row_active, c);
            examined += 1;
            if cmax <= ABS_PIVOT_TOL {
                // Numerically empty column.
                return Some((NIL, c));
            }
            for &r in &col_rows[c] {
                if !row_active[r] {
                    continue;
                }
                let Some(v) = entry(rows, r, c) else { continue };
                if v.abs() < THRESHOLD * cmax || v.abs() <= ABS_PIVOT_TOL {
                    continue;
                }
                let cost = (rows[r].len() - 1) * (count - 1);
                let better = match best {
                    None => true,
                    Some((_, _, bc, bv)) => cost < bc || (cost == bc && v.abs() > bv),
                };
                if better {
                    best = Some((r, c, cost, v.abs()));
                }
            }
            if best.is_some() && examined >= SEARCH_COLUMNS {
                return best.map(|(r, c, _, _)| (r, c));
            }
            c = cb.next[c];
        }
        if let Some((_, _, bc, _)) = best {
            // Row singletons are gone, so the next bucket costs at least `count`.
            if bc <= count || examined >= SEARCH_COLUMNS {
                return best.map(|(r, c, _, _)| (r, c));
            }
        }
    }
    best.map(|(r, c, _, _)| (r, c))
}

fn column_max(
    rows: &[Vec<(usize, f64)>],
    col_rows: &[Vec<usize>],
    row_active: &[bool],
    c: usize,
) -> f64 {
    col_rows[c]
        .iter()
        .filter(|&&r| row_active[r])
        .filter_map(|&r| entry(rows, r, c))
        .fold(0.0_f64, |m, v| m.max(v.abs()))
}
