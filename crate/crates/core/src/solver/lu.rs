//! Sparse LU factorization with a reusable fill-reducing ordering.
//!
//! Analysis computes a minimum-degree column ordering on the symmetrized
//! pattern once. Each numeric factorization then runs a left-looking
//! Gilbert–Peierls elimination with threshold partial pivoting that prefers
//! the diagonal entry, so a diagonally dominant iteration matrix keeps the
//! ordering's sparsity.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::sparse::{CscMatrix, SparsityPattern};

/// Diagonal pivot accepted when `|a_jj| >= DIAG_PIVOT_TOL * max_i |a_ij|`.
const DIAG_PIVOT_TOL: f64 = 1.0e-3;

#[derive(Debug, Error, PartialEq)]
pub enum LuError {
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("matrix is numerically singular at column {0}")]
    Singular(usize),
    #[error("matrix pattern does not match the analysed pattern")]
    PatternMismatch,
}

/// Ordering computed once per sparsity pattern.
#[derive(Debug, Clone)]
pub struct SymbolicLu {
    pattern: Arc<SparsityPattern>,
    col_order: Vec<usize>,
    lnz_hint: usize,
    unz_hint: usize,
}

impl SymbolicLu {
    pub fn analyze(pattern: Arc<SparsityPattern>) -> Result<Self, LuError> {
        let n = pattern.nrows();
        if n != pattern.ncols() {
            return Err(LuError::NotSquare(n, pattern.ncols()));
        }
        let col_order = minimum_degree(&pattern);
        let hint = pattern.nnz() + n;
        Ok(Self {
            pattern,
            col_order,
            lnz_hint: hint,
            unz_hint: hint,
        })
    }

    pub fn n(&self) -> usize {
        self.pattern.nrows()
    }

    pub fn column_order(&self) -> &[usize] {
        &self.col_order
    }

    /// Numeric factorization of a matrix with the analysed pattern.
    pub fn factor(&mut self, matrix: &CscMatrix) -> Result<LuFactors, LuError> {
        if !Arc::ptr_eq(matrix.pattern(), &self.pattern) && **matrix.pattern() != *self.pattern {
            return Err(LuError::PatternMismatch);
        }
        let f = factor_numeric(
            &self.pattern,
            matrix.values(),
            &self.col_order,
            self.lnz_hint,
            self.unz_hint,
        )?;
        self.lnz_hint = f.l_row.len();
        self.unz_hint = f.u_row.len();
        Ok(f)
    }
}

/// `P A Q = L U` with unit-diagonal `L`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    /// pinv[original row] = pivot position
    pinv: Vec<usize>,
    col_order: Vec<usize>,
    // L by column in pivot coordinates, diagonal (=1) stored first
    l_ptr: Vec<usize>,
    l_row: Vec<usize>,
    l_val: Vec<f64>,
    // U by column in pivot coordinates, diagonal stored last
    u_ptr: Vec<usize>,
    u_row: Vec<usize>,
    u_val: Vec<f64>,
}

impl LuFactors {
    pub fn nnz(&self) -> (usize, usize) {
        (self.l_row.len(), self.u_row.len())
    }

    /// Solve `A x = b`, returning `x`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n];
        for (i, &bi) in b.iter().enumerate() {
            x[self.pinv[i]] = bi;
        }
        // L y = P b
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.l_ptr[j] + 1..self.l_ptr[j + 1] {
                    x[self.l_row[p]] -= self.l_val[p] * xj;
                }
            }
        }
        // U z = y
        for j in (0..n).rev() {
            let end = self.u_ptr[j + 1] - 1;
            x[j] /= self.u_val[end];
            let xj = x[j];
            if xj != 0.0 {
                for p in self.u_ptr[j]..end {
                    x[self.u_row[p]] -= self.u_val[p] * xj;
                }
            }
        }
        let mut out = vec![0.0; n];
        for (k, &c) in self.col_order.iter().enumerate() {
            out[c] = x[k];
        }
        out
    }
}

fn factor_numeric(
    pattern: &SparsityPattern,
    values: &[f64],
    col_order: &[usize],
    lnz_hint: usize,
    unz_hint: usize,
) -> Result<LuFactors, LuError> {
    let n = pattern.nrows();
    const UNSET: usize = usize::MAX;
    let mut pinv = vec![UNSET; n];
    let mut l_ptr = Vec::with_capacity(n + 1);
    let mut l_row: Vec<usize> = Vec::with_capacity(lnz_hint);
    let mut l_val: Vec<f64> = Vec::with_capacity(lnz_hint);
    let mut u_ptr = Vec::with_capacity(n + 1);
    let mut u_row: Vec<usize> = Vec::with_capacity(unz_hint);
    let mut u_val: Vec<f64> = Vec::with_capacity(unz_hint);

    let mut x = vec![0.0; n];
    let mut marked = vec![false; n];
    let mut reach: Vec<usize> = Vec::with_capacity(n);
    let mut dfs_stack: Vec<(usize, usize)> = Vec::new();

    let col_ptr = pattern.col_ptr();
    let row_idx = pattern.row_idx();

    for (k, &col) in col_order.iter().enumerate() {
        l_ptr.push(l_row.len());
        u_ptr.push(u_row.len());

        // Reach of A(:, col) in the graph of L, in topological order (reversed post-order).
        reach.clear();
        for &i in &row_idx[col_ptr[col]..col_ptr[col + 1]] {
            if marked[i] {
                continue;
            }
            marked[i] = true;
            dfs_stack.push((i, 0));
            while let Some(&mut (node, ref mut next)) = dfs_stack.last_mut() {
                let jcol = pinv[node];
                let mut pushed = false;
                if jcol != UNSET {
                    let start = l_ptr[jcol] + 1;
                    let end = l_ptr[jcol + 1];
                    while start + *next < end {
                        let child = l_row[start + *next];
                        *next += 1;
                        if !marked[child] {
                            marked[child] = true;
                            dfs_stack.push((child, 0));
                            pushed = true;
                            break;
                        }
                    }
                }
                if !pushed {
                    reach.push(node);
                    dfs_stack.pop();
                }
            }
        }
        for s in col_ptr[col]..col_ptr[col + 1] {
            x[row_idx[s]] = values[s];
        }
        // Sparse triangular solve in topological order.
        for &j in reach.iter().rev() {
            let jcol = pinv[j];
            if jcol == UNSET {
                continue;
            }
            let xj = x[j];
            if xj != 0.0 {
                for p in l_ptr[jcol] + 1..l_ptr[jcol + 1] {
                    x[l_row[p]] -= l_val[p] * xj;
                }
            }
        }
        // Pivot selection and U column.
        let mut best = UNSET;
        let mut best_abs = -1.0;
        for &i in &reach {
            if pinv[i] == UNSET {
                let a = x[i].abs();
                if a > best_abs {
                    best_abs = a;
                    best = i;
                }
            } else {
                u_row.push(pinv[i]);
                u_val.push(x[i]);
            }
        }
        if best == UNSET || !(best_abs > 0.0) || !best_abs.is_finite() {
            return Err(LuError::Singular(col));
        }
        if pinv[col] == UNSET && marked[col] && x[col].abs() >= DIAG_PIVOT_TOL * best_abs {
            best = col;
        }
        let pivot = x[best];
        u_row.push(k);
        u_val.push(pivot);
        pinv[best] = k;
        l_row.push(best);
        l_val.push(1.0);
        for &i in &reach {
            if pinv[i] == UNSET {
                l_row.push(i);
                l_val.push(x[i] / pivot);
            }
            x[i] = 0.0;
            marked[i] = false;
        }
    }
    l_ptr.push(l_row.len());
    u_ptr.push(u_row.len());
    // Rows of L into pivot coordinates.
    for r in l_row.iter_mut() {
        *r = pinv[*r];
    }
    Ok(LuFactors {
        n,
        pinv,
        col_order: col_order.to_vec(),
        l_ptr,
        l_row,
        l_val,
        u_ptr,
        u_row,
        u_val,
    })
}

/// Greedy minimum-degree ordering of the graph of `A + Aᵀ`.
fn minimum_degree(pattern: &SparsityPattern) -> Vec<usize> {
    let n = pattern.nrows();
    let mut adj: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    for (r, c, _) in pattern.iter() {
        if r != c {
            adj[r].insert(c);
            adj[c].insert(r);
        }
    }
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|i| Reverse((adj[i].len(), i))).collect();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut neighbours: Vec<usize> = Vec::new();
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        neighbours.clear();
        neighbours.extend(adj[v].drain());
        neighbours.sort_unstable();
        for &a in &neighbours {
            adj[a].remove(&v);
        }
        for (i, &a) in neighbours.iter().enumerate() {
            for &b in &neighbours[i + 1..] {
                if adj[a].insert(b) {
                    adj[b].insert(a);
                }
            }
        }
        for &a in &neighbours {
            heap.push(Reverse((adj[a].len(), a)));
        }
    }
    order
}
