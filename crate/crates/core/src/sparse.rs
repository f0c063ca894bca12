//! Compressed-sparse-column matrices with a register → freeze → fill lifecycle.

use std::collections::BTreeSet;
use std::sync::Arc;

/// Collects `(row, col)` slots before the pattern is frozen.
#[derive(Debug, Clone)]
pub struct SparsityBuilder {
    nrows: usize,
    ncols: usize,
    entries: BTreeSet<(usize, usize)>,
}

impl SparsityBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: BTreeSet::new(),
        }
    }

    pub fn square(n: usize) -> Self {
        Self::new(n, n)
    }

    pub fn register(&mut self, row: usize, col: usize) {
        assert!(
            row < self.nrows && col < self.ncols,
            "slot ({row}, {col}) out of range"
        );
        self.entries.insert((col, row));
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.entries.contains(&(col, row))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn freeze(self) -> Arc<SparsityPattern> {
        let mut col_ptr = vec![0usize; self.ncols + 1];
        let mut row_idx = Vec::with_capacity(self.entries.len());
        for &(c, r) in &self.entries {
            col_ptr[c + 1] += 1;
            row_idx.push(r);
        }
        for c in 0..self.ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        Arc::new(SparsityPattern {
            nrows: self.nrows,
            ncols: self.ncols,
            col_ptr,
            row_idx,
        })
    }
}

/// Frozen CSC pattern; rows within each column are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl SparsityPattern {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn column(&self, col: usize) -> &[usize] {
        &self.row_idx[self.col_ptr[col]..self.col_ptr[col + 1]]
    }

    /// Storage index of `(row, col)`, if registered.
    pub fn slot(&self, row: usize, col: usize) -> Option<usize> {
        if col >= self.ncols {
            return None;
        }
        let start = self.col_ptr[col];
        self.column(col).binary_search(&row).ok().map(|k| start + k)
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.slot(row, col).is_some()
    }

    /// Iterate `(row, col, slot)` over every registered entry.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |s| (self.row_idx[s], c, s))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn clear(&mut self) {
        self.values.fill(0.0);
    }

    #[inline]
    pub fn add_at(&mut self, slot: usize, v: f64) {
        self.values[slot] += v;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.slot(row, col).map_or(0.0, |s| self.values[s])
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.pattern.ncols]; self.pattern.nrows];
        for (r, c, s) in self.pattern.iter() {
            d[r][c] = self.values[s];
        }
        d
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.pattern.nrows];
        for (r, c, s) in self.pattern.iter() {
            y[r] += self.values[s] * x[c];
        }
        y
    }
}
