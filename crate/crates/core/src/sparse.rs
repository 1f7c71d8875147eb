//! Symmetric sparse storage, permutations and diagonal scalings.
//!
//! [`SparseSymMatrix`] keeps only the lower triangle (diagonal included) in
//! compressed rows. Every row owns an explicit diagonal slot, even when the
//! value is zero, so pivot scans can read diagonals unconditionally.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_starts: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from compressed lower-triangular rows, validating all invariants.
    pub fn from_lower_csr(
        n: usize,
        row_starts: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_starts.len() != n + 1 || row_starts[0] != 0 {
            return Err(Error::InvalidInput("row_starts must have length n+1 and start at 0".into()));
        }
        if col_indices.len() != values.len() || row_starts[n] != col_indices.len() {
            return Err(Error::InvalidInput("index/value arrays inconsistent with row_starts".into()));
        }
        for i in 0..n {
            let (lo, hi) = (row_starts[i], row_starts[i + 1]);
            if hi < lo {
                return Err(Error::InvalidInput(format!("row_starts decreasing at row {i}")));
            }
            let cols = &col_indices[lo..hi];
            if cols.last() != Some(&i) {
                return Err(Error::InvalidInput(format!("row {i} lacks a diagonal slot or has upper entries")));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!("row {i} columns not strictly increasing")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix value".into()));
        }
        Ok(SparseSymMatrix { n, row_starts, col_indices, values })
    }

    /// Builds from `(row, col, value)` triplets given in either triangle.
    /// Entries are mirrored into the lower triangle; a pair given twice is an error.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!("entry ({i},{j}) out of range for n={n}")));
            }
            let (r, c) = if j <= i { (i, j) } else { (j, i) };
            rows[r].push((c, v));
        }
        let mut row_starts = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_starts.push(0);
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|e| e.0);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidInput(format!("duplicate entry in row {i}")));
            }
            if row.last().map(|e| e.0) != Some(i) {
                row.push((i, 0.0));
            }
            for &(c, v) in row.iter() {
                col_indices.push(c);
                values.push(v);
            }
            row_starts.push(col_indices.len());
        }
        Self::from_lower_csr(n, row_starts, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        SparseSymMatrix {
            n,
            row_starts: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row_starts(&self) -> &[usize] {
        &self.row_starts
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored entries of the lower triangle (diagonal slots included).
    pub fn nnz_lower(&self) -> usize {
        self.values.len()
    }

    /// Entries of the full symmetric matrix: off-diagonals twice, diagonal slots once.
    pub fn nnz_full(&self) -> usize {
        2 * self.values.len() - self.n
    }

    /// Lower-triangular row `i`: columns `<= i` and their values.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_starts[i], self.row_starts[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.values[self.row_starts[i + 1] - 1]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Iterates `(row, col, value)` over the stored lower triangle, row-major.
    pub fn lower_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// Full symmetric rows `(col, value)` with sorted columns, explicit zeros skipped.
    pub fn full_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for (i, j, v) in self.lower_entries() {
            if v == 0.0 {
                continue;
            }
            rows[i].push((j, v));
            if i != j {
                rows[j].push((i, v));
            }
        }
        for r in rows.iter_mut() {
            r.sort_by_key(|e| e.0);
        }
        rows
    }

    /// Structural adjacency (nonzero off-diagonal entries), sorted, without self loops.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        self.full_rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.into_iter().map(|e| e.0).filter(|&j| j != i).collect())
            .collect()
    }

    /// `y = A x` using the symmetric operator reconstructed from the lower triangle.
    pub fn sym_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let xi = x[i];
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
                if j != i {
                    y[j] += v * xi;
                }
            }
            y[i] += acc;
        }
    }

    /// Symmetric permutation: the result has `(p(i), p(j)) = a(i, j)`.
    pub fn permute_sym(&self, p: &Permutation) -> Result<Self> {
        if p.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: p.len() });
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for (i, j, v) in self.lower_entries() {
            let (pi, pj) = (p.forward[i], p.forward[j]);
            let (r, c) = if pj <= pi { (pi, pj) } else { (pj, pi) };
            rows[r].push((c, v));
        }
        Ok(Self::from_sorted_rows(rows))
    }

    /// `D A D` for a strictly positive diagonal `D`.
    pub fn scale_sym(&self, d: &DiagScaling) -> Result<Self> {
        if d.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: d.len() });
        }
        let mut out = self.clone();
        for i in 0..self.n {
            let (lo, hi) = (self.row_starts[i], self.row_starts[i + 1]);
            for k in lo..hi {
                let j = self.col_indices[k];
                out.values[k] = d.d[i] * self.values[k] * d.d[j];
            }
        }
        Ok(out)
    }

    /// `A - sigma I`.
    pub fn shifted(&self, sigma: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            let k = self.row_starts[i + 1] - 1;
            out.values[k] -= sigma;
        }
        out
    }

    /// Maximum absolute row sum (equal to the 1-norm for symmetric matrices).
    pub fn norm1(&self) -> f64 {
        let mut sums = vec![0.0; self.n];
        for (i, j, v) in self.lower_entries() {
            sums[i] += v.abs();
            if i != j {
                sums[j] += v.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Largest absolute value in each full row.
    pub fn row_max_abs(&self) -> Vec<f64> {
        let mut m = vec![0.0f64; self.n];
        for (i, j, v) in self.lower_entries() {
            m[i] = m[i].max(v.abs());
            m[j] = m[j].max(v.abs());
        }
        m
    }

    /// Principal submatrix on `idx` (in that order).
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &i) in idx.iter().enumerate() {
            pos[i] = k;
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); idx.len()];
        for (i, j, v) in self.lower_entries() {
            let (pi, pj) = (pos[i], pos[j]);
            if pi == usize::MAX || pj == usize::MAX {
                continue;
            }
            let (r, c) = if pj <= pi { (pi, pj) } else { (pj, pi) };
            rows[r].push((c, v));
        }
        Self::from_sorted_rows(rows)
    }

    /// Assembles from per-row lower entries in arbitrary order; adds missing diagonal slots.
    pub(crate) fn from_sorted_rows(mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_starts = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_starts.push(0);
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|e| e.0);
            if row.last().map(|e| e.0) != Some(i) {
                row.push((i, 0.0));
            }
            for &(c, v) in row.iter() {
                col_indices.push(c);
                values.push(v);
            }
            row_starts.push(col_indices.len());
        }
        SparseSymMatrix { n, row_starts, col_indices, values }
    }

    /// Raw bytes of the representation; equal matrices give equal bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (2 + self.row_starts.len() + 2 * self.values.len()));
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        for &r in &self.row_starts {
            out.extend_from_slice(&(r as u64).to_le_bytes());
        }
        for &c in &self.col_indices {
            out.extend_from_slice(&(c as u64).to_le_bytes());
        }
        for &v in &self.values {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        out
    }
}

/// A bijection on `0..n`. `forward[i]` is the new position of index `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation { forward: (0..n).collect(), inverse: (0..n).collect() }
    }

    /// From the image array (`forward[i]` = new position of `i`).
    pub fn from_forward(forward: Vec<usize>) -> Result<Self> {
        let n = forward.len();
        let mut inverse = vec![usize::MAX; n];
        for (i, &f) in forward.iter().enumerate() {
            if f >= n || inverse[f] != usize::MAX {
                return Err(Error::InvalidInput("not a permutation".into()));
            }
            inverse[f] = i;
        }
        Ok(Permutation { forward, inverse })
    }

    /// From an ordering list: `order[k]` is the old index placed at position `k`.
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let p = Self::from_forward(order)?;
        Ok(p.inverse())
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse_map(&self) -> &[usize] {
        &self.inverse
    }

    /// Ordering list: old index at each new position.
    pub fn order(&self) -> &[usize] {
        &self.inverse
    }

    pub fn inverse(&self) -> Self {
        Permutation { forward: self.inverse.clone(), inverse: self.forward.clone() }
    }

    /// Applies `self` first, then `next`.
    pub fn then(&self, next: &Permutation) -> Self {
        let forward: Vec<usize> = self.forward.iter().map(|&f| next.forward[f]).collect();
        let mut inverse = vec![0; forward.len()];
        for (i, &f) in forward.iter().enumerate() {
            inverse[f] = i;
        }
        Permutation { forward, inverse }
    }

    /// `y[p(i)] = x[i]`.
    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (i, &f) in self.forward.iter().enumerate() {
            y[f] = x[i];
        }
        y
    }

    /// `y[i] = x[p(i)]`.
    pub fn apply_inverse_vec(&self, x: &[f64]) -> Vec<f64> {
        self.forward.iter().map(|&f| x[f]).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.forward.iter().enumerate().all(|(i, &f)| i == f)
    }
}

/// Strictly positive diagonal scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagScaling {
    d: Vec<f64>,
}

impl DiagScaling {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if let Some(i) = d.iter().position(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::InvalidInput(format!("scale entry {i} is not finite and positive: {}", d[i])));
        }
        Ok(DiagScaling { d })
    }

    pub fn ones(n: usize) -> Self {
        DiagScaling { d: vec![1.0; n] }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.d
    }
}
