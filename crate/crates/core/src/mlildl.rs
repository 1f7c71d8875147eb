//! Multilevel incomplete LDLᵀ with inverse-based pivoting.
//!
//! Each level takes a symmetric matrix `A_ℓ`, scales and reorders it into
//! `Ã = Π (D A_ℓ D) Πᵀ`, and runs an incomplete right-looking block LDLᵀ on
//! `Ã` in which pivots that would push the estimate of `‖L⁻¹‖` above `κ` are
//! postponed to the end. With the accepted part first, the level operator is
//!
//! ```text
//!        [ B̃   Fᵀ          ]          B̃ = L₁₁ D₁₁ L₁₁ᵀ
//!   M̃ =  [ F   F B̃⁻¹ Fᵀ + S ]         F = Ã₂₁ (the coupling L₂₁ is implicit)
//! ```
//!
//! where `S` is the approximate Schur complement of the postponed pivots,
//! which becomes `A_{ℓ+1}`. The last Schur complement is factored densely.
//! Solving `M̃ z = r` needs two `B̃` solves and one recursive solve with `S`:
//!
//! ```text
//!   y₂ = r₂ − F B̃⁻¹ r₁,   z₂ = S⁻¹ y₂,   z₁ = B̃⁻¹ (r₁ − Fᵀ z₂)
//! ```
//!
//! and the level map is `A_ℓ⁻¹ r ≈ D Πᵀ M̃⁻¹ Π D r`. Scalings and
//! permutations are therefore applied per level, outermost first on the way
//! in and in reverse on the way out.

use std::cell::RefCell;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use crate::dense::{to_dense, DenseLdlt, DenseMatrix};
use crate::error::{Error, Result};
use crate::matching::{compress_graph, expand_ordering, symmetric_matching, Block};
use crate::ordering::{min_degree_order, AdjGraph};
use crate::sparse::{DiagScaling, Permutation, SparseSymMatrix};

const DET_GUARD: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct FactorParams {
    pub kappa: f64,
    /// `None` means `1/sqrt(N)` for the top-level dimension `N`.
    pub epsilon: Option<f64>,
    pub tau: f64,
    pub max_levels: usize,
    pub small_block_cutoff: usize,
    pub enable_matching: bool,
    pub enable_aggressive_drop: bool,
    /// Replaces the fill-reducing ordering of the first level.
    pub initial_ordering: Option<Permutation>,
}

impl Default for FactorParams {
    fn default() -> Self {
        FactorParams {
            kappa: 5.0,
            epsilon: None,
            tau: 0.1,
            max_levels: 25,
            small_block_cutoff: 200,
            enable_matching: true,
            enable_aggressive_drop: true,
            initial_ordering: None,
        }
    }
}

impl FactorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa >= 1.0) {
            return Err(Error::InvalidConfig(format!("kappa must be >= 1, got {}", self.kappa)));
        }
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::InvalidConfig(format!("epsilon must be finite and >= 0, got {eps}")));
            }
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidConfig(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidConfig("max_levels must be at least 1".into()));
        }
        Ok(())
    }

    pub fn epsilon_for(&self, n: usize) -> f64 {
        self.epsilon.unwrap_or(1.0 / (n.max(1) as f64).sqrt())
    }
}

/// Output of [`preprocess_level`]: `matrix = Π (D A D) Πᵀ` with `perm = Π`.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub matrix: SparseSymMatrix,
    pub scaling: DiagScaling,
    pub perm: Permutation,
    /// Pivot blocks in the numbering of `matrix`.
    pub blocks: Vec<Block>,
}

fn max_row_scaling(a: &SparseSymMatrix) -> DiagScaling {
    let d = a.row_max_abs().into_iter().map(|m| if m > 0.0 { 1.0 / m.sqrt() } else { 1.0 }).collect();
    DiagScaling::new(d).expect("positive by construction")
}

pub fn preprocess_level(a: &SparseSymMatrix, params: &FactorParams, ordering: Option<&Permutation>) -> Result<Preprocessed> {
    let n = a.n();
    let (scaling, blocks) = if params.enable_matching {
        let m = symmetric_matching(a)?;
        (m.scaling, m.blocks)
    } else {
        (max_row_scaling(a), (0..n).map(Block::OneByOne).collect())
    };
    let scaled = a.scale_sym(&scaling)?;
    let perm = match ordering {
        Some(p) => {
            if p.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: p.len() });
            }
            p.clone()
        }
        None => {
            let g = compress_graph(&scaled, &blocks)?;
            let cperm = min_degree_order(&AdjGraph::new(g.adjacency)?);
            expand_ordering(&cperm, &g.members)?
        }
    };
    let f = perm.forward();
    let blocks = blocks
        .iter()
        .map(|b| match *b {
            Block::OneByOne(i) => Block::OneByOne(f[i]),
            Block::TwoByTwo(x, y) => Block::pair(f[x], f[y]),
        })
        .collect();
    Ok(Preprocessed { matrix: scaled.permute_sym(&perm)?, scaling, perm, blocks })
}

/// Monitor of `‖L⁻¹‖∞` for a growing unit lower factor.
///
/// Row `k` of `L` is complete once `k` is the next pivot, so the 1-norm of
/// row `k` of `L⁻¹` follows from a sparse solve `Lᵀ z = e_k` over the pivots
/// it reaches. The running maximum over accepted rows is `‖L⁻¹‖∞` itself.
#[derive(Debug, Clone)]
pub struct InvNormEstimator {
    /// Strict row entries `(pivot, l)` recorded as columns arrive.
    rows: Vec<Vec<(usize, f64)>>,
    /// Acceptance sequence number of each pivot.
    seq: Vec<usize>,
    accepted: usize,
    /// Dense solve workspace and membership marks, cleared after each solve.
    scratch: RefCell<(Vec<f64>, Vec<bool>)>,
    estimate: f64,
}

impl InvNormEstimator {
    pub fn new(n: usize) -> Self {
        InvNormEstimator {
            rows: vec![Vec::new(); n],
            seq: vec![usize::MAX; n],
            accepted: 0,
            scratch: RefCell::new((vec![0.0; n], vec![false; n])),
            estimate: 1.0,
        }
    }

    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    /// `‖e_kᵀ L⁻¹‖₁` if row `k` became the next pivot.
    pub fn growth(&self, k: usize) -> f64 {
        if self.rows[k].is_empty() {
            return 1.0;
        }
        let mut guard = self.scratch.borrow_mut();
        let (z, seen) = &mut *guard;
        let mut heap: BinaryHeap<(usize, usize)> = BinaryHeap::new();
        let mut touched = Vec::new();
        let mut visit = |j: usize, heap: &mut BinaryHeap<(usize, usize)>, seen: &mut Vec<bool>| {
            if !seen[j] {
                seen[j] = true;
                touched.push(j);
                heap.push((self.seq[j], j));
            }
        };
        for &(j, l) in &self.rows[k] {
            visit(j, &mut heap, seen);
            z[j] -= l;
        }
        let mut norm = 1.0;
        while let Some((_, j)) = heap.pop() {
            let zj = z[j];
            norm += zj.abs();
            for &(i, l) in &self.rows[j] {
                visit(i, &mut heap, seen);
                z[i] -= l * zj;
            }
        }
        for j in touched {
            z[j] = 0.0;
            seen[j] = false;
        }
        norm
    }

    /// Records pivot `k` whose column of `L` is `col` (rows below the pivot block).
    pub fn push_column(&mut self, k: usize, col: &[(usize, f64)]) {
        self.estimate = self.estimate.max(self.growth(k));
        self.seq[k] = self.accepted;
        self.accepted += 1;
        for &(r, l) in col {
            self.rows[r].push((k, l));
        }
    }
}

/// `‖L⁻¹‖∞` for a unit lower factor given by strict columns.
pub fn estimate_inverse_norm(cols: &[Vec<(usize, f64)>]) -> f64 {
    let mut est = InvNormEstimator::new(cols.len());
    for (k, col) in cols.iter().enumerate() {
        est.push_column(k, col);
    }
    est.estimate()
}

/// Lower bounds `ν_i ≤ ‖L⁻¹ e_i‖₁` from a greedy backward solve with `Lᵀ`.
pub fn column_norm_estimates(cols: &[Vec<(usize, f64)>]) -> Vec<f64> {
    let n = cols.len();
    let mut z = vec![0.0; n];
    for j in (0..n).rev() {
        let acc: f64 = cols[j].iter().map(|&(r, l)| l * z[r]).sum();
        z[j] = if acc > 0.0 { -(1.0 + acc) } else { 1.0 - acc };
    }
    z.iter().map(|v| v.abs()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PivotChoice {
    OneByOne,
    TwoByTwo,
    Postpone,
}

/// `d₁ = Σ_{j>1} |s_j1| / |s_11|` and `d₂ = Σ_{j>2} ‖(s_j1, s_j2) B⁻¹‖₁` for
/// the leading 2×2 block `B`; `+∞` when the pivot is singular.
pub fn pivot_criteria(s11: f64, s12: f64, s22: f64, col1_rest: &[f64], pairs: &[(f64, f64)]) -> (f64, f64) {
    let d1 = if s11 == 0.0 {
        f64::INFINITY
    } else {
        (s12.abs() + col1_rest.iter().map(|v| v.abs()).sum::<f64>()) / s11.abs()
    };
    let det = s11 * s22 - s12 * s12;
    let d2 = if det.abs() < DET_GUARD || !det.is_finite() {
        f64::INFINITY
    } else {
        let (a, b, c) = (s22 / det, -s12 / det, s11 / det);
        pairs.iter().map(|&(x, y)| (x * a + y * b).abs() + (x * b + y * c).abs()).sum()
    };
    (d1, d2)
}

/// Pivot decision on the leading columns of a dense Schur complement, with
/// an empty history (all accumulated estimator terms zero).
pub fn choose_pivot(s: &DenseMatrix, kappa: f64) -> PivotChoice {
    let n = s.n();
    let mut work: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for i in 0..n {
        for j in 0..n {
            if s[(i, j)] != 0.0 || i == j {
                work[i].insert(j, s[(i, j)]);
            }
        }
    }
    let est = InvNormEstimator::new(n);
    match decide(&work, 0, if n > 1 { Some(1) } else { None }, &est, kappa) {
        Decision::One { .. } => PivotChoice::OneByOne,
        Decision::Two { .. } => PivotChoice::TwoByTwo,
        Decision::Postpone => PivotChoice::Postpone,
    }
}

enum Decision {
    One { d: f64, col: Vec<(usize, f64)> },
    Two { k2: usize, block: [f64; 3], col: Vec<(usize, f64, f64)> },
    Postpone,
}

fn decide(work: &[BTreeMap<usize, f64>], k: usize, k2: Option<usize>, est: &InvNormEstimator, kappa: f64) -> Decision {
    let s11 = work[k].get(&k).copied().unwrap_or(0.0);
    let (s12, s22, pairs, col1_rest) = match k2 {
        Some(k2) => {
            let s12 = work[k].get(&k2).copied().unwrap_or(0.0);
            let s22 = work[k2].get(&k2).copied().unwrap_or(0.0);
            let mut merged: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
            for (&j, &v) in &work[k] {
                if j != k && j != k2 {
                    merged.entry(j).or_default().0 = v;
                }
            }
            for (&j, &v) in &work[k2] {
                if j != k && j != k2 {
                    merged.entry(j).or_default().1 = v;
                }
            }
            let pairs: Vec<(usize, f64, f64)> = merged.into_iter().map(|(j, (x, y))| (j, x, y)).collect();
            let rest: Vec<f64> = pairs.iter().map(|p| p.1).filter(|v| *v != 0.0).collect();
            (s12, s22, pairs, rest)
        }
        None => {
            let rest = work[k].iter().filter(|(&j, _)| j != k).map(|(_, &v)| v).collect();
            (0.0, 0.0, Vec::new(), rest)
        }
    };
    let xy: Vec<(f64, f64)> = pairs.iter().map(|p| (p.1, p.2)).collect();
    let (d1, d2) = if k2.is_some() {
        pivot_criteria(s11, s12, s22, &col1_rest, &xy)
    } else {
        pivot_criteria(s11, 0.0, 0.0, &col1_rest, &[])
    };

    let try_one = || -> Option<Decision> {
        if s11 == 0.0 || est.growth(k) > kappa {
            return None;
        }
        let col: Vec<(usize, f64)> =
            work[k].iter().filter(|(&j, _)| j != k).map(|(&j, &v)| (j, v / s11)).collect();
        if col.iter().any(|e| e.1.abs() > kappa || !e.1.is_finite()) {
            return None;
        }
        Some(Decision::One { d: s11, col })
    };
    let try_two = || -> Option<Decision> {
        let k2 = k2?;
        let det = s11 * s22 - s12 * s12;
        if det.abs() < DET_GUARD || !det.is_finite() {
            return None;
        }
        if est.growth(k) > kappa || est.growth(k2) > kappa {
            return None;
        }
        let (a, b, c) = (s22 / det, -s12 / det, s11 / det);
        let col: Vec<(usize, f64, f64)> = pairs.iter().map(|&(j, x, y)| (j, x * a + y * b, x * b + y * c)).collect();
        if col.iter().any(|e| e.1.abs().max(e.2.abs()) > kappa || !(e.1.is_finite() && e.2.is_finite())) {
            return None;
        }
        Some(Decision::Two { k2, block: [s11, s12, s22], col })
    };

    let first = if d2 < d1 { try_two().or_else(try_one) } else { try_one().or_else(try_two) };
    first.unwrap_or(Decision::Postpone)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotBlock {
    pub start: usize,
    pub size: usize,
    /// Symmetric block `[d11, d21, d22]` (only `d11` for 1×1).
    pub d: [f64; 3],
    /// Its inverse in the same layout.
    pub inv: [f64; 3],
}

/// One level of the multilevel factorization.
#[derive(Debug, Clone)]
pub struct LevelFactor {
    pub scaling: DiagScaling,
    /// Level input index → position (accepted pivots first, then postponed).
    pub perm: Permutation,
    /// Strict lower columns of `L₁₁`, rows in `0..accepted_size`.
    pub l_cols: Vec<Vec<(usize, f64)>>,
    pub pivots: Vec<PivotBlock>,
    /// Rows of `F = Ã₂₁` (postponed × accepted).
    pub f_rows: Vec<Vec<(usize, f64)>>,
    pub accepted_size: usize,
    pub schur_dim: usize,
    pub inv_norm_estimate: f64,
    pub dropped_aggressive: usize,
}

impl LevelFactor {
    pub fn dim(&self) -> usize {
        self.accepted_size + self.schur_dim
    }

    fn nnz(&self) -> usize {
        let l: usize = self.l_cols.iter().map(|c| c.len()).sum();
        let d: usize = self.pivots.iter().map(|p| if p.size == 1 { 1 } else { 3 }).sum();
        let f: usize = self.f_rows.iter().map(|r| r.len()).sum();
        l + d + f
    }

    /// `L₁₁` as a dense unit lower-triangular matrix.
    pub fn l_dense(&self) -> DenseMatrix {
        let mut l = DenseMatrix::identity(self.accepted_size);
        for (j, col) in self.l_cols.iter().enumerate() {
            for &(i, v) in col {
                l[(i, j)] = v;
            }
        }
        l
    }

    /// Solves `L₁₁ D₁₁ L₁₁ᵀ x = r` in place.
    fn solve_b(&self, x: &mut [f64]) {
        for (j, col) in self.l_cols.iter().enumerate() {
            let xj = x[j];
            if xj != 0.0 {
                for &(i, v) in col {
                    x[i] -= v * xj;
                }
            }
        }
        for p in &self.pivots {
            if p.size == 1 {
                x[p.start] *= p.inv[0];
            } else {
                let (a, b) = (x[p.start], x[p.start + 1]);
                x[p.start] = p.inv[0] * a + p.inv[1] * b;
                x[p.start + 1] = p.inv[1] * a + p.inv[2] * b;
            }
        }
        for (j, col) in self.l_cols.iter().enumerate().rev() {
            let s: f64 = col.iter().map(|&(i, v)| v * x[i]).sum();
            x[j] -= s;
        }
    }
}

/// Incomplete factorization of one preprocessed matrix. Returns the level
/// (with identity scaling and the accepted/postponed permutation of `at`)
/// and the Schur complement of the postponed pivots.
pub fn factor_level(at: &SparseSymMatrix, kappa: f64, epsilon: f64) -> Result<(LevelFactor, SparseSymMatrix)> {
    let n = at.n();
    let droptol = epsilon / kappa;
    let mut work: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for (i, j, v) in at.lower_entries() {
        if v != 0.0 || i == j {
            work[i].insert(j, v);
            work[j].insert(i, v);
        }
    }
    let mut queue: VecDeque<usize> = (0..n).collect();
    let mut est = InvNormEstimator::new(n);
    let mut accepted: Vec<usize> = Vec::new();
    let mut postponed: Vec<usize> = Vec::new();
    let mut raw_cols: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut raw_pivots: Vec<(usize, [f64; 3])> = Vec::new();

    let eliminate = |work: &mut Vec<BTreeMap<usize, f64>>, piv: &[usize]| {
        for &p in piv {
            let row = std::mem::take(&mut work[p]);
            for &j in row.keys() {
                if !piv.contains(&j) {
                    work[j].remove(&p);
                }
            }
        }
    };
    while let Some(k) = queue.pop_front() {
        match decide(&work, k, queue.front().copied(), &est, kappa) {
            Decision::Postpone => postponed.push(k),
            Decision::One { d, col } => {
                let kept: Vec<(usize, f64)> = col.into_iter().filter(|e| e.1.abs() >= droptol).collect();
                est.push_column(k, &kept);
                eliminate(&mut work, &[k]);
                // s_ij -= l_i d l_j
                let terms: Vec<(usize, Vec<f64>)> = kept.iter().map(|&(r, l)| (r, vec![l * d])).collect();
                let lterms: Vec<(usize, Vec<f64>)> = kept.iter().map(|&(r, l)| (r, vec![l])).collect();
                update_pair(&mut work, &terms, &lterms, droptol);
                accepted.push(k);
                raw_cols.push(kept);
                raw_pivots.push((1, [d, 0.0, 0.0]));
            }
            Decision::Two { k2, block, col } => {
                queue.pop_front();
                let kept: Vec<(usize, f64, f64)> = col
                    .into_iter()
                    .map(|(r, x, y)| (r, if x.abs() >= droptol { x } else { 0.0 }, if y.abs() >= droptol { y } else { 0.0 }))
                    .filter(|e| e.1 != 0.0 || e.2 != 0.0)
                    .collect();
                let c1: Vec<(usize, f64)> = kept.iter().filter(|e| e.1 != 0.0).map(|e| (e.0, e.1)).collect();
                let c2: Vec<(usize, f64)> = kept.iter().filter(|e| e.2 != 0.0).map(|e| (e.0, e.2)).collect();
                est.push_column(k, &c1);
                est.push_column(k2, &c2);
                eliminate(&mut work, &[k, k2]);
                let [b11, b21, b22] = block;
                // s_ij -= (l_i1, l_i2) B (l_j1, l_j2)ᵀ
                let terms: Vec<(usize, Vec<f64>)> =
                    kept.iter().map(|&(r, x, y)| (r, vec![x * b11 + y * b21, x * b21 + y * b22])).collect();
                let lterms: Vec<(usize, Vec<f64>)> = kept.iter().map(|&(r, x, y)| (r, vec![x, y])).collect();
                update_pair(&mut work, &terms, &lterms, droptol);
                accepted.push(k);
                accepted.push(k2);
                raw_cols.push(c1);
                raw_cols.push(c2);
                raw_pivots.push((2, block));
            }
        }
    }

    let na = accepted.len();
    let order: Vec<usize> = accepted.iter().chain(postponed.iter()).copied().collect();
    let perm = Permutation::from_order(order)?;
    let pos = perm.forward();

    let l_cols: Vec<Vec<(usize, f64)>> = raw_cols
        .into_iter()
        .map(|col| {
            let mut c: Vec<(usize, f64)> = col.into_iter().filter(|e| pos[e.0] < na).map(|(r, v)| (pos[r], v)).collect();
            c.sort_by_key(|e| e.0);
            c
        })
        .collect();

    let mut pivots = Vec::with_capacity(raw_pivots.len());
    let mut start = 0;
    for (size, d) in raw_pivots {
        let inv = if size == 1 {
            [1.0 / d[0], 0.0, 0.0]
        } else {
            let det = d[0] * d[2] - d[1] * d[1];
            [d[2] / det, -d[1] / det, d[0] / det]
        };
        pivots.push(PivotBlock { start, size, d, inv });
        start += size;
    }

    let ns = postponed.len();
    let mut f_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ns];
    let mut s_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ns];
    for (i, j, v) in at.lower_entries() {
        let (pi, pj) = (pos[i], pos[j]);
        let (hi, lo) = (pi.max(pj), pi.min(pj));
        if hi >= na && lo < na && v != 0.0 {
            f_rows[hi - na].push((lo, v));
        }
    }
    for r in f_rows.iter_mut() {
        r.sort_by_key(|e| e.0);
    }
    for (si, &p) in postponed.iter().enumerate() {
        for (&j, &v) in &work[p] {
            let sj = pos[j] - na;
            if sj <= si {
                s_rows[si].push((sj, v));
            }
        }
    }
    let schur = SparseSymMatrix::from_sorted_rows(s_rows);

    let level = LevelFactor {
        scaling: DiagScaling::ones(n),
        perm,
        l_cols,
        pivots,
        f_rows,
        accepted_size: na,
        schur_dim: ns,
        inv_norm_estimate: est.estimate(),
        dropped_aggressive: 0,
    };
    Ok((level, schur))
}

fn update_pair(work: &mut [BTreeMap<usize, f64>], terms: &[(usize, Vec<f64>)], lterms: &[(usize, Vec<f64>)], droptol: f64) {
    for (a, (i, ti)) in terms.iter().enumerate() {
        for (j, lj) in &lterms[..=a] {
            let delta: f64 = ti.iter().zip(lj).map(|(x, y)| x * y).sum();
            if delta == 0.0 {
                continue;
            }
            let entry = work[*i].entry(*j).or_insert(0.0);
            *entry -= delta;
            let v = *entry;
            if i == j {
                continue;
            }
            // both halves get the same value so the pattern stays symmetric
            if v.abs() < droptol {
                work[*i].remove(j);
                work[*j].remove(i);
            } else {
                work[*j].insert(*i, v);
            }
        }
    }
}

/// Drops `l_ij` with `|l_ij| ≤ τ / (ν_i · nnz below the diagonal of column j)`.
/// Returns the number of dropped entries.
pub fn aggressive_drop(level: &mut LevelFactor, tau: f64) -> usize {
    let nu = column_norm_estimates(&level.l_cols);
    let mut dropped = 0;
    for col in level.l_cols.iter_mut() {
        let count = col.len() as f64;
        let before = col.len();
        col.retain(|&(i, v)| v.abs() > tau / (nu[i] * count));
        dropped += before - col.len();
    }
    level.dropped_aggressive += dropped;
    dropped
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorStats {
    /// Stored factor entries over `nnz_lower(A)`.
    pub fill_ratio: f64,
    pub level_dims: Vec<usize>,
    pub accepted: Vec<usize>,
    pub inv_norm_estimates: Vec<f64>,
    pub dense_dim: usize,
    pub epsilon: f64,
}

impl FactorStats {
    pub fn report(&self) -> String {
        let mut s = format!("fill_ratio {:.4}  epsilon {:.3e}\n", self.fill_ratio, self.epsilon);
        for (l, ((dim, acc), est)) in self.level_dims.iter().zip(&self.accepted).zip(&self.inv_norm_estimates).enumerate() {
            s.push_str(&format!("level {l}: dim {dim} accepted {acc} postponed {} inv_norm_est {est:.3}\n", dim - acc));
        }
        s.push_str(&format!("dense: dim {}\n", self.dense_dim));
        s
    }
}

/// The preconditioner `M ≈ A`.
#[derive(Debug, Clone)]
pub struct MultilevelFactor {
    n: usize,
    pub levels: Vec<LevelFactor>,
    pub final_dense: Option<DenseLdlt>,
    pub stats: FactorStats,
}

pub fn factorize(a: &SparseSymMatrix, params: &FactorParams) -> Result<MultilevelFactor> {
    params.validate()?;
    let n = a.n();
    if n == 0 {
        return Err(Error::InvalidInput("cannot factor an empty matrix".into()));
    }
    let eps = params.epsilon_for(n);
    let mut levels: Vec<LevelFactor> = Vec::new();
    let mut current = a.clone();
    let mut poor_levels = 0;
    let mut final_dense = None;
    loop {
        let level_no = levels.len();
        let ordering = if level_no == 0 { params.initial_ordering.as_ref() } else { None };
        let pre = preprocess_level(&current, params, ordering)
            .map_err(|e| Error::FactorBreakdown { level: level_no, reason: format!("preprocessing failed: {e}") })?;
        let (mut level, schur) = factor_level(&pre.matrix, params.kappa, eps)?;
        if params.enable_aggressive_drop {
            aggressive_drop(&mut level, params.tau);
        }
        level.perm = pre.perm.then(&level.perm);
        level.scaling = pre.scaling;
        let dim = level.dim();
        let accepted = level.accepted_size;
        levels.push(level);

        if schur.n() == 0 {
            break;
        }
        if (accepted as f64) < 0.01 * dim as f64 {
            poor_levels += 1;
            if poor_levels >= 2 {
                return Err(Error::FactorBreakdown {
                    level: level_no,
                    reason: format!(
                        "accepted {accepted} of {dim} pivots on two consecutive levels; increase kappa"
                    ),
                });
            }
        } else {
            poor_levels = 0;
        }
        if schur.n() <= params.small_block_cutoff || levels.len() >= params.max_levels {
            let dense = to_dense(&schur)?;
            final_dense = Some(DenseLdlt::factor(&dense).map_err(|e| Error::FactorBreakdown {
                level: levels.len(),
                reason: format!("dense factorization of the last Schur complement failed: {e}"),
            })?);
            break;
        }
        current = schur;
    }

    let nnz_factor: usize =
        levels.iter().map(|l| l.nnz()).sum::<usize>() + final_dense.as_ref().map_or(0, |d| d.nnz());
    let stats = FactorStats {
        fill_ratio: nnz_factor as f64 / a.nnz_lower() as f64,
        level_dims: levels.iter().map(|l| l.dim()).collect(),
        accepted: levels.iter().map(|l| l.accepted_size).collect(),
        inv_norm_estimates: levels.iter().map(|l| l.inv_norm_estimate).collect(),
        dense_dim: final_dense.as_ref().map_or(0, |d| d.n()),
        epsilon: eps,
    };
    Ok(MultilevelFactor { n, levels, final_dense, stats })
}

impl MultilevelFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `z = M⁻¹ r`.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: r.len() });
        }
        Ok(self.solve_from(0, r))
    }

    fn solve_from(&self, idx: usize, r: &[f64]) -> Vec<f64> {
        let Some(lv) = self.levels.get(idx) else {
            return self.final_dense.as_ref().map_or_else(Vec::new, |d| d.solve(r));
        };
        let d = lv.scaling.as_slice();
        let scaled: Vec<f64> = r.iter().zip(d).map(|(a, b)| a * b).collect();
        let x = lv.perm.apply_vec(&scaled);
        let na = lv.accepted_size;
        let (r1, r2) = x.split_at(na);

        let mut x1 = r1.to_vec();
        lv.solve_b(&mut x1);
        let mut w = x1;
        if lv.schur_dim > 0 {
            let mut y2 = r2.to_vec();
            for (row, fr) in y2.iter_mut().zip(&lv.f_rows) {
                *row -= fr.iter().map(|&(j, v)| v * w[j]).sum::<f64>();
            }
            let z2 = self.solve_from(idx + 1, &y2);
            let mut t = r1.to_vec();
            for (fr, &z) in lv.f_rows.iter().zip(&z2) {
                for &(j, v) in fr {
                    t[j] -= v * z;
                }
            }
            lv.solve_b(&mut t);
            w = t;
            w.extend_from_slice(&z2);
        }
        let mut z = lv.perm.apply_inverse_vec(&w);
        for (zi, di) in z.iter_mut().zip(d) {
            *zi *= di;
        }
        z
    }
}
