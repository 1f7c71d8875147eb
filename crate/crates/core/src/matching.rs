//! Maximum weighted matching, symmetric scaling from the matching duals, and
//! the symmetric 1×1 / 2×2 block permutation built from the matching cycles.
//!
//! Conventions: the assignment `sigma` maps column `j` to its matched row
//! `sigma.forward()[j]`. The row permutation that puts matched entries on the
//! diagonal is `P_M = sigma.inverse()` (its `order()` lists the matched rows).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::sparse::{DiagScaling, Permutation, SparseSymMatrix};

/// Column-oriented sparse cost matrix; absent entries are `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    /// `cols[j]` holds `(row, cost)` sorted by row.
    cols: Vec<Vec<(usize, f64)>>,
}

impl CostMatrix {
    pub fn from_columns(n: usize, cols: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if cols.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: cols.len() });
        }
        for col in &cols {
            for &(i, c) in col {
                if i >= n || !c.is_finite() {
                    return Err(Error::InvalidInput(format!("cost entry ({i}, {c}) invalid")));
                }
            }
        }
        Ok(CostMatrix { n, cols })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.cols[j]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.cols[j].iter().find(|e| e.0 == i).map(|e| e.1)
    }
}

/// `c_ij = ln a_i − ln |a_ij|` with `a_i` the largest modulus in row `i`.
pub fn log_weight_transform(a: &SparseSymMatrix) -> Result<CostMatrix> {
    let rows = a.full_rows();
    let row_max = a.row_max_abs();
    if let Some(i) = row_max.iter().position(|&m| m == 0.0) {
        return Err(Error::ZeroRow(i));
    }
    let log_max: Vec<f64> = row_max.iter().map(|m| m.ln()).collect();
    // column j of a symmetric matrix has the same pattern as row j
    let cols = rows
        .into_iter()
        .map(|r| r.into_iter().map(|(i, v)| (i, log_max[i] - v.abs().ln())).collect())
        .collect();
    Ok(CostMatrix { n: a.n(), cols })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    /// Column `j` is matched to row `sigma.forward()[j]`.
    pub sigma: Permutation,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub objective: f64,
}

#[derive(Clone, Copy)]
struct HeapItem(f64, usize);

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    // reversed so that BinaryHeap pops the smallest distance, ties by smallest index
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Minimum-cost perfect matching by shortest augmenting paths with dual
/// potentials (Dijkstra on reduced costs `c_ij − u_i − v_j ≥ 0`).
pub fn solve_lap(c: &CostMatrix) -> Result<AssignmentResult> {
    let n = c.n;
    const NONE: usize = usize::MAX;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut row_match = vec![NONE; n];
    let mut col_match = vec![NONE; n];

    for j in 0..n {
        let col = &c.cols[j];
        if col.is_empty() {
            return Err(Error::StructurallySingular { columns: vec![j], rows: vec![] });
        }
        v[j] = col.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
        // cheap initial matching along zero reduced costs
        if let Some(&(i, _)) = col.iter().find(|&&(i, cij)| cij - v[j] == 0.0 && row_match[i] == NONE) {
            row_match[i] = j;
            col_match[j] = i;
        }
    }

    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NONE; n];
    let mut done = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut finalized: Vec<usize> = Vec::new();
    let mut heap = BinaryHeap::new();

    for j0 in 0..n {
        if col_match[j0] != NONE {
            continue;
        }
        for &i in &touched {
            dist[i] = f64::INFINITY;
            pred[i] = NONE;
            done[i] = false;
        }
        touched.clear();
        finalized.clear();
        heap.clear();

        for &(i, cij) in &c.cols[j0] {
            let d = cij - u[i] - v[j0];
            if d < dist[i] {
                if dist[i] == f64::INFINITY {
                    touched.push(i);
                }
                dist[i] = d;
                pred[i] = j0;
                heap.push(HeapItem(d, i));
            }
        }

        let mut sink = NONE;
        let mut big_d = 0.0;
        while let Some(HeapItem(d, i)) = heap.pop() {
            if done[i] || d > dist[i] {
                continue;
            }
            done[i] = true;
            finalized.push(i);
            big_d = d;
            if row_match[i] == NONE {
                sink = i;
                break;
            }
            let j = row_match[i];
            for &(k, ckj) in &c.cols[j] {
                if done[k] {
                    continue;
                }
                let nd = d + ckj - u[k] - v[j];
                if nd < dist[k] {
                    if dist[k] == f64::INFINITY {
                        touched.push(k);
                    }
                    dist[k] = nd;
                    pred[k] = j;
                    heap.push(HeapItem(nd, k));
                }
            }
        }

        if sink == NONE {
            let mut columns: Vec<usize> = std::iter::once(j0).chain(finalized.iter().map(|&i| row_match[i])).collect();
            let mut rows = finalized.clone();
            columns.sort_unstable();
            rows.sort_unstable();
            return Err(Error::StructurallySingular { columns, rows });
        }

        // dual update keeps reduced costs nonnegative and zero on the new path
        v[j0] += big_d;
        for &i in &finalized {
            if i == sink {
                continue;
            }
            let delta = big_d - dist[i];
            u[i] -= delta;
            v[row_match[i]] += delta;
        }

        let mut i = sink;
        loop {
            let j = pred[i];
            let prev = col_match[j];
            row_match[i] = j;
            col_match[j] = i;
            if j == j0 {
                break;
            }
            i = prev;
        }
    }

    let objective = (0..n).map(|j| c.get(col_match[j], j).unwrap_or(f64::INFINITY)).sum();
    let sigma = Permutation::from_forward(col_match)?;
    Ok(AssignmentResult { sigma, u, v, objective })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualScaling {
    pub scaling: DiagScaling,
    /// The exponentials were out of range and the log-scaling was shifted to fit.
    pub fallback: bool,
}

/// `d = sqrt(r ⊙ s)` with `r_i = exp(u_i)/a_i` and `s_j = exp(v_j)`, evaluated in log space.
pub fn scaling_from_duals(res: &AssignmentResult, a: &SparseSymMatrix) -> Result<DualScaling> {
    let n = a.n();
    if res.u.len() != n || res.v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: res.u.len() });
    }
    let row_max = a.row_max_abs();
    let logs: Vec<f64> = (0..n).map(|i| 0.5 * (res.u[i] - row_max[i].ln() + res.v[i])).collect();
    if logs.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidInput("non-finite dual or zero row in scaling".into()));
    }
    let d: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
    if d.iter().all(|&x| x.is_finite() && x > 0.0) {
        return Ok(DualScaling { scaling: DiagScaling::new(d)?, fallback: false });
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let d: Vec<f64> = logs.iter().map(|l| (l - top).exp().max(f64::MIN_POSITIVE)).collect();
    Ok(DualScaling { scaling: DiagScaling::new(d)?, fallback: true })
}

/// Cycles of `i ↦ p.forward()[i]`, each rotated to start at its smallest
/// member, listed by smallest member.
pub fn cycles_of_permutation(p: &Permutation) -> Vec<Vec<usize>> {
    let n = p.len();
    let f = p.forward();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            cycle.push(i);
            i = f[i];
        }
        out.push(cycle);
    }
    out
}

/// Reverses a canonical cycle if needed so that its second element is the
/// smaller of the first element's two neighbours.
pub fn normalize_orientation(cycle: &mut [usize]) {
    if cycle.len() > 2 && cycle[cycle.len() - 1] < cycle[1] {
        cycle[1..].reverse();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    OneByOne(usize),
    /// Members in ascending order.
    TwoByTwo(usize, usize),
}

impl Block {
    pub fn pair(a: usize, b: usize) -> Self {
        Block::TwoByTwo(a.min(b), a.max(b))
    }

    pub fn smallest(&self) -> usize {
        match *self {
            Block::OneByOne(i) => i,
            Block::TwoByTwo(a, _) => a,
        }
    }

    pub fn members(&self) -> Vec<usize> {
        match *self {
            Block::OneByOne(i) => vec![i],
            Block::TwoByTwo(a, b) => vec![a, b],
        }
    }
}

/// Splits matching cycles into 1×1 and 2×2 blocks, using the magnitudes of `a`
/// (normally the scaled matrix). Output is sorted by smallest member.
///
/// Odd cycles keep as singleton the member with the largest `|a_ii|` (ties to
/// the smallest index) and pair the rest consecutively along the cycle. Even
/// cycles take whichever of the two pairings has the larger minimum `|a_ij|`;
/// on a tie the pairing `(c0 c1)(c2 c3)…` wins.
pub fn split_cycles(cycles: &[Vec<usize>], a: &SparseSymMatrix) -> Vec<Block> {
    let mut blocks = Vec::with_capacity(a.n());
    for cycle in cycles {
        let len = cycle.len();
        match len {
            0 => {}
            1 => blocks.push(Block::OneByOne(cycle[0])),
            2 => blocks.push(Block::pair(cycle[0], cycle[1])),
            _ if len % 2 == 1 => {
                let mut best = 0;
                for (pos, &i) in cycle.iter().enumerate() {
                    let (cur, cand) = (a.diag(cycle[best]).abs(), a.diag(i).abs());
                    if cand > cur || (cand == cur && i < cycle[best]) {
                        best = pos;
                    }
                }
                blocks.push(Block::OneByOne(cycle[best]));
                for t in 0..len / 2 {
                    let x = cycle[(best + 1 + 2 * t) % len];
                    let y = cycle[(best + 2 + 2 * t) % len];
                    blocks.push(Block::pair(x, y));
                }
            }
            _ => {
                let min_link = |offset: usize| {
                    (0..len / 2)
                        .map(|t| a.get(cycle[(offset + 2 * t) % len], cycle[(offset + 2 * t + 1) % len]).abs())
                        .fold(f64::INFINITY, f64::min)
                };
                let offset = if min_link(1) > min_link(0) { 1 } else { 0 };
                for t in 0..len / 2 {
                    blocks.push(Block::pair(cycle[(offset + 2 * t) % len], cycle[(offset + 2 * t + 1) % len]));
                }
            }
        }
    }
    blocks.sort_by_key(|b| b.smallest());
    blocks
}

fn check_partition(blocks: &[Block], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for b in blocks {
        for i in b.members() {
            if i >= n || seen[i] {
                return Err(Error::InvalidInput(format!("blocks do not partition 0..{n} (index {i})")));
            }
            seen[i] = true;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidInput(format!("blocks do not cover index {i}")));
    }
    Ok(())
}

/// Places the blocks consecutively in ascending smallest-member order.
pub fn build_symmetric_permutation(blocks: &[Block], n: usize) -> Result<Permutation> {
    check_partition(blocks, n)?;
    let mut sorted = blocks.to_vec();
    sorted.sort_by_key(|b| b.smallest());
    Permutation::from_order(sorted.iter().flat_map(|b| b.members()).collect())
}

/// Quotient graph with one vertex per block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedGraph {
    /// Sorted, symmetric, loop-free adjacency of the supervertices.
    pub adjacency: Vec<Vec<usize>>,
    /// Original indices of each supervertex, ascending.
    pub members: Vec<Vec<usize>>,
}

/// Supervertices follow the order of `blocks`.
pub fn compress_graph(a: &SparseSymMatrix, blocks: &[Block]) -> Result<CompressedGraph> {
    let n = a.n();
    check_partition(blocks, n)?;
    let mut owner = vec![0; n];
    let members: Vec<Vec<usize>> = blocks.iter().map(|b| b.members()).collect();
    for (s, m) in members.iter().enumerate() {
        for &i in m {
            owner[i] = s;
        }
    }
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); blocks.len()];
    for (i, j, v) in a.lower_entries() {
        if v == 0.0 {
            continue;
        }
        let (si, sj) = (owner[i], owner[j]);
        if si != sj {
            adjacency[si].push(sj);
            adjacency[sj].push(si);
        }
    }
    for adj in adjacency.iter_mut() {
        adj.sort_unstable();
        adj.dedup();
    }
    Ok(CompressedGraph { adjacency, members })
}

/// Expands a supervertex permutation to the original index set; members of a
/// supervertex stay consecutive in ascending order.
pub fn expand_ordering(compressed: &Permutation, members: &[Vec<usize>]) -> Result<Permutation> {
    if compressed.len() != members.len() {
        return Err(Error::DimensionMismatch { expected: members.len(), got: compressed.len() });
    }
    let order: Vec<usize> = compressed
        .order()
        .iter()
        .flat_map(|&s| {
            let mut m = members[s].clone();
            m.sort_unstable();
            m
        })
        .collect();
    Permutation::from_order(order)
}

#[derive(Debug, Clone)]
pub struct SymMatchingResult {
    pub assignment: AssignmentResult,
    /// Cycles of `P_M`, canonical rotation and orientation.
    pub cycles: Vec<Vec<usize>>,
    pub blocks: Vec<Block>,
    pub p_s: Permutation,
    pub scaling: DiagScaling,
    pub scaling_fallback: bool,
}

/// Log transform, assignment, dual scaling, cycle split and block permutation.
pub fn symmetric_matching(a: &SparseSymMatrix) -> Result<SymMatchingResult> {
    let cost = log_weight_transform(a)?;
    let assignment = solve_lap(&cost)?;
    let dual = scaling_from_duals(&assignment, a)?;
    let scaled = a.scale_sym(&dual.scaling)?;
    let mut cycles = cycles_of_permutation(&assignment.sigma.inverse());
    for c in cycles.iter_mut() {
        normalize_orientation(c);
    }
    let blocks = split_cycles(&cycles, &scaled);
    let p_s = build_symmetric_permutation(&blocks, a.n())?;
    Ok(SymMatchingResult { assignment, cycles, blocks, p_s, scaling: dual.scaling, scaling_fallback: dual.fallback })
}
