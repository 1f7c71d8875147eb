#![allow(dead_code)]

use anderson_core::dense::{dense_eig, dense_eigvals, to_dense, DenseMatrix};
use anderson_core::rng::Stream;
use anderson_core::sparse::SparseSymMatrix;

/// Random symmetric sparse matrix whose pattern contains a perfect matching.
pub fn random_sym(n: usize, density: f64, seed: u64) -> SparseSymMatrix {
    let mut s = Stream::new(seed);
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..=i {
            if s.unit() < density {
                t.push((i, j, s.uniform(-2.0, 2.0)));
            }
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for k in (1..n).rev() {
        perm.swap(k, s.index(k + 1));
    }
    for (i, &j) in perm.iter().enumerate() {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if !t.iter().any(|e: &(usize, usize, f64)| e.0 == r && e.1 == c) {
            t.push((r, c, s.uniform(0.5, 1.5)));
        }
    }
    SparseSymMatrix::from_triplets(n, &t).unwrap()
}

/// Random symmetric indefinite matrix with a nonzero diagonal.
pub fn random_indefinite(n: usize, seed: u64) -> SparseSymMatrix {
    let mut s = Stream::new(seed);
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, s.uniform(-2.0, 2.0)));
        for j in 0..i {
            if s.unit() < 4.0 / n as f64 {
                t.push((i, j, s.uniform(-1.0, 1.0)));
            }
        }
    }
    SparseSymMatrix::from_triplets(n, &t).unwrap()
}

/// Exhaustive minimum over all perfect matchings of a dense cost table.
pub fn brute_force_lap(c: &[Vec<Option<f64>>]) -> Option<f64> {
    fn rec(c: &[Vec<Option<f64>>], col: usize, used: &mut [bool], acc: f64, best: &mut Option<f64>) {
        if col == c.len() {
            if best.is_none_or(|b| acc < b) {
                *best = Some(acc);
            }
            return;
        }
        for i in 0..c.len() {
            if let (false, Some(cij)) = (used[i], c[i][col]) {
                used[i] = true;
                rec(c, col + 1, used, acc + cij, best);
                used[i] = false;
            }
        }
    }
    let mut best = None;
    rec(c, 0, &mut vec![false; c.len()], 0.0, &mut best);
    best
}

/// The `k` dense-oracle eigenvalues nearest `target`, ties toward the smaller value.
pub fn nearest_eigenvalues(a: &SparseSymMatrix, target: f64, k: usize) -> Vec<f64> {
    let mut v = dense_eigvals(&to_dense(a).unwrap());
    v.sort_by(|x, y| (x - target).abs().total_cmp(&(y - target).abs()).then(x.total_cmp(y)));
    v.truncate(k);
    v
}

pub fn dense_spectrum(a: &DenseMatrix) -> Vec<f64> {
    dense_eigvals(a)
}

pub fn dense_pairs(a: &SparseSymMatrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let e = dense_eig(&to_dense(a).unwrap());
    (e.values, e.vectors)
}

pub fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// `‖A x − λ x‖₂` recomputed from scratch.
pub fn residual(a: &SparseSymMatrix, lambda: f64, x: &[f64]) -> f64 {
    let ax = a.sym_matvec(x).unwrap();
    ax.iter().zip(x).map(|(p, q)| (p - lambda * q).powi(2)).sum::<f64>().sqrt()
}

pub fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
