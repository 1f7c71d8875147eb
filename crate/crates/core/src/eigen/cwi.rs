//! Lanczos without reorthogonalization; spurious Ritz values are identified
//! by comparing the tridiagonal matrix with its copy that lacks the first
//! row and column.

use crate::error::Result;
use crate::sparse::SparseSymMatrix;
use crate::vecops::{axpy, dot};

use super::lanczos::LanczosIter;
use super::tridiag::{inverse_iteration, tridiag_eig, TridiagMatrix};
use super::{finish_pair, random_unit, set_multiplicity_hints, sort_by_target, EigenResult, SolveStats, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CwiClassification {
    /// Accepted eigenvalues with the number of copies in `T`.
    pub good: Vec<(f64, usize)>,
    pub spurious: Vec<f64>,
}

/// Groups the eigenvalues of `t` into clusters closer than `tol ‖T‖`.
/// Multiple clusters are good; a simple value is spurious when `T̂` has an
/// eigenvalue within the same tolerance.
pub fn cwi_identify(t: &TridiagMatrix, tol: f64) -> CwiClassification {
    let (vals, _) = tridiag_eig(t, false);
    let (hat, _) = tridiag_eig(&t.without_first(), false);
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let abs_tol = tol * scale;
    let mut good = Vec::new();
    let mut spurious = Vec::new();
    let mut i = 0;
    while i < vals.len() {
        let mut j = i + 1;
        while j < vals.len() && vals[j] - vals[j - 1] <= abs_tol {
            j += 1;
        }
        let count = j - i;
        let mean = vals[i..j].iter().sum::<f64>() / count as f64;
        if count == 1 && near_any(&hat, vals[i], abs_tol) {
            spurious.push(vals[i]);
        } else {
            good.push((mean, count));
        }
        i = j;
    }
    CwiClassification { good, spurious }
}

fn near_any(sorted: &[f64], x: f64, tol: f64) -> bool {
    let pos = sorted.partition_point(|&v| v < x);
    (pos < sorted.len() && sorted[pos] - x <= tol) || (pos > 0 && x - sorted[pos - 1] <= tol)
}

/// Smallest leading order `k` at which the Ritz value of `T_k` near `mu` has
/// converged, with its Ritz vector.
fn first_converged(t: &TridiagMatrix, beta_next: &[f64], mu: f64, bound: f64, match_tol: f64, seed: u64) -> (usize, Vec<f64>) {
    let kmax = t.n();
    let mut k = kmax.min(8);
    loop {
        let tk = t.leading(k);
        let (s, theta) = inverse_iteration(&tk, mu, seed);
        let est = beta_next[k - 1].abs() * s[k - 1].abs();
        if k == kmax || ((theta - mu).abs() <= match_tol && est <= bound) {
            return (k, s);
        }
        k = (k + k / 20 + 1).min(kmax);
    }
}

pub fn cwi_solve(a: &SparseSymMatrix, cfg: &SolverConfig) -> Result<EigenResult> {
    let n = a.n();
    cfg.validate(n)?;
    let anorm = a.norm1();
    let abs_tol = cfg.outer_tol * anorm;
    let steps = (cfg.cwi_factor * n).min(cfg.cwi_max_steps).max(1);
    let v1 = random_unit(n, cfg.seed);

    let mut alpha = Vec::with_capacity(steps);
    let mut beta_next = Vec::with_capacity(steps);
    let mut it = LanczosIter::new(a, &v1)?;
    for _ in 0..steps {
        let s = it.step(None)?;
        alpha.push(s.alpha);
        beta_next.push(s.beta_next);
        if s.lucky {
            break;
        }
    }
    let k_total = alpha.len();
    let t = TridiagMatrix { alpha, beta: beta_next[..k_total - 1].to_vec() };
    let class = cwi_identify(&t, cfg.cwi_tol);

    let mut cands: Vec<f64> = class.good.iter().map(|g| g.0).collect();
    cands.sort_by(|x, y| (x - cfg.target).abs().total_cmp(&(y - cfg.target).abs()).then(x.total_cmp(y)));
    cands.truncate(cfg.n_wanted + 3);

    let match_tol = (cfg.cwi_tol * t.norm_inf()).max(1e-10 * anorm);
    let coeffs: Vec<(usize, Vec<f64>)> = cands
        .iter()
        .map(|&mu| first_converged(&t, &beta_next, mu, 1e-2 * abs_tol, match_tol, cfg.seed))
        .collect();

    let kmax = coeffs.iter().map(|c| c.0).max().unwrap_or(0);
    let mut xs = vec![vec![0.0; n]; cands.len()];
    let mut it = LanczosIter::new(a, &v1)?;
    for j in 0..kmax {
        for (x, (k, s)) in xs.iter_mut().zip(&coeffs) {
            if j < *k {
                axpy(s[j], it.current(), x);
            }
        }
        if j + 1 < kmax {
            it.step(None)?;
        }
    }

    let mut pairs = Vec::new();
    for x in xs {
        let p = finish_pair(a, x, abs_tol)?;
        let dup = pairs
            .iter()
            .any(|q: &super::EigenPair| (q.lambda - p.lambda).abs() <= abs_tol && dot(&q.x, &p.x).abs() > 0.5);
        if !dup {
            pairs.push(p);
        }
    }
    sort_by_target(&mut pairs, cfg.target);
    pairs.truncate(cfg.n_wanted);
    set_multiplicity_hints(&mut pairs, abs_tol);
    Ok(EigenResult { pairs, stats: SolveStats { outer_iterations: k_total, inner_iterations: 0, trace: Vec::new() } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anderson::{build_anderson, AndersonConfig};
    use crate::dense::{dense_eigvals, to_dense};

    #[test]
    fn planted_spurious_value_is_flagged() {
        // T = diag(0, 5) ⊕ ... with the first row decoupled: 0 belongs only to
        // T, every other value is shared with T̂ and simple, hence spurious
        let t = TridiagMatrix::new(vec![0.0, 5.0, 7.0], vec![0.0, 1.0]).unwrap();
        let c = cwi_identify(&t, 1e-10);
        assert_eq!(c.good, vec![(0.0, 1)]);
        assert_eq!(c.spurious.len(), 2);
    }

    #[test]
    fn duplicated_values_are_good() {
        let t = TridiagMatrix::new(vec![1.0, 3.0, 1.0], vec![1e-20, 1e-20]).unwrap();
        let c = cwi_identify(&t, 1e-10);
        assert!(c.good.contains(&(1.0, 2)));
    }

    #[test]
    fn matches_dense_oracle_small_anderson() {
        let a = build_anderson(&AndersonConfig::periodic(6, 16.5, 4)).unwrap();
        let mut oracle = dense_eigvals(&to_dense(&a).unwrap());
        oracle.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
        let res = cwi_solve(&a, &SolverConfig::default()).unwrap();
        assert_eq!(res.pairs.len(), 5);
        let anorm = a.norm1();
        for (p, o) in res.pairs.iter().zip(&oracle) {
            assert!((p.lambda - o).abs() <= 1e-8 * anorm, "{} vs {}", p.lambda, o);
            assert!(p.residual <= 1e-8 * anorm, "residual {}", p.residual);
        }
    }
}
