//! Jacobi-Davidson for eigenvalues nearest a target, with a fixed
//! preconditioner for `A − target·I`, thick restarts and deflation.

use crate::dense::{dense_eig, DenseMatrix};
use crate::error::Result;
use crate::krylov::{make_jd_operator, make_jd_preconditioner, sqmr_solve};
use crate::sparse::SparseSymMatrix;
use crate::vecops::{axpy, combine, dot, norm2, orthogonalize_against, scale};

use super::{
    finish_pair, random_unit, set_multiplicity_hints, sort_by_target, EigenPair, EigenResult, PreconditionerFactory,
    SolveStats, SolverConfig, TraceLine,
};

/// Relative tolerance of the correction equation at the `step`-th iteration
/// since the last converged pair, given the current residual norm.
pub fn jd_inner_tolerance(step: usize, residual: f64, anorm: f64) -> f64 {
    if residual < 1e-5 * anorm {
        1e-12
    } else {
        0.5f64.powi(step.min(1000) as i32).max(1e-4)
    }
}

struct Search {
    v: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
}

impl Search {
    fn len(&self) -> usize {
        self.v.len()
    }

    fn push(&mut self, a: &SparseSymMatrix, t: Vec<f64>) -> Result<()> {
        let at = a.sym_matvec(&t)?;
        let k = self.v.len();
        let col: Vec<f64> = self.v.iter().map(|vi| dot(vi, &at)).collect();
        for (row, c) in self.h.iter_mut().zip(&col) {
            row.push(*c);
        }
        let mut last = col;
        last.push(dot(&t, &at));
        self.h.push(last);
        debug_assert_eq!(self.h.len(), k + 1);
        self.v.push(t);
        self.w.push(at);
        Ok(())
    }

    /// Ritz pairs of `H`, ordered by distance to `target`.
    fn ritz(&self, target: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
        let e = dense_eig(&DenseMatrix::from_rows(&self.h));
        let mut idx: Vec<usize> = (0..e.values.len()).collect();
        idx.sort_by(|&i, &j| {
            (e.values[i] - target)
                .abs()
                .total_cmp(&(e.values[j] - target).abs())
                .then(e.values[i].total_cmp(&e.values[j]))
        });
        (idx.iter().map(|&i| e.values[i]).collect(), idx.iter().map(|&i| e.vectors[i].clone()).collect())
    }

    /// Replaces the basis by the Ritz vectors `keep`.
    fn compress(&mut self, vals: &[f64], vecs: &[Vec<f64>], keep: &[usize]) {
        let n = self.v.first().map_or(0, |v| v.len());
        let v: Vec<Vec<f64>> = keep.iter().map(|&i| combine(&self.v, &vecs[i], n)).collect();
        let w: Vec<Vec<f64>> = keep.iter().map(|&i| combine(&self.w, &vecs[i], n)).collect();
        let k = keep.len();
        self.h = (0..k).map(|i| (0..k).map(|j| if i == j { vals[keep[i]] } else { 0.0 }).collect()).collect();
        self.v = v;
        self.w = w;
    }
}

fn fresh_direction(n: usize, seed: u64, against: &[&[Vec<f64>]]) -> Vec<f64> {
    let mut k = 0u64;
    loop {
        let mut t = random_unit(n, seed.wrapping_add(0x51_7cc1_b727_220a_95 ^ k));
        let mut nrm = 1.0;
        for basis in against {
            nrm = orthogonalize_against(basis, &mut t);
        }
        if nrm > 1e-8 {
            scale(1.0 / nrm, &mut t);
            return t;
        }
        k += 1;
    }
}

pub fn jd_solve(a: &SparseSymMatrix, factory: &dyn PreconditionerFactory, cfg: &SolverConfig) -> Result<EigenResult> {
    let n = a.n();
    cfg.validate(n)?;
    let anorm = a.norm1();
    let abs_tol = cfg.outer_tol * anorm;
    let m = cfg.max_basis.min(n);
    let p = cfg.restart_size.min(m.saturating_sub(1)).max(1);
    let k_inv = factory.build(cfg.target)?;

    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut pairs: Vec<EigenPair> = Vec::new();
    let mut search = Search { v: Vec::new(), w: Vec::new(), h: Vec::new() };
    let mut stats = SolveStats::default();
    let mut pending = Some(random_unit(n, cfg.seed));
    let mut local_step = 0usize;

    while pairs.len() < cfg.n_wanted && stats.outer_iterations < cfg.max_outer {
        if let Some(mut t) = pending.take() {
            let before = norm2(&t);
            orthogonalize_against(&locked, &mut t);
            let nrm = orthogonalize_against(&search.v, &mut t);
            let t = if nrm > 1e-10 * before && nrm.is_finite() {
                let mut t = t;
                scale(1.0 / nrm, &mut t);
                t
            } else {
                fresh_direction(n, cfg.seed ^ stats.outer_iterations as u64, &[&locked, &search.v])
            };
            search.push(a, t)?;
        }

        let (vals, vecs) = search.ritz(cfg.target);
        let theta = vals[0];
        let u = combine(&search.v, &vecs[0], n);
        let mut r = combine(&search.w, &vecs[0], n);
        axpy(-theta, &u, &mut r);
        let res = norm2(&r);

        if res <= abs_tol || locked.len() + search.len() == n {
            let pair = finish_pair(a, u.clone(), abs_tol)?;
            if pair.converged || locked.len() + search.len() == n {
                stats.trace.push(TraceLine {
                    step: stats.outer_iterations,
                    theta: pair.lambda,
                    residual: pair.residual,
                    inner_iterations: 0,
                    converged: pairs.len() + 1,
                });
                locked.push(pair.x.clone());
                pairs.push(pair);
                local_step = 0;
                let rest: Vec<usize> = (1..vals.len()).collect();
                search.compress(&vals, &vecs, &rest);
                if search.len() == 0 {
                    pending = Some(fresh_direction(n, cfg.seed.wrapping_add(pairs.len() as u64), &[&locked]));
                }
                continue;
            }
        }

        if search.len() >= m {
            let keep: Vec<usize> = (0..p.min(vals.len())).collect();
            search.compress(&vals, &vecs, &keep);
        }

        local_step += 1;
        stats.outer_iterations += 1;
        let mut qu = locked.clone();
        qu.push(u);
        let tol = jd_inner_tolerance(local_step, res, anorm);
        // rounding leaves components along Q that the projected operator cannot reach
        let mut rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        orthogonalize_against(&qu, &mut rhs);
        let op = make_jd_operator(a, theta, &qu)?;
        let (t, inner) = match make_jd_preconditioner(k_inv.as_ref(), &qu) {
            Ok(pre) => {
                let (t, rep) = sqmr_solve(&op, &pre, &rhs, tol, cfg.inner_maxit)?;
                (t, rep.iterations)
            }
            Err(_) => (r.clone(), 0),
        };
        stats.inner_iterations += inner;
        let usable = t.iter().all(|x| x.is_finite()) && norm2(&t) > 0.0;
        stats.trace.push(TraceLine {
            step: stats.outer_iterations,
            theta,
            residual: res,
            inner_iterations: inner,
            converged: pairs.len(),
        });
        pending = Some(if usable { t } else { r });
    }

    if pairs.len() < cfg.n_wanted && search.len() > 0 {
        let (_, vecs) = search.ritz(cfg.target);
        for s in vecs.iter().take(cfg.n_wanted - pairs.len()) {
            pairs.push(finish_pair(a, combine(&search.v, s, n), abs_tol)?);
        }
    }
    sort_by_target(&mut pairs, cfg.target);
    set_multiplicity_hints(&mut pairs, abs_tol);
    Ok(EigenResult { pairs, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::{IdentityOperator, LinearOperator};

    struct Identity(usize);

    impl PreconditionerFactory for Identity {
        fn build(&self, _shift: f64) -> Result<Box<dyn LinearOperator>> {
            Ok(Box::new(IdentityOperator(self.0)))
        }
    }

    #[test]
    fn tolerance_schedule() {
        assert_eq!(jd_inner_tolerance(1, 1.0, 1.0), 0.5);
        assert_eq!(jd_inner_tolerance(3, 1.0, 1.0), 0.125);
        assert_eq!(jd_inner_tolerance(40, 1.0, 1.0), 1e-4);
        assert_eq!(jd_inner_tolerance(2, 1e-6, 1.0), 1e-12);
    }

    #[test]
    fn diagonal_nearest_two() {
        let a = SparseSymMatrix::diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let cfg = SolverConfig { n_wanted: 2, target: 4.5, max_basis: 6, restart_size: 3, ..Default::default() };
        let res = jd_solve(&a, &Identity(8), &cfg).unwrap();
        let l: Vec<f64> = res.pairs.iter().map(|p| p.lambda).collect();
        assert!((l[0] - 4.0).abs() < 1e-9 && (l[1] - 5.0).abs() < 1e-9, "{l:?}");
        assert!(res.pairs.iter().all(|p| p.converged));
    }

    #[test]
    fn diagonal_ten_nearest_five() {
        let d: Vec<f64> = (1..=10).map(f64::from).collect();
        let a = SparseSymMatrix::diagonal(&d);
        let cfg = SolverConfig { target: 5.4, max_basis: 10, restart_size: 6, ..Default::default() };
        let res = jd_solve(&a, &Identity(10), &cfg).unwrap();
        let l: Vec<f64> = res.pairs.iter().map(|p| (p.lambda * 1e6).round() / 1e6).collect();
        assert_eq!(l, vec![5.0, 6.0, 4.0, 7.0, 3.0]);
    }
}
