//! Implicitly restarted Lanczos on `(A − σI)⁻¹` with exact shifts.

use crate::dense::{dense_eig, DenseMatrix};
use crate::error::{Error, Result};
use crate::krylov::{sqmr_solve, LinearOperator, ShiftedOperator};
use crate::sparse::SparseSymMatrix;
use crate::vecops::{axpy, combine, dot, norm2, orthogonalize_against, scale};

use super::{
    finish_pair, random_unit, set_multiplicity_hints, sort_by_target, EigenResult, PreconditionerFactory, SolveStats,
    SolverConfig, TraceLine,
};

/// Eigenvalue of `A` belonging to the eigenvalue `mu` of `(A − σI)⁻¹`.
pub fn shift_invert_map(sigma: f64, mu: f64) -> f64 {
    sigma + 1.0 / mu
}

/// Applies `(A − σI)⁻¹`.
pub trait ShiftInvertSolver {
    fn dim(&self) -> usize;
    fn sigma(&self) -> f64;
    /// Returns the solution and the inner iterations spent.
    fn solve(&mut self, v: &[f64]) -> Result<(Vec<f64>, usize)>;
}

/// Preconditioned SQMR on `A − σI`.
pub struct SqmrShiftInvert<'a> {
    a: &'a SparseSymMatrix,
    sigma: f64,
    precond: Box<dyn LinearOperator>,
    tol: f64,
    maxit: usize,
}

impl<'a> SqmrShiftInvert<'a> {
    pub fn new(a: &'a SparseSymMatrix, sigma: f64, factory: &dyn PreconditionerFactory, tol: f64, maxit: usize) -> Result<Self> {
        let precond = factory.build(sigma)?;
        Ok(SqmrShiftInvert { a, sigma, precond, tol, maxit })
    }
}

impl ShiftInvertSolver for SqmrShiftInvert<'_> {
    fn dim(&self) -> usize {
        self.a.n()
    }
    fn sigma(&self) -> f64 {
        self.sigma
    }
    fn solve(&mut self, v: &[f64]) -> Result<(Vec<f64>, usize)> {
        let op = ShiftedOperator { a: self.a, sigma: self.sigma };
        let (x, rep) = sqmr_solve(&op, self.precond.as_ref(), v, self.tol, self.maxit)?;
        // attainable accuracy of any solver in floating point
        let floor = 100.0 * f64::EPSILON * (self.a.norm1() + self.sigma.abs()) * norm2(&x) / norm2(v).max(f64::MIN_POSITIVE);
        if !rep.converged && rep.final_relative_residual > floor {
            return Err(Error::SolverFailure(format!(
                "inner solve stopped at relative residual {:.3e} after {} iterations{}",
                rep.final_relative_residual,
                rep.iterations,
                rep.breakdown.map(|b| format!(" ({b})")).unwrap_or_default()
            )));
        }
        Ok((x, rep.iterations))
    }
}

/// Lanczos factorization `OP V = V T + f e_kᵀ` with full reorthogonalization.
pub struct RestartedLanczos<'s> {
    solver: &'s mut dyn ShiftInvertSolver,
    v: Vec<Vec<f64>>,
    t: Vec<Vec<f64>>,
    f: Vec<f64>,
    seed: u64,
    pub applications: usize,
    pub inner_iterations: usize,
}

impl<'s> RestartedLanczos<'s> {
    pub fn new(solver: &'s mut dyn ShiftInvertSolver, v1: &[f64], seed: u64) -> Result<Self> {
        let n = solver.dim();
        if v1.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v1.len() });
        }
        let mut f = v1.to_vec();
        if crate::vecops::normalize(&mut f) == 0.0 {
            return Err(Error::InvalidInput("start vector is zero".into()));
        }
        Ok(RestartedLanczos { solver, v: Vec::new(), t: Vec::new(), f, seed, applications: 0, inner_iterations: 0 })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn residual_norm(&self) -> f64 {
        norm2(&self.f)
    }

    fn t_norm(&self) -> f64 {
        self.t.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Grows the factorization to `m` vectors.
    pub fn extend_to(&mut self, m: usize) -> Result<()> {
        let n = self.solver.dim();
        while self.v.len() < m.min(n) {
            let j = self.v.len();
            let mut beta = norm2(&self.f);
            let mut next = std::mem::take(&mut self.f);
            if j == 0 {
                beta = 0.0;
            } else if beta <= 1e-13 * self.t_norm().max(f64::MIN_POSITIVE) {
                // invariant subspace: continue with a fresh direction
                beta = 0.0;
                let mut k = 1;
                loop {
                    next = random_unit(n, self.seed.wrapping_add(0x9e37_79b9 * (j as u64 + k)));
                    if orthogonalize_against(&self.v, &mut next) > 1e-8 {
                        break;
                    }
                    k += 1;
                }
            }
            scale(1.0 / norm2(&next), &mut next);
            for row in self.t.iter_mut() {
                row.push(0.0);
            }
            self.t.push(vec![0.0; j + 1]);
            if j > 0 {
                self.t[j][j - 1] = beta;
                self.t[j - 1][j] = beta;
            }
            let (mut w, inner) = self.solver.solve(&next)?;
            self.applications += 1;
            self.inner_iterations += inner;
            if j > 0 {
                axpy(-beta, &self.v[j - 1], &mut w);
            }
            let alpha = dot(&w, &next);
            axpy(-alpha, &next, &mut w);
            self.t[j][j] = alpha;
            self.v.push(next);
            orthogonalize_against(&self.v, &mut w);
            self.f = w;
        }
        Ok(())
    }

    /// Ritz values and unit eigenvectors of `T`, ascending.
    pub fn ritz(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let e = dense_eig(&DenseMatrix::from_rows(&self.t));
        (e.values, e.vectors)
    }

    /// Applies the given shifts as QR steps and truncates to `p` vectors.
    pub fn restart(&mut self, shifts: &[f64], p: usize) {
        let m = self.v.len();
        if p >= m {
            return;
        }
        let mut t = DenseMatrix::from_rows(&self.t);
        let mut q_acc = DenseMatrix::identity(m);
        for &mu in shifts {
            let mut r = t.clone();
            for i in 0..m {
                r[(i, i)] -= mu;
            }
            let q = givens_q(&mut r);
            t = q.transpose().matmul(&t).matmul(&q);
            q_acc = q_acc.matmul(&q);
        }
        let n = self.f.len();
        let new_v: Vec<Vec<f64>> =
            (0..=p).map(|k| combine(&self.v, &(0..m).map(|i| q_acc[(i, k)]).collect::<Vec<_>>(), n)).collect();
        let mut f = new_v[p].clone();
        scale(t[(p, p - 1)], &mut f);
        axpy(q_acc[(m - 1, p - 1)], &self.f, &mut f);
        self.v = new_v[..p].to_vec();
        self.f = f;
        self.t = (0..p)
            .map(|i| {
                (0..p)
                    .map(|j| if i.abs_diff(j) <= 1 { 0.5 * (t[(i, j)] + t[(j, i)]) } else { 0.0 })
                    .collect()
            })
            .collect();
    }

    /// `‖OP V − V T − f e_kᵀ‖_F / ‖T‖`, recomputing every `OP v`.
    pub fn relation_defect(&mut self) -> Result<f64> {
        let k = self.v.len();
        let n = self.f.len();
        let mut total = 0.0;
        for j in 0..k {
            let (mut w, _) = self.solver.solve(&self.v[j])?;
            for i in 0..k {
                axpy(-self.t[i][j], &self.v[i], &mut w);
            }
            if j + 1 == k {
                for l in 0..n {
                    w[l] -= self.f[l];
                }
            }
            total += dot(&w, &w);
        }
        Ok(total.sqrt() / self.t_norm().max(f64::MIN_POSITIVE))
    }
}

/// Orthogonal `Q` with `R = QᵀM` upper triangular; `m` is overwritten by `R`.
fn givens_q(m: &mut DenseMatrix) -> DenseMatrix {
    let n = m.n();
    let mut q = DenseMatrix::identity(n);
    for c in 0..n.saturating_sub(1) {
        for r in (c + 1..n).rev() {
            let (a, b) = (m[(r - 1, c)], m[(r, c)]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (cs, sn) = (a / h, b / h);
            for k in 0..n {
                let (x, y) = (m[(r - 1, k)], m[(r, k)]);
                m[(r - 1, k)] = cs * x + sn * y;
                m[(r, k)] = -sn * x + cs * y;
                let (x, y) = (q[(k, r - 1)], q[(k, r)]);
                q[(k, r - 1)] = cs * x + sn * y;
                q[(k, r)] = -sn * x + cs * y;
            }
        }
    }
    q
}

/// Ritz indices ordered by distance of the mapped eigenvalue to `σ`.
fn ranked(values: &[f64], sigma: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| {
        let (li, lj) = (shift_invert_map(sigma, values[i]), shift_invert_map(sigma, values[j]));
        values[j].abs().total_cmp(&values[i].abs()).then(li.total_cmp(&lj))
    });
    idx
}

pub fn si_lanczos_ir(a: &SparseSymMatrix, solver: &mut dyn ShiftInvertSolver, cfg: &SolverConfig) -> Result<EigenResult> {
    let n = a.n();
    cfg.validate(n)?;
    if solver.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: solver.dim() });
    }
    let sigma = solver.sigma();
    let anorm = a.norm1();
    let shifted_norm = anorm + sigma.abs();
    let abs_tol = cfg.outer_tol * anorm;
    let m = cfg.max_basis.min(n);
    let p = cfg.restart_size.min(m.saturating_sub(1)).max(cfg.n_wanted.min(m));
    let v1 = random_unit(n, cfg.seed);
    let mut lz = RestartedLanczos::new(solver, &v1, cfg.seed)?;
    let mut trace = Vec::new();

    let mut restarts = 0;
    let pairs = loop {
        lz.extend_to(m)?;
        let (vals, vecs) = lz.ritz();
        let order = ranked(&vals, sigma);
        let fnorm = lz.residual_norm();
        let k = lz.len();
        let est = |i: usize| fnorm * vecs[i][k - 1].abs() * shifted_norm / vals[i].abs();
        let wanted = &order[..cfg.n_wanted.min(k)];
        let nconv = wanted.iter().filter(|&&i| est(i) <= 0.1 * abs_tol).count();
        let worst = wanted.iter().map(|&i| est(i)).fold(0.0, f64::max);
        trace.push(TraceLine {
            step: restarts,
            theta: shift_invert_map(sigma, vals[order[0]]),
            residual: worst,
            inner_iterations: lz.inner_iterations,
            converged: nconv,
        });
        let done = nconv == wanted.len() || k == n || restarts >= cfg.max_outer;
        if done {
            let mut pairs = Vec::with_capacity(wanted.len());
            for &i in wanted {
                pairs.push(finish_pair(a, combine(lz.basis(), &vecs[i], n), abs_tol)?);
            }
            if pairs.iter().all(|q| q.converged) || k == n || restarts >= cfg.max_outer {
                break pairs;
            }
        }
        let keep = (p + nconv.min((m - p) / 2)).min(k - 1);
        let shifts: Vec<f64> = order[keep..].iter().map(|&i| vals[i]).collect();
        lz.restart(&shifts, keep);
        restarts += 1;
    };
    let mut pairs = pairs;
    sort_by_target(&mut pairs, sigma);
    set_multiplicity_hints(&mut pairs, abs_tol);
    let stats = SolveStats { outer_iterations: lz.applications, inner_iterations: lz.inner_iterations, trace };
    Ok(EigenResult { pairs, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{to_dense, DenseLdlt};

    /// Exact solves through a dense factorization.
    struct DenseSolve {
        f: DenseLdlt,
        sigma: f64,
    }

    impl DenseSolve {
        fn new(a: &SparseSymMatrix, sigma: f64) -> Self {
            DenseSolve { f: DenseLdlt::factor(&to_dense(&a.shifted(sigma)).unwrap()).unwrap(), sigma }
        }
    }

    impl ShiftInvertSolver for DenseSolve {
        fn dim(&self) -> usize {
            self.f.n()
        }
        fn sigma(&self) -> f64 {
            self.sigma
        }
        fn solve(&mut self, v: &[f64]) -> Result<(Vec<f64>, usize)> {
            Ok((self.f.solve(v), 1))
        }
    }

    #[test]
    fn mapping() {
        assert_eq!(shift_invert_map(0.0, 2.0), 0.5);
        assert_eq!(shift_invert_map(1.0, -4.0), 0.75);
    }

    #[test]
    fn diagonal_nearest_two() {
        let a = SparseSymMatrix::diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut s = DenseSolve::new(&a, 3.1);
        let cfg = SolverConfig { n_wanted: 2, restart_size: 3, max_basis: 5, ..Default::default() };
        let res = si_lanczos_ir(&a, &mut s, &cfg).unwrap();
        let l: Vec<f64> = res.pairs.iter().map(|p| p.lambda).collect();
        assert!((l[0] - 3.0).abs() < 1e-10 && (l[1] - 4.0).abs() < 1e-10, "{l:?}");
        assert!(res.pairs.iter().all(|p| p.converged));
    }

    #[test]
    fn relation_survives_restarts() {
        let n = 60;
        let trip: Vec<_> = (0..n)
            .map(|i| (i, i, (i as f64 * 0.7).sin() * 4.0))
            .chain((1..n).map(|i| (i, i - 1, 1.0)))
            .collect();
        let a = SparseSymMatrix::from_triplets(n, &trip).unwrap();
        let mut s = DenseSolve::new(&a, 0.05);
        let mut lz = RestartedLanczos::new(&mut s, &random_unit(n, 5), 5).unwrap();
        for _ in 0..4 {
            lz.extend_to(20).unwrap();
            assert!(lz.relation_defect().unwrap() < 1e-8);
            let (vals, _) = lz.ritz();
            let order = ranked(&vals, 0.05);
            let shifts: Vec<f64> = order[8..].iter().map(|&i| vals[i]).collect();
            lz.restart(&shifts, 8);
            assert!(lz.relation_defect().unwrap() < 1e-8);
            assert!(crate::vecops::orthonormality_defect(lz.basis()) < 1e-10);
        }
    }

    #[test]
    fn givens_factorization() {
        let mut m = DenseMatrix::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 4.0]]);
        let orig = m.clone();
        let q = givens_q(&mut m);
        let back = q.matmul(&m);
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[(i, j)] - orig[(i, j)]).abs() < 1e-14);
                if i > j {
                    assert!(m[(i, j)].abs() < 1e-14);
                }
            }
        }
    }
}
