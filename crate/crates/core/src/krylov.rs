//! Simplified QMR for symmetric systems with a symmetric, possibly
//! indefinite preconditioner, and the projected operators of the
//! Jacobi-Davidson correction equation.
//!
//! The solver runs the symmetric Lanczos process for `A P` (with `P ≈ A⁻¹`)
//! in the bilinear form `⟨u, v⟩ = uᵀ P v`, keeping the Lanczos vectors at
//! unit 2-norm. With `z_j = P v_j` and `δ_j = v_jᵀ z_j`:
//!
//! ```text
//!   α_j = z_jᵀ A z_j / δ_j
//!   β_j = ρ_j δ_j / δ_{j-1}
//!   ρ_{j+1} v_{j+1} = A z_j − α_j v_j − β_j v_{j-1}
//! ```
//!
//! The iterate is `x_j = P V_j y_j` with `y_j` minimizing the quasi-residual
//! `‖ρ₁e₁ − H_j y‖`, updated through Givens rotations and three-term
//! direction vectors. One multiplication by `A` and one application of `P`
//! per step.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::mlildl::MultilevelFactor;
use crate::sparse::SparseSymMatrix;
use crate::vecops::{axpy, dot, norm2, orthonormality_defect};

/// Matrix-free linear map on `R^n`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl LinearOperator for SparseSymMatrix {
    fn dim(&self) -> usize {
        self.n()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.sym_matvec(x)
    }
}

impl LinearOperator for MultilevelFactor {
    fn dim(&self) -> usize {
        self.n()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        MultilevelFactor::apply(self, x)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).apply(x)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityOperator(pub usize);

impl LinearOperator for IdentityOperator {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.0, x)?;
        Ok(x.to_vec())
    }
}

/// `A − σI` without forming it.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedOperator<'a> {
    pub a: &'a SparseSymMatrix,
    pub sigma: f64,
}

impl LinearOperator for ShiftedOperator<'_> {
    fn dim(&self) -> usize {
        self.a.n()
    }
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.a.sym_matvec(x)?;
        axpy(-self.sigma, x, &mut y);
        Ok(y)
    }
}

fn check_dim(n: usize, x: &[f64]) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqmrReport {
    pub iterations: usize,
    /// `‖b − A x‖₂ / ‖b‖₂` of the returned iterate.
    pub final_relative_residual: f64,
    pub converged: bool,
    pub breakdown: Option<String>,
}

const TRUE_RESIDUAL_INTERVAL: usize = 50;
/// Restarted cycles run near the attainable accuracy and are checked more often.
const RESTART_CHECK_INTERVAL: usize = 10;
const BREAKDOWN_TOL: f64 = 1e-14;

fn true_residual(op: &dyn LinearOperator, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let mut r = op.apply(x)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    Ok(r)
}

/// Solves `op x = b` from `x₀ = 0` until `‖op x − b‖₂ ≤ tol ‖b‖₂`.
pub fn sqmr_solve(
    op: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    b: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SqmrReport)> {
    let n = op.dim();
    check_dim(n, b)?;
    if precond.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: precond.dim() });
    }
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SqmrReport { iterations: 0, final_relative_residual: 0.0, converged: true, breakdown: None }));
    }

    let mut r = b.to_vec();
    let mut rel = 1.0;
    let mut iterations = 0;
    let mut breakdown = None;
    // restarts from the current iterate when the recurrences break down or drift
    while iterations < maxit {
        let restart_rel = rel;
        // the recursive estimate lags the true residual, so later cycles aim lower
        let cycle_tol = if iterations == 0 { bnorm * tol } else { 0.1 * bnorm * tol };
        let check_every = if iterations == 0 { TRUE_RESIDUAL_INTERVAL } else { RESTART_CHECK_INTERVAL };
        let cycle = sqmr_cycle(op, precond, &r, cycle_tol, check_every, maxit - iterations, &mut x, &mut iterations)?;
        r = true_residual(op, b, &x)?;
        rel = norm2(&r) / bnorm;
        breakdown = cycle;
        if rel <= tol {
            return Ok((x, SqmrReport { iterations, final_relative_residual: rel, converged: true, breakdown: None }));
        }
        if rel > 0.5 * restart_rel {
            breakdown.get_or_insert_with(|| format!("stagnated at relative residual {rel:.3e}"));
            break;
        }
    }
    Ok((x, SqmrReport { iterations, final_relative_residual: rel, converged: false, breakdown }))
}

/// One Lanczos/QMR cycle for the correction `op e = r`, accumulated into `x`.
/// Returns a breakdown description if the cycle stopped on one.
fn sqmr_cycle(
    op: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    r0: &[f64],
    abs_tol: f64,
    check_every: usize,
    budget: usize,
    x: &mut [f64],
    iterations: &mut usize,
) -> Result<Option<String>> {
    let n = x.len();
    let rho1 = norm2(r0);
    let mut v: Vec<f64> = r0.iter().map(|t| t / rho1).collect();
    let mut v_prev = vec![0.0; n];
    let mut delta_prev = 1.0;
    let mut rho = rho1;
    // Givens rotations of the previous two columns
    let (mut c1, mut s1, mut c2, mut s2) = (1.0, 0.0, 1.0, 0.0);
    let mut g = rho1;
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let base = x.to_vec();
    let mut first = true;
    let mut last_true = rho1;

    for step in 0..budget {
        let z = precond.apply(&v)?;
        let delta = dot(&v, &z);
        if delta.abs() < BREAKDOWN_TOL * norm2(&v) * norm2(&z) || !delta.is_finite() {
            return Ok(Some(format!("vanishing inner product vᵀPv = {delta:.3e} at step {}", step + 1)));
        }
        let az = op.apply(&z)?;
        *iterations += 1;
        let alpha = dot(&az, &z) / delta;
        let beta = if first { 0.0 } else { rho * delta / delta_prev };
        let mut w = az;
        axpy(-alpha, &v, &mut w);
        if !first {
            axpy(-beta, &v_prev, &mut w);
        }
        let rho_next = norm2(&w);

        // column (β, α, ρ_next) through the two previous rotations
        let r_jm2 = s2 * beta;
        let t = c2 * beta;
        let r_jm1 = c1 * t + s1 * alpha;
        let t_jj = -s1 * t + c1 * alpha;
        let r_jj = t_jj.hypot(rho_next);
        if r_jj == 0.0 {
            return Ok(Some(format!("singular quasi-triangular factor at step {}", step + 1)));
        }
        let (c, s) = (t_jj / r_jj, rho_next / r_jj);

        let mut d: Vec<f64> = z;
        axpy(-r_jm1, &d1, &mut d);
        axpy(-r_jm2, &d2, &mut d);
        crate::vecops::scale(1.0 / r_jj, &mut d);
        axpy(c * g, &d, x);
        g *= -s;

        d2 = std::mem::replace(&mut d1, d);
        c2 = c1;
        s2 = s1;
        c1 = c;
        s1 = s;
        first = false;
        delta_prev = delta;
        rho = rho_next;

        let est = g.abs();
        if est <= abs_tol || rho_next == 0.0 {
            return Ok(None);
        }
        if (step + 1) % check_every == 0 {
            let tr = norm2(&true_residual(op, r0, &sub(x, &base))?);
            if tr <= abs_tol {
                return Ok(None);
            }
            if tr > 1e3 * est * ((step + 2) as f64).sqrt() {
                return Ok(Some(format!("recursive residual drifted from the true one at step {}", step + 1)));
            }
            if tr > 0.5 * last_true {
                return Ok(Some(format!("true residual stagnated at step {}", step + 1)));
            }
            last_true = tr;
        }
        v_prev = std::mem::replace(&mut v, w);
        crate::vecops::scale(1.0 / rho_next, &mut v);
    }
    Ok(None)
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `z ↦ (I − QQᵀ)(A − θI)(I − QQᵀ) z`.
pub struct JdOperator<'a> {
    a: &'a SparseSymMatrix,
    theta: f64,
    q: &'a [Vec<f64>],
}

fn project_out(q: &[Vec<f64>], x: &mut [f64]) {
    for qi in q {
        let c = dot(qi, x);
        axpy(-c, qi, x);
    }
}

pub fn make_jd_operator<'a>(a: &'a SparseSymMatrix, theta: f64, q: &'a [Vec<f64>]) -> Result<JdOperator<'a>> {
    for qi in q {
        check_dim(a.n(), qi)?;
    }
    let defect = orthonormality_defect(q);
    if defect > 1e-8 {
        return Err(Error::NotOrthonormal(defect));
    }
    Ok(JdOperator { a, theta, q })
}

impl LinearOperator for JdOperator<'_> {
    fn dim(&self) -> usize {
        self.a.n()
    }
    fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.a.n(), z)?;
        let mut y = z.to_vec();
        project_out(self.q, &mut y);
        let mut w = self.a.sym_matvec(&y)?;
        axpy(-self.theta, &y, &mut w);
        project_out(self.q, &mut w);
        Ok(w)
    }
}

/// `r ↦ K⁻¹r − Y (QᵀY)⁻¹ Qᵀ K⁻¹ r` with `Y = K⁻¹Q`. For `Q = [u]` this is
/// `(I − w uᵀ / (uᵀw)) K⁻¹` with `w = K⁻¹u`; outputs are orthogonal to `Q`.
pub struct JdPreconditioner<'a> {
    k_inv: &'a dyn LinearOperator,
    q: &'a [Vec<f64>],
    y: Vec<Vec<f64>>,
    g_inv: DenseMatrix,
}

pub fn make_jd_preconditioner<'a>(k_inv: &'a dyn LinearOperator, q: &'a [Vec<f64>]) -> Result<JdPreconditioner<'a>> {
    let n = k_inv.dim();
    let y: Vec<Vec<f64>> = q.iter().map(|qi| k_inv.apply(qi)).collect::<Result<_>>()?;
    let m = q.len();
    let mut g = DenseMatrix::zeros(m);
    for i in 0..m {
        check_dim(n, &q[i])?;
        for j in 0..m {
            g[(i, j)] = dot(&q[i], &y[j]);
        }
    }
    if m == 1 && g[(0, 0)].abs() < 1e-14 * norm2(&y[0]) * norm2(&q[0]) {
        return Err(Error::UnusablePreconditioner(format!("wᵀu = {:.3e} is numerically zero", g[(0, 0)])));
    }
    let g_inv = g.inverse().map_err(|e| Error::UnusablePreconditioner(e.to_string()))?;
    if (0..m).any(|i| (0..m).any(|j| !g_inv[(i, j)].is_finite())) {
        return Err(Error::UnusablePreconditioner("projected Gram matrix is singular".into()));
    }
    Ok(JdPreconditioner { k_inv, q, y, g_inv })
}

impl LinearOperator for JdPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.k_inv.dim()
    }
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut t = self.k_inv.apply(r)?;
        let m = self.q.len();
        let qt: Vec<f64> = self.q.iter().map(|qi| dot(qi, &t)).collect();
        for i in 0..m {
            let coef: f64 = (0..m).map(|j| self.g_inv[(i, j)] * qt[j]).sum();
            axpy(-coef, &self.y[i], &mut t);
        }
        Ok(t)
    }
}
