//! Interior eigenpairs of sparse symmetric matrices near a target.
//!
//! Three solvers share [`SolverConfig`] and return [`EigenPair`]s sorted by
//! distance to the target, ties resolved toward the smaller eigenvalue:
//! Lanczos without reorthogonalization with spurious-value identification
//! ([`cwi_solve`]), implicitly restarted shift-and-invert Lanczos
//! ([`si_lanczos_ir`]) and Jacobi-Davidson ([`jd_solve`]).

mod cwi;
mod jd;
mod lanczos;
mod shift_invert;
mod tridiag;

pub use cwi::{cwi_identify, cwi_solve, CwiClassification};
pub use jd::{jd_inner_tolerance, jd_solve};
pub use lanczos::{lanczos_run, LanczosRun};
pub use shift_invert::{shift_invert_map, si_lanczos_ir, RestartedLanczos, ShiftInvertSolver, SqmrShiftInvert};
pub use tridiag::{inverse_iteration, tridiag_eig, TridiagMatrix};

use std::fmt;

use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::mlildl::{factorize, FactorParams};
use crate::rng::Stream;
use crate::sparse::SparseSymMatrix;
use crate::vecops::{axpy, normalize, norm2};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    /// Unit 2-norm eigenvector.
    pub x: Vec<f64>,
    /// `‖A x − λ x‖₂`.
    pub residual: f64,
    pub multiplicity_hint: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub n_wanted: usize,
    pub target: f64,
    pub max_basis: usize,
    pub restart_size: usize,
    /// Relative to `‖A‖₁`.
    pub outer_tol: f64,
    /// Inner solves of the shift-and-invert operator.
    pub inner_tol: f64,
    pub inner_maxit: usize,
    pub max_outer: usize,
    pub seed: u64,
    /// Lanczos steps of the spurious-value solver, as a multiple of `n`.
    pub cwi_factor: usize,
    pub cwi_max_steps: usize,
    /// Relative to the norm of the tridiagonal matrix.
    pub cwi_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_wanted: 5,
            target: 0.0,
            max_basis: 20,
            restart_size: 8,
            outer_tol: 1e-8,
            inner_tol: 1e-12,
            inner_maxit: 1000,
            max_outer: 2000,
            seed: 1,
            cwi_factor: 4,
            cwi_max_steps: 200_000,
            cwi_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.n_wanted == 0 {
            return Err(Error::InvalidConfig("at least one eigenpair must be requested".into()));
        }
        if self.n_wanted > n {
            return Err(Error::InvalidConfig(format!("{} eigenpairs requested from a matrix of order {n}", self.n_wanted)));
        }
        if self.restart_size >= self.max_basis {
            return Err(Error::InvalidConfig(format!(
                "restart size {} must be below the maximum basis size {}",
                self.restart_size, self.max_basis
            )));
        }
        if self.n_wanted > self.restart_size {
            return Err(Error::InvalidConfig(format!(
                "restart size {} must hold the {} wanted pairs",
                self.restart_size, self.n_wanted
            )));
        }
        if !(self.outer_tol > 0.0 && self.outer_tol <= 1.0) {
            return Err(Error::InvalidConfig(format!("outer tolerance must lie in (0, 1], got {}", self.outer_tol)));
        }
        for (name, v) in [("inner", self.inner_tol), ("cwi", self.cwi_tol)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} tolerance must lie in (0, 1), got {v}")));
            }
        }
        if !self.target.is_finite() {
            return Err(Error::InvalidConfig("target must be finite".into()));
        }
        if self.cwi_factor == 0 || self.max_outer == 0 || self.inner_maxit == 0 {
            return Err(Error::InvalidConfig("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// One outer step of an iterative eigensolver.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceLine {
    pub step: usize,
    pub theta: f64,
    pub residual: f64,
    pub inner_iterations: usize,
    pub converged: usize,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step {:5}  theta {:+.12e}  res {:.3e}  inner {:4}  locked {}",
            self.step, self.theta, self.residual, self.inner_iterations, self.converged
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub trace: Vec<TraceLine>,
}

impl SolveStats {
    pub fn inner_average(&self) -> f64 {
        if self.outer_iterations == 0 {
            0.0
        } else {
            self.inner_iterations as f64 / self.outer_iterations as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub pairs: Vec<EigenPair>,
    pub stats: SolveStats,
}

/// Builds the preconditioner of a shifted matrix.
pub trait PreconditionerFactory {
    fn build(&self, shift: f64) -> Result<Box<dyn LinearOperator>>;
}

/// Multilevel incomplete factorization of `A − σI`.
pub struct MultilevelFactory<'a> {
    pub a: &'a SparseSymMatrix,
    pub params: FactorParams,
}

impl PreconditionerFactory for MultilevelFactory<'_> {
    fn build(&self, shift: f64) -> Result<Box<dyn LinearOperator>> {
        let shifted = self.a.shifted(shift);
        Ok(Box::new(factorize(&shifted, &self.params)?))
    }
}

/// Orders pairs by `|λ − target|`, ties toward the smaller `λ`.
pub fn sort_by_target(pairs: &mut [EigenPair], target: f64) {
    pairs.sort_by(|p, q| {
        (p.lambda - target).abs().total_cmp(&(q.lambda - target).abs()).then(p.lambda.total_cmp(&q.lambda))
    });
}

/// Counts, for each pair, how many returned eigenvalues lie within `tol` of it.
pub(crate) fn set_multiplicity_hints(pairs: &mut [EigenPair], tol: f64) {
    let lambdas: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
    for p in pairs.iter_mut() {
        p.multiplicity_hint = lambdas.iter().filter(|&&l| (l - p.lambda).abs() <= tol).count();
    }
}

pub(crate) fn random_unit(n: usize, seed: u64) -> Vec<f64> {
    let mut s = Stream::new(seed);
    let mut v: Vec<f64> = (0..n).map(|_| s.uniform(-1.0, 1.0)).collect();
    normalize(&mut v);
    v
}

/// Normalizes `x`, takes its Rayleigh quotient and residual with respect to `a`.
pub(crate) fn finish_pair(a: &SparseSymMatrix, mut x: Vec<f64>, abs_tol: f64) -> Result<EigenPair> {
    normalize(&mut x);
    let ax = a.sym_matvec(&x)?;
    let lambda = crate::vecops::dot(&x, &ax);
    let mut r = ax;
    axpy(-lambda, &x, &mut r);
    let residual = norm2(&r);
    Ok(EigenPair { lambda, x, residual, multiplicity_hint: 1, converged: residual <= abs_tol })
}
