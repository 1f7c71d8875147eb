//! Symmetric Lanczos recurrence.

use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::vecops::{axpy, dot, normalize, orthogonalize_against};

use super::tridiag::TridiagMatrix;

/// Three-term recurrence state. Repeating the same steps from the same start
/// reproduces the same vectors bit for bit.
pub(crate) struct LanczosIter<'a> {
    op: &'a dyn LinearOperator,
    prev: Vec<f64>,
    cur: Vec<f64>,
    beta: f64,
    scale: f64,
}

pub(crate) struct Step {
    pub alpha: f64,
    pub beta_next: f64,
    pub lucky: bool,
}

impl<'a> LanczosIter<'a> {
    pub fn new(op: &'a dyn LinearOperator, v1: &[f64]) -> Result<Self> {
        let n = op.dim();
        if v1.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v1.len() });
        }
        let mut cur = v1.to_vec();
        if normalize(&mut cur) == 0.0 {
            return Err(Error::InvalidInput("Lanczos start vector is zero".into()));
        }
        Ok(LanczosIter { op, prev: vec![0.0; n], cur, beta: 0.0, scale: 0.0 })
    }

    /// The current Lanczos vector `v_j`.
    pub fn current(&self) -> &[f64] {
        &self.cur
    }

    /// Advances from `v_j` to `v_{j+1}`; `reorth` is orthogonalized against.
    pub fn step(&mut self, reorth: Option<&[Vec<f64>]>) -> Result<Step> {
        let mut w = self.op.apply(&self.cur)?;
        axpy(-self.beta, &self.prev, &mut w);
        let alpha = dot(&w, &self.cur);
        axpy(-alpha, &self.cur, &mut w);
        let beta_next = match reorth {
            Some(basis) => orthogonalize_against(basis, &mut w),
            None => crate::vecops::norm2(&w),
        };
        self.scale = self.scale.max(alpha.abs() + self.beta + beta_next);
        let lucky = beta_next <= 1e-13 * self.scale;
        if !lucky {
            crate::vecops::scale(1.0 / beta_next, &mut w);
        }
        self.prev = std::mem::replace(&mut self.cur, w);
        self.beta = beta_next;
        Ok(Step { alpha, beta_next, lucky })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosRun {
    pub t: TridiagMatrix,
    /// Coupling to the next, unreturned vector.
    pub beta_last: f64,
    pub basis: Option<Vec<Vec<f64>>>,
    pub lucky_breakdown: bool,
}

/// Up to `steps` Lanczos steps from `v1`. With `reorth` every new vector is
/// orthogonalized against all previous ones and the basis is returned.
/// Stops early at an invariant subspace.
pub fn lanczos_run(op: &dyn LinearOperator, v1: &[f64], steps: usize, reorth: bool) -> Result<LanczosRun> {
    let mut it = LanczosIter::new(op, v1)?;
    let mut alpha = Vec::with_capacity(steps);
    let mut beta = Vec::with_capacity(steps);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut lucky = false;
    for _ in 0..steps {
        if reorth {
            basis.push(it.current().to_vec());
        }
        let s = it.step(reorth.then_some(basis.as_slice()))?;
        alpha.push(s.alpha);
        beta.push(s.beta_next);
        if s.lucky {
            lucky = true;
            break;
        }
    }
    let beta_last = beta.pop().unwrap_or(0.0);
    Ok(LanczosRun {
        t: TridiagMatrix { alpha, beta },
        beta_last,
        basis: reorth.then_some(basis),
        lucky_breakdown: lucky,
    })
}
