//! Symmetric tridiagonal matrices: eigenvalues by implicit QL and shifted
//! solves for inverse iteration.

use crate::dense::ql_implicit;
use crate::error::{Error, Result};

/// `alpha` on the diagonal, `beta[i]` coupling rows `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagMatrix {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl TridiagMatrix {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if !alpha.is_empty() && beta.len() + 1 != alpha.len() || alpha.is_empty() && !beta.is_empty() {
            return Err(Error::DimensionMismatch { expected: alpha.len().saturating_sub(1), got: beta.len() });
        }
        Ok(TridiagMatrix { alpha, beta })
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// Leading `k × k` section.
    pub fn leading(&self, k: usize) -> TridiagMatrix {
        TridiagMatrix { alpha: self.alpha[..k].to_vec(), beta: self.beta[..k.saturating_sub(1)].to_vec() }
    }

    /// The matrix with its first row and column removed.
    pub fn without_first(&self) -> TridiagMatrix {
        if self.n() <= 1 {
            return TridiagMatrix { alpha: vec![], beta: vec![] };
        }
        TridiagMatrix { alpha: self.alpha[1..].to_vec(), beta: self.beta[1..].to_vec() }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| {
                let lo = if i > 0 { self.beta[i - 1].abs() } else { 0.0 };
                let hi = if i + 1 < n { self.beta[i].abs() } else { 0.0 };
                lo + self.alpha[i].abs() + hi
            })
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut s = self.alpha[i] * x[i];
                if i > 0 {
                    s += self.beta[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.beta[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Solves `(T − θI) x = b` by LU with partial pivoting. Exactly singular
    /// pivots are perturbed to a tiny value, as inverse iteration wants.
    pub fn shifted_solve(&self, theta: f64, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        if n == 0 {
            return vec![];
        }
        let tiny = f64::EPSILON * self.norm_inf().max(f64::MIN_POSITIVE);
        // rows: (diag, super, super2) after elimination
        let mut d: Vec<f64> = self.alpha.iter().map(|a| a - theta).collect();
        let mut du: Vec<f64> = self.beta.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut dl: Vec<f64> = self.beta.clone();
        let mut x = b.to_vec();
        let mut swapped = vec![false; n];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let f = dl[i] / d[i];
                dl[i] = f;
                d[i + 1] -= f * du[i];
            } else {
                swapped[i] = true;
                let f = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = f;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - f * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -f;
                }
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        for i in 0..n.saturating_sub(1) {
            if swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= dl[i] * x[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= du[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= du2[i] * x[i + 2];
            }
            x[i] = s / d[i];
        }
        x
    }
}

/// All eigenvalues ascending, and optionally the eigenvectors (`vectors[k]`
/// belongs to `values[k]`).
pub fn tridiag_eig(t: &TridiagMatrix, want_vectors: bool) -> (Vec<f64>, Option<Vec<Vec<f64>>>) {
    let n = t.n();
    if n == 0 {
        return (vec![], want_vectors.then(Vec::new));
    }
    let mut d = t.alpha.clone();
    let mut e = vec![0.0; n];
    e[1..].copy_from_slice(&t.beta);
    if !want_vectors {
        ql_implicit(&mut d, &mut e, None);
        d.sort_by(f64::total_cmp);
        return (d, None);
    }
    let mut z: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            r
        })
        .collect();
    ql_implicit(&mut d, &mut e, Some(&mut z));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = idx.iter().map(|&i| d[i]).collect();
    let vectors = idx.iter().map(|&i| std::mem::take(&mut z[i])).collect();
    (values, Some(vectors))
}

/// Inverse iteration for the eigenvector of `t` nearest `theta`; returns the
/// unit vector and its Rayleigh quotient.
pub fn inverse_iteration(t: &TridiagMatrix, theta: f64, seed: u64) -> (Vec<f64>, f64) {
    let n = t.n();
    let mut rng = crate::rng::Stream::new(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
    crate::vecops::normalize(&mut x);
    let mut rq = theta;
    for _ in 0..4 {
        x = t.shifted_solve(theta, &x);
        crate::vecops::normalize(&mut x);
        let tx = t.matvec(&x);
        rq = crate::vecops::dot(&x, &tx);
    }
    (x, rq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{dense_eigvals, DenseMatrix};
    use crate::rng::Stream;

    fn to_dense(t: &TridiagMatrix) -> DenseMatrix {
        let n = t.n();
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = t.alpha[i];
            if i + 1 < n {
                m[(i, i + 1)] = t.beta[i];
                m[(i + 1, i)] = t.beta[i];
            }
        }
        m
    }

    #[test]
    fn tiny_cases() {
        assert_eq!(tridiag_eig(&TridiagMatrix::new(vec![2.0], vec![]).unwrap(), false).0, vec![2.0]);
        let (v, _) = tridiag_eig(&TridiagMatrix::new(vec![0.0, 0.0], vec![1.0]).unwrap(), false);
        assert!((v[0] + 1.0).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
        assert!(TridiagMatrix::new(vec![1.0, 2.0], vec![]).is_err());
    }

    #[test]
    fn random_against_dense_oracle() {
        let mut s = Stream::new(11);
        let n = 50;
        let t = TridiagMatrix::new((0..n).map(|_| s.uniform(-3.0, 3.0)).collect(), (1..n).map(|_| s.uniform(0.0, 1.0)).collect())
            .unwrap();
        let (vals, vecs) = tridiag_eig(&t, true);
        let oracle = dense_eigvals(&to_dense(&t));
        let scale = t.norm_inf();
        for (a, b) in vals.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
        for (lam, x) in vals.iter().zip(vecs.unwrap()) {
            let tx = t.matvec(&x);
            let r: f64 = tx.iter().zip(&x).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
            assert!(r <= 1e-12 * scale);
        }
    }

    #[test]
    fn shifted_solve_and_inverse_iteration() {
        let mut s = Stream::new(2);
        let n = 30;
        let t = TridiagMatrix::new((0..n).map(|_| s.uniform(-1.0, 1.0)).collect(), (1..n).map(|_| s.uniform(-1.0, 1.0)).collect())
            .unwrap();
        let b: Vec<f64> = (0..n).map(|_| s.uniform(-1.0, 1.0)).collect();
        let x = t.shifted_solve(0.3, &b);
        let tx = t.matvec(&x);
        for i in 0..n {
            assert!((tx[i] - 0.3 * x[i] - b[i]).abs() < 1e-10);
        }
        let (vals, _) = tridiag_eig(&t, false);
        let (v, rq) = inverse_iteration(&t, vals[7] + 1e-6, 1);
        assert!((rq - vals[7]).abs() < 1e-12);
        let tv = t.matvec(&v);
        let r: f64 = tv.iter().zip(&v).map(|(a, b)| (a - rq * b).powi(2)).sum::<f64>().sqrt();
        assert!(r < 1e-10);
    }
}
