//! Small dense-vector kernels shared by the Krylov and eigen solvers.

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// y += alpha * x
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// Normalizes `x` in place and returns its former 2-norm.
pub fn normalize(x: &mut [f64]) -> f64 {
    let nrm = norm2(x);
    if nrm > 0.0 {
        scale(1.0 / nrm, x);
    }
    nrm
}

/// Two passes of classical Gram-Schmidt against the columns in `basis`.
/// Returns the norm of `x` after orthogonalization (not normalized).
pub fn orthogonalize_against(basis: &[Vec<f64>], x: &mut [f64]) -> f64 {
    for _ in 0..2 {
        let coeffs: Vec<f64> = basis.iter().map(|q| dot(q, x)).collect();
        for (q, c) in basis.iter().zip(&coeffs) {
            axpy(-c, q, x);
        }
    }
    norm2(x)
}

/// Linear combination `sum_j coeffs[j] * cols[j]`.
pub fn combine(cols: &[Vec<f64>], coeffs: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (c, col) in coeffs.iter().zip(cols) {
        if *c != 0.0 {
            axpy(*c, col, &mut out);
        }
    }
    out
}

/// Maximum deviation of the Gram matrix of `cols` from the identity.
pub fn orthonormality_defect(cols: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..cols.len() {
        for j in 0..=i {
            let g = dot(&cols[i], &cols[j]);
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_schmidt_removes_components() {
        let basis = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let mut x = vec![3.0, -2.0, 5.0];
        let nrm = orthogonalize_against(&basis, &mut x);
        assert_eq!(x, vec![0.0, 0.0, 5.0]);
        assert_eq!(nrm, 5.0);
    }

    #[test]
    fn normalize_returns_old_norm() {
        let mut x = vec![3.0, 4.0];
        assert_eq!(normalize(&mut x), 5.0);
        assert!((norm2(&x) - 1.0).abs() < 1e-15);
    }
}
