//! Dense symmetric kernels: the verification oracle (Householder
//! tridiagonalization followed by implicit-shift QL) and a Bunch-Kaufman
//! LDLᵀ used for the coarsest level of the multilevel factorization.

use crate::error::{Error, Result};
use crate::sparse::SparseSymMatrix;

/// Default dense-oracle dimension cap.
pub const DENSE_CAP: usize = 20_000;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "row {i} has wrong length");
            m.data[i * n..(i + 1) * n].copy_from_slice(r);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Inverse of a unit lower-triangular matrix by forward substitution.
    pub fn unit_lower_inverse(&self) -> DenseMatrix {
        let n = self.n;
        let mut inv = DenseMatrix::identity(n);
        for col in 0..n {
            for i in col + 1..n {
                let mut s = 0.0;
                for k in col..i {
                    s += self[(i, k)] * inv[(k, col)];
                }
                inv[(i, col)] = -s;
            }
        }
        inv
    }

    /// General inverse via Gauss-Jordan with partial pivoting.
    pub fn inverse(&self) -> Result<DenseMatrix> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = DenseMatrix::identity(n);
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs()))
                .unwrap_or(c);
            if a[(p, c)] == 0.0 {
                return Err(Error::SingularPivot(format!("dense inverse: zero column {c}")));
            }
            if p != c {
                for j in 0..n {
                    a.data.swap(p * n + j, c * n + j);
                    inv.data.swap(p * n + j, c * n + j);
                }
            }
            let piv = a[(c, c)];
            for j in 0..n {
                a[(c, j)] /= piv;
                inv[(c, j)] /= piv;
            }
            for i in 0..n {
                if i == c {
                    continue;
                }
                let f = a[(i, c)];
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a.data[i * n + j] -= f * a.data[c * n + j];
                    inv.data[i * n + j] -= f * inv.data[c * n + j];
                }
            }
        }
        Ok(inv)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

pub fn to_dense(a: &SparseSymMatrix) -> Result<DenseMatrix> {
    to_dense_capped(a, DENSE_CAP)
}

pub fn to_dense_capped(a: &SparseSymMatrix, cap: usize) -> Result<DenseMatrix> {
    let n = a.n();
    if n > cap {
        return Err(Error::DenseCapExceeded { n, cap });
    }
    let mut m = DenseMatrix::zeros(n);
    for (i, j, v) in a.lower_entries() {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    Ok(m)
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct DenseEig {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

pub fn dense_eig(a: &DenseMatrix) -> DenseEig {
    let n = a.n();
    if n == 0 {
        return DenseEig { values: vec![], vectors: vec![] };
    }
    let (mut v, mut d, mut e) = householder_tridiagonalize(a);
    accumulate_householder(&mut v, &mut d);
    // transpose so that eigenvector rotations touch contiguous memory
    let mut z: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|k| v[(k, i)]).collect()).collect();
    ql_implicit(&mut d, &mut e, Some(&mut z));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    DenseEig {
        values: idx.iter().map(|&i| d[i]).collect(),
        vectors: idx.iter().map(|&i| std::mem::take(&mut z[i])).collect(),
    }
}

/// Eigenvalues only, ascending.
pub fn dense_eigvals(a: &DenseMatrix) -> Vec<f64> {
    let n = a.n();
    if n == 0 {
        return vec![];
    }
    let (v, _, mut e) = householder_tridiagonalize(a);
    let mut d: Vec<f64> = (0..n).map(|i| v[(i, i)]).collect();
    ql_implicit(&mut d, &mut e, None);
    d.sort_by(f64::total_cmp);
    d
}

/// Householder reduction to tridiagonal form (EISPACK tred2 ordering). Returns
/// the work matrix (diagonal of T on its diagonal, reflectors below), the
/// reflector norms in `d`, and the subdiagonal in `e[1..]`.
fn householder_tridiagonalize(a: &DenseMatrix) -> (DenseMatrix, Vec<f64>, Vec<f64>) {
    let n = a.n();
    let mut v = a.clone();
    let mut d: Vec<f64> = (0..n).map(|j| v[(n - 1, j)]).collect();
    let mut e = vec![0.0; n];

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    (v, d, e)
}

fn accumulate_householder(v: &mut DenseMatrix, d: &mut [f64]) {
    let n = v.n();
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
}

/// Implicit-shift QL on the tridiagonal `(d, e[1..])`. When `z` is given its
/// rows are rotated along (row `i` holds component vector `i`).
pub(crate) fn ql_implicit(d: &mut [f64], e: &mut [f64], mut z: Option<&mut Vec<Vec<f64>>>) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    break;
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        let (lo, hi) = z.split_at_mut(i + 1);
                        let (zi, zi1) = (&mut lo[i], &mut hi[0]);
                        for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                            let hb = *b;
                            *b = s * *a + c * hb;
                            *a = c * *a - s * hb;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

/// Bunch-Kaufman factorization `P A Pᵀ = L D Lᵀ` of a dense symmetric matrix.
#[derive(Debug, Clone)]
pub struct DenseLdlt {
    n: usize,
    /// `order[k]` = original index at factored position `k`.
    order: Vec<usize>,
    /// Unit lower factor, row-major; only the strict lower part is meaningful.
    l: DenseMatrix,
    /// Pivot blocks: (start, size, inverse entries [a, b, c] of the symmetric block).
    blocks: Vec<(usize, usize, [f64; 3])>,
}

impl DenseLdlt {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        let n = a.n();
        let alpha = (1.0 + 17f64.sqrt()) / 8.0;
        let mut w = a.clone();
        let mut order: Vec<usize> = (0..n).collect();
        let mut blocks = Vec::new();
        let swap = |w: &mut DenseMatrix, order: &mut Vec<usize>, p: usize, q: usize| {
            if p == q {
                return;
            }
            order.swap(p, q);
            for j in 0..n {
                w.data.swap(p * n + j, q * n + j);
            }
            for i in 0..n {
                w.data.swap(i * n + p, i * n + q);
            }
        };
        let mut k = 0;
        while k < n {
            let absakk = w[(k, k)].abs();
            let (mut imax, mut colmax) = (k, 0.0f64);
            for i in k + 1..n {
                if w[(i, k)].abs() > colmax {
                    colmax = w[(i, k)].abs();
                    imax = i;
                }
            }
            if absakk.max(colmax) == 0.0 {
                return Err(Error::SingularPivot(format!("dense LDLT: zero column at step {k}")));
            }
            let (kp, kstep) = if absakk >= alpha * colmax {
                (k, 1)
            } else {
                let mut rowmax = 0.0f64;
                for j in k..n {
                    if j != imax {
                        rowmax = rowmax.max(w[(imax, j)].abs());
                    }
                }
                if absakk * rowmax >= alpha * colmax * colmax {
                    (k, 1)
                } else if w[(imax, imax)].abs() >= alpha * rowmax {
                    (imax, 1)
                } else {
                    (imax, 2)
                }
            };
            let kk = k + kstep - 1;
            swap(&mut w, &mut order, kk, kp);
            if kstep == 1 {
                let d = w[(k, k)];
                if d == 0.0 {
                    return Err(Error::SingularPivot(format!("dense LDLT: zero 1x1 pivot at {k}")));
                }
                let l: Vec<f64> = (k + 1..n).map(|i| w[(i, k)] / d).collect();
                for (ii, i) in (k + 1..n).enumerate() {
                    for (jj, j) in (k + 1..n).enumerate() {
                        w.data[i * n + j] -= l[ii] * l[jj] * d;
                    }
                }
                for (ii, i) in (k + 1..n).enumerate() {
                    w[(i, k)] = l[ii];
                    w[(k, i)] = 0.0;
                }
                blocks.push((k, 1, [1.0 / d, 0.0, 0.0]));
            } else {
                let (a11, a21, a22) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
                let det = a11 * a22 - a21 * a21;
                if det.abs() < 1e-300 {
                    return Err(Error::SingularPivot(format!("dense LDLT: singular 2x2 pivot at {k}")));
                }
                let inv = [a22 / det, -a21 / det, a11 / det];
                let rows: Vec<(f64, f64)> = (k + 2..n)
                    .map(|i| {
                        let (s1, s2) = (w[(i, k)], w[(i, k + 1)]);
                        (s1 * inv[0] + s2 * inv[1], s1 * inv[1] + s2 * inv[2])
                    })
                    .collect();
                for (ii, i) in (k + 2..n).enumerate() {
                    let (li1, li2) = rows[ii];
                    for j in k + 2..n {
                        let (sj1, sj2) = (w[(j, k)], w[(j, k + 1)]);
                        w.data[i * n + j] -= li1 * sj1 + li2 * sj2;
                    }
                }
                for (ii, i) in (k + 2..n).enumerate() {
                    w[(i, k)] = rows[ii].0;
                    w[(i, k + 1)] = rows[ii].1;
                    w[(k, i)] = 0.0;
                    w[(k + 1, i)] = 0.0;
                }
                w[(k + 1, k)] = 0.0;
                w[(k, k + 1)] = 0.0;
                blocks.push((k, 2, inv));
            }
            k += kstep;
        }
        Ok(DenseLdlt { n, order, l: w, blocks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries (lower triangle of L plus D).
    pub fn nnz(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.order.iter().map(|&o| b[o]).collect();
        // forward: L y = b (block columns of a 2x2 pivot have no coupling inside the block)
        for &(k, size, _) in &self.blocks {
            for c in k..k + size {
                let yc = y[c];
                if yc == 0.0 {
                    continue;
                }
                for i in k + size..n {
                    y[i] -= self.l[(i, c)] * yc;
                }
            }
        }
        for &(k, size, inv) in &self.blocks {
            if size == 1 {
                y[k] *= inv[0];
            } else {
                let (a, b2) = (y[k], y[k + 1]);
                y[k] = inv[0] * a + inv[1] * b2;
                y[k + 1] = inv[1] * a + inv[2] * b2;
            }
        }
        for &(k, size, _) in self.blocks.iter().rev() {
            for c in k..k + size {
                let mut s = 0.0;
                for i in k + size..n {
                    s += self.l[(i, c)] * y[i];
                }
                y[c] -= s;
            }
        }
        let mut x = vec![0.0; n];
        for (k, &o) in self.order.iter().enumerate() {
            x[o] = y[k];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn diagonal_eigenvalues_sorted() {
        let a = DenseMatrix::from_rows(&[vec![3.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 2.0]]);
        let eig = dense_eig(&a);
        assert!(close(&eig.values, &[1.0, 2.0, 3.0], 1e-14));
        assert!(close(&dense_eigvals(&a), &[1.0, 2.0, 3.0], 1e-14));
    }

    #[test]
    fn swap_matrix_eigenvalues() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let eig = dense_eig(&a);
        assert!(close(&eig.values, &[-1.0, 1.0], 1e-14));
    }

    #[test]
    fn eigenpairs_have_small_residuals() {
        let mut s = crate::rng::Stream::new(7);
        let n = 40;
        let mut a = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = s.uniform(-1.0, 1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let eig = dense_eig(&a);
        let norm = a.norm_inf();
        for (lam, x) in eig.values.iter().zip(&eig.vectors) {
            let ax = a.matvec(x);
            let res: f64 = ax.iter().zip(x).map(|(p, q)| (p - lam * q).powi(2)).sum::<f64>().sqrt();
            assert!(res <= 1e-10 * norm, "residual {res}");
        }
        assert!(crate::vecops::orthonormality_defect(&eig.vectors) < 1e-12);
        assert!(close(&eig.values, &dense_eigvals(&a), 1e-12));
    }

    #[test]
    fn bunch_kaufman_solves_indefinite() {
        let mut s = crate::rng::Stream::new(3);
        for n in [1usize, 2, 5, 30] {
            let mut a = DenseMatrix::zeros(n);
            for i in 0..n {
                for j in 0..i {
                    let v = s.uniform(-1.0, 1.0);
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
                // zero diagonal forces 2x2 pivots
                a[(i, i)] = if i % 3 == 0 { 0.0 } else { s.uniform(-0.1, 0.1) };
            }
            if n == 1 {
                a[(0, 0)] = 2.0;
            }
            let f = DenseLdlt::factor(&a).unwrap();
            let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let b = a.matvec(&x);
            let got = f.solve(&b);
            assert!(close(&got, &x, 1e-9), "n={n}");
        }
    }

    #[test]
    fn singular_dense_ldlt_errors() {
        let a = DenseMatrix::zeros(2);
        assert!(DenseLdlt::factor(&a).is_err());
    }

    #[test]
    fn cap_enforced() {
        let a = SparseSymMatrix::identity(5);
        assert!(matches!(to_dense_capped(&a, 4), Err(Error::DenseCapExceeded { .. })));
    }

    #[test]
    fn unit_lower_inverse_of_bidiagonal() {
        let n = 5;
        let mut l = DenseMatrix::identity(n);
        for i in 1..n {
            l[(i, i - 1)] = -1.0;
        }
        let inv = l.unit_lower_inverse();
        assert_eq!(inv.norm_inf(), 5.0);
        let prod = l.matmul(&inv);
        for i in 0..n {
            for j in 0..n {
                assert!((prod[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }
}
