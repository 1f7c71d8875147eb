//! Anderson tight-binding Hamiltonian on an `m × m × m` simple cubic lattice.
//!
//! Sites are numbered k-major, then j, then i: the site with 1-based
//! coordinates `(i, j, k)` has linear index `(k-1) m² + (j-1) m + (i-1)`.
//!
//! Random numbers come from [`crate::rng::Stream`] seeded with the config seed.
//! Diagonal disorder draws one value per site in ascending linear index;
//! off-diagonal disorder draws one value per stored lower-triangle neighbour
//! entry in ascending `(row, col)` order.

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::sparse::SparseSymMatrix;

/// Default diagonal value of the off-diagonal disorder model.
pub const OFF_DIAGONAL_DEFAULT_SHIFT: f64 = 1.28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    HardWall,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Disorder {
    /// Unit hopping, on-site energies uniform on `[-w/2, w/2]`.
    Diagonal,
    /// Constant on-site energy `shift`, hopping uniform on `[-1/2, 1/2]`.
    OffDiagonal { shift: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AndersonConfig {
    pub m: usize,
    pub w: f64,
    pub boundary: Boundary,
    pub disorder: Disorder,
    pub seed: u64,
}

impl AndersonConfig {
    pub fn periodic(m: usize, w: f64, seed: u64) -> Self {
        AndersonConfig { m, w, boundary: Boundary::Periodic, disorder: Disorder::Diagonal, seed }
    }

    pub fn n(&self) -> usize {
        self.m * self.m * self.m
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("lattice edge m must be at least 1".into()));
        }
        if self.boundary == Boundary::Periodic && self.m < 3 {
            return Err(Error::InvalidConfig(format!(
                "periodic boundaries need m >= 3 (m = {} would duplicate neighbour pairs)",
                self.m
            )));
        }
        if !(self.w.is_finite() && self.w >= 0.0) {
            return Err(Error::InvalidConfig(format!("disorder strength must be finite and >= 0, got {}", self.w)));
        }
        if let Disorder::OffDiagonal { shift } = self.disorder {
            if !shift.is_finite() {
                return Err(Error::InvalidConfig("off-diagonal shift must be finite".into()));
            }
        }
        self.m
            .checked_mul(self.m)
            .and_then(|v| v.checked_mul(self.m))
            .ok_or_else(|| Error::InvalidConfig(format!("m = {} overflows the index type", self.m)))?;
        Ok(())
    }
}

/// Linear index of the 1-based site `(i, j, k)`.
pub fn site_index(i: usize, j: usize, k: usize, m: usize) -> Result<usize> {
    for (name, c) in [("i", i), ("j", j), ("k", k)] {
        if c == 0 || c > m {
            return Err(Error::InvalidInput(format!("coordinate {name} = {c} outside 1..={m}")));
        }
    }
    Ok((k - 1) * m * m + (j - 1) * m + (i - 1))
}

/// Inverse of [`site_index`].
pub fn site_coords(index: usize, m: usize) -> Result<(usize, usize, usize)> {
    if index >= m * m * m {
        return Err(Error::InvalidInput(format!("site index {index} outside 0..{}", m * m * m)));
    }
    Ok((index % m + 1, (index / m) % m + 1, index / (m * m) + 1))
}

/// Lower-triangle neighbours (`col < row`) of site `s`, ascending.
fn lower_neighbours(s: usize, m: usize, boundary: Boundary) -> Vec<usize> {
    let (i, j, k) = (s % m, (s / m) % m, s / (m * m));
    let strides = [1, m, m * m];
    let coords = [i, j, k];
    let mut out = Vec::with_capacity(6);
    for d in 0..3 {
        let c = coords[d];
        let base = s - c * strides[d];
        let mut push = |cc: usize| {
            let t = base + cc * strides[d];
            if t < s {
                out.push(t);
            }
        };
        match boundary {
            Boundary::Periodic => {
                push((c + 1) % m);
                push((c + m - 1) % m);
            }
            Boundary::HardWall => {
                if c + 1 < m {
                    push(c + 1);
                }
                if c > 0 {
                    push(c - 1);
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

pub fn build_anderson(cfg: &AndersonConfig) -> Result<SparseSymMatrix> {
    cfg.validate()?;
    let m = cfg.m;
    let n = cfg.n();
    let mut stream = Stream::new(cfg.seed);

    let diag: Vec<f64> = match cfg.disorder {
        Disorder::Diagonal => (0..n).map(|_| stream.uniform(-cfg.w / 2.0, cfg.w / 2.0)).collect(),
        Disorder::OffDiagonal { shift } => vec![shift; n],
    };

    let mut row_starts = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(4 * n);
    let mut vals = Vec::with_capacity(4 * n);
    row_starts.push(0);
    for (s, &d) in diag.iter().enumerate() {
        for t in lower_neighbours(s, m, cfg.boundary) {
            cols.push(t);
            vals.push(match cfg.disorder {
                Disorder::Diagonal => 1.0,
                Disorder::OffDiagonal { .. } => stream.uniform(-0.5, 0.5),
            });
        }
        cols.push(s);
        vals.push(d);
        row_starts.push(cols.len());
    }
    SparseSymMatrix::from_lower_csr(n, row_starts, cols, vals)
}

/// `|x_j|²` of the normalized vector.
pub fn wavefunction_probabilities(x: &[f64]) -> Result<Vec<f64>> {
    let norm_sq: f64 = x.iter().map(|v| v * v).sum();
    if norm_sq == 0.0 || !norm_sq.is_finite() {
        return Err(Error::InvalidInput("cannot normalize a zero or non-finite vector".into()));
    }
    Ok(x.iter().map(|v| v * v / norm_sq).collect())
}
