//! Minimal dense linear algebra: square matrices and a cyclic Jacobi
//! eigensolver for symmetric matrices.
//!
//! The graphs handled here are small (tens of nodes, hundreds at most), so a
//! dependency-free O(n^3) Jacobi decomposition is accurate and fast enough for
//! every spectral quantity the simulator needs.

use crate::error::{Error, Result};

/// Dense square matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from row slices; panics if the rows are not square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "row {i} has wrong length");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest absolute asymmetry |a_ij - a_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }
}

/// Eigendecomposition of a symmetric matrix: `values` ascending, `vectors`
/// holding the matching eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl Eigen {
    /// Reconstruct Q diag(values) Q^T, for residual checks.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for (k, lambda) in self.values.iter().enumerate() {
                    acc += self.vectors.get(i, k) * lambda * self.vectors.get(j, k);
                }
                m.set(i, j, acc);
            }
        }
        m
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps all upper-triangle pivots in a fixed order and rotates until the
/// off-diagonal Frobenius norm drops below `tol` relative to the input norm.
/// Deterministic; accuracy is a small multiple of machine epsilon.
pub fn jacobi_eigh(m: &Matrix, tol: f64, max_sweeps: usize) -> Result<Eigen> {
    if !m.is_symmetric(tol.max(1e-12)) {
        return Err(Error::AsymmetricMatrix { tol: tol.max(1e-12) });
    }
    let n = m.n();
    let mut a = m.clone();
    let mut q = Matrix::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);

    for _ in 0..max_sweeps {
        let off: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += 2.0 * a.get(i, j) * a.get(i, j);
                }
            }
            s.sqrt()
        };
        if off <= tol * scale {
            break;
        }

        for p in 0..n {
            for r in (p + 1)..n {
                let apr = a.get(p, r);
                if apr == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let arr = a.get(r, r);
                let tau = (arr - app) / (2.0 * apr);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    if k != p && k != r {
                        let akp = a.get(k, p);
                        let akr = a.get(k, r);
                        a.set(k, p, c * akp - s * akr);
                        a.set(p, k, a.get(k, p));
                        a.set(k, r, s * akp + c * akr);
                        a.set(r, k, a.get(k, r));
                    }
                }
                a.set(p, p, c * c * app - 2.0 * s * c * apr + s * s * arr);
                a.set(r, r, s * s * app + 2.0 * s * c * apr + c * c * arr);
                a.set(p, r, 0.0);
                a.set(r, p, 0.0);

                for k in 0..n {
                    let qkp = q.get(k, p);
                    let qkr = q.get(k, r);
                    q.set(k, p, c * qkp - s * qkr);
                    q.set(k, r, s * qkp + c * qkr);
                }
            }
        }
    }

    // Sort eigenpairs ascending.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)));
    let values: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, col, q.get(k, src));
        }
    }
    Ok(Eigen { values, vectors })
}
