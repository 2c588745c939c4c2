//! Vector helpers and the shifted linear solves used by the implicit steppers.
//!
//! System matrices are either dense (small coupled systems) or tridiagonal
//! (one-dimensional method-of-lines operators). The implicit theta step only
//! ever solves systems of the form `(I - alpha A) x = rhs`, so that is the one
//! factorization interface exposed here.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// y += a * x
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Square system matrix in one of the two storage layouts the steppers know
/// how to factorize directly.
#[derive(Debug, Clone)]
pub enum SystemMatrix {
    Dense(DMatrix<f64>),
    /// `sub[i] = A[i+1][i]`, `diag[i] = A[i][i]`, `sup[i] = A[i][i+1]`.
    Tridiagonal {
        sub: Vec<f64>,
        diag: Vec<f64>,
        sup: Vec<f64>,
    },
}

impl SystemMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        SystemMatrix::Dense(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        match self {
            SystemMatrix::Dense(m) => m.nrows(),
            SystemMatrix::Tridiagonal { diag, .. } => diag.len(),
        }
    }

    /// out = A x
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        match self {
            SystemMatrix::Dense(m) => {
                for i in 0..m.nrows() {
                    let mut s = 0.0;
                    for j in 0..m.ncols() {
                        s += m[(i, j)] * x[j];
                    }
                    out[i] = s;
                }
            }
            SystemMatrix::Tridiagonal { sub, diag, sup } => {
                let n = diag.len();
                for i in 0..n {
                    let mut s = diag[i] * x[i];
                    if i > 0 {
                        s += sub[i - 1] * x[i - 1];
                    }
                    if i + 1 < n {
                        s += sup[i] * x[i + 1];
                    }
                    out[i] = s;
                }
            }
        }
    }

    pub fn transpose(&self) -> SystemMatrix {
        match self {
            SystemMatrix::Dense(m) => SystemMatrix::Dense(m.transpose()),
            SystemMatrix::Tridiagonal { sub, diag, sup } => SystemMatrix::Tridiagonal {
                sub: sup.clone(),
                diag: diag.clone(),
                sup: sub.clone(),
            },
        }
    }

    /// Dense copy, for operator-norm analysis.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SystemMatrix::Dense(m) => m.clone(),
            SystemMatrix::Tridiagonal { sub, diag, sup } => {
                let n = diag.len();
                DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        diag[i]
                    } else if i == j + 1 {
                        sub[j]
                    } else if j == i + 1 {
                        sup[i]
                    } else {
                        0.0
                    }
                })
            }
        }
    }

    /// Solves `(I - alpha A) x = rhs` by direct factorization: LU with partial
    /// pivoting for dense storage, the Thomas elimination for tridiagonal.
    pub fn solve_shifted(&self, alpha: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let singular = || Error::SingularSystem { t: f64::NAN, dt: f64::NAN };
        match self {
            SystemMatrix::Dense(a) => {
                let n = a.nrows();
                let mut m = a * (-alpha);
                for i in 0..n {
                    m[(i, i)] += 1.0;
                }
                let lu = nalgebra::linalg::LU::new(m);
                let x = lu
                    .solve(&DVector::from_column_slice(rhs))
                    .ok_or_else(singular)?;
                Ok(x.iter().copied().collect())
            }
            SystemMatrix::Tridiagonal { sub, diag, sup } => {
                let n = diag.len();
                let mut d: Vec<f64> = diag.iter().map(|v| 1.0 - alpha * v).collect();
                let l: Vec<f64> = sub.iter().map(|v| -alpha * v).collect();
                let c: Vec<f64> = sup.iter().map(|v| -alpha * v).collect();
                let mut x = rhs.to_vec();
                // Forward elimination without pivoting; the shifted operators
                // we meet are diagonally dominant, so a vanishing pivot means
                // a genuinely singular system.
                for i in 0..n {
                    let scale = d[i].abs().max(1.0);
                    if d[i].abs() <= scale * 1e-14 {
                        return Err(singular());
                    }
                    if i + 1 < n {
                        let w = l[i] / d[i];
                        d[i + 1] -= w * c[i];
                        x[i + 1] -= w * x[i];
                    }
                }
                x[n - 1] /= d[n - 1];
                for i in (0..n - 1).rev() {
                    x[i] = (x[i] - c[i] * x[i + 1]) / d[i];
                }
                Ok(x)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_solve_matches_dense_for_tridiagonal() {
        let tri = SystemMatrix::Tridiagonal {
            sub: vec![1.0, 2.0, -1.0],
            diag: vec![-2.0, -3.0, -2.5, -4.0],
            sup: vec![0.5, 1.5, 0.25],
        };
        let dense = SystemMatrix::Dense(tri.to_dense());
        let rhs = [1.0, -2.0, 0.5, 3.0];
        let a = tri.solve_shifted(0.37, &rhs).unwrap();
        let b = dense.solve_shifted(0.37, &rhs).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn shifted_solve_reproduces_known_inverse() {
        // (I - alpha A) x = rhs with A = [[0, 1], [0, 0]], alpha = 2:
        // M = [[1, -2], [0, 1]], so x = [rhs0 + 2 rhs1, rhs1].
        let a = SystemMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let x = a.solve_shifted(2.0, &[1.0, 3.0]).unwrap();
        assert_eq!(x, vec![7.0, 3.0]);
    }

    #[test]
    fn singular_shift_is_reported() {
        // (I - 1 * [[1]]) = [0]: singular.
        let a = SystemMatrix::from_rows(&[vec![1.0]]);
        assert!(matches!(
            a.solve_shifted(1.0, &[1.0]),
            Err(Error::SingularSystem { .. })
        ));
        let tri = SystemMatrix::Tridiagonal { sub: vec![], diag: vec![1.0], sup: vec![] };
        assert!(matches!(
            tri.solve_shifted(1.0, &[1.0]),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn matvec_and_transpose_agree_with_dense() {
        let tri = SystemMatrix::Tridiagonal {
            sub: vec![4.0, 5.0],
            diag: vec![1.0, 2.0, 3.0],
            sup: vec![-1.0, -2.0],
        };
        let x = [1.0, 2.0, 3.0];
        let mut y = [0.0; 3];
        tri.matvec(&x, &mut y);
        assert_eq!(y, [1.0 - 2.0, 4.0 + 4.0 - 6.0, 10.0 + 9.0]);

        let mut yt = [0.0; 3];
        tri.transpose().matvec(&x, &mut yt);
        let dense_t = SystemMatrix::Dense(tri.to_dense().transpose());
        let mut yd = [0.0; 3];
        dense_t.matvec(&x, &mut yd);
        assert_eq!(yt, yd);
    }
}
