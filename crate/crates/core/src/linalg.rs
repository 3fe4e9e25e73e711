//! Dense Cholesky factorization for the exact-GP oracle.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Lower-triangular factor `L` with `A = L L^T`, stored row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::invalid("cholesky needs a square matrix"));
        }
        let mut lower = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let s = dot(&lower[i * n..i * n + j], &lower[j * n..j * n + j]);
                if i == j {
                    let pivot = a[(i, i)] - s;
                    if !(pivot > 0.0) {
                        return Err(Error::Factorization { index: i, pivot });
                    }
                    lower[i * n + i] = pivot.sqrt();
                } else {
                    lower[i * n + j] = (a[(i, j)] - s) / lower[j * n + j];
                }
            }
        }
        Ok(Self { n, lower })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Solves `L z = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = vec![0.0; n];
        for i in 0..n {
            let s = dot(&self.lower[i * n..i * n + i], &z[..i]);
            z[i] = (b[i] - s) / self.lower[i * n + i];
        }
        z
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = self.forward(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lower[k * n + i] * x[k];
            }
            x[i] = s / self.lower[i * n + i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let c = Cholesky::factor(&a).unwrap();
        let b = [1.0, 2.0, 3.0];
        let x = c.solve(&b);
        let r = &a * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert!((r[i] - b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn reports_failing_pivot() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match Cholesky::factor(&a) {
            Err(Error::Factorization { index, pivot }) => {
                assert_eq!(index, 1);
                assert!((pivot + 3.0).abs() < 1e-14);
            }
            other => panic!("{other:?}"),
        }
    }
}
