//! Tiny dense square matrices for 2×2 and 4×4 phase-space maps.

use crate::scalar::Real;
use std::ops::{Index, IndexMut, Mul};

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Row-major construction.
    pub fn from_rows(n: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    /// Standard symplectic form for the ordering (positions, momenta).
    pub fn symplectic_j(n: usize) -> Self {
        let h = n / 2;
        let mut j = Self::zeros(n);
        for i in 0..h {
            j[(i, i + h)] = T::one();
            j[(i + h, i)] = -T::one();
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a - *b).collect(),
        }
    }

    pub fn scale(&self, k: T) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|a| *a * k).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, a| m.max(a.abs()))
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).fold(T::zero(), |s, k| s + self[(i, k)] * v[k]))
            .collect()
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> T {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = T::one();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| {
                    a[i * n + c]
                        .abs()
                        .partial_cmp(&a[j * n + c].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap();
            if a[p * n + c] == T::zero() {
                return T::zero();
            }
            if p != c {
                for k in 0..n {
                    a.swap(c * n + k, p * n + k);
                }
                det = -det;
            }
            let piv = a[c * n + c];
            det = det * piv;
            for i in (c + 1)..n {
                let f = a[i * n + c] / piv;
                for k in c..n {
                    a[i * n + k] = a[i * n + k] - f * a[c * n + k];
                }
            }
        }
        det
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let n = self.n * other.n;
        let mut m = Self::zeros(n);
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..other.n {
                    for l in 0..other.n {
                        m[(i * other.n + k, j * other.n + l)] = self[(i, j)] * other[(k, l)];
                    }
                }
            }
        }
        m
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

impl<T: Real> Mul for &Mat<T> {
    type Output = Mat<T>;
    fn mul(self, rhs: Self) -> Mat<T> {
        let n = self.n;
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                for j in 0..n {
                    m[(i, j)] = m[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_of_rotation_is_one() {
        let (s, c) = 0.3f64.sin_cos();
        let r = Mat::<f64>::from_rows(2, vec![c, -s, s, c]);
        assert!((r.det() - 1.0).abs() < 1e-15);
        let big = r.kron(&Mat::<f64>::identity(2));
        assert!((big.det() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn det_with_pivoting() {
        let m = Mat::<f64>::from_rows(3, vec![0.0, 1.0, 2.0, 1.0, 0.0, 3.0, 4.0, -3.0, 8.0]);
        assert!((m.det() - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn j_squared_is_minus_identity() {
        let j = Mat::<f64>::symplectic_j(4);
        assert_eq!(&j * &j, Mat::<f64>::identity(4).scale(-1.0));
    }
}
