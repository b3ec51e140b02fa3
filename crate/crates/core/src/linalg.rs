//! Small dense matrices: a 3x3 type plus an LDL solve for tiny SPD systems.

use std::ops::{Add, AddAssign, Mul, Sub};

use crate::geometry::Vec3;
use crate::scalar::Scalar;

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Scalar> Mat3<T> {
    pub fn zeros() -> Self {
        Self { m: [[T::zero(); 3]; 3] }
    }

    pub fn identity() -> Self {
        Self::diag(T::one(), T::one(), T::one())
    }

    pub fn diag(a: T, b: T, c: T) -> Self {
        let mut out = Self::zeros();
        out.m[0][0] = a;
        out.m[1][1] = b;
        out.m[2][2] = c;
        out
    }

    pub fn from_rows(m: [[T; 3]; 3]) -> Self {
        Self { m }
    }

    /// `a b^T`.
    pub fn outer(a: Vec3<T>, b: Vec3<T>) -> Self {
        let a = a.to_array();
        let b = b.to_array();
        let mut out = Self::zeros();
        for (r, ar) in a.iter().enumerate() {
            for (c, bc) in b.iter().enumerate() {
                out.m[r][c] = *ar * *bc;
            }
        }
        out
    }

    pub fn scaled(self, s: T) -> Self {
        let mut out = self;
        for row in out.m.iter_mut() {
            for e in row.iter_mut() {
                *e *= s;
            }
        }
        out
    }

    pub fn transpose(self) -> Self {
        let mut out = Self::zeros();
        for r in 0..3 {
            for c in 0..3 {
                out.m[c][r] = self.m[r][c];
            }
        }
        out
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        let row = |r: usize| self.m[r][0] * v.x + self.m[r][1] * v.y + self.m[r][2] * v.z;
        Vec3::new(row(0), row(1), row(2))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.m.iter().flat_map(|r| r.iter()).fold(T::zero(), |acc, e| acc.max(e.abs()))
    }

    /// Largest absolute row sum (induced infinity norm).
    pub fn norm_inf(&self) -> T {
        self.m.iter().map(|r| r.iter().fold(T::zero(), |acc, e| acc + e.abs())).fold(T::zero(), T::max)
    }
}

impl<T: Scalar> Add for Mat3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        out += rhs;
        out
    }
}

impl<T: Scalar> AddAssign for Mat3<T> {
    fn add_assign(&mut self, rhs: Self) {
        for r in 0..3 {
            for c in 0..3 {
                self.m[r][c] += rhs.m[r][c];
            }
        }
    }
}

impl<T: Scalar> Sub for Mat3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self;
        for r in 0..3 {
            for c in 0..3 {
                out.m[r][c] -= rhs.m[r][c];
            }
        }
        out
    }
}

impl<T: Scalar> Mul for Mat3<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zeros();
        for r in 0..3 {
            for c in 0..3 {
                let mut acc = T::zero();
                for k in 0..3 {
                    acc += self.m[r][k] * rhs.m[k][c];
                }
                out.m[r][c] = acc;
            }
        }
        out
    }
}

/// Gram matrix `N^T N` for columns `cols`.
pub fn gram<T: Scalar>(cols: &[Vec3<T>]) -> Vec<Vec<T>> {
    cols.iter().map(|a| cols.iter().map(|b| a.dot(*b)).collect()).collect()
}

/// Solves `A x = b` for a small symmetric positive definite `A` (Cholesky).
///
/// Returns `None` when a pivot is not positive.
pub fn spd_solve<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let n = b.len();
    let mut l = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s = (0..j).fold(a[i][j], |s, k| s - l[i][k] * l[j][k]);
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}
