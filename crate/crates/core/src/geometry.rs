//! Small fixed-size vector and matrix types for receiver/LED geometry and 3×3 FIMs.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::num::{cast, Real};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T>(pub [T; 3]);

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3([x, y, z])
    }

    pub fn zero() -> Self {
        Vec3([T::zero(); 3])
    }

    pub fn from_f64(v: [f64; 3]) -> Self {
        Vec3([T::lit(v[0]), T::lit(v[1]), T::lit(v[2])])
    }

    pub fn to_f64(self) -> [f64; 3] {
        [self.0[0].to_f64_lossy(), self.0[1].to_f64_lossy(), self.0[2].to_f64_lossy()]
    }

    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3([cast(self.0[0]), cast(self.0[1]), cast(self.0[2])])
    }

    pub fn dot(self, other: Self) -> T {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn outer(self, other: Self) -> Mat3<T> {
        let mut m = Mat3::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[i] * other.0[j];
            }
        }
        m
    }

    pub fn x(self) -> T {
        self.0[0]
    }
    pub fn y(self) -> T {
        self.0[1]
    }
    pub fn z(self) -> T {
        self.0[2]
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for Vec3<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

/// Row-major 3×3 matrix. Not necessarily symmetric.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

/// Eigen-decomposition of a symmetric 3×3 matrix; `vectors` holds eigenvectors as columns.
#[derive(Debug, Clone, Copy)]
pub struct SymEigen3<T> {
    pub values: [T; 3],
    pub vectors: Mat3<T>,
}

impl<T: Real> Mat3<T> {
    pub fn zero() -> Self {
        Mat3([[T::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        Self::diag([T::one(); 3])
    }

    pub fn diag(d: [T; 3]) -> Self {
        let mut m = Self::zero();
        for (i, v) in d.into_iter().enumerate() {
            m.0[i][i] = v;
        }
        m
    }

    pub fn from_f64(rows: [[f64; 3]; 3]) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = T::lit(rows[i][j]);
            }
        }
        m
    }

    pub fn cast<U: Real>(&self) -> Mat3<U> {
        let mut m = Mat3::<U>::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = cast(self.0[i][j]);
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[j][i];
            }
        }
        m
    }

    /// Symmetric part `(M + Mᵀ)/2`.
    pub fn sym(&self) -> Self {
        let half = T::lit(0.5);
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = (self.0[i][j] + self.0[j][i]) * half;
            }
        }
        m
    }

    pub fn scale(&self, s: T) -> Self {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        m
    }

    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> T {
        let a = &self.0;
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.0.iter().flatten().map(|v| *v * *v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.0.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_asymmetry(&self) -> T {
        let mut m = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                m = m.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        m
    }

    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        let a = &self.0;
        Vec3([
            a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
            a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
            a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
        ])
    }

    pub fn column(&self, j: usize) -> Vec3<T> {
        Vec3([self.0[0][j], self.0[1][j], self.0[2][j]])
    }

    /// Inverse by cofactors; `None` when the determinant is zero or not finite.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        let a = &self.0;
        let mut inv = Self::zero();
        inv.0[0][0] = a[1][1] * a[2][2] - a[1][2] * a[2][1];
        inv.0[0][1] = a[0][2] * a[2][1] - a[0][1] * a[2][2];
        inv.0[0][2] = a[0][1] * a[1][2] - a[0][2] * a[1][1];
        inv.0[1][0] = a[1][2] * a[2][0] - a[1][0] * a[2][2];
        inv.0[1][1] = a[0][0] * a[2][2] - a[0][2] * a[2][0];
        inv.0[1][2] = a[0][2] * a[1][0] - a[0][0] * a[1][2];
        inv.0[2][0] = a[1][0] * a[2][1] - a[1][1] * a[2][0];
        inv.0[2][1] = a[0][1] * a[2][0] - a[0][0] * a[2][1];
        inv.0[2][2] = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        Some(inv.scale(T::one() / d))
    }

    /// Cyclic Jacobi eigen-decomposition of the symmetric part of `self`.
    ///
    /// Eigenvalues are returned in ascending order.
    pub fn sym_eigen(&self) -> SymEigen3<T> {
        let mut a = self.sym().0;
        let mut v = Self::identity().0;
        let tiny = T::eps() * T::eps();
        for _sweep in 0..64 {
            let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
            let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
            if off <= tiny * diag || off == T::zero() {
                break;
            }
            for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| a[i][i].partial_cmp(&a[j][j]).unwrap_or(std::cmp::Ordering::Equal));
        let mut values = [T::zero(); 3];
        let mut vectors = Self::zero();
        for (dst, &src) in order.iter().enumerate() {
            values[dst] = a[src][src];
            for k in 0..3 {
                vectors.0[k][dst] = v[k][src];
            }
        }
        SymEigen3 { values, vectors }
    }
}

impl<T: Real> Add for Mat3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut m = self;
        m += o;
        m
    }
}

impl<T: Real> AddAssign for Mat3<T> {
    fn add_assign(&mut self, o: Self) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += o.0[i][j];
            }
        }
    }
}

impl<T: Real> Sub for Mat3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut m = self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] -= o.0[i][j];
            }
        }
        m
    }
}

impl<T: Real> Mul for Mat3<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_reconstructs_symmetric_matrix() {
        let m = Mat3::<f64>::from_f64([[4.0, 1.0, -2.0], [1.0, 3.0, 0.5], [-2.0, 0.5, 6.0]]);
        let e = m.sym_eigen();
        assert!(e.values[0] <= e.values[1] && e.values[1] <= e.values[2]);
        let recon = e.vectors * Mat3::diag(e.values) * e.vectors.transpose();
        assert!((recon - m).max_abs() < 1e-12);
        let orth = e.vectors.transpose() * e.vectors;
        assert!((orth - Mat3::identity()).max_abs() < 1e-12);
    }

    #[test]
    fn cofactor_inverse() {
        let m = Mat3::<f64>::from_f64([[2.0, 0.3, 0.0], [0.1, 1.0, -0.4], [0.0, 0.2, 3.0]]);
        let inv = m.inverse().unwrap();
        assert!((m * inv - Mat3::identity()).max_abs() < 1e-14);
        assert!(Mat3::<f64>::zero().inverse().is_none());
    }

    #[test]
    fn f32_eigen_of_diagonal() {
        let m = Mat3::<f32>::diag([3.0, 1.0, 2.0]);
        let e = m.sym_eigen();
        assert_eq!(e.values, [1.0, 2.0, 3.0]);
    }
}
