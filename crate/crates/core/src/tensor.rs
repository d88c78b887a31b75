//! Small fixed-size tensor algebra for 3×3 kinematics.
//!
//! [`SymTensor3`] stores the six independent components of a symmetric
//! second-order tensor in Voigt order `(11, 22, 33, 23, 13, 12)` with unit
//! shear weights. [`Tensor3`] is a general 3×3 matrix used for deformation
//! gradients, their rates, and rotations.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

/// Voigt index pairs `(i, j)` for slots 0..6.
pub const VOIGT_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

/// Symmetric 3×3 tensor in Voigt order `(11, 22, 33, 23, 13, 12)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymTensor3(pub [f64; 6]);

/// General 3×3 tensor, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tensor3(pub [[f64; 3]; 3]);

impl SymTensor3 {
    pub const fn zero() -> Self {
        SymTensor3([0.0; 6])
    }

    pub const fn identity() -> Self {
        SymTensor3([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    }

    pub const fn from_voigt(v: [f64; 6]) -> Self {
        SymTensor3(v)
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        SymTensor3([a, b, c, 0.0, 0.0, 0.0])
    }

    pub fn voigt(&self) -> [f64; 6] {
        self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let k = match (i.min(j), i.max(j)) {
            (0, 0) => 0,
            (1, 1) => 1,
            (2, 2) => 2,
            (1, 2) => 3,
            (0, 2) => 4,
            (0, 1) => 5,
            _ => panic!("index ({i}, {j}) out of range"),
        };
        self.0[k]
    }

    pub fn to_tensor(&self) -> Tensor3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        Tensor3(m)
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[1] + self.0[2]
    }

    pub fn det(&self) -> f64 {
        let [a, b, c, d, e, f] = self.0;
        a * (b * c - d * d) - f * (f * c - d * e) + e * (f * d - b * e)
    }

    /// Full double contraction `A : B = A_ij B_ij`, counting both off-diagonal halves.
    pub fn ddot(&self, other: &SymTensor3) -> f64 {
        let a = &self.0;
        let b = &other.0;
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + 2.0 * (a[3] * b[3] + a[4] * b[4] + a[5] * b[5])
    }

    /// Euclidean norm of the Voigt vector (unit shear weights).
    pub fn voigt_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Inverse via the adjugate; `None` when the determinant is not usable.
    pub fn inverse(&self) -> Option<SymTensor3> {
        let det = self.det();
        let scale = self.max_abs().powi(3);
        if !det.is_finite() || det.abs() <= 1e-14 * scale || scale == 0.0 {
            return None;
        }
        let [a, b, c, d, e, f] = self.0;
        let inv = [
            b * c - d * d,
            a * c - e * e,
            a * b - f * f,
            e * f - a * d,
            f * d - b * e,
            d * e - c * f,
        ];
        Some(SymTensor3(inv.map(|v| v / det)))
    }

    /// Moore–Penrose pseudo-inverse with singular values below `rel_cutoff · σ_max` discarded.
    ///
    /// Returns the pseudo-inverse and whether any singular value was discarded.
    pub fn pseudo_inverse(&self, rel_cutoff: f64) -> (SymTensor3, bool) {
        let eig = nalgebra::SymmetricEigen::new(self.to_matrix3());
        let sigma_max = eig.eigenvalues.amax();
        if sigma_max == 0.0 {
            return (SymTensor3::zero(), true);
        }
        let tol = rel_cutoff * sigma_max;
        let mut pinv = nalgebra::Matrix3::zeros();
        let mut deficient = false;
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda.abs() <= tol {
                deficient = true;
                continue;
            }
            let q = eig.eigenvectors.column(k);
            pinv += q * q.transpose() / lambda;
        }
        (SymTensor3::from_matrix3_sym(&pinv), deficient)
    }

    /// Matrix product `self · other` (not symmetric in general).
    pub fn matmul(&self, other: &SymTensor3) -> Tensor3 {
        self.to_tensor().mul(other.to_tensor())
    }

    /// Symmetric product `A B + B A`.
    pub fn sym_product(&self, other: &SymTensor3) -> SymTensor3 {
        let ab = self.matmul(other);
        ab.plus_transpose()
    }

    pub fn square(&self) -> SymTensor3 {
        self.matmul(self).symmetric_part()
    }

    /// Conjugation `Q A Qᵀ`.
    pub fn rotate(&self, q: &Tensor3) -> SymTensor3 {
        q.mul(self.to_tensor()).mul(q.transpose()).symmetric_part()
    }

    pub fn to_matrix3(&self) -> Matrix3<f64> {
        let t = self.to_tensor().0;
        Matrix3::from_fn(|i, j| t[i][j])
    }

    pub fn from_matrix3_sym(m: &Matrix3<f64>) -> SymTensor3 {
        let mut v = [0.0; 6];
        for (k, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
            v[k] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
        SymTensor3(v)
    }

    pub fn scale(&self, s: f64) -> SymTensor3 {
        SymTensor3(self.0.map(|v| v * s))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Tensor3 {
    pub const fn zero() -> Self {
        Tensor3([[0.0; 3]; 3])
    }

    pub const fn identity() -> Self {
        Tensor3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Tensor3([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    /// Row-major components `F11, F12, F13, F21, ..., F33`.
    pub fn from_row_major(v: [f64; 9]) -> Self {
        Tensor3([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }

    pub fn row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        ]
    }

    pub fn transpose(&self) -> Tensor3 {
        let m = &self.0;
        Tensor3(std::array::from_fn(|i| std::array::from_fn(|j| m[j][i])))
    }

    pub fn mul(&self, other: Tensor3) -> Tensor3 {
        let a = &self.0;
        let b = &other.0;
        Tensor3(std::array::from_fn(|i| {
            std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j])
        }))
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// `Aᵀ B` symmetrised, i.e. the product that appears in `C = FᵀF`.
    pub fn transpose_mul_sym(&self, other: &Tensor3) -> SymTensor3 {
        self.transpose().mul(*other).symmetric_part()
    }

    pub fn symmetric_part(&self) -> SymTensor3 {
        let m = &self.0;
        let mut v = [0.0; 6];
        for (k, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
            v[k] = 0.5 * (m[i][j] + m[j][i]);
        }
        SymTensor3(v)
    }

    /// `A + Aᵀ` as a symmetric tensor.
    pub fn plus_transpose(&self) -> SymTensor3 {
        self.symmetric_part().scale(2.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: f64) -> Tensor3 {
        Tensor3(self.0.map(|row| row.map(|v| v * s)))
    }

    /// Rotation about a unit axis by `angle` radians (Rodrigues).
    pub fn rotation(axis: [f64; 3], angle: f64) -> Tensor3 {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let [x, y, z] = axis.map(|a| a / n);
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Tensor3([
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ])
    }
}

impl Add for SymTensor3 {
    type Output = SymTensor3;
    fn add(self, rhs: SymTensor3) -> SymTensor3 {
        SymTensor3(std::array::from_fn(|k| self.0[k] + rhs.0[k]))
    }
}

impl AddAssign for SymTensor3 {
    fn add_assign(&mut self, rhs: SymTensor3) {
        for k in 0..6 {
            self.0[k] += rhs.0[k];
        }
    }
}

impl Sub for SymTensor3 {
    type Output = SymTensor3;
    fn sub(self, rhs: SymTensor3) -> SymTensor3 {
        SymTensor3(std::array::from_fn(|k| self.0[k] - rhs.0[k]))
    }
}

impl Neg for SymTensor3 {
    type Output = SymTensor3;
    fn neg(self) -> SymTensor3 {
        self.scale(-1.0)
    }
}

impl Mul<SymTensor3> for f64 {
    type Output = SymTensor3;
    fn mul(self, rhs: SymTensor3) -> SymTensor3 {
        rhs.scale(self)
    }
}

impl Add for Tensor3 {
    type Output = Tensor3;
    fn add(self, rhs: Tensor3) -> Tensor3 {
        Tensor3(std::array::from_fn(|i| std::array::from_fn(|j| self.0[i][j] + rhs.0[i][j])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_of_sheared_tensor() {
        let c = SymTensor3::from_voigt([1.0, 1.25, 1.0, 0.0, 0.0, 0.5]);
        let inv = c.inverse().unwrap();
        let prod = c.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(prod.0[i][j], expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn singular_tensor_has_no_inverse() {
        let z = SymTensor3::diag(1.0, 2.0, 0.0);
        assert!(z.inverse().is_none());
        let (pinv, deficient) = z.pseudo_inverse(1e-10);
        assert!(deficient);
        assert_relative_eq!(pinv.0[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(pinv.0[1], 0.5, epsilon = 1e-14);
        assert_relative_eq!(pinv.0[2], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn ddot_counts_shear_twice() {
        let a = SymTensor3::from_voigt([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(a.ddot(&a), 2.0);
        assert_eq!(a.voigt_norm(), 1.0);
    }

    #[test]
    fn rotation_is_orthogonal() {
        let q = Tensor3::rotation([1.0, 2.0, -0.5], 0.7);
        let qtq = q.transpose().mul(q);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(qtq.0[i][j], expected, epsilon = 1e-14);
            }
        }
        assert_relative_eq!(q.det(), 1.0, epsilon = 1e-14);
    }
}
