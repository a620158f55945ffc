//! Rotation matrices, the continuous 6D (R6D) representation and geodesic
//! distances between rotations.
//!
//! R6D stores the first two columns of a rotation matrix. Decoding runs
//! Gram-Schmidt on the two 3-vectors and completes the frame with a cross
//! product, so any non-degenerate 6-vector maps to a proper rotation.

use std::ops::Mul;

use crate::error::{Error, Result};

/// Elementwise tolerance used by [`RotationMatrix::is_valid`].
pub const ROTATION_TOL: f64 = 1e-6;

const DEGENERATE_EPS: f64 = 1e-8;

/// Row-major 3x3 rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(pub [[f64; 3]; 3]);

/// First two columns of a rotation matrix, concatenated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct R6d(pub [f64; 6]);

impl R6d {
    pub const IDENTITY: R6d = R6d([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let arr: [f64; 6] = v
            .try_into()
            .map_err(|_| Error::ShapeMismatch(format!("R6D needs 6 values, got {}", v.len())))?;
        Ok(R6d(arr))
    }
}

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix =
        RotationMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Rodrigues' formula. `axis` need not be normalized; a zero axis gives identity.
    pub fn from_axis_angle(axis: [f64; 3], angle_rad: f64) -> Self {
        let n = norm(axis);
        if n == 0.0 || angle_rad == 0.0 {
            return Self::IDENTITY;
        }
        let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
        let (s, c) = angle_rad.sin_cos();
        let t = 1.0 - c;
        RotationMatrix([
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ])
    }

    /// Rotation vector (axis scaled by angle in radians).
    pub fn from_rotation_vector(v: [f64; 3]) -> Self {
        Self::from_axis_angle(v, norm(v))
    }

    /// Quaternion `(w, x, y, z)`; normalized internally.
    pub fn from_quaternion(q: [f64; 4]) -> Result<Self> {
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !n.is_finite() || n < DEGENERATE_EPS {
            return Err(Error::InvalidRotation(
                "zero or non-finite quaternion".into(),
            ));
        }
        let [w, x, y, z] = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
        Ok(RotationMatrix([
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]))
    }

    pub fn column(&self, c: usize) -> [f64; 3] {
        [self.0[0][c], self.0[1][c], self.0[2][c]]
    }

    pub fn from_columns(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Self {
        RotationMatrix([[a[0], b[0], c[0]], [a[1], b[1], c[1]], [a[2], b[2], c[2]]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        RotationMatrix([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// Largest elementwise deviation of `RᵀR` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let rtr = self.transpose() * *self;
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((rtr.0[i][j] - target).abs());
            }
        }
        worst
    }

    /// Orthonormal to [`ROTATION_TOL`] with determinant `1 ± ROTATION_TOL`.
    pub fn is_valid(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
            && self.orthonormality_error() <= ROTATION_TOL
            && (self.determinant() - 1.0).abs() <= ROTATION_TOL
    }

    pub fn validate(&self) -> Result<()> {
        if !self.0.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("rotation matrix"));
        }
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidRotation(format!(
                "orthonormality error {:.3e}, det {:.9}",
                self.orthonormality_error(),
                self.determinant()
            )))
        }
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;

    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        RotationMatrix(out)
    }
}

pub fn rotmat_to_r6d(r: &RotationMatrix) -> Result<R6d> {
    if !r.0.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("rotation matrix"));
    }
    let a = r.column(0);
    let b = r.column(1);
    Ok(R6d([a[0], a[1], a[2], b[0], b[1], b[2]]))
}

pub fn r6d_to_rotmat(v: &R6d) -> Result<RotationMatrix> {
    if !v.0.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("R6D vector"));
    }
    let a = [v.0[0], v.0[1], v.0[2]];
    let b = [v.0[3], v.0[4], v.0[5]];
    let na = norm(a);
    if na <= DEGENERATE_EPS {
        return Err(Error::DegenerateR6d("first column has zero norm"));
    }
    let b1 = scale(a, 1.0 / na);
    let proj = dot(b1, b);
    let resid = [
        b[0] - proj * b1[0],
        b[1] - proj * b1[1],
        b[2] - proj * b1[2],
    ];
    let nr = norm(resid);
    if nr <= DEGENERATE_EPS * norm(b).max(1.0) {
        return Err(Error::DegenerateR6d(
            "columns are parallel or second column is zero",
        ));
    }
    let b2 = scale(resid, 1.0 / nr);
    let b3 = cross(b1, b2);
    Ok(RotationMatrix::from_columns(b1, b2, b3))
}

/// Geodesic angle between two rotations, in degrees, within `[0, 180]`.
///
/// With `R = AᵀB`, the antisymmetric part of `R` has norm `2 sin θ` and
/// `tr R − 1 = 2 cos θ`. Their `atan2` stays accurate near 0°, where `acos`
/// loses half its digits, and is exactly 0 for identical inputs because
/// `AᵀA` is computed exactly symmetric.
pub fn geodesic_angle(ra: &RotationMatrix, rb: &RotationMatrix) -> f64 {
    let rel = ra.transpose() * *rb;
    let m = rel.0;
    let skew =
        ((m[0][1] - m[1][0]).powi(2) + (m[0][2] - m[2][0]).powi(2) + (m[1][2] - m[2][1]).powi(2))
            .sqrt();
    (skew / 2.0).atan2((rel.trace() - 1.0) / 2.0).to_degrees()
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
