//! Pinhole camera with a rigid pose: lifting depth pixels to world points
//! and dropping world points back onto the image plane.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::Vec3;

/// Tolerance for the orthonormality check on pose rotations.
const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PoseError {
    #[error("pose rotation block is not orthonormal (max deviation {0:.3e})")]
    NotOrthonormal(f64),
    #[error("pose bottom row must be [0, 0, 0, 1]")]
    BadBottomRow,
    #[error("pose contains a non-finite entry")]
    NonFinite,
}

/// Camera-to-world rigid transform stored as a row-major 4×4 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 4]; 4]", into = "[[f64; 4]; 4]")]
pub struct Pose {
    m: [[f64; 4]; 4],
}

impl Pose {
    /// Validates and wraps a 4×4 matrix: finite entries, orthonormal 3×3
    /// rotation block, bottom row exactly `[0, 0, 0, 1]`.
    pub fn new(m: [[f64; 4]; 4]) -> Result<Self, PoseError> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(PoseError::NonFinite);
        }
        if m[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(PoseError::BadBottomRow);
        }
        // R^T R must be the identity.
        let mut max_dev: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                max_dev = max_dev.max((dot - expected).abs());
            }
        }
        if max_dev > ORTHONORMAL_TOLERANCE {
            return Err(PoseError::NotOrthonormal(max_dev));
        }
        Ok(Self { m })
    }

    #[must_use]
    pub fn identity() -> Self {
        Self {
            m: [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ],
        }
    }

    /// Translation-only pose.
    #[must_use]
    pub fn from_translation(t: Vec3) -> Self {
        let mut m = Self::identity().m;
        m[0][3] = t.x;
        m[1][3] = t.y;
        m[2][3] = t.z;
        Self { m }
    }

    /// Rotation about +y by `angle` radians combined with a translation.
    #[must_use]
    pub fn from_yaw_translation(angle: f64, t: Vec3) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [
                [c, 0.0, s, t.x],
                [0.0, 1.0, 0.0, t.y],
                [-s, 0.0, c, t.z],
                [0.0, 0.0, 0.0, 1.0],
            ],
        }
    }

    /// Camera-space point to world space.
    #[must_use]
    pub fn transform(&self, p: Vec3) -> Vec3 {
        let m = &self.m;
        Vec3::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z + m[0][3],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z + m[1][3],
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z + m[2][3],
        )
    }

    /// World-space point back to camera space. Uses the closed-form rigid
    /// inverse (transpose rotation, rotated negative translation), so a
    /// round trip costs no matrix inversion.
    #[must_use]
    pub fn inverse_transform(&self, p: Vec3) -> Vec3 {
        let m = &self.m;
        let d = Vec3::new(p.x - m[0][3], p.y - m[1][3], p.z - m[2][3]);
        Vec3::new(
            m[0][0] * d.x + m[1][0] * d.y + m[2][0] * d.z,
            m[0][1] * d.x + m[1][1] * d.y + m[2][1] * d.z,
            m[0][2] * d.x + m[1][2] * d.y + m[2][2] * d.z,
        )
    }
}

impl TryFrom<[[f64; 4]; 4]> for Pose {
    type Error = PoseError;
    fn try_from(m: [[f64; 4]; 4]) -> Result<Self, Self::Error> {
        Self::new(m)
    }
}

impl From<Pose> for [[f64; 4]; 4] {
    fn from(p: Pose) -> Self {
        p.m
    }
}

/// Pinhole intrinsics plus a camera-to-world pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub pose: Pose,
}

impl CameraModel {
    /// Lifts pixel `(u, v)` with depth `z > 0` into world space.
    ///
    /// Returns `None` for non-positive or non-finite depth (holes in a depth
    /// image), which callers skip.
    #[must_use]
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Option<Vec3> {
        if !(z.is_finite() && z > 0.0) {
            return None;
        }
        let cam = Vec3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z);
        Some(self.pose.transform(cam))
    }

    /// Projects a world point to `(u, v, depth)`. Points at or behind the
    /// camera plane give `None`.
    #[must_use]
    pub fn project(&self, world: Vec3) -> Option<(f64, f64, f64)> {
        let cam = self.pose.inverse_transform(world);
        if cam.z <= 0.0 {
            return None;
        }
        Some((
            self.fx * cam.x / cam.z + self.cx,
            self.fy * cam.y / cam.z + self.cy,
            cam.z,
        ))
    }
}
