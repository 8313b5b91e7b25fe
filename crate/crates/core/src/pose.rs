//! Rigid poses (location + unit quaternion) and the relative-pose algebra used
//! to express one entity in another entity's frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of a quaternion norm from 1.
pub const QUAT_NORM_TOLERANCE: f64 = 1e-9;

/// Quaternion stored as (x, y, z, w).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { x: 0.0, y: 0.0, z: 0.0, w: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        Self { x, y, z, w }
    }

    /// Rotation of `angle` radians about a (not necessarily unit) axis.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = norm3(axis);
        let (s, c) = (0.5 * angle).sin_cos();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        Self::new(axis[0] / n * s, axis[1] / n * s, axis[2] / n * s, c)
    }

    pub fn from_yaw(yaw: f64) -> Self {
        Self::from_axis_angle([0.0, 0.0, 1.0], yaw)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.x / n, self.y / n, self.z / n, self.w / n)
    }

    pub fn conjugate(&self) -> Self {
        Self::new(-self.x, -self.y, -self.z, self.w)
    }

    pub fn dot(&self, other: &Quat) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z + self.w * other.w
    }

    /// Flip all components when `w < 0` so that q and -q map to one representative.
    pub fn canonical(&self) -> Self {
        if self.w < 0.0 {
            Self::new(-self.x, -self.y, -self.z, -self.w)
        } else {
            *self
        }
    }

    /// Hamilton product `self ⊗ rhs`.
    pub fn mul(&self, rhs: &Quat) -> Self {
        let (a, b) = (self, rhs);
        Self::new(
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        )
    }

    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        // v' = v + 2w(u×v) + 2u×(u×v)
        let u = [self.x, self.y, self.z];
        let t = scale3(cross(u, v), 2.0);
        add3(add3(v, scale3(t, self.w)), cross(u, t))
    }

    /// 3×3 rotation matrix, row major.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let Quat { x, y, z, w } = *self;
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
            [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
            [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    /// Spherical interpolation along the shorter arc.
    pub fn slerp(&self, other: &Quat, s: f64) -> Self {
        let mut b = *other;
        let mut d = self.dot(&b);
        if d < 0.0 {
            b = Quat::new(-b.x, -b.y, -b.z, -b.w);
            d = -d;
        }
        if d > 1.0 - 1e-12 {
            let q = Quat::new(
                self.x + s * (b.x - self.x),
                self.y + s * (b.y - self.y),
                self.z + s * (b.z - self.z),
                self.w + s * (b.w - self.w),
            );
            return q.normalized();
        }
        let theta = d.acos();
        let sin = theta.sin();
        let ka = ((1.0 - s) * theta).sin() / sin;
        let kb = (s * theta).sin() / sin;
        Quat::new(
            ka * self.x + kb * b.x,
            ka * self.y + kb * b.y,
            ka * self.z + kb * b.z,
            ka * self.w + kb * b.w,
        )
        .normalized()
    }

    /// The local z axis expressed in the parent frame.
    pub fn z_axis(&self) -> [f64; 3] {
        self.rotate([0.0, 0.0, 1.0])
    }
}

/// Rigid pose: location in metres plus unit-quaternion orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub location: [f64; 3],
    pub orientation: Quat,
}

impl Pose {
    pub const IDENTITY: Pose = Pose { location: [0.0; 3], orientation: Quat::IDENTITY };

    /// Checked constructor; rejects non-finite locations and non-unit quaternions.
    pub fn new(location: [f64; 3], orientation: Quat) -> Result<Self> {
        let pose = Self { location, orientation };
        pose.validate()?;
        Ok(pose)
    }

    /// Pose with the quaternion normalized first; only fails on a zero or non-finite quaternion.
    pub fn normalized(location: [f64; 3], orientation: Quat) -> Result<Self> {
        let n = orientation.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidPose(format!("degenerate quaternion {orientation:?}")));
        }
        Self::new(location, orientation.normalized())
    }

    pub fn from_translation(location: [f64; 3]) -> Self {
        Self { location, orientation: Quat::IDENTITY }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.location.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidPose(format!("non-finite location {:?}", self.location)));
        }
        let n = self.orientation.norm();
        if !n.is_finite() || (n - 1.0).abs() > QUAT_NORM_TOLERANCE {
            return Err(Error::InvalidPose(format!(
                "quaternion norm {n} is not within {QUAT_NORM_TOLERANCE} of 1"
            )));
        }
        Ok(())
    }

    pub fn inverse(&self) -> Pose {
        let q = self.orientation.conjugate();
        let loc = q.rotate(self.location);
        Pose { location: [-loc[0], -loc[1], -loc[2]], orientation: q }
    }

    /// `self ∘ rhs`: maps a pose expressed in `rhs`'s parent through `self`.
    pub fn compose(&self, rhs: &Pose) -> Pose {
        Pose {
            location: add3(self.orientation.rotate(rhs.location), self.location),
            orientation: self.orientation.mul(&rhs.orientation),
        }
    }

    /// Inverse of [`relative_pose`]: place a pose given in `frame`'s coordinates into the world.
    pub fn from_relative(frame: &Pose, relative: &PoseVec7) -> Pose {
        frame.compose(&relative.to_pose())
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        norm3(sub3(self.location, other.location))
    }
}

/// Flat pose `(x, y, z, qx, qy, qz, qw)` with a unit, sign-canonical quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseVec7(pub [f64; 7]);

impl PoseVec7 {
    pub const IDENTITY: PoseVec7 = PoseVec7([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);

    pub fn from_pose(pose: &Pose) -> Self {
        let q = pose.orientation.canonical();
        let l = pose.location;
        PoseVec7([l[0], l[1], l[2], q.x, q.y, q.z, q.w])
    }

    pub fn location(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn orientation(&self) -> Quat {
        Quat::new(self.0[3], self.0[4], self.0[5], self.0[6])
    }

    pub fn to_pose(&self) -> Pose {
        Pose { location: self.location(), orientation: self.orientation() }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Pose of `a` expressed in the frame of `b`.
pub fn relative_pose(a: &Pose, b: &Pose) -> Result<PoseVec7> {
    a.validate()?;
    b.validate()?;
    if a == b {
        return Ok(PoseVec7::IDENTITY);
    }
    let qb_inv = b.orientation.conjugate();
    let location = qb_inv.rotate(sub3(a.location, b.location));
    let orientation = qb_inv.mul(&a.orientation);
    Ok(PoseVec7::from_pose(&Pose { location, orientation }))
}

pub(crate) fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
