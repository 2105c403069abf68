use std::fmt;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Rigid transform: a translation plus a unit quaternion.
///
/// The quaternion is always normalized and sign-canonical (`w >= 0`, and when
/// `w == 0` the first non-zero vector component is positive), so two equal
/// rotations always serialize to the same bytes.
#[derive(Clone, Copy, PartialEq)]
pub struct Pose6D {
    position: Vector3<f64>,
    orientation: UnitQuaternion<f64>,
}

impl Pose6D {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation: canonical(orientation.into_inner()),
        }
    }

    /// Builds a pose from raw `[x, y, z]` and `[w, x, y, z]` arrays.
    ///
    /// Returns `None` for a zero (or non-finite) quaternion. Quaternions already
    /// unit within 1e-9 are kept as given (up to sign) so that decoding a
    /// serialized pose reproduces it bit for bit.
    pub fn from_arrays(position: [f64; 3], wxyz: [f64; 4]) -> Option<Self> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let norm = q.norm();
        if !norm.is_finite() || norm < 1e-12 || position.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let orientation = if (norm - 1.0).abs() <= 1e-9 {
            UnitQuaternion::new_unchecked(sign_canonical(q))
        } else {
            canonical(q)
        };
        Some(Self {
            position: Vector3::from(position),
            orientation,
        })
    }

    pub fn translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    pub fn from_rotation(orientation: UnitQuaternion<f64>) -> Self {
        Self::new(Vector3::zeros(), orientation)
    }

    /// Position plus intrinsic roll/pitch/yaw (applied as yaw * pitch * roll).
    pub fn from_xyz_rpy(x: f64, y: f64, z: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::new(
            Vector3::new(x, y, z),
            UnitQuaternion::from_euler_angles(roll, pitch, yaw),
        )
    }

    pub fn from_xyz_yaw(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self::from_xyz_rpy(x, y, z, 0.0, 0.0, yaw)
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        match nalgebra::Unit::try_new(*axis, 1e-12) {
            Some(axis) => Self::from_rotation(UnitQuaternion::from_axis_angle(&axis, angle)),
            None => Self::identity(),
        }
    }

    pub fn position(&self) -> &Vector3<f64> {
        &self.position
    }

    pub fn orientation(&self) -> &UnitQuaternion<f64> {
        &self.orientation
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn xyz(&self) -> [f64; 3] {
        [self.position.x, self.position.y, self.position.z]
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose6D) -> Pose6D {
        let position = self.position + self.orientation.transform_vector(&other.position);
        let q = self.orientation.quaternion() * other.orientation.quaternion();
        Pose6D {
            position,
            orientation: canonical(q),
        }
    }

    pub fn inverse(&self) -> Pose6D {
        let inv = self.orientation.inverse();
        Pose6D {
            position: -inv.transform_vector(&self.position),
            orientation: canonical(inv.into_inner()),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation.transform_vector(p)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.orientation.transform_vector(v)
    }

    /// Heading about +Z, radians.
    pub fn yaw(&self) -> f64 {
        let q = self.orientation.quaternion();
        (2.0 * (q.w * q.k + q.i * q.j)).atan2(1.0 - 2.0 * (q.j * q.j + q.k * q.k))
    }

    pub fn distance_to(&self, other: &Pose6D) -> f64 {
        (self.position - other.position).norm()
    }

    /// Angle of the relative rotation between two poses, in `[0, π]`.
    pub fn angle_to(&self, other: &Pose6D) -> f64 {
        self.orientation.angle_to(&other.orientation)
    }

    pub fn with_position(&self, position: Vector3<f64>) -> Pose6D {
        Pose6D {
            position,
            orientation: self.orientation,
        }
    }

    /// Projects onto the ground plane at height `z`, keeping only the heading.
    pub fn flattened(&self, z: f64) -> Pose6D {
        Pose6D::from_xyz_yaw(self.position.x, self.position.y, z, self.yaw())
    }

    pub fn quaternion_norm(&self) -> f64 {
        self.orientation.quaternion().norm()
    }
}

impl Default for Pose6D {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Debug for Pose6D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [w, x, y, z] = self.wxyz();
        write!(
            f,
            "Pose6D(p=[{:.6}, {:.6}, {:.6}], q=[{:.6}, {:.6}, {:.6}, {:.6}])",
            self.position.x, self.position.y, self.position.z, w, x, y, z
        )
    }
}

fn canonical(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    let norm = q.norm();
    UnitQuaternion::new_unchecked(sign_canonical(q / norm))
}

fn sign_canonical(q: Quaternion<f64>) -> Quaternion<f64> {
    let mut c = [q.w, q.i, q.j, q.k];
    let negate = if c[0] != 0.0 {
        c[0] < 0.0
    } else {
        c[1..].iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0)
    };
    if negate {
        for v in &mut c {
            *v = -*v;
        }
    }
    Quaternion::new(c[0], c[1], c[2], c[3])
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRepr {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl Serialize for Pose6D {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            position: self.xyz(),
            orientation: self.wxyz(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose6D {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(deserializer)?;
        Pose6D::from_arrays(repr.position, repr.orientation)
            .ok_or_else(|| serde::de::Error::custom("orientation must be a non-zero quaternion"))
    }
}
