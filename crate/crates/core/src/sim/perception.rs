//! Synthetic fiducial detections and colored point clouds.

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::collision::Obb;
use crate::geometry::Pose6D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionConfig {
    /// Per-axis standard deviation of detected marker positions, meters.
    pub position_sigma: f64,
    /// Per-axis standard deviation of detected marker rotations, radians.
    pub rotation_sigma: f64,
    pub cloud_points: usize,
    pub cloud_sigma: f64,
    /// Half-angle of the sensor's viewing cone, radians.
    pub fov_half_angle: f64,
    pub max_range: f64,
    /// Number of detection frames averaged when task frames are registered.
    pub registration_frames: usize,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            position_sigma: 0.005,
            rotation_sigma: 1f64.to_radians(),
            cloud_points: 2048,
            cloud_sigma: 0.01,
            fov_half_angle: std::f64::consts::FRAC_PI_2,
            max_range: 4.0,
            registration_frames: 10,
        }
    }
}

/// A marker seen by the head camera, posed in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub marker_id: u32,
    pub pose: Pose6D,
    pub timestamp: f64,
}

/// Points in the world frame, flattened as `x, y, z, r, g, b` per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub timestamp: f64,
    pub frame: String,
    pub points: Vec<f64>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len() / 6
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A box that shows up in the point cloud.
#[derive(Debug, Clone, Copy)]
pub struct ColoredBox {
    pub obb: Obb,
    pub color: [u8; 3],
}

/// Independent, reproducible stream for one perception frame.
pub fn frame_rng(seed: u64, frame: u64) -> ChaCha8Rng {
    let mut z = seed ^ frame.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

impl PerceptionConfig {
    /// Whether a point lies inside the sensor's cone and range.
    pub fn in_view(&self, camera: &Pose6D, point: &Vector3<f64>) -> bool {
        let rel = point - camera.position();
        let dist = rel.norm();
        if dist > self.max_range || dist < 1e-9 {
            return false;
        }
        let forward = camera.transform_vector(&Vector3::x());
        forward.dot(&rel) / dist >= self.fov_half_angle.cos() - 1e-12
    }

    /// Noisy detections of every marker in view that faces the camera.
    /// Marker poses have +z pointing out of the printed face.
    pub fn detect(
        &self,
        camera: &Pose6D,
        markers: &[(u32, Pose6D)],
        timestamp: f64,
        rng: &mut impl Rng,
    ) -> Vec<Detection> {
        let pos = Normal::new(0.0, self.position_sigma).expect("finite sigma");
        let rot = Normal::new(0.0, self.rotation_sigma).expect("finite sigma");
        let mut out = Vec::new();
        for (id, marker) in markers {
            // Noise is drawn for every marker so visibility changes elsewhere
            // do not shift the random stream.
            let dp = Vector3::new(pos.sample(rng), pos.sample(rng), pos.sample(rng));
            let dr = Vector3::new(rot.sample(rng), rot.sample(rng), rot.sample(rng));
            let normal = marker.transform_vector(&Vector3::z());
            let facing = normal.dot(&(camera.position() - marker.position())) > 0.0;
            if !facing || !self.in_view(camera, marker.position()) {
                continue;
            }
            let truth = camera.inverse().compose(marker);
            let noisy = Pose6D::new(
                truth.position() + dp,
                UnitQuaternion::from_scaled_axis(dr) * truth.orientation(),
            );
            out.push(Detection {
                marker_id: *id,
                pose: noisy,
                timestamp,
            });
        }
        out
    }

    /// Samples points on the box faces that face the camera and lie in view.
    pub fn point_cloud(
        &self,
        camera: &Pose6D,
        boxes: &[ColoredBox],
        timestamp: f64,
        rng: &mut impl Rng,
    ) -> PointCloud {
        struct Face {
            center: Vector3<f64>,
            u: Vector3<f64>,
            v: Vector3<f64>,
            area: f64,
            color: [u8; 3],
        }
        let mut faces = Vec::new();
        for b in boxes {
            let h = b.obb.half_extents;
            for axis in 0..3 {
                for sign in [-1.0, 1.0] {
                    let mut n = Vector3::zeros();
                    n[axis] = sign;
                    let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
                    let mut u = Vector3::zeros();
                    u[a1] = h[a1];
                    let mut v = Vector3::zeros();
                    v[a2] = h[a2];
                    let center = b.obb.center.transform_point(&(n * h[axis]));
                    let normal = b.obb.center.transform_vector(&n);
                    if normal.dot(&(camera.position() - center)) <= 0.0 || !self.in_view(camera, &center) {
                        continue;
                    }
                    faces.push(Face {
                        center,
                        u: b.obb.center.transform_vector(&u),
                        v: b.obb.center.transform_vector(&v),
                        area: 4.0 * h[a1] * h[a2],
                        color: b.color,
                    });
                }
            }
        }
        let total: f64 = faces.iter().map(|f| f.area).sum();
        let mut points = Vec::with_capacity(self.cloud_points * 6);
        if total > 0.0 {
            let noise = Normal::new(0.0, self.cloud_sigma).expect("finite sigma");
            for _ in 0..self.cloud_points {
                let mut pick = rng.random_range(0.0..total);
                let face = faces
                    .iter()
                    .find(|f| {
                        pick -= f.area;
                        pick < 0.0
                    })
                    .unwrap_or(&faces[faces.len() - 1]);
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                let p = face.center + face.u * a + face.v * b;
                let p = p + Vector3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
                for c in p.iter() {
                    points.push((c * 1e4).round() / 1e4);
                }
                points.extend(face.color.iter().map(|&c| c as f64));
            }
        }
        PointCloud {
            timestamp,
            frame: crate::geometry::WORLD.to_string(),
            points,
        }
    }
}

/// Mean of a set of poses: arithmetic mean of positions and the normalized,
/// sign-aligned sum of quaternions.
pub fn average_poses(poses: &[Pose6D]) -> Option<Pose6D> {
    let first = poses.first()?;
    let n = poses.len() as f64;
    let mut p = Vector3::zeros();
    let mut q = nalgebra::Vector4::zeros();
    let reference = first.orientation().coords;
    for pose in poses {
        p += pose.position();
        let c = pose.orientation().coords;
        q += if c.dot(&reference) < 0.0 { -c } else { c };
    }
    let quat = nalgebra::Quaternion::from(q / n);
    Some(Pose6D::new(p / n, UnitQuaternion::from_quaternion(quat)))
}
