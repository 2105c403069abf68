use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::Pose6D;

/// Oriented box: a pose for its center and half extents along its own axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obb {
    pub center: Pose6D,
    pub half_extents: [f64; 3],
}

impl Obb {
    pub fn new(center: Pose6D, half_extents: [f64; 3]) -> Self {
        Self {
            center,
            half_extents,
        }
    }

    /// Box around the segment `a`-`b` with a square cross-section of
    /// half-width `radius`.
    pub fn segment(a: &Vector3<f64>, b: &Vector3<f64>, radius: f64) -> Self {
        let d = b - a;
        let len = d.norm();
        let rot = if len < 1e-12 {
            UnitQuaternion::identity()
        } else {
            UnitQuaternion::rotation_between(&Vector3::x(), &d)
                .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::PI))
        };
        Self {
            center: Pose6D::new((a + b) / 2.0, rot),
            half_extents: [len / 2.0, radius, radius],
        }
    }

    pub fn transformed(&self, t: &Pose6D) -> Obb {
        Obb::new(t.compose(&self.center), self.half_extents)
    }

    fn axes(&self) -> Matrix3<f64> {
        self.center.orientation().to_rotation_matrix().into_inner()
    }

    pub fn contains_point(&self, p: &Vector3<f64>) -> bool {
        let local = self.center.inverse().transform_point(p);
        (0..3).all(|i| local[i].abs() <= self.half_extents[i])
    }

    /// The eight corners in the parent frame.
    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let h = self.half_extents;
        let mut out = [Vector3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
            *c = self
                .center
                .transform_point(&Vector3::new(sx * h[0], sy * h[1], sz * h[2]));
        }
        out
    }
}

/// Separating-axis test; boxes that merely touch do not intersect.
pub fn obb_intersect(a: &Obb, b: &Obb) -> bool {
    const EPS: f64 = 1e-9;
    let ra = a.axes();
    let rb = b.axes();
    let ea = Vector3::from(a.half_extents);
    let eb = Vector3::from(b.half_extents);
    let r = ra.transpose() * rb;
    let t_world = b.center.position() - a.center.position();
    let t = ra.transpose() * t_world;
    let abs_r = r.map(|v| v.abs() + EPS);

    for i in 0..3 {
        let rb_proj = eb.x * abs_r[(i, 0)] + eb.y * abs_r[(i, 1)] + eb.z * abs_r[(i, 2)];
        if t[i].abs() > ea[i] + rb_proj {
            return false;
        }
    }
    for j in 0..3 {
        let ra_proj = ea.x * abs_r[(0, j)] + ea.y * abs_r[(1, j)] + ea.z * abs_r[(2, j)];
        let dist = (t.x * r[(0, j)] + t.y * r[(1, j)] + t.z * r[(2, j)]).abs();
        if dist > ra_proj + eb[j] {
            return false;
        }
    }
    for i in 0..3 {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        for j in 0..3 {
            let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
            let ra_proj = ea[i1] * abs_r[(i2, j)] + ea[i2] * abs_r[(i1, j)];
            let rb_proj = eb[j1] * abs_r[(i, j2)] + eb[j2] * abs_r[(i, j1)];
            let dist = (t[i2] * r[(i1, j)] - t[i1] * r[(i2, j)]).abs();
            if dist > ra_proj + rb_proj {
                return false;
            }
        }
    }
    true
}
