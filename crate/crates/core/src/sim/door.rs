//! Push door with a lever latch, modeled kinematically in the door frame.
//!
//! Door frame: origin on the floor at the center of the opening, +x is the
//! push direction, +z up. The hinge is a vertical axis at the +y edge of the
//! opening. At hinge angle `h` the panel runs from the hinge along
//! `d(h) = (sin h, -cos h)` and its approach-side face points along
//! `n(h) = (-cos h, -sin h)`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::collision::Obb;
use crate::geometry::Pose6D;

pub const MAX_HINGE_ANGLE: f64 = FRAC_PI_2 * 1.1;
pub const MAX_LEVER_ANGLE: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoorGeometry {
    pub opening_width: f64,
    pub opening_height: f64,
    pub wall_thickness: f64,
    /// Width of the wall on each side of the opening.
    pub wall_width: f64,
    pub wall_height: f64,
    pub panel_thickness: f64,
    /// Distance of the lever pivot from the hinge, along the panel.
    pub lever_distance: f64,
    /// Offset of the lever pivot from the panel mid-plane, toward the approach side.
    pub lever_standoff: f64,
    pub lever_height: f64,
    /// Distance from the pivot to the grip point along the handle.
    pub grip_offset: f64,
}

impl Default for DoorGeometry {
    fn default() -> Self {
        Self {
            opening_width: 0.9,
            opening_height: 2.0,
            wall_thickness: 0.1,
            wall_width: 1.0,
            wall_height: 2.3,
            panel_thickness: 0.04,
            lever_distance: 0.82,
            lever_standoff: 0.1,
            lever_height: 0.95,
            grip_offset: 0.08,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoorThresholds {
    /// Hand-to-grip distance within which the lever follows the hand.
    pub lever_track_radius: f64,
    /// Lever angle that frees the latch.
    pub lever_threshold: f64,
    /// Radius of the sphere used for hand/panel contact.
    pub hand_contact_radius: f64,
    /// Fastest the panel may swing, rad/s.
    pub max_hinge_rate: f64,
}

impl Default for DoorThresholds {
    fn default() -> Self {
        Self {
            lever_track_radius: 0.04,
            lever_threshold: 0.52,
            hand_contact_radius: 0.07,
            max_hinge_rate: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoorState {
    pub hinge_angle: f64,
    pub lever_angle: f64,
    pub latch_engaged: bool,
}

impl Default for DoorState {
    fn default() -> Self {
        Self {
            hinge_angle: 0.0,
            lever_angle: 0.0,
            latch_engaged: true,
        }
    }
}

impl DoorGeometry {
    pub fn hinge(&self) -> Vector2<f64> {
        Vector2::new(0.0, self.opening_width / 2.0)
    }

    pub fn panel_direction(h: f64) -> Vector2<f64> {
        Vector2::new(h.sin(), -h.cos())
    }

    pub fn panel_normal(h: f64) -> Vector2<f64> {
        Vector2::new(-h.cos(), -h.sin())
    }

    /// Lever pivot position in the door frame.
    pub fn lever_pivot(&self, h: f64) -> Vector3<f64> {
        let p = self.hinge()
            + Self::panel_direction(h) * self.lever_distance
            + Self::panel_normal(h) * self.lever_standoff;
        Vector3::new(p.x, p.y, self.lever_height)
    }

    /// Pose of the lever pivot with the lever at rest: x along the push
    /// direction, y along the handle (toward the hinge), z up.
    pub fn lever_frame(&self, h: f64) -> Pose6D {
        Pose6D::new(
            self.lever_pivot(h),
            nalgebra::UnitQuaternion::from_axis_angle(&Vector3::z_axis(), h),
        )
    }

    /// Unit vector from pivot to grip at the given angles. The handle points
    /// toward the hinge at rest and rotates downward as the lever turns.
    pub fn handle_direction(h: f64, lever: f64) -> Vector3<f64> {
        let along = -Self::panel_direction(h);
        Vector3::new(along.x * lever.cos(), along.y * lever.cos(), -lever.sin())
    }

    pub fn grip_point(&self, state: &DoorState) -> Vector3<f64> {
        self.lever_pivot(state.hinge_angle)
            + Self::handle_direction(state.hinge_angle, state.lever_angle) * self.grip_offset
    }

    /// Lever angle that points the handle at `p`, before clamping.
    fn lever_angle_toward(&self, h: f64, p: &Vector3<f64>) -> f64 {
        let v = p - self.lever_pivot(h);
        let along = -Self::panel_direction(h);
        let horizontal = v.x * along.x + v.y * along.y;
        (-v.z).atan2(horizontal)
    }

    /// Static walls and lintel in the door frame.
    pub fn static_boxes(&self) -> Vec<Obb> {
        let half_open = self.opening_width / 2.0;
        let t = self.wall_thickness / 2.0;
        let wall_y = half_open + self.wall_width / 2.0;
        let z = self.wall_height / 2.0;
        let lintel_h = (self.wall_height - self.opening_height) / 2.0;
        vec![
            Obb::new(
                Pose6D::translation(0.0, wall_y, z),
                [t, self.wall_width / 2.0, z],
            ),
            Obb::new(
                Pose6D::translation(0.0, -wall_y, z),
                [t, self.wall_width / 2.0, z],
            ),
            Obb::new(
                Pose6D::translation(0.0, 0.0, self.opening_height + lintel_h),
                [t, half_open, lintel_h],
            ),
        ]
    }

    pub fn panel_box(&self, h: f64) -> Obb {
        let c = self.hinge() + Self::panel_direction(h) * (self.opening_width / 2.0);
        Obb::new(
            Pose6D::from_xyz_yaw(c.x, c.y, self.opening_height / 2.0, h),
            [
                self.panel_thickness / 2.0,
                self.opening_width / 2.0,
                self.opening_height / 2.0,
            ],
        )
    }

    /// Advances the door one tick given hand positions in the door frame.
    pub fn update(
        &self,
        state: &DoorState,
        thresholds: &DoorThresholds,
        hands: &[Vector3<f64>],
        dt: f64,
    ) -> DoorState {
        let mut next = *state;
        if let Some(hand) = hands
            .iter()
            .find(|p| (*p - self.grip_point(state)).norm() <= thresholds.lever_track_radius)
        {
            next.lever_angle = self
                .lever_angle_toward(state.hinge_angle, hand)
                .clamp(0.0, MAX_LEVER_ANGLE);
        }
        if next.latch_engaged && next.lever_angle >= thresholds.lever_threshold {
            next.latch_engaged = false;
        }
        if !next.latch_engaged {
            let mut target = next.hinge_angle;
            for hand in hands {
                if let Some(angle) = self.pushed_angle(next.hinge_angle, thresholds, hand) {
                    target = target.max(angle);
                }
            }
            let limit = next.hinge_angle + thresholds.max_hinge_rate * dt;
            next.hinge_angle = target.min(limit).min(MAX_HINGE_ANGLE);
        }
        next
    }

    /// Hinge angle at which the panel just clears a hand sphere that
    /// currently overlaps it, if the hand is pushing on the panel.
    fn pushed_angle(&self, h: f64, thresholds: &DoorThresholds, hand: &Vector3<f64>) -> Option<f64> {
        if hand.z < 0.0 || hand.z > self.opening_height {
            return None;
        }
        let q = Vector2::new(hand.x, hand.y) - self.hinge();
        let rho = q.norm();
        let clearance = thresholds.hand_contact_radius + self.panel_thickness / 2.0;
        if rho <= clearance {
            return None;
        }
        let along = q.dot(&Self::panel_direction(h));
        let s = q.dot(&Self::panel_normal(h));
        if !(0.0..=self.opening_width).contains(&along) || s >= clearance || s < -0.15 {
            return None;
        }
        let alpha = q.x.atan2(-q.y);
        Some(alpha + (clearance / rho).asin())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lever_past_threshold_clears_latch() {
        let g = DoorGeometry::default();
        let th = DoorThresholds::default();
        let state = DoorState {
            lever_angle: 0.6,
            ..DoorState::default()
        };
        let next = g.update(&state, &th, &[], 0.01);
        assert!(!next.latch_engaged);
        assert_eq!(next.hinge_angle, 0.0);
    }

    #[test]
    fn latched_door_does_not_swing() {
        let g = DoorGeometry::default();
        let th = DoorThresholds::default();
        let hand = Vector3::new(0.0, 0.0, 1.0);
        let mut s = DoorState::default();
        for _ in 0..100 {
            s = g.update(&s, &th, &[hand], 0.01);
        }
        assert_eq!(s.hinge_angle, 0.0);
        assert!(s.latch_engaged);
    }

    #[test]
    fn free_door_follows_hand_at_bounded_rate() {
        let g = DoorGeometry::default();
        let th = DoorThresholds::default();
        let mut s = DoorState {
            latch_engaged: false,
            ..DoorState::default()
        };
        let hand = Vector3::new(0.05, 0.0, 1.0);
        let mut prev = 0.0;
        for _ in 0..200 {
            s = g.update(&s, &th, &[hand], 0.01);
            assert!(s.hinge_angle >= prev);
            assert!(s.hinge_angle - prev <= 1.5 * 0.01 + 1e-12);
            prev = s.hinge_angle;
        }
        // Settles where the panel surface clears the hand sphere.
        let q = Vector2::new(0.05, 0.0) - g.hinge();
        let s_dist = q.dot(&DoorGeometry::panel_normal(s.hinge_angle));
        assert!((s_dist - 0.09).abs() < 1e-9, "{s_dist}");
    }

    #[test]
    fn lever_tracks_hand_rotation() {
        let g = DoorGeometry::default();
        let th = DoorThresholds::default();
        let s = DoorState::default();
        let pivot = g.lever_pivot(0.0);
        let hand = pivot + DoorGeometry::handle_direction(0.0, 0.3) * 0.08;
        let next = g.update(&s, &th, &[hand], 0.01);
        assert!((next.lever_angle - 0.3).abs() < 1e-12);
        assert!(next.latch_engaged);
    }

    #[test]
    fn grip_starts_toward_hinge() {
        let g = DoorGeometry::default();
        let grip = g.grip_point(&DoorState::default());
        let pivot = g.lever_pivot(0.0);
        assert!((grip - pivot - Vector3::new(0.0, 0.08, 0.0)).norm() < 1e-12);
        assert!((pivot - Vector3::new(-0.1, 0.45 - 0.82, 0.95)).norm() < 1e-12);
    }
}
