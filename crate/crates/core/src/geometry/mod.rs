//! SE(3) pose algebra and the named reference-frame tree.

mod frames;
mod pose;

pub use frames::{FrameError, FrameRecord, FrameTree, WORLD};
pub use pose::Pose6D;

use std::f64::consts::PI;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}
