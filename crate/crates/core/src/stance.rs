//! Footstep planning from the current stance to a stance goal.
//!
//! Plans are turn-walk-turn: turn in place to a walking heading, walk a
//! straight segment (forward, backward or sideways, whichever needs the fewest
//! steps overall), turn to the goal heading, and land the final steps on the
//! goal feet verbatim.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Pose6D};
use crate::kinematics::Side;

/// Height of the (flat) ground plane, meters.
pub const GROUND_HEIGHT: f64 = 0.0;

pub const DEFAULT_SWING_DURATION: f64 = 1.2;
pub const DEFAULT_TRANSFER_DURATION: f64 = 0.8;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerLimits {
    /// Largest horizontal displacement of one foot in a single step.
    pub max_step_length: f64,
    /// Allowed lateral offset of a foot measured in the other foot's frame.
    pub min_stance_width: f64,
    pub max_stance_width: f64,
    /// Largest yaw change of one foot per step, and largest yaw between feet.
    pub max_step_yaw: f64,
    /// Stance width used for intermediate stances.
    pub nominal_stance_width: f64,
}

impl Default for PlannerLimits {
    fn default() -> Self {
        Self {
            max_step_length: 0.45,
            min_stance_width: 0.15,
            max_stance_width: 0.45,
            max_step_yaw: 0.6,
            nominal_stance_width: 0.25,
        }
    }
}

/// Left and right sole poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stance {
    pub left: Pose6D,
    pub right: Pose6D,
}

impl Stance {
    pub fn new(left: Pose6D, right: Pose6D) -> Self {
        Self { left, right }
    }

    /// Feet side by side around `(x, y)` facing `yaw`.
    pub fn nominal(x: f64, y: f64, yaw: f64, width: f64) -> Self {
        let n = Vector2::new(-yaw.sin(), yaw.cos()) * (width / 2.0);
        Self {
            left: Pose6D::from_xyz_yaw(x + n.x, y + n.y, GROUND_HEIGHT, yaw),
            right: Pose6D::from_xyz_yaw(x - n.x, y - n.y, GROUND_HEIGHT, yaw),
        }
    }

    pub fn foot(&self, side: Side) -> &Pose6D {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn set_foot(&mut self, side: Side, pose: Pose6D) {
        match side {
            Side::Left => self.left = pose,
            Side::Right => self.right = pose,
        }
    }

    /// Horizontal midpoint of the two feet.
    pub fn midpoint(&self) -> Vector2<f64> {
        let m = (self.left.position() + self.right.position()) / 2.0;
        Vector2::new(m.x, m.y)
    }

    /// Mean heading of the feet.
    pub fn yaw(&self) -> f64 {
        let (a, b) = (self.left.yaw(), self.right.yaw());
        wrap_angle(a + wrap_angle(b - a) / 2.0)
    }

    /// Flat pose at the midpoint facing the mean heading.
    pub fn midstance(&self, height: f64) -> Pose6D {
        let m = self.midpoint();
        Pose6D::from_xyz_yaw(m.x, m.y, height, self.yaw())
    }

    pub fn approx_eq(&self, other: &Stance, tol: f64) -> bool {
        same_pose(&self.left, &other.left, tol) && same_pose(&self.right, &other.right, tol)
    }

    /// Applies `t` to both feet.
    pub fn transformed(&self, t: &Pose6D) -> Stance {
        Stance::new(t.compose(&self.left), t.compose(&self.right))
    }
}

fn same_pose(a: &Pose6D, b: &Pose6D, tol: f64) -> bool {
    a.distance_to(b) <= tol && a.angle_to(b) <= tol
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Footstep {
    pub side: Side,
    pub pose: Pose6D,
    pub swing_duration: f64,
    pub transfer_duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootstepPlan {
    /// Stance the plan starts from.
    pub start: Stance,
    pub steps: Vec<Footstep>,
}

impl FootstepPlan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Stance after every step has been taken.
    pub fn final_stance(&self) -> Stance {
        let mut s = self.start;
        for step in &self.steps {
            s.set_foot(step.side, step.pose);
        }
        s
    }

    /// Stance after each step, in order.
    pub fn stances(&self) -> Vec<Stance> {
        let mut s = self.start;
        self.steps
            .iter()
            .map(|step| {
                s.set_foot(step.side, step.pose);
                s
            })
            .collect()
    }

    pub fn duration(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.swing_duration + s.transfer_duration)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("stance goal unreachable: {0}")]
    UnreachableGoal(String),
}

/// One broken plan invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanViolation {
    pub step: usize,
    pub message: String,
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step, self.message)
    }
}

/// Lateral offset of `foot` (on `side`) seen from the other foot, positive
/// when the feet are on their own sides.
fn lateral_width(side: Side, foot: &Pose6D, other: &Pose6D) -> f64 {
    let local = other.inverse().transform_point(foot.position());
    match side {
        Side::Left => local.y,
        Side::Right => -local.y,
    }
}

fn tilt(p: &Pose6D) -> f64 {
    let up = p.transform_vector(&Vector3::z());
    up.z.clamp(-1.0, 1.0).acos()
}

fn horizontal(a: &Pose6D, b: &Pose6D) -> f64 {
    let d = a.position() - b.position();
    d.x.hypot(d.y)
}

fn stance_problems(stance: &Stance, limits: &PlannerLimits) -> Vec<String> {
    let mut out = Vec::new();
    for side in Side::BOTH {
        let foot = stance.foot(side);
        if (foot.position().z - GROUND_HEIGHT).abs() > EPS || tilt(foot) > EPS {
            out.push(format!("{side} foot is not flat on the ground"));
        }
    }
    let w = lateral_width(Side::Left, &stance.left, &stance.right);
    if w < limits.min_stance_width - EPS || w > limits.max_stance_width + EPS {
        out.push(format!(
            "stance width {w:.3} m outside [{}, {}] m",
            limits.min_stance_width, limits.max_stance_width
        ));
    }
    let rel = wrap_angle(stance.left.yaw() - stance.right.yaw()).abs();
    if rel > limits.max_step_yaw + EPS {
        out.push(format!("feet yawed {rel:.3} rad apart, limit {}", limits.max_step_yaw));
    }
    out
}

/// Checks every plan invariant step by step; an empty list means valid.
pub fn validate_plan(plan: &FootstepPlan, limits: &PlannerLimits) -> Vec<PlanViolation> {
    let mut out = Vec::new();
    let mut stance = plan.start;
    let n = plan.steps.len();
    for (i, step) in plan.steps.iter().enumerate() {
        let mut bad = |message: String| out.push(PlanViolation { step: i, message });
        if !(step.swing_duration > 0.0 && step.transfer_duration > 0.0) {
            bad("durations must be positive".into());
        }
        if i > 0 && plan.steps[i - 1].side == step.side && i + 1 != n {
            bad(format!("{} foot steps twice in a row", step.side));
        }
        let prev = stance.foot(step.side);
        let moved = horizontal(prev, &step.pose);
        if moved > limits.max_step_length + EPS {
            bad(format!(
                "{} foot moves {moved:.3} m, limit {}",
                step.side, limits.max_step_length
            ));
        }
        let turned = wrap_angle(step.pose.yaw() - prev.yaw()).abs();
        if turned > limits.max_step_yaw + EPS {
            bad(format!("{} foot turns {turned:.3} rad, limit {}", step.side, limits.max_step_yaw));
        }
        stance.set_foot(step.side, step.pose);
        for problem in stance_problems(&stance, limits) {
            bad(problem);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WalkMode {
    Forward,
    LateralLeft,
    LateralRight,
    Backward,
}

impl WalkMode {
    const ALL: [WalkMode; 4] = [
        WalkMode::Forward,
        WalkMode::LateralLeft,
        WalkMode::LateralRight,
        WalkMode::Backward,
    ];

    /// Facing that walks along `heading` in this mode.
    fn facing(self, heading: f64) -> f64 {
        wrap_angle(match self {
            WalkMode::Forward => heading,
            WalkMode::LateralLeft => heading - FRAC_PI_2,
            WalkMode::LateralRight => heading + FRAC_PI_2,
            WalkMode::Backward => heading + PI,
        })
    }
}

struct Builder<'a> {
    stance: Stance,
    steps: Vec<Footstep>,
    next: Side,
    swing: f64,
    transfer: f64,
    limits: &'a PlannerLimits,
}

impl Builder<'_> {
    fn step(&mut self, side: Side, pose: Pose6D) {
        self.next = side.opposite();
        if same_pose(self.stance.foot(side), &pose, 1e-12) {
            return;
        }
        self.stance.set_foot(side, pose);
        self.steps.push(Footstep {
            side,
            pose,
            swing_duration: self.swing,
            transfer_duration: self.transfer,
        });
    }

    fn pair(&mut self, target: &Stance) {
        let first = self.next;
        self.step(first, *target.foot(first));
        self.step(first.opposite(), *target.foot(first.opposite()));
    }

    fn turn(&mut self, center: Vector2<f64>, from: f64, to: f64, pairs: usize, last: Option<&Stance>) {
        let delta = wrap_angle(to - from);
        for i in 1..=pairs {
            let target = match last {
                Some(goal) if i == pairs => *goal,
                _ => {
                    let yaw = from + delta * i as f64 / pairs as f64;
                    Stance::nominal(center.x, center.y, yaw, self.limits.nominal_stance_width)
                }
            };
            self.pair(&target);
        }
    }

    fn walk(&mut self, mode: WalkMode, from: Vector2<f64>, to: Vector2<f64>, facing: f64, count: usize, last: Option<&Stance>) {
        let w = self.limits.nominal_stance_width;
        match mode {
            WalkMode::Forward | WalkMode::Backward => {
                for k in 1..=count {
                    let side = self.next;
                    let c = from + (to - from) * (k as f64 / count as f64);
                    let pose = match last {
                        Some(goal) if k == count => *goal.foot(side),
                        _ => *Stance::nominal(c.x, c.y, facing, w).foot(side),
                    };
                    self.step(side, pose);
                }
                let side = self.next;
                let pose = match last {
                    Some(goal) => *goal.foot(side),
                    None => *Stance::nominal(to.x, to.y, facing, w).foot(side),
                };
                self.step(side, pose);
            }
            WalkMode::LateralLeft | WalkMode::LateralRight => {
                for k in 1..=count {
                    let c = from + (to - from) * (k as f64 / count as f64);
                    let target = match last {
                        Some(goal) if k == count => *goal,
                        _ => Stance::nominal(c.x, c.y, facing, w),
                    };
                    self.pair(&target);
                }
            }
        }
    }
}

fn turn_pairs(from: f64, to: f64, limits: &PlannerLimits) -> usize {
    let d = wrap_angle(to - from).abs();
    if d <= EPS {
        0
    } else {
        (d / limits.max_step_yaw - 1e-9).ceil().max(1.0) as usize
    }
}

fn walk_count(mode: WalkMode, distance: f64, limits: &PlannerLimits) -> usize {
    match mode {
        WalkMode::Forward | WalkMode::Backward => {
            (2.0 * distance / limits.max_step_length - 1e-9).ceil().max(1.0) as usize
        }
        WalkMode::LateralLeft | WalkMode::LateralRight => {
            let stride = (limits.max_stance_width - limits.nominal_stance_width).min(limits.max_step_length);
            (distance / stride - 1e-9).ceil().max(1.0) as usize
        }
    }
}

fn walk_steps(mode: WalkMode, count: usize) -> usize {
    match mode {
        WalkMode::Forward | WalkMode::Backward => count + 1,
        _ => 2 * count,
    }
}

/// Plans footsteps from `current` to `goal` (both in the world frame).
pub fn plan_to_stance(
    current: &Stance,
    goal: &Stance,
    limits: &PlannerLimits,
    swing_duration: f64,
    transfer_duration: f64,
) -> Result<FootstepPlan, PlanError> {
    if !(swing_duration > 0.0 && transfer_duration > 0.0) {
        return Err(PlanError::UnreachableGoal("step durations must be positive".into()));
    }
    let problems = stance_problems(goal, limits);
    if !problems.is_empty() {
        return Err(PlanError::UnreachableGoal(problems.join("; ")));
    }
    if current.approx_eq(goal, EPS) {
        return Ok(FootstepPlan {
            start: *current,
            steps: Vec::new(),
        });
    }
    let m0 = current.midpoint();
    let yaw0 = current.yaw();
    let mg = goal.midpoint();
    let yaw_g = goal.yaw();
    let d = mg - m0;
    let distance = d.norm();

    // (mode, facing, step estimate), chosen by fewest steps in a fixed tie order.
    let route = if distance <= 1e-6 {
        None
    } else {
        let heading = d.y.atan2(d.x);
        WalkMode::ALL
            .iter()
            .map(|&mode| {
                let facing = mode.facing(heading);
                let cost = 2 * turn_pairs(yaw0, facing, limits)
                    + walk_steps(mode, walk_count(mode, distance, limits))
                    + 2 * turn_pairs(facing, yaw_g, limits);
                (cost, mode, facing)
            })
            .min_by_key(|(cost, ..)| *cost)
            .map(|(_, mode, facing)| (mode, facing))
    };

    let mut last_error = String::new();
    for extra in 0..6 {
        let mut b = Builder {
            stance: *current,
            steps: Vec::new(),
            next: Side::Left,
            swing: swing_duration,
            transfer: transfer_duration,
            limits,
        };
        match route {
            None => {
                let pairs = turn_pairs(yaw0, yaw_g, limits).max(1) + extra;
                b.turn(m0, yaw0, yaw_g, pairs, Some(goal));
            }
            Some((mode, facing)) => {
                let first_turn = turn_pairs(yaw0, facing, limits);
                let last_turn = turn_pairs(facing, yaw_g, limits);
                b.next = match mode {
                    WalkMode::LateralRight => Side::Right,
                    _ => Side::Left,
                };
                if first_turn > 0 {
                    let parity_side = b.next;
                    b.turn(m0, yaw0, facing, first_turn + extra, None);
                    b.next = parity_side;
                }
                let count = walk_count(mode, distance, limits) + extra;
                let walk_last = (last_turn == 0).then_some(goal);
                b.walk(mode, m0, mg, facing, count, walk_last);
                if last_turn > 0 {
                    b.turn(mg, facing, yaw_g, last_turn + extra, Some(goal));
                }
            }
        }
        let plan = FootstepPlan {
            start: *current,
            steps: b.steps,
        };
        let violations = validate_plan(&plan, limits);
        if violations.is_empty() {
            return Ok(plan);
        }
        last_error = violations[0].to_string();
    }
    Err(PlanError::UnreachableGoal(format!(
        "no plan within limits ({last_error})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_stance_is_centered() {
        let s = Stance::nominal(1.0, 2.0, 0.3, 0.25);
        let m = s.midpoint();
        assert!((m - Vector2::new(1.0, 2.0)).norm() < 1e-12);
        assert!((s.yaw() - 0.3).abs() < 1e-12);
        assert!((lateral_width(Side::Left, &s.left, &s.right) - 0.25).abs() < 1e-12);
        assert!((lateral_width(Side::Right, &s.right, &s.left) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn mean_yaw_handles_wraparound() {
        let s = Stance::new(
            Pose6D::from_xyz_yaw(0.0, 0.1, 0.0, PI - 0.1),
            Pose6D::from_xyz_yaw(0.0, -0.1, 0.0, -PI + 0.1),
        );
        assert!((s.yaw().abs() - PI).abs() < 1e-12);
    }
}
