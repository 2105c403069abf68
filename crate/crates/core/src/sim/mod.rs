//! Kinematic simulated humanoid and articulated scene.
//!
//! The world advances in fixed ticks of [`DT`] seconds. It owns the session's
//! frame tree: robot frames are rewritten every tick and task frames are
//! registered from averaged fiducial detections.

mod collision;
mod door;
mod perception;
mod scene;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use collision::{obb_intersect, Obb};
pub use door::{DoorGeometry, DoorState, DoorThresholds, MAX_HINGE_ANGLE, MAX_LEVER_ANGLE};
pub use perception::{average_poses, frame_rng, ColoredBox, Detection, PerceptionConfig, PointCloud};
pub use scene::{
    BoxSpec, DoorSpec, Marker, MarkerLink, ObjectSpec, Scene, SceneError, SuccessPredicate, Thresholds,
    SCENE_VERSION,
};

use crate::action::{Action, ActionKind, HandState};
use crate::geometry::{FrameError, FrameTree, Pose6D, WORLD};
use crate::kinematics::{forward_kinematics, link_frames, solve_ik, JointConfiguration, RobotModel, Side};
use crate::stance::{plan_to_stance, FootstepPlan, Stance, GROUND_HEIGHT};

/// Simulator tick, seconds.
pub const DT: f64 = 0.01;
/// Time a hand takes to open or close, seconds.
pub const HAND_ACTUATION_TIME: f64 = 1.0;
/// Height of the swing foot at mid-step, meters.
pub const SWING_APEX: f64 = 0.1;

pub const PELVIS_FRAME: &str = "pelvis";
pub const CHEST_FRAME: &str = "chest";
pub const CAMERA_FRAME: &str = "head_camera";

/// Frame names the robot itself occupies.
pub const ROBOT_FRAMES: [&str; 7] = [
    PELVIS_FRAME,
    CHEST_FRAME,
    CAMERA_FRAME,
    "left_hand",
    "right_hand",
    "left_foot",
    "right_foot",
];

/// Completion tolerances checked against simulator ground truth.
pub const HAND_POSITION_TOLERANCE: f64 = 0.02;
pub const HAND_ORIENTATION_TOLERANCE: f64 = 5.0 * PI / 180.0;
pub const FOOT_POSITION_TOLERANCE: f64 = 0.01;
pub const FOOT_ORIENTATION_TOLERANCE: f64 = 2.0 * PI / 180.0;
pub const JOINT_TOLERANCE: f64 = 5.0 * PI / 180.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispatchError {
    #[error("a task is already running")]
    Busy,
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("{side} hand goal is out of reach (position error {position_error:.4} m, orientation error {orientation_error:.4} rad)")]
    IkUnreachable {
        side: Side,
        position_error: f64,
        orientation_error: f64,
    },
    #[error("{0}")]
    UnreachableGoal(String),
    #[error("joint `{0}` is not part of the commanded arm")]
    InvalidJoint(String),
}

impl DispatchError {
    pub fn code(&self) -> &'static str {
        match self {
            DispatchError::Busy => "AlreadyExecuting",
            DispatchError::UnknownFrame(_) => "UnknownFrame",
            DispatchError::IkUnreachable { .. } => "IkUnreachable",
            DispatchError::UnreachableGoal(_) => "UnreachableGoal",
            DispatchError::InvalidJoint(_) => "InvalidJoint",
        }
    }
}

impl From<FrameError> for DispatchError {
    fn from(e: FrameError) -> Self {
        match e {
            FrameError::UnknownFrame(f) => DispatchError::UnknownFrame(f),
            other => DispatchError::UnknownFrame(other.to_string()),
        }
    }
}

/// How far the active task has come, as seen by the executor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskProgress {
    pub elapsed: f64,
    pub nominal_duration: f64,
    pub motion_finished: bool,
    pub tolerance_met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grasp {
    pub side: Side,
    pub object: String,
    /// Object pose in the hand frame, fixed while grasped.
    pub hand_to_object: Pose6D,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CollisionPair {
    pub robot: String,
    pub scene: String,
}

#[derive(Debug, Clone)]
enum TaskKind {
    Joints {
        start: JointConfiguration,
        goal: JointConfiguration,
        duration: f64,
        /// Hand goals (world) checked on completion.
        hand_goal: Option<(Side, Pose6D)>,
    },
    Steps {
        plan: FootstepPlan,
        /// Stance after each step.
        stances: Vec<Stance>,
    },
    Hand,
}

#[derive(Debug, Clone)]
struct Task {
    kind: TaskKind,
    start_tick: u64,
    nominal: f64,
}

/// Serializable view of the world at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub sim_time: f64,
    pub pelvis: Pose6D,
    pub joints: JointConfiguration,
    pub stance: Stance,
    pub left_hand: Pose6D,
    pub right_hand: Pose6D,
    pub hands: BTreeMap<String, String>,
    pub grasped: Option<Grasp>,
    pub door: Option<DoorState>,
    pub objects: BTreeMap<String, Pose6D>,
    pub collision_ticks: u64,
}

#[derive(Debug, Clone)]
pub struct World {
    model: RobotModel,
    scene: Scene,
    seed: u64,
    ticks: u64,
    stance: Stance,
    pelvis: Pose6D,
    joints: JointConfiguration,
    hand_states: [HandState; 2],
    grasped: Option<Grasp>,
    objects: BTreeMap<String, Pose6D>,
    door: Option<DoorState>,
    frames: FrameTree,
    task: Option<Task>,
    collision_ticks: u64,
    collision_pairs: BTreeSet<CollisionPair>,
    check_collisions: bool,
}

fn side_index(side: Side) -> usize {
    match side {
        Side::Left => 0,
        Side::Right => 1,
    }
}

/// Cubic time scaling with zero end velocities.
fn smoothstep(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn lerp_pose(a: &Pose6D, b: &Pose6D, s: f64) -> Pose6D {
    if s >= 1.0 {
        return *b;
    }
    let p = a.position() + (b.position() - a.position()) * s;
    Pose6D::new(p, a.orientation().slerp(b.orientation(), s))
}

impl World {
    pub fn new(model: RobotModel, scene: Scene, seed: u64) -> Result<Self, SceneError> {
        scene.validate()?;
        for o in &scene.objects {
            if ROBOT_FRAMES.contains(&o.frame.as_str()) || o.frame == WORLD {
                return Err(SceneError::Invalid(format!("object frame `{}` is reserved", o.frame)));
            }
        }
        let stance = scene.robot_start;
        let pelvis = stance.midstance(GROUND_HEIGHT + model.standing_pelvis_height());
        let objects = scene
            .objects
            .iter()
            .map(|o| (o.id.clone(), scene.initial_object_pose(o)))
            .collect();
        let door = scene.door.as_ref().map(|_| DoorState::default());
        let mut world = Self {
            joints: model.zero_configuration(),
            model,
            scene,
            seed,
            ticks: 0,
            stance,
            pelvis,
            hand_states: [HandState::Open, HandState::Open],
            grasped: None,
            objects,
            door,
            frames: FrameTree::new(),
            task: None,
            collision_ticks: 0,
            collision_pairs: BTreeSet::new(),
            check_collisions: true,
        };
        world.init_robot_frames();
        Ok(world)
    }

    fn init_robot_frames(&mut self) {
        let chest = self.model.pelvis_to_chest();
        let sensor = self.model.sensor().offset;
        let f = &mut self.frames;
        f.add_frame(PELVIS_FRAME, WORLD, self.pelvis).expect("fresh tree");
        f.add_frame(CHEST_FRAME, PELVIS_FRAME, chest).expect("fresh tree");
        f.add_frame(CAMERA_FRAME, CHEST_FRAME, sensor).expect("fresh tree");
        for side in Side::BOTH {
            f.add_frame(side.hand_frame(), CHEST_FRAME, Pose6D::identity())
                .expect("fresh tree");
            f.add_frame(side.foot_frame(), WORLD, *self.stance.foot(side))
                .expect("fresh tree");
        }
        self.sync_robot_frames();
    }

    fn sync_robot_frames(&mut self) {
        let pelvis = self.pelvis;
        let stance = self.stance;
        let hands: Vec<_> = Side::BOTH
            .iter()
            .map(|&s| (s, self.hand_in_chest(s)))
            .collect();
        let f = &mut self.frames;
        f.set_transform(PELVIS_FRAME, pelvis).expect("robot frame");
        for (side, pose) in hands {
            f.set_transform(side.hand_frame(), pose).expect("robot frame");
            f.set_transform(side.foot_frame(), *stance.foot(side))
                .expect("robot frame");
        }
    }

    /// Disables per-tick collision checking (it is the most expensive part
    /// of a tick and not every caller needs it).
    pub fn set_collision_checking(&mut self, on: bool) {
        self.check_collisions = on;
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn sim_time(&self) -> f64 {
        self.ticks as f64 * DT
    }

    pub fn frames(&self) -> &FrameTree {
        &self.frames
    }

    pub fn stance(&self) -> &Stance {
        &self.stance
    }

    pub fn pelvis(&self) -> &Pose6D {
        &self.pelvis
    }

    pub fn joints(&self) -> &JointConfiguration {
        &self.joints
    }

    pub fn door(&self) -> Option<&DoorState> {
        self.door.as_ref()
    }

    pub fn grasped(&self) -> Option<&Grasp> {
        self.grasped.as_ref()
    }

    pub fn hand_state(&self, side: Side) -> HandState {
        self.hand_states[side_index(side)]
    }

    /// True world pose of a scene object.
    pub fn object_pose(&self, id: &str) -> Option<&Pose6D> {
        self.objects.get(id)
    }

    pub fn collision_ticks(&self) -> u64 {
        self.collision_ticks
    }

    /// Every distinct pair that collided so far.
    pub fn collision_history(&self) -> &BTreeSet<CollisionPair> {
        &self.collision_pairs
    }

    pub fn is_busy(&self) -> bool {
        self.task.is_some()
    }

    pub fn chest_pose(&self) -> Pose6D {
        self.pelvis.compose(&self.model.pelvis_to_chest())
    }

    pub fn camera_pose(&self) -> Pose6D {
        self.chest_pose().compose(&self.model.sensor().offset)
    }

    fn hand_in_chest(&self, side: Side) -> Pose6D {
        forward_kinematics(&self.model, &self.joints, side.arm_chain()).expect("bundled chains")
    }

    pub fn hand_pose(&self, side: Side) -> Pose6D {
        self.chest_pose().compose(&self.hand_in_chest(side))
    }

    /// Replaces the robot's joint angles outright (clamped to limits).
    pub fn set_joints(&mut self, q: &JointConfiguration) {
        let mut next = self.joints.clone();
        next.merge(q);
        self.joints = self.model.clamp_configuration(&next);
        self.sync_robot_frames();
    }

    /// Teleports the robot to a stance, pelvis at its midstance.
    pub fn set_stance(&mut self, stance: Stance) {
        self.stance = stance;
        self.pelvis = stance.midstance(GROUND_HEIGHT + self.model.standing_pelvis_height());
        self.sync_robot_frames();
    }

    pub fn set_door_state(&mut self, state: DoorState) {
        if self.door.is_some() {
            self.door = Some(state);
        }
    }

    fn door_pose(&self) -> Option<Pose6D> {
        let spec = self.scene.door.as_ref()?;
        self.objects.get(&spec.object).copied()
    }

    // ---- perception -------------------------------------------------------

    fn marker_poses(&self) -> Vec<(u32, Pose6D)> {
        self.scene.markers.iter().map(|m| (m.id, m.pose)).collect()
    }

    /// Detections in perception frame `frame` (deterministic in seed and frame).
    pub fn detect(&self, frame: u64) -> Vec<Detection> {
        let mut rng = frame_rng(self.seed, frame);
        self.scene
            .perception
            .detect(&self.camera_pose(), &self.marker_poses(), self.sim_time(), &mut rng)
    }

    /// Scene geometry in the world frame with display colors.
    pub fn scene_boxes(&self) -> Vec<(String, ColoredBox)> {
        let mut out = Vec::new();
        for o in &self.scene.objects {
            let pose = self.objects[&o.id];
            for (i, b) in o.boxes.iter().enumerate() {
                out.push((
                    format!("{}/{}", o.id, i),
                    ColoredBox {
                        obb: b.obb().transformed(&pose),
                        color: o.color,
                    },
                ));
            }
        }
        if let (Some(spec), Some(pose), Some(state)) = (&self.scene.door, self.door_pose(), &self.door) {
            for (i, b) in spec.geometry.static_boxes().into_iter().enumerate() {
                let name = ["wall_left", "wall_right", "lintel"][i.min(2)];
                out.push((
                    format!("{}/{}", spec.object, name),
                    ColoredBox {
                        obb: b.transformed(&pose),
                        color: self.scene.object(&spec.object).map(|o| o.color).unwrap_or([128; 3]),
                    },
                ));
            }
            out.push((
                format!("{}/panel", spec.object),
                ColoredBox {
                    obb: spec.geometry.panel_box(state.hinge_angle).transformed(&pose),
                    color: spec.panel_color,
                },
            ));
        }
        out
    }

    /// Noisy point cloud for perception frame `frame`.
    pub fn point_cloud(&self, frame: u64) -> PointCloud {
        let mut rng = frame_rng(self.seed ^ 0x5EED_C10D, frame);
        let boxes: Vec<ColoredBox> = self.scene_boxes().into_iter().map(|(_, b)| b).collect();
        self.scene
            .perception
            .point_cloud(&self.camera_pose(), &boxes, self.sim_time(), &mut rng)
    }

    /// Registers task frames from the mean of the configured number of
    /// detection frames. Returns the frames that were added.
    pub fn register_task_frames(&mut self) -> Vec<String> {
        let camera = self.camera_pose();
        let count = self.scene.perception.registration_frames.max(1) as u64;
        let mut seen: BTreeMap<u32, Vec<Pose6D>> = BTreeMap::new();
        for frame in 0..count {
            for d in self.detect(frame) {
                seen.entry(d.marker_id).or_default().push(camera.compose(&d.pose));
            }
        }
        let mut added = Vec::new();
        for (id, poses) in &seen {
            let estimate = average_poses(poses).expect("non-empty");
            let name = format!("fiducial_{id}");
            self.frames.upsert(&name, WORLD, estimate).expect("valid frame");
            added.push(name);
        }
        let objects = self.scene.objects.clone();
        for o in &objects {
            let Some(link) = &o.marker else { continue };
            if !seen.contains_key(&link.id) {
                continue;
            }
            let parent = format!("fiducial_{}", link.id);
            self.frames
                .upsert(&o.frame, &parent, link.marker_to_object)
                .expect("valid frame");
            added.push(o.frame.clone());
        }
        if let Some(spec) = self.scene.door.clone() {
            if let Some(door_obj) = self.scene.object(&spec.object) {
                let door_frame = door_obj.frame.clone();
                if self.frames.contains(&door_frame) {
                    let mut lever = spec.geometry.lever_frame(0.0);
                    if let Some(bias) = &spec.calibration_bias {
                        lever = lever.compose(bias);
                    }
                    self.frames
                        .upsert(&spec.lever_frame, &door_frame, lever)
                        .expect("valid frame");
                    added.push(spec.lever_frame);
                }
            }
        }
        added
    }

    // ---- collisions -------------------------------------------------------

    /// Robot collision volumes in the world frame (hands excluded).
    pub fn robot_boxes(&self) -> Vec<(String, Obb)> {
        let chest = self.chest_pose();
        let mut out = Vec::new();
        for b in self.model.body_boxes() {
            let link = if b.link == PELVIS_FRAME { self.pelvis } else { chest };
            out.push((b.link.clone(), Obb::new(link.compose(&b.center), b.half_extents)));
        }
        let r = self.model.arm_radius();
        for side in Side::BOTH {
            let frames = link_frames(&self.model, &self.joints, side.arm_chain()).expect("bundled chains");
            // Joint frames 0, 3 and 4 sit at the shoulder, elbow and wrist.
            let p = |i: usize| chest.transform_point(frames[i].position());
            out.push((format!("{side}_upper_arm"), Obb::segment(&p(0), &p(3), r)));
            out.push((format!("{side}_forearm"), Obb::segment(&p(3), &p(4), r)));
        }
        out
    }

    /// Robot/scene box pairs that currently overlap.
    pub fn check_collisions(&self) -> Vec<CollisionPair> {
        let robot = self.robot_boxes();
        let scene = self.scene_boxes();
        let mut out = Vec::new();
        for (rn, rb) in &robot {
            for (sn, sb) in &scene {
                if self
                    .grasped
                    .as_ref()
                    .is_some_and(|g| sn.starts_with(&format!("{}/", g.object)))
                {
                    continue;
                }
                if obb_intersect(rb, &sb.obb) {
                    out.push(CollisionPair {
                        robot: rn.clone(),
                        scene: sn.clone(),
                    });
                }
            }
        }
        out
    }

    // ---- dispatch ---------------------------------------------------------

    /// Starts executing `action`. Fails before any motion if the action
    /// cannot be carried out from the current state.
    pub fn dispatch(&mut self, action: &Action) -> Result<f64, DispatchError> {
        if self.task.is_some() {
            return Err(DispatchError::Busy);
        }
        let parent = self.frames.resolve_world(&action.parent_frame)?;
        let (kind, nominal) = match &action.kind {
            ActionKind::HandPose(h) => {
                let goal_world = parent.compose(&h.goal);
                let target = self.chest_pose().inverse().compose(&goal_world);
                let sol = solve_ik(&self.model, h.side.arm_chain(), &target, &self.joints)
                    .expect("bundled chains");
                if !sol.converged {
                    return Err(DispatchError::IkUnreachable {
                        side: h.side,
                        position_error: sol.position_error,
                        orientation_error: sol.orientation_error,
                    });
                }
                (
                    TaskKind::Joints {
                        start: self.joints.clone(),
                        goal: sol.configuration,
                        duration: h.trajectory_duration,
                        hand_goal: Some((h.side, goal_world)),
                    },
                    h.trajectory_duration,
                )
            }
            ActionKind::ArmJointAngles(a) => {
                let allowed: BTreeSet<&str> = a
                    .side
                    .sides()
                    .iter()
                    .flat_map(|s| {
                        let chain = self.model.arm(*s).expect("bundled chains");
                        self.model.chain_joint_names(chain)
                    })
                    .collect();
                if let Some((bad, _)) = a.angles.iter().find(|(j, _)| !allowed.contains(j)) {
                    return Err(DispatchError::InvalidJoint(bad.to_string()));
                }
                let mut goal = self.joints.clone();
                goal.merge(&a.angles);
                (
                    TaskKind::Joints {
                        start: self.joints.clone(),
                        goal: self.model.clamp_configuration(&goal),
                        duration: a.trajectory_duration,
                        hand_goal: None,
                    },
                    a.trajectory_duration,
                )
            }
            ActionKind::StancePose(s) => {
                let flat = |p: &Pose6D| parent.compose(p).flattened(GROUND_HEIGHT);
                let goal = Stance::new(flat(&s.left_foot), flat(&s.right_foot));
                let plan = plan_to_stance(
                    &self.stance,
                    &goal,
                    &self.scene.planner,
                    s.swing_duration,
                    s.transfer_duration,
                )
                .map_err(|e| DispatchError::UnreachableGoal(e.to_string()))?;
                let nominal = plan.duration();
                let stances = plan.stances();
                (TaskKind::Steps { plan, stances }, nominal)
            }
            ActionKind::HandConfiguration(h) => {
                self.actuate_hand(h.side, h.state);
                (TaskKind::Hand, HAND_ACTUATION_TIME)
            }
        };
        self.task = Some(Task {
            kind,
            start_tick: self.ticks,
            nominal,
        });
        Ok(nominal)
    }

    fn actuate_hand(&mut self, side: Side, state: HandState) {
        self.hand_states[side_index(side)] = state;
        let hand = self.hand_pose(side);
        match state {
            HandState::Close => {
                if self.grasped.is_some() {
                    return;
                }
                let radius = self.scene.thresholds.grasp_radius;
                let mut best: Option<(f64, String)> = None;
                for o in &self.scene.objects {
                    let pose = self.objects[&o.id];
                    for gp in &o.grasp_points {
                        let d = (pose.compose(gp).position() - hand.position()).norm();
                        if d <= radius && best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                            best = Some((d, o.id.clone()));
                        }
                    }
                }
                if let Some((_, id)) = best {
                    let pose = self.objects[&id];
                    self.grasped = Some(Grasp {
                        side,
                        object: id.clone(),
                        hand_to_object: hand.inverse().compose(&pose),
                    });
                    let frame = self.scene.object(&id).map(|o| o.frame.clone());
                    if let Some(frame) = frame.filter(|f| self.frames.contains(f)) {
                        self.frames
                            .set_parent(&frame, side.hand_frame())
                            .expect("hand frames never descend from task frames");
                    }
                }
            }
            HandState::Open => {
                if self.grasped.as_ref().is_some_and(|g| g.side == side) {
                    let g = self.grasped.take().expect("checked");
                    let frame = self.scene.object(&g.object).map(|o| o.frame.clone());
                    if let Some(frame) = frame.filter(|f| self.frames.contains(f)) {
                        self.frames.set_parent(&frame, WORLD).expect("world is never a descendant");
                    }
                }
            }
        }
    }

    /// Progress of the running task, if any.
    pub fn progress(&self) -> Option<TaskProgress> {
        let task = self.task.as_ref()?;
        let elapsed = (self.ticks - task.start_tick) as f64 * DT;
        let done = elapsed >= task.nominal - 1e-9;
        let tolerance_met = match &task.kind {
            TaskKind::Joints { goal, hand_goal, .. } => match hand_goal {
                Some((side, target)) => {
                    let hand = self.hand_pose(*side);
                    hand.distance_to(target) <= HAND_POSITION_TOLERANCE
                        && hand.angle_to(target) <= HAND_ORIENTATION_TOLERANCE
                }
                None => goal
                    .iter()
                    .all(|(j, v)| self.joints.get(j).is_some_and(|c| (c - v).abs() <= JOINT_TOLERANCE)),
            },
            TaskKind::Steps { plan, .. } => {
                let goal = plan.final_stance();
                Side::BOTH.iter().all(|&s| {
                    let foot = self.stance.foot(s);
                    let g = goal.foot(s);
                    foot.distance_to(g) <= FOOT_POSITION_TOLERANCE
                        && foot.angle_to(g) <= FOOT_ORIENTATION_TOLERANCE
                })
            }
            TaskKind::Hand => true,
        };
        Some(TaskProgress {
            elapsed,
            nominal_duration: task.nominal,
            motion_finished: done,
            tolerance_met,
        })
    }

    /// Ends the running task. The robot stays where it is, except that a
    /// foot in the air is put down on its target.
    pub fn finish_task(&mut self) {
        if let Some(Task {
            kind: TaskKind::Steps { plan, stances },
            start_tick,
            ..
        }) = self.task.take()
        {
            let elapsed = (self.ticks - start_tick) as f64 * DT;
            let mut t = 0.0;
            for (step, after) in plan.steps.iter().zip(&stances) {
                let end_swing = t + step.swing_duration;
                t = end_swing + step.transfer_duration;
                if elapsed < t {
                    self.set_stance(*after);
                    return;
                }
            }
            self.set_stance(plan.final_stance());
        }
    }

    // ---- stepping ---------------------------------------------------------

    /// Advances the world by one tick.
    pub fn step(&mut self) {
        self.ticks += 1;
        if let Some(task) = &self.task {
            let elapsed = (self.ticks - task.start_tick) as f64 * DT;
            match &task.kind {
                TaskKind::Joints {
                    start,
                    goal,
                    duration,
                    ..
                } => {
                    self.joints = if elapsed >= *duration - 1e-9 {
                        goal.clone()
                    } else {
                        let s = smoothstep(elapsed / duration);
                        let mut q = start.clone();
                        for (j, g) in goal.iter() {
                            let a = start.get(j).unwrap_or(g);
                            q.set(j, a + (g - a) * s);
                        }
                        q
                    };
                }
                TaskKind::Steps { plan, stances } => {
                    let (stance, pelvis) = self.walk_state(plan, stances, elapsed);
                    self.stance = stance;
                    self.pelvis = pelvis;
                }
                TaskKind::Hand => {}
            }
        }
        self.sync_robot_frames();
        if let Some(g) = &self.grasped {
            let pose = self.hand_pose(g.side).compose(&g.hand_to_object);
            self.objects.insert(g.object.clone(), pose);
        }
        self.update_door();
        if self.check_collisions {
            let pairs = self.check_collisions();
            if !pairs.is_empty() {
                self.collision_ticks += 1;
                self.collision_pairs.extend(pairs);
            }
        }
    }

    fn walk_state(&self, plan: &FootstepPlan, stances: &[Stance], elapsed: f64) -> (Stance, Pose6D) {
        let height = GROUND_HEIGHT + self.model.standing_pelvis_height();
        let mut before = plan.start;
        let mut t = 0.0;
        for (step, after) in plan.steps.iter().zip(stances) {
            let swing_end = t + step.swing_duration;
            let transfer_end = swing_end + step.transfer_duration;
            if elapsed < swing_end {
                let s = smoothstep((elapsed - t) / step.swing_duration);
                let mut foot = lerp_pose(before.foot(step.side), &step.pose, s);
                let lift = 4.0 * SWING_APEX * s * (1.0 - s);
                foot = foot.with_position(foot.position() + Vector3::new(0.0, 0.0, lift));
                let mut stance = before;
                stance.set_foot(step.side, foot);
                return (stance, before.midstance(height));
            }
            if elapsed < transfer_end {
                let s = smoothstep((elapsed - swing_end) / step.transfer_duration);
                let pelvis = lerp_pose(&before.midstance(height), &after.midstance(height), s);
                return (*after, pelvis);
            }
            before = *after;
            t = transfer_end;
        }
        (before, before.midstance(height))
    }

    fn update_door(&mut self) {
        let (Some(spec), Some(pose), Some(state)) = (&self.scene.door, self.door_pose(), self.door) else {
            return;
        };
        let to_door = pose.inverse();
        let hands: Vec<Vector3<f64>> = Side::BOTH
            .iter()
            .map(|&s| to_door.transform_point(self.hand_pose(s).position()))
            .collect();
        self.door = Some(spec.geometry.update(&state, &self.scene.thresholds.door(), &hands, DT));
    }

    /// Clears the running task once it is complete or abandoned.
    pub fn clear_task(&mut self) {
        self.finish_task();
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            sim_time: self.sim_time(),
            pelvis: self.pelvis,
            joints: self.joints.clone(),
            stance: self.stance,
            left_hand: self.hand_pose(Side::Left),
            right_hand: self.hand_pose(Side::Right),
            hands: Side::BOTH
                .iter()
                .map(|&s| (s.as_str().to_string(), self.hand_state(s).as_str().to_string()))
                .collect(),
            grasped: self.grasped.clone(),
            door: self.door,
            objects: self.objects.clone(),
            collision_ticks: self.collision_ticks,
        }
    }

    /// Evaluates the scene's success predicate against the current state.
    pub fn success(&self) -> Result<(), String> {
        match &self.scene.success {
            SuccessPredicate::None => Ok(()),
            SuccessPredicate::DoorTraversal { min_hinge_angle } => {
                let pose = self.door_pose().ok_or("scene has no door")?;
                let pelvis = pose.inverse().transform_point(self.pelvis.position());
                let hinge = self.door.map(|d| d.hinge_angle).unwrap_or(0.0);
                if pelvis.x <= 0.0 {
                    return Err(format!("pelvis is {:.3} m short of the door plane", -pelvis.x));
                }
                if hinge < *min_hinge_angle {
                    return Err(format!("door opened to {hinge:.3} rad, need {min_hinge_angle}"));
                }
                if self.collision_ticks > 0 {
                    let pairs: Vec<String> = self
                        .collision_pairs
                        .iter()
                        .map(|p| format!("{}~{}", p.robot, p.scene))
                        .collect();
                    return Err(format!(
                        "{} ticks in collision ({})",
                        self.collision_ticks,
                        pairs.join(", ")
                    ));
                }
                Ok(())
            }
            SuccessPredicate::ObjectPlaced {
                object,
                relative_to,
                target,
                tolerance,
            } => {
                let obj = self.objects.get(object).ok_or("unknown object")?;
                let base = self.objects.get(relative_to).ok_or("unknown object")?;
                let goal = base.compose(target);
                let err = obj.distance_to(&goal);
                if self.grasped.as_ref().is_some_and(|g| &g.object == object) {
                    return Err(format!("`{object}` is still grasped"));
                }
                if err > *tolerance {
                    return Err(format!("`{object}` is {err:.3} m from its place pose"));
                }
                Ok(())
            }
        }
    }
}
