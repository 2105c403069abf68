//! Authored behaviors: typed, frame-relative actions in a linear sequence.

mod codec;

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::geometry::{FrameTree, Pose6D};
use crate::kinematics::{JointConfiguration, Side};

pub use codec::{action_from_value, action_to_value};

/// Current behavior file format version.
pub const FORMAT_VERSION: &str = "1";

/// Allowed distance between the two feet of a stance goal, meters.
pub const FEET_SEPARATION_BAND: [f64; 2] = [0.15, 0.6];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BehaviorError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown action kind `{kind}` (action {index})")]
    UnknownKind { index: usize, kind: String },
    #[error("invalid `{field}`{}: {message}", index.map(|i| format!(" in action {i}")).unwrap_or_default())]
    Schema {
        field: String,
        index: Option<usize>,
        message: String,
    },
    #[error("behavior does not validate: {}", format_violations(.0))]
    Validation(Vec<Violation>),
    #[error("index {index} out of range for a sequence of {len} actions")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("cannot access `{path}`: {message}")]
    Io { path: String, message: String },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// One broken invariant of an action or sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub index: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "action {i}: `{}` {}", self.field, self.message),
            None => write!(f, "`{}` {}", self.field, self.message),
        }
    }
}

/// Which arm(s) an [`ArmJointAngles`] action drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArmSelection {
    Left,
    Right,
    Both,
}

impl ArmSelection {
    pub fn as_str(self) -> &'static str {
        match self {
            ArmSelection::Left => "left",
            ArmSelection::Right => "right",
            ArmSelection::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "left" => Some(ArmSelection::Left),
            "right" => Some(ArmSelection::Right),
            "both" => Some(ArmSelection::Both),
            _ => None,
        }
    }

    pub fn sides(self) -> &'static [Side] {
        match self {
            ArmSelection::Left => &[Side::Left],
            ArmSelection::Right => &[Side::Right],
            ArmSelection::Both => &Side::BOTH,
        }
    }
}

impl From<Side> for ArmSelection {
    fn from(side: Side) -> Self {
        match side {
            Side::Left => ArmSelection::Left,
            Side::Right => ArmSelection::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HandState {
    Open,
    Close,
}

impl HandState {
    pub fn as_str(self) -> &'static str {
        match self {
            HandState::Open => "open",
            HandState::Close => "close",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "open" => Some(HandState::Open),
            "close" => Some(HandState::Close),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StancePose {
    pub left_foot: Pose6D,
    pub right_foot: Pose6D,
    pub swing_duration: f64,
    pub transfer_duration: f64,
}

impl StancePose {
    pub fn foot(&self, side: Side) -> &Pose6D {
        match side {
            Side::Left => &self.left_foot,
            Side::Right => &self.right_foot,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandPose {
    pub side: Side,
    pub goal: Pose6D,
    pub trajectory_duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandConfiguration {
    pub side: Side,
    pub state: HandState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmJointAngles {
    pub side: ArmSelection,
    pub angles: JointConfiguration,
    pub trajectory_duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionKind {
    StancePose(StancePose),
    HandPose(HandPose),
    HandConfiguration(HandConfiguration),
    ArmJointAngles(ArmJointAngles),
}

impl ActionKind {
    pub fn name(&self) -> &'static str {
        match self {
            ActionKind::StancePose(_) => "stance_pose",
            ActionKind::HandPose(_) => "hand_pose",
            ActionKind::HandConfiguration(_) => "hand_configuration",
            ActionKind::ArmJointAngles(_) => "arm_joint_angles",
        }
    }
}

pub const ACTION_KINDS: [&str; 4] = [
    "stance_pose",
    "hand_pose",
    "hand_configuration",
    "arm_joint_angles",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub description: String,
    pub parent_frame: String,
    pub kind: ActionKind,
}

impl Action {
    pub fn new(description: impl Into<String>, parent_frame: impl Into<String>, kind: ActionKind) -> Self {
        Self {
            description: description.into(),
            parent_frame: parent_frame.into(),
            kind,
        }
    }

    pub fn stance(
        description: &str,
        parent_frame: &str,
        left_foot: Pose6D,
        right_foot: Pose6D,
        swing_duration: f64,
        transfer_duration: f64,
    ) -> Self {
        Self::new(
            description,
            parent_frame,
            ActionKind::StancePose(StancePose {
                left_foot,
                right_foot,
                swing_duration,
                transfer_duration,
            }),
        )
    }

    pub fn hand_pose(description: &str, parent_frame: &str, side: Side, goal: Pose6D, duration: f64) -> Self {
        Self::new(
            description,
            parent_frame,
            ActionKind::HandPose(HandPose {
                side,
                goal,
                trajectory_duration: duration,
            }),
        )
    }

    pub fn hand_configuration(description: &str, parent_frame: &str, side: Side, state: HandState) -> Self {
        Self::new(
            description,
            parent_frame,
            ActionKind::HandConfiguration(HandConfiguration { side, state }),
        )
    }

    pub fn arm_joint_angles(
        description: &str,
        parent_frame: &str,
        side: ArmSelection,
        angles: JointConfiguration,
        duration: f64,
    ) -> Self {
        Self::new(
            description,
            parent_frame,
            ActionKind::ArmJointAngles(ArmJointAngles {
                side,
                angles,
                trajectory_duration: duration,
            }),
        )
    }

    /// Checks the value-level invariants of this action.
    pub fn violations(&self, index: Option<usize>) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |field: &str, message: String| {
            out.push(Violation {
                index,
                field: field.to_string(),
                message,
            })
        };
        if self.description.trim().is_empty() {
            bad("description", "must not be empty".into());
        }
        if self.parent_frame.trim().is_empty() {
            bad("parent_frame", "must not be empty".into());
        }
        let mut duration = |field: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                bad(field, format!("must be positive, got {v}"));
            }
        };
        match &self.kind {
            ActionKind::StancePose(s) => {
                duration("swing_duration", s.swing_duration);
                duration("transfer_duration", s.transfer_duration);
                let sep = (s.left_foot.position() - s.right_foot.position()).norm();
                if !(FEET_SEPARATION_BAND[0]..=FEET_SEPARATION_BAND[1]).contains(&sep) {
                    bad(
                        "right_foot",
                        format!(
                            "feet separation {sep:.3} m outside [{}, {}] m",
                            FEET_SEPARATION_BAND[0], FEET_SEPARATION_BAND[1]
                        ),
                    );
                }
            }
            ActionKind::HandPose(h) => duration("trajectory_duration", h.trajectory_duration),
            ActionKind::HandConfiguration(_) => {}
            ActionKind::ArmJointAngles(a) => {
                duration("trajectory_duration", a.trajectory_duration);
                if a.angles.is_empty() {
                    bad("angles", "must name at least one joint".into());
                }
                if a.angles.iter().any(|(_, v)| !v.is_finite()) {
                    bad("angles", "must be finite".into());
                }
            }
        }
        out
    }
}

/// An action whose parent frame is missing from the frame tree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameIssue {
    pub index: usize,
    pub frame: String,
}

impl fmt::Display for FrameIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "action {} references unknown frame `{}`", self.index, self.frame)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSequence {
    pub name: String,
    pub version: String,
    pub task_frame: String,
    pub actions: Vec<Action>,
}

impl ActionSequence {
    pub fn new(name: impl Into<String>, task_frame: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            version: FORMAT_VERSION.to_string(),
            task_frame: task_frame.into(),
            actions: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Action> {
        self.actions.get(index)
    }

    pub fn descriptions(&self) -> Vec<&str> {
        self.actions.iter().map(|a| a.description.as_str()).collect()
    }

    pub fn insert(&mut self, index: usize, action: Action) -> Result<(), BehaviorError> {
        if index > self.actions.len() {
            return Err(self.out_of_range(index));
        }
        self.actions.insert(index, action);
        Ok(())
    }

    pub fn push(&mut self, action: Action) {
        self.actions.push(action);
    }

    pub fn remove(&mut self, index: usize) -> Result<Action, BehaviorError> {
        if index >= self.actions.len() {
            return Err(self.out_of_range(index));
        }
        Ok(self.actions.remove(index))
    }

    /// Replaces the action at `index`, returning the previous one.
    pub fn update(&mut self, index: usize, action: Action) -> Result<Action, BehaviorError> {
        match self.actions.get_mut(index) {
            Some(slot) => Ok(std::mem::replace(slot, action)),
            None => Err(self.out_of_range(index)),
        }
    }

    /// Moves the action at `from` so that it ends up at index `to`.
    pub fn move_action(&mut self, from: usize, to: usize) -> Result<(), BehaviorError> {
        let len = self.actions.len();
        if from >= len {
            return Err(self.out_of_range(from));
        }
        if to >= len {
            return Err(self.out_of_range(to));
        }
        let a = self.actions.remove(from);
        self.actions.insert(to, a);
        Ok(())
    }

    fn out_of_range(&self, index: usize) -> BehaviorError {
        BehaviorError::IndexOutOfRange {
            index,
            len: self.actions.len(),
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |field: &str, message: &str| {
            out.push(Violation {
                index: None,
                field: field.into(),
                message: message.into(),
            })
        };
        if self.name.trim().is_empty() {
            bad("name", "must not be empty");
        }
        if self.version != FORMAT_VERSION {
            bad("version", "unsupported format version");
        }
        if self.task_frame.trim().is_empty() {
            bad("task_frame", "must not be empty");
        }
        for (i, a) in self.actions.iter().enumerate() {
            out.extend(a.violations(Some(i)));
        }
        out
    }

    /// One issue per action whose parent frame is not in `tree`.
    pub fn validate_against_frames(&self, tree: &FrameTree) -> Vec<FrameIssue> {
        self.actions
            .iter()
            .enumerate()
            .filter(|(_, a)| !tree.contains(&a.parent_frame))
            .map(|(index, a)| FrameIssue {
                index,
                frame: a.parent_frame.clone(),
            })
            .collect()
    }

    /// Canonical, newline-terminated file encoding.
    pub fn to_canonical_string(&self) -> Result<String, BehaviorError> {
        let violations = self.violations();
        if !violations.is_empty() {
            return Err(BehaviorError::Validation(violations));
        }
        Ok(crate::json::to_pretty(&codec::sequence_to_value(self)))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, BehaviorError> {
        self.to_canonical_string().map(String::into_bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BehaviorError> {
        let value = crate::json::parse(bytes).map_err(|e| BehaviorError::Parse {
            line: e.line,
            column: e.column,
            message: e.message,
        })?;
        codec::sequence_from_value(&value)
    }

    pub fn to_value(&self) -> serde_json::Value {
        codec::sequence_to_value(self)
    }

    pub fn from_value(value: &serde_json::Value) -> Result<Self, BehaviorError> {
        codec::sequence_from_value(value)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BehaviorError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| BehaviorError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BehaviorError> {
        let path = path.as_ref();
        let text = self.to_canonical_string()?;
        std::fs::write(path, text).map_err(|e| BehaviorError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}
