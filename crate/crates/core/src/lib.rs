//! Engine for authoring and executing frame-relative humanoid behaviors.

pub mod action;
pub mod assets;
pub mod executor;
pub mod geometry;
pub mod json;
pub mod kinematics;
pub mod session;
pub mod sim;
pub mod stance;

pub use geometry::{FrameError, FrameTree, Pose6D, WORLD};
pub use kinematics::{JointConfiguration, RobotModel, Side};
pub use action::{Action, ActionKind, ActionSequence, BehaviorError};
