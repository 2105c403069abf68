//! Kinematic humanoid model, forward kinematics and damped least-squares IK.

mod model;
mod solver;

pub use model::{
    BodyBox, Chain, ChainSpec, JointConfiguration, JointSpec, ModelDocument, ModelError,
    RobotModel, SensorMount, Side,
};
pub use solver::{
    chain_values, forward_kinematics, jacobian, link_frames, rotation_error, solve_ik, solve_ik_with,
    IkParams, IkSolution, KinematicsError,
};
