use nalgebra::{DMatrix, DVector, Matrix6, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{Chain, JointConfiguration, RobotModel};
use crate::geometry::Pose6D;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KinematicsError {
    #[error("unknown chain `{0}`")]
    UnknownChain(String),
    #[error("configuration is missing joint `{0}`")]
    MissingJoint(String),
}

/// Damped least-squares parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkParams {
    pub damping: f64,
    /// Largest per-joint change in a single iteration, radians.
    pub max_step: f64,
    pub max_iterations: usize,
    /// Meters of error per radian of orientation error.
    pub orientation_weight: f64,
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
    /// Iteration stops early once both errors fall below this.
    pub refine_tolerance: f64,
    /// Iterations without a 1% cost improvement before the solver restarts
    /// from the next deterministic start configuration.
    pub stall_window: usize,
    /// Extra start configurations tried after the seed stalls.
    pub restarts: usize,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            damping: 0.05,
            max_step: 0.2,
            max_iterations: 200,
            orientation_weight: 0.5,
            position_tolerance: 1e-3,
            orientation_tolerance: 0.01,
            refine_tolerance: 1e-10,
            stall_window: 10,
            restarts: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkSolution {
    pub chain: String,
    pub configuration: JointConfiguration,
    /// Hand pose in the chest frame produced by `configuration`.
    pub achieved_pose: Pose6D,
    pub position_error: f64,
    pub orientation_error: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn chain_by_name<'m>(model: &'m RobotModel, chain: &str) -> Result<&'m Chain, KinematicsError> {
    model
        .chain(chain)
        .ok_or_else(|| KinematicsError::UnknownChain(chain.to_string()))
}

/// Extracts the chain's joint values in chain order.
pub fn chain_values(
    model: &RobotModel,
    chain: &Chain,
    q: &JointConfiguration,
) -> Result<Vec<f64>, KinematicsError> {
    chain
        .joints
        .iter()
        .map(|&i| {
            let name = &model.joints()[i].name;
            q.get(name)
                .ok_or_else(|| KinematicsError::MissingJoint(name.clone()))
        })
        .collect()
}

struct ChainPoses {
    end_effector: Pose6D,
    /// Per joint: world (chest-frame) axis and joint origin.
    axes: Vec<(Vector3<f64>, Vector3<f64>)>,
}

fn chain_poses(model: &RobotModel, chain: &Chain, values: &[f64]) -> ChainPoses {
    let mut pose = Pose6D::identity();
    let mut axes = Vec::with_capacity(values.len());
    for (&idx, &angle) in chain.joints.iter().zip(values) {
        let joint = &model.joints()[idx];
        pose = pose.compose(&joint.offset);
        let axis = joint.axis_vector();
        axes.push((pose.transform_vector(&axis), *pose.position()));
        pose = pose.compose(&Pose6D::from_axis_angle(&axis, angle));
    }
    ChainPoses {
        end_effector: pose.compose(&chain.end_effector_offset),
        axes,
    }
}

/// Hand pose in the chest frame for the named chain.
pub fn forward_kinematics(
    model: &RobotModel,
    q: &JointConfiguration,
    chain: &str,
) -> Result<Pose6D, KinematicsError> {
    let chain = chain_by_name(model, chain)?;
    let values = chain_values(model, chain, q)?;
    Ok(chain_poses(model, chain, &values).end_effector)
}

/// Chest-frame pose of every joint frame along the chain (after the joint's
/// rotation), followed by the hand pose.
pub fn link_frames(
    model: &RobotModel,
    q: &JointConfiguration,
    chain: &str,
) -> Result<Vec<Pose6D>, KinematicsError> {
    let chain = chain_by_name(model, chain)?;
    let values = chain_values(model, chain, q)?;
    let mut pose = Pose6D::identity();
    let mut out = Vec::with_capacity(values.len() + 1);
    for (&idx, &angle) in chain.joints.iter().zip(&values) {
        let joint = &model.joints()[idx];
        pose = pose
            .compose(&joint.offset)
            .compose(&Pose6D::from_axis_angle(&joint.axis_vector(), angle));
        out.push(pose);
    }
    out.push(pose.compose(&chain.end_effector_offset));
    Ok(out)
}

/// Geometric Jacobian in the chest frame: rows 0..3 linear velocity of the
/// hand origin, rows 3..6 angular velocity, one column per chain joint.
pub fn jacobian(
    model: &RobotModel,
    q: &JointConfiguration,
    chain: &str,
) -> Result<DMatrix<f64>, KinematicsError> {
    let chain = chain_by_name(model, chain)?;
    let values = chain_values(model, chain, q)?;
    Ok(jacobian_from(&chain_poses(model, chain, &values)))
}

fn jacobian_from(poses: &ChainPoses) -> DMatrix<f64> {
    let tip = poses.end_effector.position();
    let mut j = DMatrix::zeros(6, poses.axes.len());
    for (col, (axis, origin)) in poses.axes.iter().enumerate() {
        let lin = axis.cross(&(tip - origin));
        for r in 0..3 {
            j[(r, col)] = lin[r];
            j[(r + 3, col)] = axis[r];
        }
    }
    j
}

/// Deterministic start configurations: mid-range first, then points spread
/// through the joint box by a golden-ratio sequence.
fn restart_configurations(limits: &[[f64; 2]], count: usize) -> Vec<Vec<f64>> {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    (0..count)
        .map(|k| {
            limits
                .iter()
                .enumerate()
                .map(|(j, [lo, hi])| {
                    let frac = if k == 0 {
                        0.5
                    } else {
                        (0.5 + (k * limits.len() + j) as f64 * GOLDEN).fract()
                    };
                    lo + frac * (hi - lo)
                })
                .collect()
        })
        .collect()
}

/// `Jᵀ (J Jᵀ + λ² I)⁻¹ e` with the frozen columns of `J` zeroed.
fn dls_step(jac: &DMatrix<f64>, err: &Vector6<f64>, lambda_sq: f64, frozen: &[bool]) -> DVector<f64> {
    let mut j = jac.clone();
    for (c, f) in frozen.iter().enumerate() {
        if *f {
            j.column_mut(c).fill(0.0);
        }
    }
    let m = &j * j.transpose();
    let jjt = Matrix6::from_fn(|r, c| m[(r, c)]) + Matrix6::identity() * lambda_sq;
    let y = jjt
        .cholesky()
        .expect("damped normal matrix is positive definite")
        .solve(err);
    j.transpose() * DVector::from_column_slice(y.as_slice())
}

/// Rotation vector taking `from` onto `to`, expressed in the common frame.
pub fn rotation_error(from: &UnitQuaternion<f64>, to: &UnitQuaternion<f64>) -> Vector3<f64> {
    (to * from.inverse()).scaled_axis()
}

pub fn solve_ik(
    model: &RobotModel,
    chain: &str,
    target: &Pose6D,
    seed: &JointConfiguration,
) -> Result<IkSolution, KinematicsError> {
    solve_ik_with(model, chain, target, seed, &IkParams::default())
}

/// Damped least-squares IK. Non-convergence is reported through
/// [`IkSolution::converged`]; the best iterate seen is always returned.
pub fn solve_ik_with(
    model: &RobotModel,
    chain_name: &str,
    target: &Pose6D,
    seed: &JointConfiguration,
    params: &IkParams,
) -> Result<IkSolution, KinematicsError> {
    let chain = chain_by_name(model, chain_name)?;
    let specs: Vec<_> = chain.joints.iter().map(|&i| &model.joints()[i]).collect();
    let seed_values: Vec<f64> = chain_values(model, chain, seed)?
        .into_iter()
        .zip(&specs)
        .map(|(v, s)| s.clamp(v))
        .collect();
    let limits: Vec<[f64; 2]> = specs.iter().map(|s| s.limits).collect();
    let mut starts = restart_configurations(&limits, params.restarts).into_iter();
    let mut q = seed_values;

    let w = params.orientation_weight;
    let lambda_sq = params.damping * params.damping;
    let mut best_q = q.clone();
    let mut best_cost = f64::INFINITY;
    let mut iterations = 0;
    let mut checkpoint_cost = f64::INFINITY;
    let mut since_checkpoint = 0;

    loop {
        let poses = chain_poses(model, chain, &q);
        let pos_err = target.position() - poses.end_effector.position();
        let rot_err = rotation_error(poses.end_effector.orientation(), target.orientation());
        let cost = (pos_err.norm_squared() + w * w * rot_err.norm_squared()).sqrt();
        if cost < best_cost {
            best_cost = cost;
            best_q.clone_from(&q);
        }
        if (pos_err.norm() < params.refine_tolerance && rot_err.norm() < params.refine_tolerance)
            || iterations >= params.max_iterations
        {
            break;
        }
        if since_checkpoint >= params.stall_window {
            if cost > 0.99 * checkpoint_cost {
                if let Some(next) = starts.next() {
                    q = next;
                    checkpoint_cost = f64::INFINITY;
                    since_checkpoint = 0;
                    continue;
                }
            }
            checkpoint_cost = cost;
            since_checkpoint = 0;
        }
        since_checkpoint += 1;

        let mut jac = jacobian_from(&poses);
        for r in 3..6 {
            for c in 0..jac.ncols() {
                jac[(r, c)] *= w;
            }
        }
        let err = Vector6::new(
            pos_err.x,
            pos_err.y,
            pos_err.z,
            w * rot_err.x,
            w * rot_err.y,
            w * rot_err.z,
        );
        // Joints resting on a limit that the step would push further out are
        // frozen for this iteration so the remaining joints take up the error.
        let mut frozen = vec![false; q.len()];
        let mut dq = dls_step(&jac, &err, lambda_sq, &frozen);
        for _ in 0..q.len() {
            let mut changed = false;
            for (k, spec) in specs.iter().enumerate() {
                let at_lo = q[k] <= spec.limits[0] && dq[k] < 0.0;
                let at_hi = q[k] >= spec.limits[1] && dq[k] > 0.0;
                if !frozen[k] && (at_lo || at_hi) {
                    frozen[k] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            dq = dls_step(&jac, &err, lambda_sq, &frozen);
        }
        let largest = dq.amax();
        if largest > params.max_step {
            dq *= params.max_step / largest;
        }
        iterations += 1;
        let mut moved = false;
        for ((v, d), spec) in q.iter_mut().zip(dq.iter()).zip(&specs) {
            let next = spec.clamp(*v + d);
            moved |= next != *v;
            *v = next;
        }
        if !moved {
            match starts.next() {
                Some(next) => {
                    q = next;
                    checkpoint_cost = f64::INFINITY;
                    since_checkpoint = 0;
                }
                None => break,
            }
        }
    }

    let poses = chain_poses(model, chain, &best_q);
    let achieved = poses.end_effector;
    let position_error = (target.position() - achieved.position()).norm();
    let orientation_error = achieved.angle_to(target);
    let mut configuration = seed.clone();
    for (spec, v) in specs.iter().zip(&best_q) {
        configuration.set(&spec.name, *v);
    }
    Ok(IkSolution {
        chain: chain_name.to_string(),
        configuration,
        achieved_pose: achieved,
        position_error,
        orientation_error,
        converged: position_error <= params.position_tolerance
            && orientation_error <= params.orientation_tolerance,
        iterations,
    })
}
