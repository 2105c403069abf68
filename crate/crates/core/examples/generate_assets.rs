//! Regenerates the bundled scene and behavior files in `assets/`.
//!
//! cargo run -p behavior-forge-core --example generate_assets

use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use behavior_forge::action::{Action, ArmSelection, HandState};
use behavior_forge::sim::{
    BoxSpec, DoorGeometry, DoorSpec, Marker, MarkerLink, ObjectSpec, PerceptionConfig, Scene,
    SuccessPredicate, Thresholds, SCENE_VERSION,
};
use behavior_forge::stance::{PlannerLimits, Stance, DEFAULT_SWING_DURATION, DEFAULT_TRANSFER_DURATION};
use behavior_forge::{ActionSequence, JointConfiguration, Pose6D, Side};

fn rpy(x: f64, y: f64, z: f64, roll: f64, pitch: f64, yaw: f64) -> Pose6D {
    Pose6D::from_xyz_rpy(x, y, z, roll, pitch, yaw)
}

fn door_scene() -> Scene {
    // Marker on the approach face of the right-hand wall, facing the robot.
    let marker = rpy(-0.05, -0.8, 1.3, 0.0, -FRAC_PI_2, 0.0);
    let door_pose = Pose6D::identity();
    Scene {
        name: "push_door".into(),
        version: SCENE_VERSION.into(),
        robot_start: Stance::nominal(-1.6, 0.0, 0.0, 0.25),
        markers: vec![Marker {
            id: 7,
            pose: marker,
            size: 0.15,
        }],
        objects: vec![ObjectSpec {
            id: "door".into(),
            frame: "door_frame".into(),
            marker: Some(MarkerLink {
                id: 7,
                marker_to_object: marker.inverse().compose(&door_pose),
            }),
            pose: None,
            boxes: vec![],
            color: [176, 164, 146],
            grasp_points: vec![],
        }],
        door: Some(DoorSpec {
            object: "door".into(),
            lever_frame: "door_lever".into(),
            geometry: DoorGeometry::default(),
            panel_color: [120, 84, 52],
            calibration_bias: None,
        }),
        thresholds: Thresholds::default(),
        planner: PlannerLimits::default(),
        perception: PerceptionConfig::default(),
        success: SuccessPredicate::DoorTraversal { min_hinge_angle: 1.48 },
    }
}

const TABLE_TOP: f64 = 0.75;
const CAN_HALF_HEIGHT: f64 = 0.055;

fn table_pose() -> Pose6D {
    Pose6D::from_xyz_yaw(1.0, 0.0, 0.0, 0.0)
}

fn can_in_table() -> Pose6D {
    Pose6D::translation(-0.22, -0.18, TABLE_TOP + CAN_HALF_HEIGHT)
}

fn can_place_in_table() -> Pose6D {
    Pose6D::translation(-0.22, -0.53, TABLE_TOP + CAN_HALF_HEIGHT)
}

fn table_scene() -> Scene {
    let table = table_pose();
    // Marker lying flat on the table top, near its back left corner.
    let marker = table.compose(&Pose6D::translation(0.1, 0.3, TABLE_TOP + 1e-3));
    let leg = |x: f64, y: f64| BoxSpec {
        center: Pose6D::translation(x, y, (TABLE_TOP - 0.04) / 2.0),
        half_extents: [0.025, 0.025, (TABLE_TOP - 0.04) / 2.0],
    };
    Scene {
        name: "pick_place".into(),
        version: SCENE_VERSION.into(),
        robot_start: Stance::nominal(0.0, 0.0, 0.0, 0.25),
        markers: vec![Marker {
            id: 2,
            pose: marker,
            size: 0.1,
        }],
        objects: vec![
            ObjectSpec {
                id: "table".into(),
                frame: "table_frame".into(),
                marker: Some(MarkerLink {
                    id: 2,
                    marker_to_object: marker.inverse().compose(&table),
                }),
                pose: None,
                boxes: vec![
                    BoxSpec {
                        center: Pose6D::translation(0.0, 0.0, TABLE_TOP - 0.02),
                        half_extents: [0.4, 0.6, 0.02],
                    },
                    leg(0.35, 0.55),
                    leg(0.35, -0.55),
                    leg(-0.35, 0.55),
                    leg(-0.35, -0.55),
                ],
                color: [150, 111, 51],
                grasp_points: vec![],
            },
            ObjectSpec {
                id: "can".into(),
                frame: "can_frame".into(),
                marker: Some(MarkerLink {
                    id: 2,
                    marker_to_object: marker.inverse().compose(&table).compose(&can_in_table()),
                }),
                pose: None,
                boxes: vec![BoxSpec {
                    center: Pose6D::identity(),
                    half_extents: [0.033, 0.033, CAN_HALF_HEIGHT],
                }],
                color: [200, 30, 30],
                grasp_points: vec![Pose6D::identity()],
            },
        ],
        door: None,
        thresholds: Thresholds::default(),
        planner: PlannerLimits::default(),
        perception: PerceptionConfig::default(),
        success: SuccessPredicate::ObjectPlaced {
            object: "can".into(),
            relative_to: "table".into(),
            target: can_place_in_table(),
            tolerance: 0.02,
        },
    }
}

fn stance_action(description: &str, frame: &str, stance: Stance) -> Action {
    Action::stance(
        description,
        frame,
        stance.left,
        stance.right,
        DEFAULT_SWING_DURATION,
        DEFAULT_TRANSFER_DURATION,
    )
}

fn arm_angles(side: Side, values: [f64; 7]) -> JointConfiguration {
    let names = [
        "shoulder_pitch",
        "shoulder_roll",
        "shoulder_yaw",
        "elbow",
        "wrist_yaw",
        "wrist_pitch",
        "wrist_roll",
    ];
    let mut q = JointConfiguration::new();
    for (n, v) in names.iter().zip(values) {
        q.set(&format!("{}_{n}", side.as_str()), v);
    }
    q
}

/// Arms folded in front of the torso, narrow enough for a 0.9 m opening.
fn avoidance_configuration() -> JointConfiguration {
    let mut q = arm_angles(Side::Left, [-0.3, -0.35, 0.0, -1.6, 0.0, 0.0, 0.0]);
    q.merge(&arm_angles(Side::Right, [-0.3, 0.35, 0.0, -1.6, 0.0, 0.0, 0.0]));
    q
}

fn push_door_behavior() -> ActionSequence {
    let door = "door_frame";
    let lever = "door_lever";
    // Hand x points along the forearm; palm toward the handle.
    let grip = |x: f64, y: f64, z: f64, roll: f64| rpy(x, y, z, roll, 0.0, 0.0);
    let mut seq = ActionSequence::new("push_door", door);
    let actions = vec![
        stance_action("Approach door", door, Stance::nominal(-0.3, 0.0, 0.0, 0.25)),
        Action::hand_pose("Right hand approaches handle", lever, Side::Right, grip(-0.12, 0.08, 0.08, 0.0), 2.0),
        Action::hand_pose("Pre-grasp hand pose", lever, Side::Right, grip(-0.02, 0.08, 0.0, 0.0), 1.5),
        Action::hand_pose("First handle turn contact", lever, Side::Right, grip(0.0, 0.08 * 0.9, -0.03, 0.0), 1.0),
        Action::hand_pose("Latch disengaged", lever, Side::Right, grip(0.0, 0.08 * 0.6, -0.08 * 0.7, 0.0), 1.0),
        Action::hand_pose("Door pushed open with right hand", door, Side::Right, grip(0.15, -0.3, 0.95, 0.0), 2.0),
        Action::hand_pose("Door pushed open more with left hand", door, Side::Left, grip(0.25, 0.1, 1.1, 0.0), 2.0),
        Action::hand_pose("Door pushed open all the way with left hand", door, Side::Left, grip(0.25, 0.36, 1.1, 0.0), 2.0),
        Action::arm_joint_angles(
            "Arms in collision avoidance configuration",
            "chest",
            ArmSelection::Both,
            avoidance_configuration(),
            2.0,
        ),
        stance_action("Step forward a little", door, Stance::nominal(-0.2, 0.0, 0.0, 0.25)),
        stance_action("Walk through the door frame", door, Stance::nominal(0.8, 0.0, 0.0, 0.25)),
    ];
    for a in actions {
        seq.push(a);
    }
    seq
}

fn pick_place_behavior() -> ActionSequence {
    let table = "table_frame";
    let can = "can_frame";
    let mut seq = ActionSequence::new("pick_place_can", table);
    // Grasp from behind the can with the palm facing left.
    let side_grasp = |x: f64, y: f64, z: f64| rpy(x, y, z, FRAC_PI_2, 0.0, 0.0);
    let place = can_place_in_table();
    let p = place.position();
    let actions = vec![
        stance_action("Begin approach", table, Stance::nominal(-1.0, -0.1, 0.0, 0.25)),
        stance_action("Approach table", table, Stance::nominal(-0.6, -0.1, 0.0, 0.25)),
        Action::hand_pose("Right hand approaches can", can, Side::Right, side_grasp(-0.12, -0.02, 0.05), 2.0),
        Action::hand_pose("Pre-grasp hand pose", can, Side::Right, side_grasp(-0.01, 0.0, 0.0), 1.5),
        Action::hand_configuration("Grasp can of soup", "chest", Side::Right, HandState::Close),
        Action::hand_pose("Pull back hand with can of soup", table, Side::Right, side_grasp(-0.3, -0.18, 0.95), 1.5),
        stance_action("Step to the side", table, Stance::nominal(-0.6, -0.45, 0.0, 0.25)),
        Action::hand_pose("Set down can", table, Side::Right, side_grasp(p.x - 0.01, p.y, p.z), 2.0),
        Action::hand_configuration("Release grasp on can", "chest", Side::Right, HandState::Open),
        stance_action("Back away from task", table, Stance::nominal(-1.2, -0.45, 0.0, 0.25)),
    ];
    for a in actions {
        seq.push(a);
    }
    seq
}

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets");
    door_scene().save(dir.join("door_scene.json"))?;
    table_scene().save(dir.join("table_scene.json"))?;
    push_door_behavior().save(dir.join("push_door.behavior.json"))?;
    pick_place_behavior().save(dir.join("pick_place_can.behavior.json"))?;
    println!("wrote assets to {}", dir.display());
    Ok(())
}
