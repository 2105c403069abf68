use behavior_forge::action::{Action, HandState};
use behavior_forge::assets;
use behavior_forge::kinematics::{forward_kinematics, solve_ik};
use behavior_forge::sim::{
    DispatchError, DoorGeometry, DoorState, DoorThresholds, PerceptionConfig, Scene, SuccessPredicate, Thresholds,
    World, DT, MAX_HINGE_ANGLE, MAX_LEVER_ANGLE, SCENE_VERSION,
};
use behavior_forge::stance::{PlannerLimits, Stance};
use behavior_forge::{ActionKind, JointConfiguration, Pose6D, RobotModel, Side};
use nalgebra::Vector3;
use proptest::prelude::*;

fn world(scene: Scene) -> World {
    World::new(RobotModel::bundled(), scene, 7).unwrap()
}

fn empty_scene() -> Scene {
    Scene {
        name: "empty".into(),
        version: SCENE_VERSION.into(),
        robot_start: Stance::nominal(0.0, 0.0, 0.0, 0.25),
        markers: vec![],
        objects: vec![],
        door: None,
        thresholds: Thresholds::default(),
        planner: PlannerLimits::default(),
        perception: PerceptionConfig::default(),
        success: SuccessPredicate::None,
    }
}

fn run_until_done(w: &mut World) {
    while let Some(p) = w.progress() {
        if p.motion_finished {
            break;
        }
        w.step();
    }
}

#[test]
fn idle_world_only_advances_time() {
    let mut w = world(assets::door_scene());
    let before = w.snapshot();
    for _ in 0..100 {
        w.step();
    }
    let mut after = w.snapshot();
    assert!((after.sim_time - 100.0 * DT).abs() < 1e-12);
    after.sim_time = before.sim_time;
    assert_eq!(before, after);
}

#[test]
fn robot_alone_has_no_collisions() {
    let w = world(empty_scene());
    assert!(w.check_collisions().is_empty());
}

#[test]
fn hand_trajectory_ends_exactly_on_the_solution() {
    let mut w = world(empty_scene());
    let goal = Pose6D::from_xyz_rpy(0.35, -0.3, 1.0, 0.0, 0.0, 0.2);
    let chest = w.chest_pose();
    let expected = solve_ik(
        w.model(),
        "right_arm",
        &chest.inverse().compose(&goal),
        w.joints(),
    )
    .unwrap();
    assert!(expected.converged);
    w.dispatch(&Action::hand_pose("reach", "world", Side::Right, goal, 1.37)).unwrap();
    let ticks = (1.37 / DT).round() as usize;
    for _ in 0..ticks {
        w.step();
    }
    let p = w.progress().unwrap();
    assert!(p.motion_finished && p.tolerance_met);
    let fk = chest.compose(&forward_kinematics(w.model(), &expected.configuration, "right_arm").unwrap());
    assert!(w.hand_pose(Side::Right).distance_to(&fk) < 1e-9);
    assert!(w.hand_pose(Side::Right).angle_to(&fk) < 1e-9);
}

#[test]
fn unreachable_hand_goal_is_refused_before_motion() {
    let mut w = world(empty_scene());
    let before = w.snapshot();
    let goal = Pose6D::translation(2.0, 0.0, 1.0);
    let err = w
        .dispatch(&Action::hand_pose("too far", "world", Side::Left, goal, 1.0))
        .unwrap_err();
    assert!(matches!(err, DispatchError::IkUnreachable { side: Side::Left, .. }));
    assert!(!w.is_busy());
    assert_eq!(w.snapshot(), before);
}

#[test]
fn unknown_frame_is_refused() {
    let mut w = world(empty_scene());
    let err = w
        .dispatch(&Action::hand_pose("x", "nowhere", Side::Left, Pose6D::identity(), 1.0))
        .unwrap_err();
    assert_eq!(err, DispatchError::UnknownFrame("nowhere".into()));
}

#[test]
fn pelvis_displacement_matches_goal_midstance() {
    let mut w = world(empty_scene());
    let start = w.stance().midstance(0.0);
    let goal = Stance::nominal(1.3, 0.4, 0.7, 0.3);
    let action = Action::stance("walk", "world", goal.left, goal.right, 0.6, 0.4);
    w.dispatch(&action).unwrap();
    run_until_done(&mut w);
    assert!(w.progress().unwrap().tolerance_met);
    w.finish_task();
    let moved = w.pelvis().position() - start.position();
    let expected = goal.midstance(0.0).position() - start.position();
    assert!((moved.xy() - expected.xy()).norm() < 1e-9, "{moved} vs {expected}");
    assert!(w.stance().approx_eq(&goal, 1e-9));
}

#[test]
fn swing_foot_lifts_to_apex() {
    let mut w = world(empty_scene());
    let goal = Stance::nominal(0.3, 0.0, 0.0, 0.25);
    w.dispatch(&Action::stance("step", "world", goal.left, goal.right, 1.0, 0.5)).unwrap();
    let mut apex: f64 = 0.0;
    while !w.progress().unwrap().motion_finished {
        w.step();
        apex = apex.max(w.stance().left.position().z.max(w.stance().right.position().z));
    }
    assert!((apex - 0.1).abs() < 1e-3, "{apex}");
    assert!(w.stance().left.position().z.abs() < 1e-12);
}

/// Puts the right hand at `offset` from the can's grasp point, in the world.
fn hand_near_can(w: &mut World, offset: Vector3<f64>) {
    let can = *w.object_pose("can").unwrap();
    let goal = Pose6D::new(can.position() + offset, *Pose6D::from_xyz_rpy(0.0, 0.0, 0.0, 1.57, 0.0, 0.0).orientation());
    let target = w.chest_pose().inverse().compose(&goal);
    let sol = solve_ik(w.model(), "right_arm", &target, w.joints()).unwrap();
    assert!(sol.converged);
    w.set_joints(&sol.configuration);
}

fn table_world_near_can() -> World {
    let mut w = world(assets::table_scene());
    w.register_task_frames();
    w.set_stance(Stance::nominal(0.4, -0.1, 0.0, 0.25));
    w
}

#[test]
fn closing_near_the_can_grasps_it() {
    let mut w = table_world_near_can();
    hand_near_can(&mut w, Vector3::new(-0.03, 0.0, 0.0));
    w.dispatch(&Action::hand_configuration("grasp", "chest", Side::Right, HandState::Close))
        .unwrap();
    let g = w.grasped().unwrap();
    assert_eq!((g.side, g.object.as_str()), (Side::Right, "can"));
    assert_eq!(w.frames().parent("can_frame").unwrap(), Some("right_hand"));

    // The can rides along with a fixed offset in the hand.
    let offset = g.hand_to_object;
    let hand = w.hand_pose(Side::Right);
    let lift = Pose6D::new(hand.position() + Vector3::new(-0.1, 0.0, 0.15), *hand.orientation());
    w.finish_task();
    w.dispatch(&Action::hand_pose("lift", "world", Side::Right, lift, 1.0)).unwrap();
    for _ in 0..150 {
        w.step();
        let hand = w.hand_pose(Side::Right);
        let rel = hand.inverse().compose(w.object_pose("can").unwrap());
        assert!(rel.distance_to(&offset) < 1e-9);
        assert!(rel.angle_to(&offset) < 1e-9);
    }
    w.finish_task();
    w.dispatch(&Action::hand_configuration("release", "chest", Side::Right, HandState::Open))
        .unwrap();
    assert!(w.grasped().is_none());
    assert_eq!(w.frames().parent("can_frame").unwrap(), Some("world"));
}

#[test]
fn closing_far_from_everything_grasps_nothing() {
    let mut w = table_world_near_can();
    hand_near_can(&mut w, Vector3::new(-0.3, 0.0, 0.05));
    w.dispatch(&Action::hand_configuration("grasp", "chest", Side::Right, HandState::Close))
        .unwrap();
    assert!(w.grasped().is_none());
    for _ in 0..100 {
        w.step();
    }
    let p = w.progress().unwrap();
    assert!(p.motion_finished && p.tolerance_met);
}

fn arm_config(roll_sign: f64, values: [f64; 7]) -> JointConfiguration {
    let names = ["shoulder_pitch", "shoulder_roll", "shoulder_yaw", "elbow", "wrist_yaw", "wrist_pitch", "wrist_roll"];
    let mut q = JointConfiguration::new();
    for side in Side::BOTH {
        let sign = if side == Side::Left { 1.0 } else { roll_sign };
        for (i, (n, v)) in names.iter().zip(values).enumerate() {
            let v = if i == 1 { v * sign } else { v };
            q.set(&format!("{}_{n}", side.as_str()), v);
        }
    }
    q
}

/// Collision pairs seen while the robot is slid through the open doorway.
fn walk_through(q: &JointConfiguration) -> Vec<String> {
    let mut w = world(assets::door_scene());
    w.set_door_state(DoorState {
        hinge_angle: 1.55,
        lever_angle: 0.0,
        latch_engaged: false,
    });
    w.set_joints(q);
    let mut hits = Vec::new();
    for i in 0..=40 {
        let x = -0.6 + 0.035 * i as f64;
        w.set_stance(Stance::nominal(x, 0.0, 0.0, 0.25));
        for p in w.check_collisions() {
            hits.push(format!("{}~{}", p.robot, p.scene));
        }
    }
    hits
}

#[test]
fn arms_at_zero_hit_the_door_frame() {
    let hits = walk_through(&RobotModel::bundled().zero_configuration());
    assert!(hits.iter().any(|h| h.contains("arm") && h.contains("wall")), "{hits:?}");
}

#[test]
fn bundled_avoidance_configuration_passes_cleanly() {
    let seq = assets::push_door();
    let q = seq
        .actions
        .iter()
        .find_map(|a| match &a.kind {
            ActionKind::ArmJointAngles(a) => Some(a.angles.clone()),
            _ => None,
        })
        .unwrap();
    assert_eq!(walk_through(&q), Vec::<String>::new());
    // Same fold with the arms splayed back out is not enough.
    let splayed = arm_config(-1.0, [-0.3, 0.3, 0.0, -1.6, 0.0, 0.0, 0.0]);
    assert!(!walk_through(&splayed).is_empty());
}

#[test]
fn detection_mean_converges_to_truth() {
    let w = world(assets::door_scene());
    let camera = w.camera_pose();
    let truth = camera.inverse().compose(&w.scene().markers[0].pose);
    let mut sum = Vector3::zeros();
    let mut n = 0.0;
    let mut poses = Vec::new();
    for frame in 0..1000 {
        let d = w.detect(frame);
        assert_eq!(d.len(), 1);
        sum += d[0].pose.position();
        n += 1.0;
        poses.push(d[0].pose);
    }
    let mean = sum / n;
    assert!((mean - truth.position()).norm() < 1e-3, "{}", (mean - truth.position()).norm());
    let avg = behavior_forge::sim::average_poses(&poses).unwrap();
    assert!(avg.angle_to(&truth) < 1e-3);
}

#[test]
fn perception_is_deterministic_per_seed() {
    let a = world(assets::table_scene());
    let b = world(assets::table_scene());
    assert_eq!(a.detect(3), b.detect(3));
    assert_eq!(a.point_cloud(3), b.point_cloud(3));
    assert_ne!(a.detect(3), a.detect(4));
    let c = World::new(RobotModel::bundled(), assets::table_scene(), 8).unwrap();
    assert_ne!(a.detect(3), c.detect(3));
    let cloud = a.point_cloud(0);
    assert_eq!(cloud.len(), 2048);
    assert!(cloud.points.chunks(6).any(|p| p[3..] == [200.0, 30.0, 30.0]));
}

#[test]
fn marker_behind_the_robot_is_not_detected() {
    let mut scene = assets::door_scene();
    scene.robot_start = Stance::nominal(-1.6, 0.0, std::f64::consts::PI, 0.25);
    let w = world(scene);
    for frame in 0..20 {
        assert!(w.detect(frame).is_empty());
    }
    let mut far = assets::door_scene();
    far.robot_start = Stance::nominal(-5.0, 0.0, 0.0, 0.25);
    assert!(world(far).detect(0).is_empty());
}

#[test]
fn registered_frames_land_near_truth() {
    let mut w = world(assets::table_scene());
    let added = w.register_task_frames();
    assert_eq!(added, vec!["fiducial_2", "table_frame", "can_frame"]);
    let can = w.frames().resolve_world("can_frame").unwrap();
    let truth = w.object_pose("can").unwrap();
    assert!(can.distance_to(truth) < 0.01, "{}", can.distance_to(truth));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn door_invariants_hold_under_arbitrary_hand_motion(
        path in prop::collection::vec((-0.4f64..0.6, -0.6f64..0.6, 0.6f64..1.3), 2..40),
        lever_first in any::<bool>(),
    ) {
        let g = DoorGeometry::default();
        let th = DoorThresholds::default();
        let mut s = DoorState::default();
        if lever_first {
            s.lever_angle = 0.6;
        }
        let mut prev = s;
        for (x, y, z) in path {
            for _ in 0..10 {
                s = g.update(&s, &th, &[Vector3::new(x, y, z)], DT);
                prop_assert!(!(s.latch_engaged && s.hinge_angle > 0.0));
                prop_assert!(!(s.lever_angle >= th.lever_threshold && s.latch_engaged));
                prop_assert!(s.hinge_angle >= prev.hinge_angle);
                prop_assert!(s.hinge_angle - prev.hinge_angle <= th.max_hinge_rate * DT + 1e-12);
                prop_assert!((0.0..=MAX_HINGE_ANGLE).contains(&s.hinge_angle));
                prop_assert!((0.0..=MAX_LEVER_ANGLE).contains(&s.lever_angle));
                prev = s;
            }
        }
    }
}
