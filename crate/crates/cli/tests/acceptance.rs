//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use behavior_forge::action::{Action, HandState};
use behavior_forge::executor::{ActionStatus, Edit, Executor, Mode, Plant, StatusEvent};
use behavior_forge::kinematics::{forward_kinematics, jacobian, solve_ik, JointConfiguration};
use behavior_forge::session::Session;
use behavior_forge::sim::{DispatchError, Scene, SceneError, SuccessPredicate, TaskProgress, WorldSnapshot, DT};
use behavior_forge::{assets, ActionSequence, BehaviorError, FrameTree, Pose6D, RobotModel, Side, WORLD};
use behavior_forge_cli::{prepare, run_files, RunOptions};
use behavior_forge_protocol::server::replay;
use behavior_forge_protocol::{Envelope, Rates, ServerCore, Target};
use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const DOOR_ROWS: [&str; 11] = [
    "Approach door",
    "Right hand approaches handle",
    "Pre-grasp hand pose",
    "First handle turn contact",
    "Latch disengaged",
    "Door pushed open with right hand",
    "Door pushed open more with left hand",
    "Door pushed open all the way with left hand",
    "Arms in collision avoidance configuration",
    "Step forward a little",
    "Walk through the door frame",
];

fn options(seed: u64) -> RunOptions {
    RunOptions {
        seed,
        ..RunOptions::default()
    }
}

/// Runs a behavior automatically, capturing the world at each success.
fn drive(scene: Scene, behavior: &ActionSequence, seed: u64) -> Result<(Session, Vec<(StatusEvent, WorldSnapshot)>), String> {
    let mut session = prepare(scene, behavior, seed)?;
    session.set_automatic(true);
    let mut trace = Vec::new();
    for _ in 0..100_000 {
        if session.executor().is_exhausted() {
            return Ok((session, trace));
        }
        session.step();
        for e in session.take_events() {
            match e.status {
                ActionStatus::Succeeded => trace.push((e, session.world().snapshot())),
                ActionStatus::Failed => return Err(format!("{} failed: {:?}", e.description, e.reason)),
                _ => {}
            }
        }
    }
    Err("run did not finish".into())
}

/// Steps through a behavior one manual execution at a time, capturing the
/// world after each action settles and before the next one starts.
fn step_manually(scene: Scene, behavior: &ActionSequence, seed: u64) -> Result<Vec<(String, WorldSnapshot)>, String> {
    let mut session = prepare(scene, behavior, seed)?;
    let mut trace = Vec::new();
    while !session.executor().is_exhausted() {
        let index = session.executor().selected();
        session.execute_manual().map_err(|e| e.to_string())?;
        while session.executor().executing().is_some() {
            session.step();
        }
        ensure!(session.executor().statuses()[index] == ActionStatus::Succeeded, "action {index} failed");
        trace.push((behavior.actions[index].description.clone(), session.world().snapshot()));
    }
    Ok(trace)
}

fn door_scenario() -> Outcome {
    let start = Instant::now();
    let report = run_files("door_scene", "push_door", &options(7)).map_err(|e| e.to_string())?;
    let wall = start.elapsed().as_secs_f64();
    ensure!(report.exit_code() == 0, "exit {}: {}", report.exit_code(), report.outcome.summary());
    let rows: Vec<&str> = report.log.rows.iter().map(|r| r.description.as_str()).collect();
    ensure!(rows == DOOR_ROWS, "rows {rows:?}");
    ensure!(report.log.rows.windows(2).all(|w| w[0].time_s <= w[1].time_s), "times decrease");
    let world = report.session.as_ref().unwrap().world();
    world.success()?;
    let door = world.object_pose("door").ok_or("no door")?;
    let pelvis_x = door.inverse().transform_point(world.pelvis().position()).x;
    let hinge = world.door().map(|d| d.hinge_angle).unwrap_or(0.0);
    ensure!(pelvis_x > 0.0, "pelvis {pelvis_x} m past the door plane");
    ensure!(hinge >= 1.48, "hinge {hinge}");
    ensure!(world.collision_ticks() == 0, "{} collision ticks", world.collision_ticks());
    ensure!(wall < 5.0, "wall clock {wall:.2} s");
    Ok(format!(
        "11 rows, pelvis {pelvis_x:.2} m past door, hinge {hinge:.3} rad, 0 collisions, {wall:.2} s wall"
    ))
}

fn pick_place_scenario() -> Outcome {
    let report = run_files("table_scene", "pick_place_can", &options(7)).map_err(|e| e.to_string())?;
    ensure!(report.exit_code() == 0, "exit {}: {}", report.exit_code(), report.outcome.summary());
    let rows: Vec<&str> = report.log.rows.iter().map(|r| r.description.as_str()).collect();
    for needed in ["Grasp can of soup", "Step to the side"] {
        ensure!(rows.contains(&needed), "missing row {needed}");
    }
    let world = report.session.as_ref().unwrap().world();
    let SuccessPredicate::ObjectPlaced { object, relative_to, target, .. } = &world.scene().success else {
        return Err("table scene has no placement target".into());
    };
    let goal = world.object_pose(relative_to).ok_or("no table")?.compose(target);
    let err = world.object_pose(object).ok_or("no can")?.distance_to(&goal);
    ensure!(err < 0.02, "can {err} m from place pose");
    ensure!(world.grasped().is_none(), "can still grasped");

    let trace = step_manually(assets::table_scene(), &assets::pick_place_can(), 7)?;
    let at = |name: &str| trace.iter().position(|(d, _)| d == name);
    let steps = ["Grasp can of soup", "Pull back hand with can of soup", "Set down can", "Release grasp on can"];
    let idx: Vec<Option<usize>> = steps.iter().map(|s| at(s)).collect();
    ensure!(idx.iter().all(Option::is_some), "missing events {idx:?}");
    let idx: Vec<usize> = idx.into_iter().flatten().collect();
    ensure!(idx.windows(2).all(|w| w[0] < w[1]), "event order {idx:?}");
    let held = |i: usize| trace[i].1.grasped.as_ref().is_some_and(|g| g.object == *object);
    let z = |i: usize| trace[i].1.objects[object].position().z;
    ensure!(held(idx[0]) && held(idx[1]) && held(idx[2]) && !held(idx[3]), "grasp state sequence");
    ensure!(z(idx[1]) > z(idx[0]) + 0.01, "can not lifted");
    Ok(format!("grasp -> lift -> place -> release in order, can {:.1} mm from target", err * 1e3))
}

fn pose_error(a: &Pose6D, b: &Pose6D) -> f64 {
    a.distance_to(b).max(a.angle_to(b))
}

fn snapshot_error(t: &Pose6D, a: &WorldSnapshot, b: &WorldSnapshot) -> Result<f64, String> {
    let mut worst = 0.0f64;
    let mut pair = |x: &Pose6D, y: &Pose6D| worst = worst.max(pose_error(&t.compose(x), y));
    pair(&a.pelvis, &b.pelvis);
    pair(&a.left_hand, &b.left_hand);
    pair(&a.right_hand, &b.right_hand);
    pair(&a.stance.left, &b.stance.left);
    pair(&a.stance.right, &b.stance.right);
    ensure!(a.objects.len() == b.objects.len(), "object sets differ");
    for (id, pose) in &a.objects {
        pair(pose, b.objects.get(id).ok_or_else(|| format!("missing {id}"))?);
    }
    for (name, v) in a.joints.iter() {
        worst = worst.max((v - b.joints.get(name).unwrap_or(f64::NAN)).abs());
    }
    if let (Some(da), Some(db)) = (&a.door, &b.door) {
        worst = worst.max((da.hinge_angle - db.hinge_angle).abs());
        worst = worst.max((da.lever_angle - db.lever_angle).abs());
    }
    ensure!(a.collision_ticks == b.collision_ticks, "collision counts differ");
    Ok(worst)
}

fn equivariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    let scenarios = [
        (assets::door_scene(), assets::push_door()),
        (assets::table_scene(), assets::pick_place_can()),
    ];
    for (scene, behavior) in &scenarios {
        let (_, base) = drive(scene.clone(), behavior, 7)?;
        for _ in 0..20 {
            let t = Pose6D::from_xyz_yaw(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                0.0,
                rng.random_range(-PI..PI),
            );
            let (_, moved) = drive(scene.transformed(&t), behavior, 7)?;
            ensure!(moved.len() == base.len(), "{}: {} vs {} successes", scene.name, moved.len(), base.len());
            for ((ea, sa), (eb, sb)) in base.iter().zip(&moved) {
                ensure!(ea.description == eb.description, "order differs");
                ensure!((ea.sim_time - eb.sim_time).abs() < 1e-9, "{} finished at {} vs {}", ea.description, ea.sim_time, eb.sim_time);
                let err = snapshot_error(&t, sa, sb)?;
                ensure!(err < 1e-6, "{} / {}: error {err:e}", scene.name, ea.description);
                worst = worst.max(err);
            }
        }
    }
    Ok(format!("2 scenarios x 20 transforms, worst error {worst:.1e}"))
}

fn random_configuration(model: &RobotModel, rng: &mut ChaCha8Rng) -> JointConfiguration {
    let mut q = model.zero_configuration();
    for j in model.joints() {
        q.set(&j.name, rng.random_range(j.limits[0]..j.limits[1]));
    }
    q
}

fn ik_suite() -> Outcome {
    let start = Instant::now();
    let model = RobotModel::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let seed = model.zero_configuration();
    let mut converged = 0;
    for t in 0..500 {
        let side = if t % 2 == 0 { Side::Left } else { Side::Right };
        let target = forward_kinematics(&model, &random_configuration(&model, &mut rng), side.arm_chain()).map_err(|e| e.to_string())?;
        let sol = solve_ik(&model, side.arm_chain(), &target, &seed).map_err(|e| e.to_string())?;
        ensure!(model.within_limits(&sol.configuration), "solution outside joint limits");
        ensure!(sol.iterations <= 200, "{} iterations", sol.iterations);
        if sol.converged && sol.position_error < 1e-3 && sol.orientation_error < 0.01 {
            converged += 1;
        }
    }
    let rate = converged as f64 / 500.0;
    ensure!(rate >= 0.95, "convergence {rate}");

    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let q = random_configuration(&model, &mut rng);
        for side in Side::BOTH {
            let chain = side.arm_chain();
            let jac = jacobian(&model, &q, chain).map_err(|e| e.to_string())?;
            let names = model.chain_joint_names(model.chain(chain).ok_or("no chain")?);
            for (col, joint) in names.iter().enumerate() {
                let v = q.get(joint).unwrap();
                let (mut plus, mut minus) = (q.clone(), q.clone());
                plus.set(joint, v + h);
                minus.set(joint, v - h);
                let fp = forward_kinematics(&model, &plus, chain).unwrap();
                let fm = forward_kinematics(&model, &minus, chain).unwrap();
                let dp = (fp.position() - fm.position()) / (2.0 * h);
                let dr = (fp.orientation() * fm.orientation().inverse()).scaled_axis() / (2.0 * h);
                for r in 0..3 {
                    worst = worst.max((jac[(r, col)] - dp[r]).abs()).max((jac[(r + 3, col)] - dr[r]).abs());
                }
            }
        }
    }
    ensure!(worst < 1e-5, "jacobian differs from finite differences by {worst:e}");
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.1} s");
    Ok(format!("{:.1}% converged, jacobian within {worst:.1e}, {secs:.2} s", rate * 100.0))
}

fn random_pose(rng: &mut impl Rng) -> Pose6D {
    let q = Quaternion::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    Pose6D::new(
        Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        UnitQuaternion::from_quaternion(q),
    )
}

fn frame_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let mut tree = FrameTree::new();
    let mut expected: BTreeMap<String, Pose6D> = BTreeMap::new();
    let mut names: Vec<String> = Vec::new();
    let mut worst = 0.0f64;
    let mut next = 0;
    for step in 0..10_000 {
        let pick = |rng: &mut ChaCha8Rng, names: &[String]| -> String {
            if names.is_empty() || rng.random_bool(0.1) {
                WORLD.to_string()
            } else {
                names[rng.random_range(0..names.len())].clone()
            }
        };
        match rng.random_range(0..4) {
            // compose: attach a new frame below an existing one
            0 if names.len() < 40 => {
                let parent = pick(&mut rng, &names);
                let local = random_pose(&mut rng);
                let name = format!("f{next}");
                next += 1;
                tree.add_frame(&name, &parent, local).map_err(|e| e.to_string())?;
                let parent_world = if parent == WORLD { Pose6D::identity() } else { expected[&parent] };
                expected.insert(name.clone(), parent_world.compose(&local));
                names.push(name);
            }
            // invert
            1 => {
                let p = random_pose(&mut rng);
                let id = p.compose(&p.inverse());
                worst = worst.max(pose_error(&id, &Pose6D::identity()));
                worst = worst.max((p.inverse().quaternion_norm() - 1.0).abs());
            }
            // express a pose from one frame in another and back
            2 => {
                let (a, b) = (pick(&mut rng, &names), pick(&mut rng, &names));
                let p = random_pose(&mut rng);
                let in_b = tree.express_in(&p, &a, &b).map_err(|e| e.to_string())?;
                let back = tree.express_in(&in_b, &b, &a).map_err(|e| e.to_string())?;
                worst = worst.max(pose_error(&back, &p));
                let wa = tree.resolve_world(&a).map_err(|e| e.to_string())?.compose(&p);
                let wb = tree.resolve_world(&b).map_err(|e| e.to_string())?.compose(&in_b);
                worst = worst.max(pose_error(&wa, &wb));
                worst = worst.max((in_b.quaternion_norm() - 1.0).abs());
            }
            // reparent without moving
            _ if !names.is_empty() => {
                let frame = names[rng.random_range(0..names.len())].clone();
                let parent = pick(&mut rng, &names);
                let cyclic = tree.is_same_or_descendant(&parent, &frame);
                let result = tree.set_parent(&frame, &parent);
                ensure!(result.is_err() == cyclic, "step {step}: reparent {frame} under {parent} gave {result:?}");
            }
            _ => {}
        }
        for name in &names {
            let w = tree.resolve_world(name).map_err(|e| e.to_string())?;
            worst = worst.max(pose_error(&w, &expected[name]));
            worst = worst.max((w.quaternion_norm() - 1.0).abs());
        }
        ensure!(worst < 1e-7, "step {step}: error {worst:e}");
    }
    Ok(format!("10000 operations over {} frames, worst error {worst:.1e}", names.len()))
}

/// Plant with fixed-length tasks. "miss" never meets tolerance, "refuse"
/// is rejected at dispatch.
struct Scripted {
    frames: FrameTree,
    ticks: u64,
    task: Option<(u64, bool)>,
}

impl Scripted {
    const TICKS: u64 = 4;

    fn new() -> Self {
        let mut frames = FrameTree::new();
        frames.add_frame("task", WORLD, Pose6D::translation(1.0, 0.0, 0.0)).unwrap();
        Self { frames, ticks: 0, task: None }
    }
}

impl Plant for Scripted {
    fn dispatch(&mut self, action: &Action) -> Result<(), DispatchError> {
        if action.description == "refuse" {
            return Err(DispatchError::UnreachableGoal("scripted".into()));
        }
        self.task = Some((self.ticks, action.description != "miss"));
        Ok(())
    }

    fn progress(&self) -> Option<TaskProgress> {
        let (start, ok) = self.task?;
        let nominal = Self::TICKS as f64 * DT;
        let elapsed = (self.ticks - start) as f64 * DT;
        Some(TaskProgress { elapsed, nominal_duration: nominal, motion_finished: elapsed >= nominal - 1e-9, tolerance_met: ok })
    }

    fn finish(&mut self) {
        self.task = None;
    }

    fn frames(&self) -> &FrameTree {
        &self.frames
    }

    fn sim_time(&self) -> f64 {
        self.ticks as f64 * DT
    }
}

#[derive(Debug, Clone)]
enum Op {
    Tick(u8),
    Execute,
    Auto(bool),
    Abort,
    Insert(usize, u8),
    Remove(usize),
    Update(usize, u8),
}

fn scripted(kind: u8) -> Action {
    Action::hand_configuration(["ok", "miss", "refuse"][kind as usize], "task", Side::Left, HandState::Open)
}

fn executor_state_machine() -> Outcome {
    let op = prop_oneof![
        4 => (1u8..8).prop_map(Op::Tick),
        2 => Just(Op::Execute),
        2 => any::<bool>().prop_map(Op::Auto),
        1 => Just(Op::Abort),
        2 => (0usize..8, 0u8..3).prop_map(|(i, k)| Op::Insert(i, k)),
        1 => (0usize..8).prop_map(Op::Remove),
        1 => (0usize..8, 0u8..3).prop_map(|(i, k)| Op::Update(i, k)),
    ];
    let strategy = (prop::collection::vec(0u8..3, 0..6), prop::collection::vec(op, 1..40));
    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    let result = runner.run(&strategy, |(initial, ops)| {
        let mut plant = Scripted::new();
        let mut seq = ActionSequence::new("p", "task");
        initial.iter().for_each(|k| seq.push(scripted(*k)));
        let mut ex = Executor::new(seq);
        for op in ops {
            let before = ex.selected();
            let edits = matches!(op, Op::Insert(..) | Op::Remove(..) | Op::Update(..));
            match op {
                Op::Tick(n) => {
                    for _ in 0..n {
                        plant.ticks += 1;
                        ex.tick(&mut plant);
                    }
                }
                Op::Execute => {
                    let manual = ex.mode() == Mode::Manual;
                    if ex.execute_selected(&mut plant).is_ok() && manual {
                        prop_assert_eq!(ex.executing(), Some(before));
                        let statuses = ex.statuses().to_vec();
                        for _ in 0..20 {
                            plant.ticks += 1;
                            ex.tick(&mut plant);
                        }
                        prop_assert!(ex.executing().is_none());
                        prop_assert!(ex.selected() <= before + 1);
                        prop_assert!(ex.statuses()[before].is_finished());
                        for (i, (a, b)) in statuses.iter().zip(ex.statuses()).enumerate() {
                            prop_assert!(i == before || a == b, "manual step touched action {}", i);
                        }
                    }
                }
                Op::Auto(on) => ex.set_automatic(on),
                Op::Abort => ex.abort(&mut plant),
                Op::Insert(i, k) => drop(ex.apply_edit(Edit::Insert { index: i, action: scripted(k) })),
                Op::Remove(i) => drop(ex.apply_edit(Edit::Remove { index: i })),
                Op::Update(i, k) => drop(ex.apply_edit(Edit::Update { index: i, action: scripted(k) })),
            }
            if let Some(v) = ex.invariant_violation() {
                return Err(TestCaseError::fail(v));
            }
            if !edits {
                prop_assert!(ex.selected() >= before, "frontier moved back");
            }
            let executing = ex.statuses().iter().filter(|s| **s == ActionStatus::Executing).count();
            prop_assert!(executing <= 1);
            prop_assert_eq!(plant.task.is_some(), ex.executing().is_some());
            if ex.take_events().iter().any(|e| e.status == ActionStatus::Failed) {
                prop_assert_eq!(ex.mode(), Mode::Manual);
            }
        }
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok("10000 random interleavings".into())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (scene, behavior) in [("door_scene", "push_door"), ("table_scene", "pick_place_can")] {
        let mut runs = Vec::new();
        for k in 0..2 {
            let record = dir.path().join(format!("{scene}-{k}.jsonl"));
            let csv = dir.path().join(format!("{scene}-{k}.csv"));
            let opts = RunOptions { seed: 7, realtime_factor: 0.0, record: Some(record.clone()) };
            let report = run_files(scene, behavior, &opts).map_err(|e| e.to_string())?;
            report.log.write(&csv).map_err(|e| e.to_string())?;
            runs.push((std::fs::read(&record).unwrap(), std::fs::read(&csv).unwrap()));
        }
        ensure!(runs[0].0 == runs[1].0, "{scene}: snapshot logs differ");
        ensure!(runs[0].1 == runs[1].1, "{scene}: timing logs differ");
        ensure!(!runs[0].0.is_empty(), "{scene}: empty snapshot log");
        outputs.push(runs[0].0.len());
    }

    // Same command log against two fresh servers.
    let script = |core: &mut ServerCore| {
        let (id, _) = core.connect();
        let mut out = Vec::new();
        for tick in 0..1500u64 {
            if tick == 5 {
                out.extend(core.handle_text(id, &Envelope::new("set_automatic", 1, 0.0, json!({"on": true})).frame()));
            }
            if tick == 900 {
                out.extend(core.handle_text(id, &Envelope::new("abort", 2, 0.0, json!({})).frame()));
            }
            out.extend(core.tick().into_iter().map(|m| (Target::All, m)));
        }
        out.iter().map(|(_, m)| Envelope::new(m.kind, 0, m.timestamp, m.payload.clone()).frame()).collect::<Vec<_>>()
    };
    ensure!(script(&mut door_core()) == script(&mut door_core()), "command-log runs differ");
    Ok(format!("byte-identical snapshot logs ({} and {} bytes) and timing CSVs", outputs[0], outputs[1]))
}

fn door_core() -> ServerCore {
    let session = Session::new(RobotModel::bundled(), assets::door_scene(), assets::push_door(), 7).unwrap();
    ServerCore::new(session, Rates::default())
}

fn protocol_conformance() -> Outcome {
    // Rates over one idle second.
    let mut core = door_core();
    let mut counts: BTreeMap<&str, i32> = BTreeMap::new();
    for _ in 0..100 {
        for m in core.tick() {
            *counts.entry(m.kind).or_default() += 1;
        }
    }
    for (kind, hz) in [("robot_state", 50), ("detections", 10), ("point_cloud", 5)] {
        let n = counts.get(kind).copied().unwrap_or(0);
        ensure!((n - hz).abs() <= 1, "{kind}: {n} in 1 s");
    }

    // Bijection and robustness under a mix of valid and broken frames.
    let mut core = door_core();
    let (id, _) = core.connect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let kinds = ["execute_manual", "set_automatic", "abort", "sequence_edit", "request_ik_preview", "request_stance_preview", "bogus"];
    let mut seq = 0u64;
    let mut commands = 0;
    let mut acks = Vec::new();
    for i in 0..3000 {
        let kind = kinds[rng.random_range(0..kinds.len())];
        let payload = match kind {
            "set_automatic" => json!({"on": rng.random_bool(0.5)}),
            "sequence_edit" => json!({"op": "remove", "index": rng.random_range(0..20)}),
            "request_ik_preview" => json!({"side": "left", "frame": "chest", "goal": {"position": [0.3, 0.25, -0.2], "orientation": [1, 0, 0, 0]}}),
            _ => json!({}),
        };
        seq += 1;
        let text = Envelope::new(kind, seq, 0.0, payload).frame();
        let text = match rng.random_range(0..6) {
            0 => text[..rng.random_range(0..text.len())].to_string(),
            1 => text.replace("\"seq\"", "\"sq\""),
            _ => {
                commands += 1;
                text
            }
        };
        let out = core.handle_text(id, &text);
        let mine: Vec<&Value> = out.iter().filter(|(t, m)| *t == Target::Client(id) && m.kind == "ack").map(|(_, m)| &m.payload).collect();
        let errors = out.iter().filter(|(_, m)| m.kind == "protocol_error").count();
        ensure!(mine.len() + errors == 1, "frame {i}: {} acks, {errors} errors", mine.len());
        acks.extend(mine.into_iter().map(|a| a["ack_seq"].as_u64().unwrap()));
        if i % 3 == 0 {
            core.tick();
        }
        if let Some(v) = core.session().executor().invariant_violation() {
            return Err(v);
        }
    }
    ensure!(acks.len() == commands, "{} acks for {commands} commands", acks.len());
    ensure!(acks.windows(2).all(|w| w[0] < w[1]), "acks out of order");

    // Replay of the recorded frame log.
    let statuses = |out: &[(Target, behavior_forge_protocol::Message)]| -> Vec<Value> {
        out.iter().filter(|(_, m)| m.kind == "action_status").map(|(_, m)| m.payload.clone()).collect()
    };
    let mut live = door_core();
    let (id, _) = live.connect();
    let mut out = Vec::new();
    for tick in 0..3000u64 {
        let cmd = match tick {
            2 => Some(("execute_manual", json!({}))),
            400 => Some(("set_automatic", json!({"on": true}))),
            1800 => Some(("abort", json!({}))),
            1850 => Some(("set_automatic", json!({"on": true}))),
            _ => None,
        };
        if let Some((kind, payload)) = cmd {
            out.extend(live.handle_text(id, &Envelope::new(kind, tick, 0.0, payload).frame()));
        }
        out.extend(live.tick().into_iter().map(|m| (Target::All, m)));
    }
    let mut fresh = door_core();
    let again = replay(&mut fresh, live.frame_log(), 3000);
    let (a, b) = (statuses(&out), statuses(&again));
    ensure!(!a.is_empty() && a == b, "replayed status stream differs ({} vs {})", a.len(), b.len());
    Ok(format!("rates {counts:?}, {commands} acks in order, {} replayed status events", a.len()))
}

fn serialization() -> Outcome {
    for (name, text) in assets::ALL {
        if name.ends_with(".behavior.json") {
            let seq = ActionSequence::from_bytes(text.as_bytes()).map_err(|e| format!("{name}: {e}"))?;
            ensure!(seq.to_bytes().map_err(|e| e.to_string())? == text.as_bytes(), "{name} is not canonical");
        } else {
            let scene = Scene::from_bytes(text.as_bytes()).map_err(|e| format!("{name}: {e}"))?;
            ensure!(scene.to_canonical_string().as_bytes() == text.as_bytes(), "{name} is not canonical");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut parsed, mut located) = (0, 0);
    for i in 0..4000 {
        let (name, text) = assets::ALL[i % assets::ALL.len()];
        let mut bytes = text.as_bytes().to_vec();
        for _ in 0..rng.random_range(1..4) {
            let pos = rng.random_range(0..bytes.len());
            match rng.random_range(0..3) {
                0 => drop(bytes.remove(pos)),
                1 => bytes[pos] = rng.random(),
                _ => bytes.insert(pos, b" \n\t,:{}[]\"0-e."[rng.random_range(0..14)]),
            }
        }
        if name.ends_with(".behavior.json") {
            match ActionSequence::from_bytes(&bytes) {
                Ok(seq) => {
                    let canonical = seq.to_bytes().map_err(|e| e.to_string())?;
                    let again = ActionSequence::from_bytes(&canonical).map_err(|e| e.to_string())?;
                    ensure!(again.to_bytes().unwrap() == canonical, "re-serialization not canonical");
                    parsed += 1;
                }
                Err(BehaviorError::Parse { line, column, .. }) => {
                    ensure!(line >= 1, "unlocated parse error at {line}:{column}");
                    located += 1;
                }
                Err(BehaviorError::Schema { field, .. }) => {
                    ensure!(!field.is_empty(), "schema error without field");
                    located += 1;
                }
                Err(BehaviorError::UnknownKind { .. }) => located += 1,
                Err(e) => return Err(format!("unexpected error {e:?}")),
            }
        } else {
            match Scene::from_bytes(&bytes) {
                Ok(scene) => {
                    let canonical = scene.to_canonical_string();
                    let again = Scene::from_bytes(canonical.as_bytes()).map_err(|e| e.to_string())?;
                    ensure!(again.to_canonical_string() == canonical, "re-serialization not canonical");
                    parsed += 1;
                }
                Err(SceneError::Parse { line, column, .. }) => {
                    ensure!(line >= 1, "unlocated parse error at {line}:{column}");
                    located += 1;
                }
                Err(SceneError::Invalid(m)) => {
                    ensure!(!m.is_empty(), "empty scene error");
                    located += 1;
                }
                Err(e) => return Err(format!("unexpected error {e:?}")),
            }
        }
    }
    Ok(format!("{} bundled files canonical; fuzz: {parsed} re-canonicalized, {located} located errors", assets::ALL.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("door scenario", door_scenario),
        ("pick-and-place scenario", pick_place_scenario),
        ("task-frame equivariance", equivariance),
        ("IK suite", ik_suite),
        ("frame algebra", frame_algebra),
        ("executor state machine", executor_state_machine),
        ("determinism", determinism),
        ("protocol conformance", protocol_conformance),
        ("serialization", serialization),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name} [{secs:.2}s]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} [{secs:.2}s]: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
