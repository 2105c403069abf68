use behavior_forge::action::{
    Action, ActionSequence, ArmSelection, BehaviorError, HandState, FORMAT_VERSION,
};
use behavior_forge::geometry::{FrameTree, Pose6D, WORLD};
use behavior_forge::kinematics::{JointConfiguration, Side};
use proptest::prelude::*;
use serde_json::{json, Value};

fn sample() -> ActionSequence {
    let mut seq = ActionSequence::new("sample", "door");
    seq.push(Action::stance(
        "Approach door",
        "door",
        Pose6D::from_xyz_yaw(-0.5, 0.125, 0.0, 0.1),
        Pose6D::from_xyz_yaw(-0.5, -0.125, 0.0, 0.1),
        1.2,
        0.8,
    ));
    seq.push(Action::hand_pose(
        "Pre-grasp hand pose",
        "door_lever",
        Side::Right,
        Pose6D::from_xyz_rpy(0.01, -0.02, 0.3, 0.1, 0.2, -0.3),
        1.7,
    ));
    seq.push(Action::hand_configuration("Close hand", "chest", Side::Left, HandState::Close));
    let angles: JointConfiguration = [("left_elbow".to_string(), -1.6), ("right_elbow".to_string(), -1.6)]
        .into_iter()
        .collect();
    seq.push(Action::arm_joint_angles("Arms in", "chest", ArmSelection::Both, angles, 2.5));
    seq
}

#[test]
fn insert_then_remove_restores_sequence() {
    let mut seq = ActionSequence::new("x", "world");
    seq.insert(0, sample().actions[0].clone()).unwrap();
    assert_eq!(seq.len(), 1);
    let original = sample();
    let mut edited = original.clone();
    edited.insert(0, sample().actions[2].clone()).unwrap();
    edited.remove(0).unwrap();
    assert_eq!(edited, original);
    assert!(matches!(
        edited.insert(9, sample().actions[0].clone()),
        Err(BehaviorError::IndexOutOfRange { index: 9, len: 4 })
    ));
}

#[test]
fn edits_leave_other_actions_untouched() {
    let original = sample();
    let mut seq = original.clone();
    seq.update(1, original.actions[2].clone()).unwrap();
    assert_eq!(seq.actions[0], original.actions[0]);
    assert_eq!(seq.actions[2], original.actions[2]);
    assert_eq!(seq.actions[3], original.actions[3]);
    seq.move_action(3, 0).unwrap();
    assert_eq!(seq.actions[0], original.actions[3]);
}

#[test]
fn canonical_round_trip() {
    let bytes = sample().to_bytes().unwrap();
    assert_eq!(*bytes.last().unwrap(), b'\n');
    let back = ActionSequence::from_bytes(&bytes).unwrap();
    assert_eq!(back, sample());
    assert_eq!(back.to_bytes().unwrap(), bytes);
}

#[test]
fn key_order_does_not_change_bytes() {
    let a = br#"{"version":"1","name":"n","task_frame":"t","actions":[{"kind":"hand_configuration","side":"left","state":"open","description":"d","parent_frame":"chest"}]}"#;
    let b = br#"{"actions":[{"state":"open","parent_frame":"chest","description":"d","side":"left","kind":"hand_configuration"}],"task_frame":"t","name":"n","version":"1"}"#;
    let sa = ActionSequence::from_bytes(a).unwrap().to_bytes().unwrap();
    let sb = ActionSequence::from_bytes(b).unwrap().to_bytes().unwrap();
    assert_eq!(sa, sb);
}

#[test]
fn empty_actions_is_valid() {
    let seq = ActionSequence::from_bytes(br#"{"name":"n","version":"1","task_frame":"t","actions":[]}"#).unwrap();
    assert!(seq.is_empty());
}

fn mutate(f: impl FnOnce(&mut Value)) -> Result<ActionSequence, BehaviorError> {
    let mut v = sample().to_value();
    f(&mut v);
    ActionSequence::from_bytes(v.to_string().as_bytes())
}

#[test]
fn schema_errors_name_the_field() {
    let err = mutate(|v| v["actions"][1]["trajectory_duration"] = json!(-1.0)).unwrap_err();
    assert!(matches!(err, BehaviorError::Schema { ref field, index: Some(1), .. } if field == "trajectory_duration"), "{err}");
    let err = mutate(|v| v["version"] = json!("99")).unwrap_err();
    assert!(matches!(err, BehaviorError::Schema { ref field, index: None, .. } if field == "version"));
    let err = mutate(|v| v["actions"][0]["extra"] = json!(1)).unwrap_err();
    assert!(matches!(err, BehaviorError::Schema { ref field, .. } if field == "extra"));
    let err = mutate(|v| v["actions"][0]["description"] = json!("  ")).unwrap_err();
    assert!(matches!(err, BehaviorError::Schema { ref field, .. } if field == "description"));
    let err = mutate(|v| v["actions"][0]["right_foot"]["position"] = json!([-0.5, -0.9, 0.0])).unwrap_err();
    assert!(matches!(err, BehaviorError::Schema { ref field, index: Some(0), .. } if field == "right_foot"));
}

#[test]
fn unknown_kind_is_rejected() {
    let err = mutate(|v| v["actions"][2]["kind"] = json!("teleport")).unwrap_err();
    assert_eq!(
        err,
        BehaviorError::UnknownKind {
            index: 2,
            kind: "teleport".into()
        }
    );
}

#[test]
fn parse_errors_are_located() {
    let err = ActionSequence::from_bytes(b"{\n\"name\": \"n\",\n\"version\": \"1\"\n").unwrap_err();
    assert!(matches!(err, BehaviorError::Parse { line: 4, .. }), "{err}");
}

#[test]
fn serialize_refuses_invalid_sequences() {
    let mut seq = sample();
    seq.actions[1].description.clear();
    match seq.to_bytes() {
        Err(BehaviorError::Validation(v)) => {
            assert_eq!(v.len(), 1);
            assert_eq!(v[0].index, Some(1));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(FORMAT_VERSION, "1");
}

#[test]
fn frame_issues_name_action_and_frame() {
    let mut tree = FrameTree::new();
    tree.add_frame("door", WORLD, Pose6D::identity()).unwrap();
    tree.add_frame("chest", WORLD, Pose6D::identity()).unwrap();
    let issues = sample().validate_against_frames(&tree);
    assert_eq!(issues.len(), 1);
    assert_eq!(issues[0].index, 1);
    assert_eq!(issues[0].frame, "door_lever");
    tree.add_frame("door_lever", "door", Pose6D::identity()).unwrap();
    assert!(sample().validate_against_frames(&tree).is_empty());
}

proptest! {
    #[test]
    fn frame_issues_are_stable_under_reordering(perm in Just((0..4usize).collect::<Vec<_>>()).prop_shuffle()) {
        let tree = FrameTree::new();
        let seq = sample();
        let mut shuffled = seq.clone();
        shuffled.actions = perm.iter().map(|&i| seq.actions[i].clone()).collect();
        let mut a: Vec<String> = seq.validate_against_frames(&tree).into_iter().map(|i| i.frame).collect();
        let mut b: Vec<String> = shuffled.validate_against_frames(&tree).into_iter().map(|i| i.frame).collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mutated_inputs_parse_canonically_or_fail_with_location(
        pos in 0usize..2000, byte in any::<u8>(), delete in any::<bool>()
    ) {
        let mut bytes = sample().to_bytes().unwrap();
        let pos = pos % bytes.len();
        if delete { bytes.remove(pos); } else { bytes[pos] = byte; }
        match ActionSequence::from_bytes(&bytes) {
            Ok(seq) => {
                let canonical = seq.to_bytes().unwrap();
                let again = ActionSequence::from_bytes(&canonical).unwrap();
                prop_assert_eq!(again.to_bytes().unwrap(), canonical);
            }
            Err(BehaviorError::Parse { line, column, .. }) => prop_assert!(line >= 1 && column <= bytes.len()),
            Err(BehaviorError::Schema { field, .. }) => prop_assert!(!field.is_empty()),
            Err(BehaviorError::UnknownKind { kind, .. }) => prop_assert!(!kind.is_empty()),
            Err(other) => prop_assert!(false, "unexpected error {other:?}"),
        }
    }

    #[test]
    fn reformatted_inputs_canonicalize(indent in 0usize..4) {
        let v = sample().to_value();
        let text = if indent == 0 { v.to_string() } else {
            let mut buf = Vec::new();
            let pad = " ".repeat(indent);
            let fmt = serde_json::ser::PrettyFormatter::with_indent(pad.as_bytes());
            let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
            serde::Serialize::serialize(&v, &mut ser).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let seq = ActionSequence::from_bytes(text.as_bytes()).unwrap();
        prop_assert_eq!(seq.to_bytes().unwrap(), sample().to_bytes().unwrap());
    }
}

#[test]
fn published_schema_lists_every_action_kind() {
    let schema: Value = serde_json::from_str(include_str!("../../../docs/behavior.schema.json")).unwrap();
    let kinds: Vec<&str> = schema["$defs"]["action"]["properties"]["kind"]["enum"]
        .as_array()
        .unwrap()
        .iter()
        .map(|k| k.as_str().unwrap())
        .collect();
    assert_eq!(kinds, behavior_forge::action::ACTION_KINDS);
    assert_eq!(schema["properties"]["version"]["const"], FORMAT_VERSION);
}
