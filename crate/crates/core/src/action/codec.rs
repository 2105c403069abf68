use serde_json::{json, Map, Value};

use super::{
    Action, ActionKind, ActionSequence, ArmJointAngles, ArmSelection, BehaviorError, HandConfiguration,
    HandPose, HandState, StancePose, ACTION_KINDS, FORMAT_VERSION,
};
use crate::json::{as_number, encode_pose, FieldError, Fields};
use crate::kinematics::{JointConfiguration, Side};

fn schema(index: Option<usize>) -> impl Fn(FieldError) -> BehaviorError {
    move |e| BehaviorError::Schema {
        field: e.field,
        index,
        message: e.message,
    }
}

pub fn sequence_to_value(seq: &ActionSequence) -> Value {
    json!({
        "name": seq.name,
        "version": seq.version,
        "task_frame": seq.task_frame,
        "actions": seq.actions.iter().map(action_to_value).collect::<Vec<_>>(),
    })
}

pub fn action_to_value(action: &Action) -> Value {
    let mut m = Map::new();
    m.insert("kind".into(), action.kind.name().into());
    m.insert("description".into(), action.description.clone().into());
    m.insert("parent_frame".into(), action.parent_frame.clone().into());
    match &action.kind {
        ActionKind::StancePose(s) => {
            m.insert("left_foot".into(), encode_pose(&s.left_foot));
            m.insert("right_foot".into(), encode_pose(&s.right_foot));
            m.insert("swing_duration".into(), s.swing_duration.into());
            m.insert("transfer_duration".into(), s.transfer_duration.into());
        }
        ActionKind::HandPose(h) => {
            m.insert("side".into(), h.side.as_str().into());
            m.insert("goal".into(), encode_pose(&h.goal));
            m.insert("trajectory_duration".into(), h.trajectory_duration.into());
        }
        ActionKind::HandConfiguration(h) => {
            m.insert("side".into(), h.side.as_str().into());
            m.insert("state".into(), h.state.as_str().into());
        }
        ActionKind::ArmJointAngles(a) => {
            m.insert("side".into(), a.side.as_str().into());
            m.insert("angles".into(), serde_json::to_value(&a.angles).expect("angles serialize"));
            m.insert("trajectory_duration".into(), a.trajectory_duration.into());
        }
    }
    Value::Object(m)
}

pub fn sequence_from_value(value: &Value) -> Result<ActionSequence, BehaviorError> {
    let top = schema(None);
    let mut f = Fields::new(value, "behavior").map_err(&top)?;
    let version = f.string("version").map_err(&top)?;
    if version != FORMAT_VERSION {
        return Err(BehaviorError::Schema {
            field: "version".into(),
            index: None,
            message: format!("unsupported version `{version}`, expected `{FORMAT_VERSION}`"),
        });
    }
    let name = f.non_empty_string("name").map_err(&top)?.to_string();
    let task_frame = f.non_empty_string("task_frame").map_err(&top)?.to_string();
    let items = f.array("actions").map_err(&top)?;
    f.finish().map_err(&top)?;
    let actions = items
        .iter()
        .enumerate()
        .map(|(i, v)| action_from_value_at(v, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ActionSequence {
        name,
        version: version.to_string(),
        task_frame,
        actions,
    })
}

/// Decodes a single action, e.g. from a protocol edit command.
pub fn action_from_value(value: &Value) -> Result<Action, BehaviorError> {
    action_from_value_at(value, 0)
}

fn side(f: &mut Fields<'_>) -> Result<Side, FieldError> {
    match f.string("side")? {
        "left" => Ok(Side::Left),
        "right" => Ok(Side::Right),
        other => Err(FieldError::new("side", format!("expected `left` or `right`, got `{other}`"))),
    }
}

fn action_from_value_at(value: &Value, index: usize) -> Result<Action, BehaviorError> {
    let err = schema(Some(index));
    let mut f = Fields::new(value, "action").map_err(&err)?;
    let kind_name = f.string("kind").map_err(&err)?;
    if !ACTION_KINDS.contains(&kind_name) {
        return Err(BehaviorError::UnknownKind {
            index,
            kind: kind_name.to_string(),
        });
    }
    let description = f.non_empty_string("description").map_err(&err)?.to_string();
    let parent_frame = f.non_empty_string("parent_frame").map_err(&err)?.to_string();
    let kind = match kind_name {
        "stance_pose" => ActionKind::StancePose(StancePose {
            left_foot: f.pose("left_foot").map_err(&err)?,
            right_foot: f.pose("right_foot").map_err(&err)?,
            swing_duration: f.positive("swing_duration").map_err(&err)?,
            transfer_duration: f.positive("transfer_duration").map_err(&err)?,
        }),
        "hand_pose" => ActionKind::HandPose(HandPose {
            side: side(&mut f).map_err(&err)?,
            goal: f.pose("goal").map_err(&err)?,
            trajectory_duration: f.positive("trajectory_duration").map_err(&err)?,
        }),
        "hand_configuration" => {
            let side = side(&mut f).map_err(&err)?;
            let state = f.string("state").map_err(&err)?;
            let state = HandState::parse(state).ok_or_else(|| {
                err(FieldError::new("state", format!("expected `open` or `close`, got `{state}`")))
            })?;
            ActionKind::HandConfiguration(HandConfiguration { side, state })
        }
        _ => {
            let s = f.string("side").map_err(&err)?;
            let side = ArmSelection::parse(s).ok_or_else(|| {
                err(FieldError::new(
                    "side",
                    format!("expected `left`, `right` or `both`, got `{s}`"),
                ))
            })?;
            let raw = f
                .required("angles")
                .map_err(&err)?
                .as_object()
                .ok_or_else(|| err(FieldError::new("angles", "expected an object of joint angles")))?;
            let mut angles = JointConfiguration::new();
            for (joint, v) in raw {
                angles.set(joint, as_number(v, "angles").map_err(&err)?);
            }
            ActionKind::ArmJointAngles(ArmJointAngles {
                side,
                angles,
                trajectory_duration: f.positive("trajectory_duration").map_err(&err)?,
            })
        }
    };
    f.finish().map_err(&err)?;
    let action = Action {
        description,
        parent_frame,
        kind,
    };
    if let Some(v) = action.violations(Some(index)).into_iter().next() {
        return Err(BehaviorError::Schema {
            field: v.field,
            index: Some(index),
            message: v.message,
        });
    }
    Ok(action)
}
