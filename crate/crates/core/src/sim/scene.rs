//! Scene configuration files (`*.scene.json`).

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::collision::Obb;
use super::door::{DoorGeometry, DoorThresholds};
use super::perception::PerceptionConfig;
use crate::geometry::Pose6D;
use crate::stance::{PlannerLimits, Stance};

pub const SCENE_VERSION: &str = "1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("scene parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("cannot access `{path}`: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Marker {
    pub id: u32,
    /// Marker pose in the world; +z points out of the printed face.
    pub pose: Pose6D,
    pub size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerLink {
    pub id: u32,
    pub marker_to_object: Pose6D,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    /// Box center in the object frame.
    pub center: Pose6D,
    pub half_extents: [f64; 3],
}

impl BoxSpec {
    pub fn obb(&self) -> Obb {
        Obb::new(self.center, self.half_extents)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    /// Name of the task frame registered for this object.
    pub frame: String,
    /// Fiducial the object is preregistered against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker: Option<MarkerLink>,
    /// Fixed world pose, for objects without a marker.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose6D>,
    pub boxes: Vec<BoxSpec>,
    pub color: [u8; 3],
    /// Grasp points in the object frame; objects with any can be picked up.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grasp_points: Vec<Pose6D>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoorSpec {
    /// Object whose frame is the door frame.
    pub object: String,
    /// Task frame registered at the lever pivot.
    pub lever_frame: String,
    pub geometry: DoorGeometry,
    pub panel_color: [u8; 3],
    /// Error added to the registered lever frame, to reproduce a badly
    /// measured marker-to-handle transform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_bias: Option<Pose6D>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Hand-to-grasp-point distance within which closing the hand grasps.
    pub grasp_radius: f64,
    pub lever_track_radius: f64,
    pub lever_threshold: f64,
    pub hand_contact_radius: f64,
    pub max_hinge_rate: f64,
}

impl Thresholds {
    pub fn door(&self) -> DoorThresholds {
        DoorThresholds {
            lever_track_radius: self.lever_track_radius,
            lever_threshold: self.lever_threshold,
            hand_contact_radius: self.hand_contact_radius,
            max_hinge_rate: self.max_hinge_rate,
        }
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        let d = DoorThresholds::default();
        Self {
            grasp_radius: 0.05,
            lever_track_radius: d.lever_track_radius,
            lever_threshold: d.lever_threshold,
            hand_contact_radius: d.hand_contact_radius,
            max_hinge_rate: d.max_hinge_rate,
        }
    }
}

/// What must hold at the end of a scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SuccessPredicate {
    /// Pelvis beyond the door plane, door open at least `min_hinge_angle`,
    /// and no collision during the run.
    DoorTraversal { min_hinge_angle: f64 },
    /// `object` released within `tolerance` of `target`, given in the frame
    /// of object `relative_to`.
    ObjectPlaced {
        object: String,
        relative_to: String,
        target: Pose6D,
        tolerance: f64,
    },
    /// Completing every action is enough.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub name: String,
    pub version: String,
    pub robot_start: Stance,
    pub markers: Vec<Marker>,
    pub objects: Vec<ObjectSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub door: Option<DoorSpec>,
    pub thresholds: Thresholds,
    pub planner: PlannerLimits,
    pub perception: PerceptionConfig,
    pub success: SuccessPredicate,
}

impl Scene {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SceneError> {
        let scene: Scene = serde_json::from_slice(bytes).map_err(|e| SceneError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| SceneError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn to_canonical_string(&self) -> String {
        crate::json::to_pretty(&serde_json::to_value(self).expect("scenes always serialize"))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SceneError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_canonical_string()).map_err(|e| SceneError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let invalid = |m: String| Err(SceneError::Invalid(m));
        if self.version != SCENE_VERSION {
            return invalid(format!("unsupported version `{}`", self.version));
        }
        let mut marker_ids = BTreeSet::new();
        for m in &self.markers {
            if !marker_ids.insert(m.id) {
                return invalid(format!("duplicate marker id {}", m.id));
            }
        }
        let mut ids = BTreeSet::new();
        let mut frames = BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.id.as_str()) {
                return invalid(format!("duplicate object id `{}`", o.id));
            }
            if o.frame.is_empty() || !frames.insert(o.frame.as_str()) {
                return invalid(format!("object `{}` needs a unique frame name", o.id));
            }
            match (&o.marker, &o.pose) {
                (Some(link), None) if !marker_ids.contains(&link.id) => {
                    return invalid(format!("object `{}` references unknown marker {}", o.id, link.id))
                }
                (Some(_), None) | (None, Some(_)) => {}
                _ => return invalid(format!("object `{}` needs exactly one of `marker` or `pose`", o.id)),
            }
            if o.boxes.iter().any(|b| b.half_extents.iter().any(|h| !(*h > 0.0))) {
                return invalid(format!("object `{}` has a box with non-positive extent", o.id));
            }
        }
        if let Some(door) = &self.door {
            if !ids.contains(door.object.as_str()) {
                return invalid(format!("door references unknown object `{}`", door.object));
            }
            if frames.contains(door.lever_frame.as_str()) {
                return invalid(format!("lever frame `{}` clashes with an object frame", door.lever_frame));
            }
        }
        match &self.success {
            SuccessPredicate::DoorTraversal { .. } if self.door.is_none() => {
                return invalid("door success predicate in a scene without a door".into())
            }
            SuccessPredicate::ObjectPlaced { object, relative_to, .. } => {
                for id in [object, relative_to] {
                    if !ids.contains(id.as_str()) {
                        return invalid(format!("success predicate references unknown object `{id}`"));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn object(&self, id: &str) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn marker(&self, id: u32) -> Option<&Marker> {
        self.markers.iter().find(|m| m.id == id)
    }

    /// True world pose of an object as placed in the scene file.
    pub fn initial_object_pose(&self, object: &ObjectSpec) -> Pose6D {
        match (&object.marker, &object.pose) {
            (Some(link), _) => self
                .marker(link.id)
                .map(|m| m.pose.compose(&link.marker_to_object))
                .unwrap_or_default(),
            (None, Some(p)) => *p,
            (None, None) => Pose6D::identity(),
        }
    }

    /// The same scene with every world-anchored pose moved by `t`.
    pub fn transformed(&self, t: &Pose6D) -> Scene {
        let mut out = self.clone();
        out.robot_start = self.robot_start.transformed(t);
        for m in &mut out.markers {
            m.pose = t.compose(&m.pose);
        }
        for o in &mut out.objects {
            if let Some(p) = &mut o.pose {
                *p = t.compose(p);
            }
        }
        out
    }
}
