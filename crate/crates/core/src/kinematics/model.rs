use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose6D;

const BUNDLED_MODEL: &str = include_str!("../../assets/nadia_sim.json");

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("model validation error{}: {message}", joint.as_ref().map(|j| format!(" in joint `{j}`")).unwrap_or_default())]
    Validation {
        joint: Option<String>,
        message: String,
    },
    #[error("cannot read model `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// Name of the arm chain on this side in the bundled model.
    pub fn arm_chain(self) -> &'static str {
        match self {
            Side::Left => "left_arm",
            Side::Right => "right_arm",
        }
    }

    pub fn hand_frame(self) -> &'static str {
        match self {
            Side::Left => "left_hand",
            Side::Right => "right_hand",
        }
    }

    pub fn foot_frame(self) -> &'static str {
        match self {
            Side::Left => "left_foot",
            Side::Right => "right_foot",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    pub parent_link: String,
    pub child_link: String,
    pub axis: [f64; 3],
    pub offset: Pose6D,
    pub limits: [f64; 2],
}

impl JointSpec {
    pub fn axis_vector(&self) -> Vector3<f64> {
        Vector3::from(self.axis)
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.limits[0], self.limits[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub name: String,
    pub side: Side,
    pub joints: Vec<String>,
    pub end_effector_offset: Pose6D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyBox {
    pub link: String,
    pub center: Pose6D,
    pub half_extents: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorMount {
    pub link: String,
    pub offset: Pose6D,
}

/// On-disk model document. Field order mirrors the bundled `nadia_sim.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub name: String,
    pub links: Vec<String>,
    pub root_link: String,
    pub chest_link: String,
    pub pelvis_to_chest: Pose6D,
    pub standing_pelvis_height: f64,
    pub joints: Vec<JointSpec>,
    pub chains: Vec<ChainSpec>,
    pub sensor: SensorMount,
    pub body_boxes: Vec<BodyBox>,
    pub arm_radius: f64,
}

/// Validated kinematic humanoid description. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    doc: ModelDocument,
    joint_index: BTreeMap<String, usize>,
    chains: BTreeMap<String, Chain>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub name: String,
    pub side: Side,
    /// Indices into [`RobotModel::joints`], chest to hand.
    pub joints: Vec<usize>,
    pub end_effector_offset: Pose6D,
}

impl RobotModel {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_document(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// The bundled two-arm `nadia_sim` model.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_MODEL).expect("bundled model is valid")
    }

    pub fn bundled_json() -> &'static str {
        BUNDLED_MODEL
    }

    pub fn from_document(mut doc: ModelDocument) -> Result<Self, ModelError> {
        let invalid = |joint: Option<&str>, message: String| ModelError::Validation {
            joint: joint.map(str::to_string),
            message,
        };
        let links: BTreeSet<&str> = doc.links.iter().map(String::as_str).collect();
        if links.len() != doc.links.len() {
            return Err(invalid(None, "duplicate link names".into()));
        }
        for (what, link) in [("root_link", &doc.root_link), ("chest_link", &doc.chest_link)] {
            if !links.contains(link.as_str()) {
                return Err(invalid(None, format!("{what} `{link}` is not a declared link")));
            }
        }
        if !(doc.standing_pelvis_height > 0.0) {
            return Err(invalid(None, "standing_pelvis_height must be positive".into()));
        }
        if !(doc.arm_radius > 0.0) {
            return Err(invalid(None, "arm_radius must be positive".into()));
        }

        let mut joint_index = BTreeMap::new();
        for (i, joint) in doc.joints.iter_mut().enumerate() {
            let name = joint.name.clone();
            if name.is_empty() {
                return Err(invalid(None, format!("joint #{i} has an empty name")));
            }
            if joint_index.insert(name.clone(), i).is_some() {
                return Err(invalid(Some(&name), "duplicate joint name".into()));
            }
            for link in [&joint.parent_link, &joint.child_link] {
                if !links.contains(link.as_str()) {
                    return Err(invalid(Some(&name), format!("unknown link `{link}`")));
                }
            }
            let [lo, hi] = joint.limits;
            if !(lo < hi) {
                return Err(invalid(
                    Some(&name),
                    format!("limits must satisfy lo < hi, got [{lo}, {hi}]"),
                ));
            }
            let axis = joint.axis_vector();
            let norm = axis.norm();
            if !(norm > 1e-9) {
                return Err(invalid(Some(&name), "axis must be non-zero".into()));
            }
            joint.axis = (axis / norm).into();
        }

        let mut chains = BTreeMap::new();
        for spec in &doc.chains {
            if spec.joints.is_empty() {
                return Err(invalid(None, format!("chain `{}` has no joints", spec.name)));
            }
            let mut expected_parent = doc.chest_link.as_str();
            let mut indices = Vec::with_capacity(spec.joints.len());
            for jname in &spec.joints {
                let idx = *joint_index.get(jname).ok_or_else(|| {
                    invalid(
                        Some(jname),
                        format!("chain `{}` references an unknown joint", spec.name),
                    )
                })?;
                let joint = &doc.joints[idx];
                if joint.parent_link != expected_parent {
                    return Err(invalid(
                        Some(jname),
                        format!(
                            "chain `{}` is not connected: expected parent link `{expected_parent}`, found `{}`",
                            spec.name, joint.parent_link
                        ),
                    ));
                }
                expected_parent = joint.child_link.as_str();
                indices.push(idx);
            }
            let chain = Chain {
                name: spec.name.clone(),
                side: spec.side,
                joints: indices,
                end_effector_offset: spec.end_effector_offset,
            };
            if chains.insert(spec.name.clone(), chain).is_some() {
                return Err(invalid(None, format!("duplicate chain `{}`", spec.name)));
            }
        }

        if !links.contains(doc.sensor.link.as_str()) {
            return Err(invalid(None, format!("sensor link `{}` is not declared", doc.sensor.link)));
        }
        for b in &doc.body_boxes {
            if !links.contains(b.link.as_str()) {
                return Err(invalid(None, format!("body box on unknown link `{}`", b.link)));
            }
        }

        Ok(Self {
            doc,
            joint_index,
            chains,
        })
    }

    pub fn name(&self) -> &str {
        &self.doc.name
    }

    pub fn document(&self) -> &ModelDocument {
        &self.doc
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.doc.joints
    }

    pub fn joint(&self, name: &str) -> Option<&JointSpec> {
        self.joint_index.get(name).map(|&i| &self.doc.joints[i])
    }

    pub fn chains(&self) -> impl Iterator<Item = &Chain> {
        self.chains.values()
    }

    pub fn chain(&self, name: &str) -> Option<&Chain> {
        self.chains.get(name)
    }

    pub fn arm(&self, side: Side) -> Option<&Chain> {
        self.chains.values().find(|c| c.side == side)
    }

    pub fn chain_joint_names(&self, chain: &Chain) -> Vec<&str> {
        chain
            .joints
            .iter()
            .map(|&i| self.doc.joints[i].name.as_str())
            .collect()
    }

    pub fn pelvis_to_chest(&self) -> Pose6D {
        self.doc.pelvis_to_chest
    }

    pub fn standing_pelvis_height(&self) -> f64 {
        self.doc.standing_pelvis_height
    }

    pub fn sensor(&self) -> &SensorMount {
        &self.doc.sensor
    }

    pub fn body_boxes(&self) -> &[BodyBox] {
        &self.doc.body_boxes
    }

    pub fn arm_radius(&self) -> f64 {
        self.doc.arm_radius
    }

    /// All joints at zero, clamped into their limits.
    pub fn zero_configuration(&self) -> JointConfiguration {
        let mut q = JointConfiguration::default();
        for j in &self.doc.joints {
            q.set(&j.name, j.clamp(0.0));
        }
        q
    }

    /// Returns `q` with every known joint clamped to its limits.
    pub fn clamp_configuration(&self, q: &JointConfiguration) -> JointConfiguration {
        let mut out = q.clone();
        for (name, value) in out.0.iter_mut() {
            if let Some(j) = self.joint(name) {
                *value = j.clamp(*value);
            }
        }
        out
    }

    pub fn within_limits(&self, q: &JointConfiguration) -> bool {
        q.iter().all(|(name, v)| match self.joint(name) {
            Some(j) => v >= j.limits[0] && v <= j.limits[1],
            None => true,
        })
    }

    /// Origin of the first chain joint in the chest frame.
    pub fn chain_base(&self, chain: &Chain) -> nalgebra::Vector3<f64> {
        *self.doc.joints[chain.joints[0]].offset.position()
    }

    /// Upper bound on the base-to-hand distance: sum of the link offsets
    /// after the first joint plus the end-effector offset.
    pub fn chain_reach(&self, chain: &Chain) -> f64 {
        chain.joints[1..]
            .iter()
            .map(|&i| self.doc.joints[i].offset.position().norm())
            .sum::<f64>()
            + chain.end_effector_offset.position().norm()
    }
}

/// Joint angles keyed by joint name, radians.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfiguration(BTreeMap<String, f64>);

impl JointConfiguration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, joint: &str) -> Option<f64> {
        self.0.get(joint).copied()
    }

    pub fn set(&mut self, joint: &str, value: f64) {
        self.0.insert(joint.to_string(), value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Overwrites the joints present in `other`.
    pub fn merge(&mut self, other: &JointConfiguration) {
        for (k, v) in other.iter() {
            self.set(k, v);
        }
    }

    pub fn as_map(&self) -> &BTreeMap<String, f64> {
        &self.0
    }
}

impl FromIterator<(String, f64)> for JointConfiguration {
    fn from_iter<T: IntoIterator<Item = (String, f64)>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}
