use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Pose6D;

/// Name of the root frame. It has no parent and an identity transform.
pub const WORLD: &str = "world";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("reparenting `{frame}` under `{new_parent}` would create a cycle")]
    Cycle { frame: String, new_parent: String },
    #[error("the `world` frame cannot be moved, reparented or removed")]
    ImmovableRoot,
    #[error("frame `{0}` already exists")]
    DuplicateFrame(String),
    #[error("invalid frame name `{0}`")]
    InvalidName(String),
    #[error("frame `{0}` still has children")]
    HasChildren(String),
}

#[derive(Debug, Clone, PartialEq)]
struct FrameLink {
    parent: String,
    transform: Pose6D,
}

/// Named reference frames linked to their parents, rooted at [`WORLD`].
///
/// Every non-root frame stores its transform relative to its parent, so the
/// world pose of a frame is the composition of transforms along its parent
/// chain. The tree is kept acyclic by construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameTree {
    frames: BTreeMap<String, FrameLink>,
}

/// Flat record used when a tree crosses the wire or lands in a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub name: String,
    pub parent: String,
    pub transform: Pose6D,
}

impl FrameTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, name: &str) -> bool {
        name == WORLD || self.frames.contains_key(name)
    }

    /// Number of frames, not counting the root.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.frames.keys().map(String::as_str)
    }

    pub fn parent(&self, name: &str) -> Result<Option<&str>, FrameError> {
        if name == WORLD {
            return Ok(None);
        }
        self.link(name).map(|l| Some(l.parent.as_str()))
    }

    pub fn transform_to_parent(&self, name: &str) -> Result<Pose6D, FrameError> {
        if name == WORLD {
            return Ok(Pose6D::identity());
        }
        self.link(name).map(|l| l.transform)
    }

    pub fn children<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.frames
            .iter()
            .filter(move |(_, l)| l.parent == name)
            .map(|(n, _)| n.as_str())
    }

    pub fn add_frame(
        &mut self,
        name: &str,
        parent: &str,
        transform: Pose6D,
    ) -> Result<(), FrameError> {
        if name.is_empty() {
            return Err(FrameError::InvalidName(name.to_string()));
        }
        if self.contains(name) {
            return Err(FrameError::DuplicateFrame(name.to_string()));
        }
        if !self.contains(parent) {
            return Err(FrameError::UnknownFrame(parent.to_string()));
        }
        self.frames.insert(
            name.to_string(),
            FrameLink {
                parent: parent.to_string(),
                transform,
            },
        );
        Ok(())
    }

    pub fn set_transform(&mut self, name: &str, transform: Pose6D) -> Result<(), FrameError> {
        if name == WORLD {
            return Err(FrameError::ImmovableRoot);
        }
        let link = self
            .frames
            .get_mut(name)
            .ok_or_else(|| FrameError::UnknownFrame(name.to_string()))?;
        link.transform = transform;
        Ok(())
    }

    /// Inserts the frame or, when it already exists under the same parent,
    /// overwrites its transform.
    pub fn upsert(&mut self, name: &str, parent: &str, transform: Pose6D) -> Result<(), FrameError> {
        match self.frames.get(name) {
            Some(link) if link.parent == parent => self.set_transform(name, transform),
            Some(_) => {
                self.set_parent(name, parent)?;
                self.set_transform(name, transform)
            }
            None => self.add_frame(name, parent, transform),
        }
    }

    pub fn remove_frame(&mut self, name: &str) -> Result<Pose6D, FrameError> {
        if name == WORLD {
            return Err(FrameError::ImmovableRoot);
        }
        if !self.frames.contains_key(name) {
            return Err(FrameError::UnknownFrame(name.to_string()));
        }
        if self.children(name).next().is_some() {
            return Err(FrameError::HasChildren(name.to_string()));
        }
        Ok(self.frames.remove(name).expect("checked above").transform)
    }

    /// World pose of a frame, chaining transforms up to the root.
    pub fn resolve_world(&self, name: &str) -> Result<Pose6D, FrameError> {
        let mut pose = Pose6D::identity();
        let mut current = name;
        while current != WORLD {
            let link = self.link(current)?;
            pose = link.transform.compose(&pose);
            current = &link.parent;
        }
        Ok(pose)
    }

    /// Re-expresses `pose`, given relative to `from`, relative to `to`.
    ///
    /// The world realization is preserved:
    /// `resolve_world(to) ∘ result == resolve_world(from) ∘ pose`.
    pub fn express_in(&self, pose: &Pose6D, from: &str, to: &str) -> Result<Pose6D, FrameError> {
        let from_world = self.resolve_world(from)?;
        let to_world = self.resolve_world(to)?;
        if from == to {
            return Ok(*pose);
        }
        Ok(to_world.inverse().compose(&from_world.compose(pose)))
    }

    /// Moves `frame` under `new_parent` while keeping its world pose.
    pub fn set_parent(&mut self, frame: &str, new_parent: &str) -> Result<(), FrameError> {
        if frame == WORLD {
            return Err(FrameError::ImmovableRoot);
        }
        let current_parent = self.link(frame)?.parent.clone();
        if !self.contains(new_parent) {
            return Err(FrameError::UnknownFrame(new_parent.to_string()));
        }
        if current_parent == new_parent {
            return Ok(());
        }
        if self.is_same_or_descendant(new_parent, frame) {
            return Err(FrameError::Cycle {
                frame: frame.to_string(),
                new_parent: new_parent.to_string(),
            });
        }
        let world = self.resolve_world(frame)?;
        let parent_world = self.resolve_world(new_parent)?;
        let link = self.frames.get_mut(frame).expect("checked above");
        link.parent = new_parent.to_string();
        link.transform = parent_world.inverse().compose(&world);
        Ok(())
    }

    /// True when `candidate` is `ancestor` itself or sits below it.
    pub fn is_same_or_descendant(&self, candidate: &str, ancestor: &str) -> bool {
        let mut current = candidate;
        loop {
            if current == ancestor {
                return true;
            }
            match self.frames.get(current) {
                Some(link) => current = &link.parent,
                None => return false,
            }
        }
    }

    pub fn records(&self) -> Vec<FrameRecord> {
        self.frames
            .iter()
            .map(|(name, link)| FrameRecord {
                name: name.clone(),
                parent: link.parent.clone(),
                transform: link.transform,
            })
            .collect()
    }

    /// Rebuilds a tree from records given in any order.
    pub fn from_records(records: &[FrameRecord]) -> Result<Self, FrameError> {
        let mut tree = FrameTree::new();
        let mut pending: Vec<&FrameRecord> = records.iter().collect();
        while !pending.is_empty() {
            let before = pending.len();
            let mut rest = Vec::new();
            for rec in pending {
                if tree.contains(&rec.parent) {
                    tree.add_frame(&rec.name, &rec.parent, rec.transform)?;
                } else {
                    rest.push(rec);
                }
            }
            if rest.len() == before {
                return Err(FrameError::UnknownFrame(rest[0].parent.clone()));
            }
            pending = rest;
        }
        Ok(tree)
    }

    fn link(&self, name: &str) -> Result<&FrameLink, FrameError> {
        self.frames
            .get(name)
            .ok_or_else(|| FrameError::UnknownFrame(name.to_string()))
    }
}

impl Serialize for FrameTree {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.records().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FrameTree {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let records = Vec::<FrameRecord>::deserialize(deserializer)?;
        FrameTree::from_records(&records).map_err(serde::de::Error::custom)
    }
}
