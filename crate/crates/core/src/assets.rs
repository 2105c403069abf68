//! Bundled scenes and behaviors.

use crate::action::ActionSequence;
use crate::sim::Scene;

pub const DOOR_SCENE: &str = include_str!("../assets/door_scene.json");
pub const TABLE_SCENE: &str = include_str!("../assets/table_scene.json");
pub const PUSH_DOOR_BEHAVIOR: &str = include_str!("../assets/push_door.behavior.json");
pub const PICK_PLACE_BEHAVIOR: &str = include_str!("../assets/pick_place_can.behavior.json");

/// `(file name, contents)` of every bundled scene and behavior.
pub const ALL: [(&str, &str); 4] = [
    ("door_scene.json", DOOR_SCENE),
    ("table_scene.json", TABLE_SCENE),
    ("push_door.behavior.json", PUSH_DOOR_BEHAVIOR),
    ("pick_place_can.behavior.json", PICK_PLACE_BEHAVIOR),
];

pub fn door_scene() -> Scene {
    Scene::from_bytes(DOOR_SCENE.as_bytes()).expect("bundled scene is valid")
}

pub fn table_scene() -> Scene {
    Scene::from_bytes(TABLE_SCENE.as_bytes()).expect("bundled scene is valid")
}

pub fn push_door() -> ActionSequence {
    ActionSequence::from_bytes(PUSH_DOOR_BEHAVIOR.as_bytes()).expect("bundled behavior is valid")
}

pub fn pick_place_can() -> ActionSequence {
    ActionSequence::from_bytes(PICK_PLACE_BEHAVIOR.as_bytes()).expect("bundled behavior is valid")
}
