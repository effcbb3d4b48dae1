//! TOML scene documents.
//!
//! ```toml
//! format = 1
//! units = "meters"
//!
//! [floor]
//! min = [-3.0, -3.0]
//! max = [3.0, 3.0]
//!
//! [[objects]]
//! id = "chair_0"
//! category = "chair"
//! position = [0.0, 0.0, 0.0]
//! rotation = [0.0, 0.0, 1.57]   # roll, pitch, yaw
//!
//! [[objects.primitives]]
//! shape = "box"                 # box | cylinder | sphere
//! position = [0.0, 0.0, 0.45]
//! dimensions = [0.45, 0.45, 0.05]
//! ```

use serde::{Deserialize, Serialize};

use super::{FloorExtent, PrimitiveSpec, Scene, SceneError, SceneObject};

#[derive(Debug, Serialize, Deserialize)]
struct RawScene {
    format: u32,
    units: String,
    floor: FloorExtent,
    #[serde(default)]
    objects: Vec<RawObject>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawObject {
    id: String,
    category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    semantic_label: Option<u32>,
    #[serde(default)]
    position: [f64; 3],
    #[serde(default)]
    rotation: [f64; 3],
    primitives: Vec<PrimitiveSpec>,
}

pub fn build_scene(text: &str) -> Result<Scene, SceneError> {
    let raw: RawScene = toml::from_str(text).map_err(|e| SceneError::Malformed(e.to_string()))?;
    if raw.format != 1 {
        return Err(SceneError::Malformed(format!("unsupported format {}", raw.format)));
    }
    if raw.units != "meters" {
        return Err(SceneError::Malformed(format!("units must be \"meters\", got \"{}\"", raw.units)));
    }
    let objects = raw
        .objects
        .into_iter()
        .map(|o| SceneObject::new(o.id, o.category, o.position, o.rotation, o.primitives, o.semantic_label))
        .collect::<Result<Vec<_>, _>>()?;
    Scene::new(objects, raw.floor)
}

pub fn scene_to_document(scene: &Scene) -> String {
    let raw = RawScene {
        format: 1,
        units: "meters".into(),
        floor: scene.floor,
        objects: scene
            .objects
            .iter()
            .map(|o| RawObject {
                id: o.id.clone(),
                category: o.category.clone(),
                semantic_label: Some(o.semantic_label),
                position: o.position,
                rotation: o.rotation,
                primitives: o.specs.clone(),
            })
            .collect(),
    };
    toml::to_string(&raw).expect("scene serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_BOX: &str = r#"
format = 1
units = "meters"
[floor]
min = [-2.0, -2.0]
max = [2.0, 2.0]
[[objects]]
id = "chair_0"
category = "chair"
[[objects.primitives]]
shape = "box"
dimensions = [1.0, 1.0, 1.0]
"#;

    #[test]
    fn minimal_scene() {
        let s = build_scene(ONE_BOX).unwrap();
        assert_eq!(s.objects.len(), 1);
        assert_eq!(s.objects[0].category, "chair");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = format!("{ONE_BOX}\n[[objects]]\nid = \"chair_0\"\ncategory = \"chair\"\n[[objects.primitives]]\nshape = \"sphere\"\ndimensions = [0.2]\n");
        assert!(matches!(build_scene(&text), Err(SceneError::DuplicateId(id)) if id == "chair_0"));
    }

    #[test]
    fn units_and_format_checked() {
        assert!(build_scene(&ONE_BOX.replace("meters", "feet")).is_err());
        assert!(build_scene(&ONE_BOX.replace("format = 1", "format = 2")).is_err());
        assert!(build_scene("format = ").is_err());
    }

    #[test]
    fn round_trip() {
        let s = build_scene(ONE_BOX).unwrap();
        let again = build_scene(&scene_to_document(&s)).unwrap();
        assert_eq!(s, again);
    }
}
