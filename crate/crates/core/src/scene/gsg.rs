//! Rule-based global scene graph over object bounding boxes.

use serde::{Deserialize, Serialize};

use super::{Scene, SceneObject, FLOOR_ID};
use crate::geom::Aabb;
use crate::graphs::{Edge, Node, NodeKind, SceneGraph};

pub const REL_ON: &str = "on";
pub const REL_NEAR: &str = "near";
pub const REL_ABOVE: &str = "above";
pub const REL_LEFT: &str = "left of";
pub const REL_RIGHT: &str = "right of";
pub const REL_FRONT: &str = "in front of";
pub const REL_BEHIND: &str = "behind";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GsgThresholds {
    /// Largest surface gap (m) for "near".
    pub near: f64,
    /// Largest vertical gap (m) for "on".
    pub on: f64,
    /// Largest surface gap (m) for the directional predicates.
    pub directional_range: f64,
}

impl Default for GsgThresholds {
    fn default() -> Self {
        Self { near: 0.5, on: 0.02, directional_range: 2.0 }
    }
}

/// Relations from `a` to `b`, in a fixed order.
pub(crate) fn pair_relations(a: &Aabb, b: &Aabb, th: &GsgThresholds) -> Vec<&'static str> {
    let mut out = Vec::new();
    let overlap = a.footprint_overlap(b) > 0.0;
    let vgap = a.min[2] - b.max[2];
    let (ca, cb) = (a.center(), b.center());
    if overlap && vgap.abs() <= th.on && ca.z > cb.z {
        out.push(REL_ON);
    }
    if overlap && vgap > th.on {
        out.push(REL_ABOVE);
    }
    let gap = a.gap(b);
    if gap <= th.near {
        out.push(REL_NEAR);
    }
    if gap <= th.directional_range {
        let (dx, dy) = (cb.x - ca.x, cb.y - ca.y);
        if dx.abs() >= dy.abs() && dx != 0.0 {
            out.push(if dx > 0.0 { REL_LEFT } else { REL_RIGHT });
        } else if dy != 0.0 {
            // −y is the front of the scene
            out.push(if dy > 0.0 { REL_FRONT } else { REL_BEHIND });
        }
    }
    out
}

pub(crate) fn object_node(o: &SceneObject) -> Node {
    Node {
        id: o.id.clone(),
        kind: NodeKind::Object,
        category: o.category.clone(),
        object: Some(o.id.clone()),
        bbox: Some(o.aabb()),
    }
}

pub(crate) fn floor_node(scene: &Scene) -> Node {
    Node {
        id: FLOOR_ID.into(),
        kind: NodeKind::Floor,
        category: FLOOR_ID.into(),
        object: None,
        bbox: Some(scene.floor.aabb()),
    }
}

/// One node per object plus the floor; pairwise predicate edges.
pub fn global_scene_graph(scene: &Scene, th: &GsgThresholds) -> SceneGraph {
    let mut g = SceneGraph::new();
    g.nodes.push(floor_node(scene));
    g.nodes.extend(scene.objects.iter().map(object_node));
    for a in &scene.objects {
        let ba = a.aabb();
        if ba.min[2].abs() <= th.on {
            g.edges.push(Edge::new(&a.id, REL_ON, FLOOR_ID));
        }
        for b in &scene.objects {
            if a.id == b.id {
                continue;
            }
            for rel in pair_relations(&ba, &b.aabb(), th) {
                g.edges.push(Edge::new(&a.id, rel, &b.id));
            }
        }
    }
    g
}
