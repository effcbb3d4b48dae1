//! Scene-graph updates between successive people of a multi-person scene.

use super::{Edge, GraphError, Node, NodeKind, SceneGraph};
use crate::geom::{Aabb, Vec3};
use crate::scene::{GsgThresholds, Scene, FLOOR_ID};

/// Largest distance (m) from a contact vertex to a surface for the person to
/// count as resting on it.
pub const CONTACT_DISTANCE: f64 = 0.05;

/// A placed body: world vertices and their contact flags.
#[derive(Debug, Clone)]
pub struct HumanPlacement {
    pub vertices: Vec<Vec3>,
    pub contact: Vec<bool>,
}

#[derive(Debug, Clone)]
pub enum GraphEvent {
    Accept(HumanPlacement),
    /// Object node to prune.
    Reject(String),
}

fn surface_distance(scene: &Scene, node: &Node, p: &Vec3) -> Option<f64> {
    if node.kind == NodeKind::Floor {
        return Some(p.z);
    }
    let o = scene.object(node.object.as_deref()?)?;
    Some(o.sdf(p))
}

/// Returns the updated graph: Accept adds a human node with "on" edges to
/// surfaces its contact vertices rest on and "near" edges to other nearby
/// objects; Reject removes an object node and its edges.
pub fn update_graph(gsg: &SceneGraph, event: &GraphEvent, scene: &Scene, th: &GsgThresholds) -> Result<SceneGraph, GraphError> {
    let mut g = gsg.clone();
    match event {
        GraphEvent::Reject(id) => {
            match g.node(id) {
                Some(n) if !n.is_human() => {}
                Some(_) => return Err(GraphError::Invalid(format!("'{id}' is not an object node"))),
                None => return Err(GraphError::UnknownNode(id.clone())),
            }
            g.remove_node(id)?;
        }
        GraphEvent::Accept(h) => {
            if h.vertices.is_empty() || h.vertices.len() != h.contact.len() {
                return Err(GraphError::Invalid("placement needs one contact flag per vertex".into()));
            }
            let id = (0..).map(|k| format!("person_{k}")).find(|id| !g.contains(id)).expect("unbounded ids");
            let mut node = Node::new(&id, NodeKind::Human, "person");
            node.bbox = Some(Aabb::from_points(&h.vertices));
            let mut edges = Vec::new();
            for n in g.nodes.iter().filter(|n| !n.is_human()) {
                let mut on = false;
                let mut nearest = f64::INFINITY;
                for (p, &c) in h.vertices.iter().zip(&h.contact) {
                    let Some(d) = surface_distance(scene, n, p) else { break };
                    nearest = nearest.min(d);
                    on |= c && d.abs() <= CONTACT_DISTANCE;
                }
                if on {
                    edges.push(Edge::new(&id, "on", &n.id));
                } else if nearest <= th.near && n.id != FLOOR_ID {
                    edges.push(Edge::new(&id, "near", &n.id));
                }
            }
            g.add_node(node)?;
            for e in edges {
                g.add_edge(e)?;
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{global_scene_graph, FloorExtent, PrimitiveSpec, SceneObject};

    fn scene() -> Scene {
        let chair = |id: &str, x: f64| {
            SceneObject::new(id, "chair", [x, 0.0, 0.25], [0.0; 3], vec![PrimitiveSpec::cuboid([0.0; 3], [0.5; 3])], None)
                .unwrap()
        };
        Scene::new(vec![chair("chair_0", 0.0), chair("chair_1", 2.0)], FloorExtent { min: [-3.0; 2], max: [3.0; 2] })
            .unwrap()
    }

    #[test]
    fn accept_adds_one_node_with_edges() {
        let s = scene();
        let th = GsgThresholds::default();
        let gsg = global_scene_graph(&s, &th);
        let h = HumanPlacement {
            vertices: vec![Vec3::new(0.0, 0.0, 0.52), Vec3::new(0.0, 0.0, 1.2), Vec3::new(0.1, -0.4, 0.0)],
            contact: vec![true, false, true],
        };
        let g = update_graph(&gsg, &GraphEvent::Accept(h.clone()), &s, &th).unwrap();
        assert_eq!(g.nodes.len(), gsg.nodes.len() + 1);
        assert!(g.has_edge("person_0", "on", "chair_0"));
        assert!(g.has_edge("person_0", "on", FLOOR_ID));
        assert!(!g.has_edge("person_0", "near", "chair_1"));
        let g2 = update_graph(&g, &GraphEvent::Accept(h), &s, &th).unwrap();
        assert!(g2.contains("person_1"));
    }

    #[test]
    fn reject_prunes_only_that_node() {
        let s = scene();
        let th = GsgThresholds::default();
        let gsg = global_scene_graph(&s, &th);
        let g = update_graph(&gsg, &GraphEvent::Reject("chair_1".into()), &s, &th).unwrap();
        assert_eq!(g.nodes.len(), gsg.nodes.len() - 1);
        assert!(!g.contains("chair_1"));
        assert!(g.edges.iter().all(|e| e.src != "chair_1" && e.dst != "chair_1"));
        assert!(g.has_edge("chair_0", "on", FLOOR_ID));
        assert!(matches!(
            update_graph(&gsg, &GraphEvent::Reject("sofa".into()), &s, &th),
            Err(GraphError::UnknownNode(_))
        ));
    }
}
