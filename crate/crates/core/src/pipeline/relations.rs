//! Whether a placed body stands in the parsed relations to its bound objects.

use serde::{Deserialize, Serialize};

use crate::body::{BodyMesh, BodyParams};
use crate::geom::{Aabb, Vec3};
use crate::graphs::{is_contact_relation, Binding, NodeKind, SceneGraph, CONTACT_DISTANCE};
use crate::scene::{pair_relations, GsgThresholds, Scene, REL_ABOVE, REL_NEAR, REL_ON};
use crate::textparse::ParsedInteraction;

/// One edge of the virtual human, evaluated on the placed body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationCheck {
    pub node: String,
    pub relation: String,
    pub primary: bool,
    /// Smallest signed distance from a body vertex to the node's surface.
    pub distance: f64,
    pub holds: bool,
}

/// Surface of a bound node: an object or the floor plane.
enum Target<'a> {
    Floor(Aabb),
    Object(&'a crate::scene::SceneObject),
}

impl Target<'_> {
    fn sdf(&self, p: &Vec3) -> f64 {
        match self {
            Target::Floor(_) => p.z,
            Target::Object(o) => o.sdf(p),
        }
    }

    fn aabb(&self) -> Aabb {
        match self {
            Target::Floor(b) => *b,
            Target::Object(o) => o.aabb(),
        }
    }
}

/// Evaluates relation `rel` from the body to `target`. Contact (action)
/// relations need a contact vertex, or any vertex when the body has no
/// labels, within [`CONTACT_DISTANCE`]; spatial ones use the same box
/// predicates as the scene graph, except "facing", which asks for the body
/// to look at the target.
fn holds(rel: &str, mesh: &BodyMesh, params: &BodyParams, target: &Target, th: &GsgThresholds) -> bool {
    let body = Aabb::from_points(&mesh.vertices);
    let obj = target.aabb();
    let rels = || pair_relations(&body, &obj, th);
    if is_contact_relation(rel) {
        let touching = |v: &Vec3| target.sdf(v).abs() <= CONTACT_DISTANCE;
        return if mesh.contact.count() > 0 {
            mesh.contact_vertices().any(touching)
        } else {
            mesh.vertices.iter().any(touching)
        };
    }
    match rel {
        "near" | "close to" | "next to" | "beside" | "by" => rels().contains(&REL_NEAR),
        "left of" | "right of" | "in front of" | "behind" => rels().contains(&rel),
        "above" => rels().iter().any(|r| [REL_ABOVE, REL_ON].contains(r)),
        "under" | "below" => pair_relations(&obj, &body, th).iter().any(|r| [REL_ABOVE, REL_ON].contains(r)),
        "facing" => {
            let Ok(rot) = params.orientation() else { return false };
            let fwd = rot.mul_vec(&Vec3::new(0.0, 1.0, 0.0));
            let to = obj.center() - body.center();
            let (f, d) = (Vec3::new(fwd.x, fwd.y, 0.0), Vec3::new(to.x, to.y, 0.0));
            let n = f.norm() * d.norm();
            body.gap(&obj) <= th.directional_range && n > 0.0 && f.dot(&d) / n >= 0.5
        }
        _ => false,
    }
}

/// Public form of the predicate for one object of `scene` (or the floor
/// when `object` is `None`).
pub fn relation_holds(
    rel: &str,
    mesh: &BodyMesh,
    params: &BodyParams,
    scene: &Scene,
    object: Option<&str>,
    th: &GsgThresholds,
) -> bool {
    match object {
        None => holds(rel, mesh, params, &Target::Floor(scene.floor.aabb()), th),
        Some(id) => scene.object(id).is_some_and(|o| holds(rel, mesh, params, &Target::Object(o), th)),
    }
}

/// Checks every edge of the virtual human in `graph` against the body.
pub fn relation_checks(
    mesh: &BodyMesh,
    params: &BodyParams,
    scene: &Scene,
    graph: &SceneGraph,
    binding: &Binding,
    th: &GsgThresholds,
) -> Vec<RelationCheck> {
    let Some(human) = graph.virtual_human() else { return Vec::new() };
    let mut out = Vec::new();
    for e in graph.edges_from(&human.id) {
        let Some(node) = graph.node(&e.dst) else { continue };
        let target = match (node.kind, node.object.as_deref().and_then(|o| scene.object(o))) {
            (NodeKind::Floor, _) => Target::Floor(scene.floor.aabb()),
            (_, Some(o)) => Target::Object(o),
            _ => continue,
        };
        let distance = mesh.vertices.iter().map(|v| target.sdf(v)).fold(f64::INFINITY, f64::min);
        out.push(RelationCheck {
            node: node.id.clone(),
            relation: e.rel.clone(),
            primary: binding.primary.as_deref() == Some(node.id.as_str()),
            distance,
            holds: holds(&e.rel, mesh, params, &target, th),
        });
    }
    out
}

/// The primary relation holds, and so does the nearest anchor carrying the
/// first spatial relation of the clause.
pub(crate) fn grounded(parsed: &ParsedInteraction, checks: &[RelationCheck]) -> bool {
    if checks.iter().any(|c| c.primary && !c.holds) {
        return false;
    }
    let Some(rel) = &parsed.spatial_relation else { return true };
    checks
        .iter()
        .filter(|c| !c.primary && &c.relation == rel)
        .min_by(|a, b| a.distance.total_cmp(&b.distance))
        .is_none_or(|c| c.holds)
}
