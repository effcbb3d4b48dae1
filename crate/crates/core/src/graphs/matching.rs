//! Grounding a local scene graph in the global one by labeled subgraph
//! matching with backtracking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ConceptLexicon, Edge, GraphError, Node, NodeKind, SceneGraph};
use crate::textparse::RELATION_WORDS;

/// Added to the cost for every contact target already occupied by a
/// placed human, so free instances win whenever one is consistent.
pub const OCCUPANCY_PENALTY: f64 = 1000.0;

/// LSG object node → GSG node, plus the placement hint for the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub map: BTreeMap<String, String>,
    /// Bound instance of the object the person acts on.
    pub primary: Option<String>,
    /// Bound instances with the relation label tying each to the person.
    pub anchors: Vec<(String, String)>,
    pub cost: f64,
}

impl Binding {
    /// Bound GSG node of an LSG node.
    pub fn get(&self, lsg_id: &str) -> Option<&str> {
        self.map.get(lsg_id).map(String::as_str)
    }
}

/// Spatial relations are the parser's relation words; any other label names
/// an action and marks a contact target.
pub fn is_contact_relation(rel: &str) -> bool {
    !RELATION_WORDS.contains(&rel)
}

fn dist(a: &Node, b: &Node) -> f64 {
    match (&a.bbox, &b.bbox) {
        (Some(x), Some(y)) => x.center().distance(&y.center()),
        _ => 0.0,
    }
}

/// Whether the GSG supports `primary` standing in `rel` to `anchor`, given
/// that the person is at the primary object.
pub fn relation_supported(gsg: &SceneGraph, rel: &str, primary: &str, anchor: &str) -> bool {
    let fwd = |r: &[&str]| gsg.relations(primary, anchor).iter().any(|x| r.contains(x));
    let back = |r: &[&str]| gsg.relations(anchor, primary).iter().any(|x| r.contains(x));
    match rel {
        "near" | "close to" | "next to" | "beside" | "by" => fwd(&["near"]),
        "left of" | "right of" | "in front of" | "behind" => fwd(&[rel]),
        "facing" => fwd(&["near", "left of", "right of", "in front of", "behind"]),
        "above" => fwd(&["above", "on"]),
        "under" | "below" => back(&["above", "on"]),
        // acting on a second object from the first
        _ => fwd(&["near", "on"]) || back(&["on"]),
    }
}

/// Whether GSG node `id` is already in contact with a placed human.
pub fn is_occupied(gsg: &SceneGraph, id: &str) -> bool {
    gsg.edges.iter().any(|e| {
        e.dst == id && e.rel == "on" && gsg.node(&e.src).is_some_and(|n| n.kind == NodeKind::Human)
    })
}

pub(crate) fn categories_match(lex: &ConceptLexicon, lsg: &Node, gsg: &Node) -> bool {
    if gsg.is_human() {
        return false;
    }
    if (lsg.kind == NodeKind::Floor) != (gsg.kind == NodeKind::Floor) {
        return false;
    }
    lex.concepts_match(&lsg.category, &gsg.category) || lex.concepts_match(&gsg.category, &lsg.category)
}

/// The pieces of an LSG the matcher needs, in a fixed order: the primary
/// object first, then anchors in edge order.
pub(crate) struct LocalQuery<'a> {
    pub human: &'a Node,
    /// (LSG node, relation label from the human)
    pub targets: Vec<(&'a Node, &'a str)>,
    pub has_primary: bool,
}

pub(crate) fn local_query(lsg: &SceneGraph) -> Result<LocalQuery<'_>, GraphError> {
    let humans: Vec<&Node> = lsg.nodes.iter().filter(|n| n.kind == NodeKind::VirtualHuman).collect();
    let [human] = humans[..] else {
        return Err(GraphError::Invalid(format!("local graph has {} virtual humans, expected 1", humans.len())));
    };
    let mut targets = Vec::new();
    for e in lsg.edges_from(&human.id) {
        let n = lsg.node(&e.dst).ok_or_else(|| GraphError::UnknownNode(e.dst.clone()))?;
        targets.push((n, e.rel.as_str()));
    }
    let has_primary = targets.first().is_some_and(|(_, rel)| is_contact_relation(rel));
    Ok(LocalQuery { human, targets, has_primary })
}

/// Cost of a complete assignment: summed centroid distance over pairs of
/// bound objects (the floor excluded) plus the occupancy penalty.
pub(crate) fn assignment_cost(gsg: &SceneGraph, q: &LocalQuery, bound: &[&Node]) -> f64 {
    let mut cost = 0.0;
    for i in 0..bound.len() {
        if is_contact_relation(q.targets[i].1) && bound[i].kind != NodeKind::Floor && is_occupied(gsg, &bound[i].id) {
            cost += OCCUPANCY_PENALTY;
        }
        for j in 0..i {
            if bound[i].kind != NodeKind::Floor && bound[j].kind != NodeKind::Floor {
                cost += dist(bound[i], bound[j]);
            }
        }
    }
    cost
}

/// Relation consistency of anchor `i` against the bound primary.
pub(crate) fn consistent(gsg: &SceneGraph, q: &LocalQuery, bound: &[&Node], i: usize) -> bool {
    if !q.has_primary || i == 0 || bound[0].kind == NodeKind::Floor {
        return true;
    }
    relation_supported(gsg, q.targets[i].1, &bound[0].id, &bound[i].id)
}

struct Search<'a> {
    gsg: &'a SceneGraph,
    q: &'a LocalQuery<'a>,
    candidates: Vec<Vec<&'a Node>>,
    best: Option<(f64, Vec<&'a Node>)>,
}

impl<'a> Search<'a> {
    fn better(&self, cost: f64, ids: &[&Node]) -> bool {
        match &self.best {
            None => true,
            Some((c, b)) => {
                cost < *c || (cost == *c && ids.iter().map(|n| &n.id).lt(b.iter().map(|n| &n.id)))
            }
        }
    }

    fn run(&mut self, bound: &mut Vec<&'a Node>) {
        let i = bound.len();
        if i == self.candidates.len() {
            let cost = assignment_cost(self.gsg, self.q, bound);
            if self.better(cost, bound) {
                self.best = Some((cost, bound.clone()));
            }
            return;
        }
        for k in 0..self.candidates[i].len() {
            let c = self.candidates[i][k];
            if bound.iter().any(|b| b.id == c.id) {
                continue;
            }
            bound.push(c);
            // costs only grow as nodes are added
            let partial = assignment_cost(self.gsg, self.q, bound);
            let hopeful = self.best.as_ref().is_none_or(|(best, _)| partial <= *best);
            if hopeful && consistent(self.gsg, self.q, bound, i) {
                self.run(bound);
            }
            bound.pop();
        }
    }
}

/// Binds every LSG object node to a distinct GSG node of a matching concept
/// such that the relations implied between the primary object and each
/// anchor hold in the GSG, choosing the cheapest binding (ties broken by
/// node ids). Returns the GSG with the virtual human and its edges
/// re-targeted to the bound instances.
pub fn match_and_insert_human(
    gsg: &SceneGraph,
    lsg: &SceneGraph,
    lex: &ConceptLexicon,
) -> Result<(SceneGraph, Binding), GraphError> {
    let q = local_query(lsg)?;
    let mut candidates = Vec::new();
    for (n, _) in &q.targets {
        let c: Vec<&Node> = gsg.nodes.iter().filter(|g| categories_match(lex, n, g)).collect();
        if c.is_empty() {
            let known = lex.contains(&n.category) || gsg.nodes.iter().any(|g| g.category == n.category);
            return Err(if known {
                GraphError::NoBinding(format!("no instance of '{}' in the scene", n.category))
            } else {
                GraphError::AmbiguousConceptUnknown(n.category.clone())
            });
        }
        candidates.push(c);
    }
    let mut search = Search { gsg, q: &q, candidates, best: None };
    search.run(&mut Vec::new());
    let (cost, bound) = search
        .best
        .ok_or_else(|| GraphError::NoBinding("no assignment satisfies the described relations".into()))?;

    let mut sg = gsg.clone();
    let mut hid = q.human.id.clone();
    let mut k = 1;
    while sg.contains(&hid) {
        hid = format!("{}_{k}", q.human.id);
        k += 1;
    }
    let mut human = q.human.clone();
    human.id = hid.clone();
    sg.add_node(human)?;
    let mut binding = Binding { map: BTreeMap::new(), primary: None, anchors: Vec::new(), cost };
    for (i, ((n, rel), b)) in q.targets.iter().zip(&bound).enumerate() {
        binding.map.insert(n.id.clone(), b.id.clone());
        if i == 0 && q.has_primary {
            binding.primary = Some(b.id.clone());
        } else {
            binding.anchors.push((b.id.clone(), rel.to_string()));
        }
        sg.add_edge(Edge::new(&hid, *rel, &b.id))?;
    }
    Ok((sg, binding))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Aabb, Vec3};
    use crate::graphs::default_lexicon;

    fn obj(id: &str, cat: &str, x: f64, y: f64) -> Node {
        let mut n = Node::new(id, NodeKind::Object, cat);
        n.bbox = Some(Aabb::from_points(&[Vec3::new(x - 0.2, y - 0.2, 0.0), Vec3::new(x + 0.2, y + 0.2, 0.8)]));
        n
    }

    fn lsg(targets: &[(&str, &str, &str)]) -> SceneGraph {
        let mut g = SceneGraph::new();
        g.nodes.push(Node::new("human", NodeKind::VirtualHuman, "person"));
        for (id, rel, cat) in targets {
            g.nodes.push(Node::new(*id, NodeKind::Object, *cat));
            g.edges.push(Edge::new("human", *rel, *id));
        }
        g
    }

    #[test]
    fn chair_near_table() {
        let mut gsg = SceneGraph::new();
        gsg.nodes = vec![obj("c1", "chair", 0.0, 0.0), obj("t1", "table", 0.5, 0.0)];
        gsg.edges = vec![Edge::new("c1", "near", "t1"), Edge::new("t1", "near", "c1")];
        let l = lsg(&[("chair", "sit-on", "chair"), ("table", "near", "table")]);
        let (sg, b) = match_and_insert_human(&gsg, &l, default_lexicon()).unwrap();
        assert_eq!(b.get("chair"), Some("c1"));
        assert_eq!(b.primary.as_deref(), Some("c1"));
        assert_eq!(b.anchors, vec![("t1".to_string(), "near".to_string())]);
        assert!(sg.has_edge("human", "sit-on", "c1") && sg.has_edge("human", "near", "t1"));
        assert_eq!(sg.nodes.len(), 3);
    }

    #[test]
    fn nearer_consistent_chair_wins() {
        let mut gsg = SceneGraph::new();
        gsg.nodes = vec![obj("a", "chair", 3.0, 0.0), obj("b", "chair", 0.6, 0.0), obj("t", "table", 0.0, 0.0)];
        gsg.edges = vec![Edge::new("b", "near", "t"), Edge::new("a", "near", "t")];
        let l = lsg(&[("chair", "sit-on", "chair"), ("table", "near", "table")]);
        let (_, b) = match_and_insert_human(&gsg, &l, default_lexicon()).unwrap();
        assert_eq!(b.get("chair"), Some("b"));
        // relation consistency beats distance
        gsg.edges = vec![Edge::new("a", "near", "t")];
        let (_, b) = match_and_insert_human(&gsg, &l, default_lexicon()).unwrap();
        assert_eq!(b.get("chair"), Some("a"));
    }

    #[test]
    fn hypernym_binding_and_failures() {
        let mut gsg = SceneGraph::new();
        gsg.nodes = vec![obj("arm", "armchair", 0.0, 0.0)];
        let (_, b) = match_and_insert_human(&gsg, &lsg(&[("chair", "sit-on", "chair")]), default_lexicon()).unwrap();
        assert_eq!(b.get("chair"), Some("arm"));
        let e = match_and_insert_human(&gsg, &lsg(&[("piano", "touch", "piano")]), default_lexicon()).unwrap_err();
        assert!(matches!(e, GraphError::NoBinding(_)));
        let e = match_and_insert_human(&gsg, &lsg(&[("z", "touch", "zeppelin")]), default_lexicon()).unwrap_err();
        assert!(matches!(e, GraphError::AmbiguousConceptUnknown(_)));
    }

    #[test]
    fn occupied_instance_avoided() {
        let mut gsg = SceneGraph::new();
        gsg.nodes = vec![obj("c1", "chair", 0.0, 0.0), obj("c2", "chair", 2.0, 0.0), Node::new("p0", NodeKind::Human, "person")];
        gsg.edges = vec![Edge::new("p0", "on", "c1")];
        let (_, b) = match_and_insert_human(&gsg, &lsg(&[("chair", "sit-on", "chair")]), default_lexicon()).unwrap();
        assert_eq!(b.get("chair"), Some("c2"));
        assert_eq!(b.cost, 0.0);
        gsg.nodes.remove(1);
        let (_, b) = match_and_insert_human(&gsg, &lsg(&[("chair", "sit-on", "chair")]), default_lexicon()).unwrap();
        assert_eq!(b.get("chair"), Some("c1"));
        assert_eq!(b.cost, OCCUPANCY_PENALTY);
    }

    #[test]
    fn injective_over_quantities() {
        let mut gsg = SceneGraph::new();
        gsg.nodes = vec![obj("p1", "plant", 0.0, 0.0), obj("p2", "plant", 1.0, 0.0)];
        let l = lsg(&[("plant_0", "near", "plant"), ("plant_1", "near", "plant")]);
        let (_, b) = match_and_insert_human(&gsg, &l, default_lexicon()).unwrap();
        assert_ne!(b.get("plant_0"), b.get("plant_1"));
        let l3 = lsg(&[("plant_0", "near", "plant"), ("plant_1", "near", "plant"), ("plant_2", "near", "plant")]);
        assert!(matches!(match_and_insert_human(&gsg, &l3, default_lexicon()), Err(GraphError::NoBinding(_))));
    }
}
