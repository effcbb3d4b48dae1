//! Scene graph value type shared by global, local and matched graphs.

use serde::{Deserialize, Serialize};

use super::GraphError;
use crate::geom::Aabb;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Object,
    Floor,
    Human,
    VirtualHuman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub category: String,
    /// Scene object this node stands for, once grounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<Aabb>,
}

impl Node {
    pub fn new(id: impl Into<String>, kind: NodeKind, category: impl Into<String>) -> Self {
        Self { id: id.into(), kind, category: category.into(), object: None, bbox: None }
    }

    pub fn is_human(&self) -> bool {
        matches!(self.kind, NodeKind::Human | NodeKind::VirtualHuman)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub src: String,
    pub rel: String,
    pub dst: String,
}

impl Edge {
    pub fn new(src: impl Into<String>, rel: impl Into<String>, dst: impl Into<String>) -> Self {
        Self { src: src.into(), rel: rel.into(), dst: dst.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl SceneGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.node(id).is_some()
    }

    pub fn add_node(&mut self, node: Node) -> Result<(), GraphError> {
        if self.contains(&node.id) {
            return Err(GraphError::DuplicateNode(node.id));
        }
        if node.kind == NodeKind::VirtualHuman && self.virtual_human().is_some() {
            return Err(GraphError::Invalid("more than one virtual human node".into()));
        }
        self.nodes.push(node);
        Ok(())
    }

    /// Adds the edge unless an identical one exists.
    pub fn add_edge(&mut self, edge: Edge) -> Result<(), GraphError> {
        for end in [&edge.src, &edge.dst] {
            if !self.contains(end) {
                return Err(GraphError::UnknownNode(end.clone()));
            }
        }
        if !self.edges.contains(&edge) {
            self.edges.push(edge);
        }
        Ok(())
    }

    /// Removes a node and its incident edges.
    pub fn remove_node(&mut self, id: &str) -> Result<Node, GraphError> {
        let pos = self.nodes.iter().position(|n| n.id == id).ok_or_else(|| GraphError::UnknownNode(id.into()))?;
        self.edges.retain(|e| e.src != id && e.dst != id);
        Ok(self.nodes.remove(pos))
    }

    pub fn has_edge(&self, src: &str, rel: &str, dst: &str) -> bool {
        self.edges.iter().any(|e| e.src == src && e.rel == rel && e.dst == dst)
    }

    pub fn edges_from<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.src == id)
    }

    pub fn relations(&self, src: &str, dst: &str) -> Vec<&str> {
        self.edges.iter().filter(|e| e.src == src && e.dst == dst).map(|e| e.rel.as_str()).collect()
    }

    pub fn virtual_human(&self) -> Option<&Node> {
        self.nodes.iter().find(|n| n.kind == NodeKind::VirtualHuman)
    }

    pub fn object_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Object | NodeKind::Floor))
    }

    pub fn human_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_human()).count()
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let mut seen = std::collections::HashSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id.as_str()) {
                return Err(GraphError::DuplicateNode(n.id.clone()));
            }
        }
        if self.nodes.iter().filter(|n| n.kind == NodeKind::VirtualHuman).count() > 1 {
            return Err(GraphError::Invalid("more than one virtual human node".into()));
        }
        for e in &self.edges {
            for end in [&e.src, &e.dst] {
                if !seen.contains(end.as_str()) {
                    return Err(GraphError::UnknownNode(end.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let g: SceneGraph = serde_json::from_str(text).map_err(|e| GraphError::Invalid(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SceneGraph {
        let mut g = SceneGraph::new();
        g.add_node(Node::new("floor", NodeKind::Floor, "floor")).unwrap();
        g.add_node(Node::new("chair_0", NodeKind::Object, "chair")).unwrap();
        g.add_edge(Edge::new("chair_0", "on", "floor")).unwrap();
        g
    }

    #[test]
    fn edges_need_endpoints() {
        let mut g = sample();
        assert!(matches!(g.add_edge(Edge::new("x", "near", "floor")), Err(GraphError::UnknownNode(_))));
        g.add_edge(Edge::new("chair_0", "on", "floor")).unwrap();
        assert_eq!(g.edges.len(), 1);
    }

    #[test]
    fn remove_drops_incident_edges() {
        let mut g = sample();
        g.remove_node("chair_0").unwrap();
        assert!(g.edges.is_empty());
        assert_eq!(g.nodes.len(), 1);
        assert!(g.remove_node("chair_0").is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = sample();
        assert_eq!(SceneGraph::from_json(&g.to_json()).unwrap(), g);
        assert!(SceneGraph::from_json(r#"{"nodes":[],"edges":[{"src":"a","rel":"on","dst":"b"}]}"#).is_err());
    }

    #[test]
    fn single_virtual_human() {
        let mut g = sample();
        g.add_node(Node::new("human", NodeKind::VirtualHuman, "person")).unwrap();
        assert!(g.add_node(Node::new("human2", NodeKind::VirtualHuman, "person")).is_err());
    }
}
