//! Message-passing encoder from a scene graph to a fixed-length vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matching::is_contact_relation;
use super::{ConceptLexicon, GraphError, NodeKind, SceneGraph};
use crate::autodiff::{Graph, Mat, NodeId};
use crate::nn::{self, Bound, ParamStore};

/// Relation classes with their own embedding slot; action labels share the
/// "contact" slot and anything else falls into the last one.
const RELATIONS: [&str; 14] = [
    "on", "near", "above", "left of", "right of", "in front of", "behind", "close to", "next to", "beside", "by",
    "under", "below", "facing",
];
const NUM_REL: usize = RELATIONS.len() + 2;

fn relation_index(rel: &str) -> usize {
    match RELATIONS.iter().position(|r| *r == rel) {
        Some(i) => i,
        None if is_contact_relation(rel) => RELATIONS.len(),
        None => RELATIONS.len() + 1,
    }
}

fn kind_index(k: NodeKind) -> usize {
    match k {
        NodeKind::Object => 0,
        NodeKind::Floor => 1,
        NodeKind::Human => 2,
        NodeKind::VirtualHuman => 3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEncoder {
    /// Output and hidden width.
    pub dim: usize,
    pub rounds: usize,
}

impl Default for GraphEncoder {
    fn default() -> Self {
        Self { dim: 128, rounds: 3 }
    }
}

impl GraphEncoder {
    /// Category one-hot (plus an out-of-lexicon slot) and node kind.
    pub fn input_dim(lex: &ConceptLexicon) -> usize {
        lex.len() + 1 + 4
    }

    pub fn init(&self, store: &mut ParamStore, prefix: &str, lex: &ConceptLexicon, rng: &mut impl Rng) {
        store.init_linear(&format!("{prefix}.in"), Self::input_dim(lex), self.dim, rng);
        for r in 0..self.rounds {
            store.init_linear(&format!("{prefix}.r{r}.self"), self.dim, self.dim, rng);
            store.init_linear(&format!("{prefix}.r{r}.msg"), self.dim + NUM_REL + 1, self.dim, rng);
        }
        store.init_linear(&format!("{prefix}.out"), 2 * self.dim, self.dim, rng);
    }

    fn check(&self, store_shape: impl Fn(&str) -> Option<(usize, usize)>, prefix: &str, lex: &ConceptLexicon) -> Result<(), GraphError> {
        let mut want = vec![(format!("{prefix}.in.w"), (Self::input_dim(lex), self.dim))];
        for r in 0..self.rounds {
            want.push((format!("{prefix}.r{r}.self.w"), (self.dim, self.dim)));
            want.push((format!("{prefix}.r{r}.msg.w"), (self.dim + NUM_REL + 1, self.dim)));
        }
        want.push((format!("{prefix}.out.w"), (2 * self.dim, self.dim)));
        for (name, shape) in want {
            match store_shape(&name) {
                Some(s) if s == shape => {}
                got => {
                    return Err(GraphError::Dimension(format!("{name}: expected {shape:?}, found {got:?}")));
                }
            }
        }
        Ok(())
    }

    /// 1×dim embedding: mean over nodes after `rounds` of message passing,
    /// concatenated with the virtual human's state, then projected.
    pub fn forward(
        &self,
        g: &mut Graph,
        p: &Bound,
        prefix: &str,
        sg: &SceneGraph,
        lex: &ConceptLexicon,
    ) -> Result<NodeId, GraphError> {
        if sg.nodes.is_empty() {
            return Err(GraphError::Invalid("empty scene graph".into()));
        }
        self.check(|name| p.has(name).then(|| g.shape(p.get(name))), prefix, lex)?;
        let n = sg.nodes.len();
        let d_in = Self::input_dim(lex);
        let mut x = Mat::zeros((n, d_in));
        for (i, node) in sg.nodes.iter().enumerate() {
            x[[i, lex.index_of(&node.category).unwrap_or(lex.len())]] = 1.0;
            x[[i, lex.len() + 1 + kind_index(node.kind)]] = 1.0;
        }
        let index = |id: &str| sg.nodes.iter().position(|n| n.id == id).ok_or_else(|| GraphError::UnknownNode(id.into()));
        // each edge passes a message both ways; the flag marks direction
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut feat = Vec::new();
        for e in &sg.edges {
            let (s, d) = (index(&e.src)?, index(&e.dst)?);
            let r = relation_index(&e.rel);
            for (from, to, dir) in [(s, d, 0.0), (d, s, 1.0)] {
                src.push(from);
                dst.push(to);
                let mut f = vec![0.0; NUM_REL + 1];
                f[r] = 1.0;
                f[NUM_REL] = dir;
                feat.push(f);
            }
        }
        let m = src.len();
        let mut degree = vec![0.0; n];
        for &t in &dst {
            degree[t] += 1.0;
        }
        let agg = Mat::from_shape_fn((n, m), |(v, k)| if dst[k] == v { 1.0 / degree[v] } else { 0.0 });
        let agg = g.constant(agg);
        let efeat = g.constant(Mat::from_shape_fn((m, NUM_REL + 1), |(k, j)| feat[k][j]));

        let x = g.constant(x);
        let mut h = nn::linear(g, p, &format!("{prefix}.in"), x);
        for r in 0..self.rounds {
            let mut pre = nn::linear(g, p, &format!("{prefix}.r{r}.self"), h);
            if m > 0 {
                let hs = g.gather(h, &src);
                let input = g.concat_cols(&[hs, efeat]);
                let msg = nn::linear(g, p, &format!("{prefix}.r{r}.msg"), input);
                let pooled = g.matmul(agg, msg);
                pre = g.add(pre, pooled);
            }
            let act = g.gelu(pre);
            h = g.add(h, act);
        }
        let mean = g.mean_rows(h);
        let human = match sg.nodes.iter().position(|n| n.kind == NodeKind::VirtualHuman) {
            Some(i) => g.gather(h, &[i]),
            None => g.constant(Mat::zeros((1, self.dim))),
        };
        let readout = g.concat_cols(&[mean, human]);
        Ok(nn::linear(g, p, &format!("{prefix}.out"), readout))
    }

    /// Forward pass outside training.
    pub fn encode(&self, store: &ParamStore, prefix: &str, sg: &SceneGraph, lex: &ConceptLexicon) -> Result<Vec<f64>, GraphError> {
        self.check(|name| store.get(name).map(|m| m.dim()), prefix, lex)?;
        let mut g = Graph::new();
        let p = store.bind(&mut g, false);
        let out = self.forward(&mut g, &p, prefix, sg, lex)?;
        Ok(g.value(out).iter().copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{default_lexicon, Edge, Node};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn weights(enc: &GraphEncoder) -> ParamStore {
        let mut store = ParamStore::new();
        enc.init(&mut store, "gcn", default_lexicon(), &mut ChaCha8Rng::seed_from_u64(3));
        store
    }

    fn sample(ids: [&str; 4], rel: &str) -> SceneGraph {
        let mut g = SceneGraph::new();
        g.nodes.push(Node::new(ids[0], NodeKind::Floor, "floor"));
        g.nodes.push(Node::new(ids[1], NodeKind::Object, "chair"));
        g.nodes.push(Node::new(ids[2], NodeKind::Object, "table"));
        g.nodes.push(Node::new(ids[3], NodeKind::VirtualHuman, "person"));
        g.edges.push(Edge::new(ids[1], "on", ids[0]));
        g.edges.push(Edge::new(ids[1], rel, ids[2]));
        g.edges.push(Edge::new(ids[3], "sit-on", ids[1]));
        g
    }

    #[test]
    fn fixed_length_output() {
        let enc = GraphEncoder::default();
        let w = weights(&enc);
        let f = enc.encode(&w, "gcn", &sample(["f", "c", "t", "h"], "near"), default_lexicon()).unwrap();
        assert_eq!(f.len(), 128);
        let mut single = SceneGraph::new();
        single.nodes.push(Node::new("x", NodeKind::Object, "zeppelin"));
        assert_eq!(enc.encode(&w, "gcn", &single, default_lexicon()).unwrap().len(), 128);
    }

    #[test]
    fn invariant_to_ids_and_order() {
        let enc = GraphEncoder::default();
        let w = weights(&enc);
        let a = enc.encode(&w, "gcn", &sample(["f", "c", "t", "h"], "near"), default_lexicon()).unwrap();
        let mut g = sample(["n9", "n3", "n1", "n0"], "near");
        g.nodes.reverse();
        g.edges.reverse();
        let b = enc.encode(&w, "gcn", &g, default_lexicon()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn relation_changes_output() {
        let enc = GraphEncoder::default();
        let w = weights(&enc);
        let a = enc.encode(&w, "gcn", &sample(["f", "c", "t", "h"], "near"), default_lexicon()).unwrap();
        let b = enc.encode(&w, "gcn", &sample(["f", "c", "t", "h"], "left of"), default_lexicon()).unwrap();
        assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-9));
    }

    #[test]
    fn wrong_shapes_rejected() {
        let enc = GraphEncoder::default();
        let w = weights(&GraphEncoder { dim: 64, rounds: 3 });
        let e = enc.encode(&w, "gcn", &sample(["f", "c", "t", "h"], "near"), default_lexicon()).unwrap_err();
        assert!(matches!(e, GraphError::Dimension(_)));
    }
}
