//! Named parameter blocks, layer helpers and the Adam optimizer.

use std::collections::{BTreeMap, HashMap};

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{tensor::Gradients, Graph, Mat, NodeId};

/// Parameters keyed by dotted block name (`decoder.layer0.attn.q.w`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    blocks: BTreeMap<String, Mat>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Mat) {
        self.blocks.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.blocks.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Mat> {
        self.blocks.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Mat)> {
        self.blocks.iter()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.blocks.values().map(|m| m.len()).sum()
    }

    /// Weight `name.w` (fan_in × fan_out, Glorot normal) and zero bias `name.b`.
    pub fn init_linear(&mut self, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) {
        let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| normal.sample(rng));
        self.insert(format!("{name}.w"), w);
        self.insert(format!("{name}.b"), Mat::zeros((1, fan_out)));
    }

    pub fn init_normal(&mut self, name: &str, rows: usize, cols: usize, std: f64, rng: &mut impl Rng) {
        let normal = Normal::new(0.0, std).expect("finite std");
        self.insert(name, Array2::from_shape_fn((rows, cols), |_| normal.sample(rng)));
    }

    /// Places every block in `g` as a trainable leaf (or as a constant when
    /// `trainable` is false, which skips gradient bookkeeping).
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Bound {
        let ids = self
            .blocks
            .iter()
            .map(|(k, v)| {
                let id = if trainable { g.param(v.clone()) } else { g.constant(v.clone()) };
                (k.clone(), id)
            })
            .collect();
        Bound { ids }
    }
}

/// Node ids of a [`ParamStore`] placed in one graph.
pub struct Bound {
    ids: HashMap<String, NodeId>,
}

impl Bound {
    pub fn get(&self, name: &str) -> NodeId {
        match self.ids.get(name) {
            Some(id) => *id,
            None => panic!("parameter block '{name}' is not bound"),
        }
    }

    pub fn has(&self, name: &str) -> bool {
        self.ids.contains_key(name)
    }

    /// Gradient of every bound block, zero-filled where unreached.
    pub fn collect_grads(&self, store: &ParamStore, grads: &mut Gradients) -> BTreeMap<String, Mat> {
        store
            .iter()
            .map(|(name, value)| {
                let g = self.ids.get(name).and_then(|id| grads.take(*id)).unwrap_or_else(|| Mat::zeros(value.raw_dim()));
                (name.clone(), g)
            })
            .collect()
    }
}

pub fn linear(g: &mut Graph, p: &Bound, name: &str, x: NodeId) -> NodeId {
    let xw = g.matmul(x, p.get(&format!("{name}.w")));
    g.add_row(xw, p.get(&format!("{name}.b")))
}

/// Two linear layers with a GELU in between.
pub fn mlp2(g: &mut Graph, p: &Bound, name: &str, x: NodeId) -> NodeId {
    let h = linear(g, p, &format!("{name}.fc1"), x);
    let h = g.gelu(h);
    linear(g, p, &format!("{name}.fc2"), h)
}

pub fn init_mlp2(store: &mut ParamStore, name: &str, d_in: usize, d_hidden: usize, d_out: usize, rng: &mut impl Rng) {
    store.init_linear(&format!("{name}.fc1"), d_in, d_hidden, rng);
    store.init_linear(&format!("{name}.fc2"), d_hidden, d_out, rng);
}

/// Multi-head self-attention followed by a feed-forward block, both pre-norm
/// with residual connections. `allowed[i][j]` gates query `i` to key `j`.
pub fn transformer_layer(
    g: &mut Graph,
    p: &Bound,
    name: &str,
    x: NodeId,
    heads: usize,
    allowed: Option<&Array2<bool>>,
) -> NodeId {
    let (_, width) = g.shape(x);
    let dh = width / heads;
    let n = g.layer_norm(x, 1e-5);
    let q = linear(g, p, &format!("{name}.attn.q"), n);
    let k = linear(g, p, &format!("{name}.attn.k"), n);
    let v = linear(g, p, &format!("{name}.attn.v"), n);
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.cols(q, h * dh, (h + 1) * dh);
        let kh = g.cols(k, h * dh, (h + 1) * dh);
        let vh = g.cols(v, h * dh, (h + 1) * dh);
        let kt = g.transpose(kh);
        let logits = g.matmul(qh, kt);
        let logits = g.scale(logits, 1.0 / (dh as f64).sqrt());
        let attn = g.softmax(logits, allowed);
        outs.push(g.matmul(attn, vh));
    }
    let cat = g.concat_cols(&outs);
    let o = linear(g, p, &format!("{name}.attn.o"), cat);
    let x = g.add(x, o);
    let n = g.layer_norm(x, 1e-5);
    let f = mlp2(g, p, &format!("{name}.ffn"), n);
    g.add(x, f)
}

pub fn init_transformer_layer(store: &mut ParamStore, name: &str, width: usize, ffn: usize, rng: &mut impl Rng) {
    for part in ["q", "k", "v", "o"] {
        store.init_linear(&format!("{name}.attn.{part}"), width, width, rng);
    }
    init_mlp2(store, &format!("{name}.ffn"), width, ffn, width, rng);
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: BTreeMap<String, Mat>,
    v: BTreeMap<String, Mat>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: BTreeMap::new(), v: BTreeMap::new() }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &BTreeMap<String, Mat>) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (name, grad) in grads {
            let Some(param) = store.get_mut(name) else { continue };
            let m = self.m.entry(name.clone()).or_insert_with(|| Mat::zeros(grad.raw_dim()));
            let v = self.v.entry(name.clone()).or_insert_with(|| Mat::zeros(grad.raw_dim()));
            ndarray::Zip::from(param).and(m).and(v).and(grad).for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}
