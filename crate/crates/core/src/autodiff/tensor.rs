//! Reverse-mode differentiation over dense row-major matrices.
//!
//! A [`Graph`] records every operation of one forward pass. Leaves are either
//! trainable (`param`) or constants (`constant`); gradients are only
//! propagated into nodes that transitively depend on a trainable leaf.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis, Zip};

pub type Mat = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MulRow(NodeId, NodeId),
    Scale(NodeId, f64),
    Gelu(NodeId),
    Exp(NodeId),
    Sum(NodeId),
    MeanRows(NodeId),
    Softmax(NodeId),
    LayerNorm { input: NodeId, inv_std: Vec<f64> },
    Transpose(NodeId),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    Rows(NodeId, usize),
    Cols(NodeId, usize),
    Reshape(NodeId),
    Gather(NodeId, Vec<usize>),
    GroupMax { input: NodeId, argmax: Vec<usize> },
    /// Scalar-valued function with a precomputed input gradient.
    External { input: NodeId, grad: Mat },
}

struct Node {
    value: Mat,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// Row-wise softmax where `allowed[i][j] == false` yields an exact zero.
pub fn masked_softmax(logits: &Mat, allowed: Option<&Array2<bool>>) -> Mat {
    let mut out = Mat::zeros(logits.raw_dim());
    for (i, row) in logits.rows().into_iter().enumerate() {
        let ok = |j: usize| allowed.is_none_or(|m| m[[i, j]]);
        let mx = row
            .iter()
            .enumerate()
            .filter(|(j, _)| ok(*j))
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        if mx == f64::NEG_INFINITY {
            continue;
        }
        let mut total = 0.0;
        for (j, v) in row.iter().enumerate() {
            if ok(j) {
                let e = (v - mx).exp();
                out[[i, j]] = e;
                total += e;
            }
        }
        out.row_mut(i).mapv_inplace(|e| e / total);
    }
    out
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat, op: Op, requires_grad: bool) -> NodeId {
        debug_assert!(value.iter().all(|v| !v.is_nan()), "NaN produced by tensor op");
        self.nodes.push(Node { value, op, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|i| self.nodes[i.0].requires_grad)
    }

    pub fn param(&mut self, value: Mat) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Mat) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, id: NodeId) -> &Mat {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[[0, 0]]
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.dim()
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).dot(self.value(b));
        let rg = self.rg(&[a, b]);
        self.push(v, Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) + self.value(b);
        let rg = self.rg(&[a, b]);
        self.push(v, Op::Add(a, b), rg)
    }

    /// `a` (n×m) plus a broadcast row `row` (1×m).
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        assert_eq!(self.shape(row).0, 1, "add_row expects a single row");
        let v = self.value(a) + self.value(row);
        let rg = self.rg(&[a, row]);
        self.push(v, Op::AddRow(a, row), rg)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) - self.value(b);
        let rg = self.rg(&[a, b]);
        self.push(v, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) * self.value(b);
        let rg = self.rg(&[a, b]);
        self.push(v, Op::Mul(a, b), rg)
    }

    pub fn mul_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        assert_eq!(self.shape(row).0, 1, "mul_row expects a single row");
        let v = self.value(a) * self.value(row);
        let rg = self.rg(&[a, row]);
        self.push(v, Op::MulRow(a, row), rg)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a) * c;
        let rg = self.rg(&[a]);
        self.push(v, Op::Scale(a, c), rg)
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(gelu);
        let rg = self.rg(&[a]);
        self.push(v, Op::Gelu(a), rg)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(f64::exp);
        let rg = self.rg(&[a]);
        self.push(v, Op::Exp(a), rg)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = Mat::from_elem((1, 1), self.value(a).sum());
        let rg = self.rg(&[a]);
        self.push(v, Op::Sum(a), rg)
    }

    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let n = self.shape(a).0 as f64;
        let v = self.value(a).sum_axis(Axis(0)).insert_axis(Axis(0)) / n;
        let rg = self.rg(&[a]);
        self.push(v, Op::MeanRows(a), rg)
    }

    /// Row-wise softmax. Disallowed entries of `allowed` are exactly zero in
    /// the output and receive no gradient.
    pub fn softmax(&mut self, a: NodeId, allowed: Option<&Array2<bool>>) -> NodeId {
        let v = masked_softmax(self.value(a), allowed);
        let rg = self.rg(&[a]);
        self.push(v, Op::Softmax(a), rg)
    }

    /// Per-row standardization without affine parameters.
    pub fn layer_norm(&mut self, a: NodeId, eps: f64) -> NodeId {
        let x = self.value(a);
        let m = x.ncols() as f64;
        let mut out = x.clone();
        let mut inv_std = Vec::with_capacity(x.nrows());
        for mut row in out.rows_mut() {
            let mean = row.sum() / m;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
            let is = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|v| (v - mean) * is);
            inv_std.push(is);
        }
        let rg = self.rg(&[a]);
        self.push(out, Op::LayerNorm { input: a, inv_std }, rg)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).t().to_owned();
        let rg = self.rg(&[a]);
        self.push(v, Op::Transpose(a), rg)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(1), &views).expect("concat_cols: row counts differ");
        let rg = self.rg(parts);
        self.push(v, Op::ConcatCols(parts.to_vec()), rg)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(0), &views).expect("concat_rows: column counts differ");
        let rg = self.rg(parts);
        self.push(v, Op::ConcatRows(parts.to_vec()), rg)
    }

    pub fn rows(&mut self, a: NodeId, start: usize, end: usize) -> NodeId {
        let v = self.value(a).slice(s![start..end, ..]).to_owned();
        let rg = self.rg(&[a]);
        self.push(v, Op::Rows(a, start), rg)
    }

    pub fn cols(&mut self, a: NodeId, start: usize, end: usize) -> NodeId {
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        let rg = self.rg(&[a]);
        self.push(v, Op::Cols(a, start), rg)
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: NodeId, rows: usize, cols: usize) -> NodeId {
        let flat: Vec<f64> = self.value(a).iter().copied().collect();
        let v = Mat::from_shape_vec((rows, cols), flat).expect("reshape: element count differs");
        let rg = self.rg(&[a]);
        self.push(v, Op::Reshape(a), rg)
    }

    /// Selects rows by index (repeats allowed).
    pub fn gather(&mut self, a: NodeId, idx: &[usize]) -> NodeId {
        let v = self.value(a).select(Axis(0), idx);
        let rg = self.rg(&[a]);
        self.push(v, Op::Gather(a, idx.to_vec()), rg)
    }

    /// Column-wise max over consecutive groups of `k` rows.
    pub fn group_max(&mut self, a: NodeId, k: usize) -> NodeId {
        let x = self.value(a);
        let (n, c) = x.dim();
        assert!(k > 0 && n % k == 0, "group_max: {n} rows not divisible by {k}");
        let groups = n / k;
        let mut v = Mat::zeros((groups, c));
        let mut argmax = vec![0usize; groups * c];
        for g in 0..groups {
            for j in 0..c {
                let mut best = g * k;
                for r in g * k + 1..(g + 1) * k {
                    if x[[r, j]] > x[[best, j]] {
                        best = r;
                    }
                }
                v[[g, j]] = x[[best, j]];
                argmax[g * c + j] = best;
            }
        }
        let rg = self.rg(&[a]);
        self.push(v, Op::GroupMax { input: a, argmax }, rg)
    }

    /// Attaches a scalar computed outside the graph, given its value and its
    /// gradient with respect to `input`.
    pub fn external(&mut self, input: NodeId, value: f64, grad: Mat) -> NodeId {
        assert_eq!(grad.dim(), self.shape(input), "external: gradient shape mismatch");
        let rg = self.rg(&[input]);
        self.push(Mat::from_elem((1, 1), value), Op::External { input, grad }, rg)
    }

    /// Reverse pass from a 1×1 output. Entries are `None` for nodes that do
    /// not require gradients or are not reached.
    pub fn backward(&self, out: NodeId) -> Gradients {
        assert_eq!(self.shape(out), (1, 1), "backward expects a scalar output");
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Mat::from_elem((1, 1), 1.0));
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Mat>], id: NodeId, g: Mat) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        match &mut grads[id.0] {
            Some(acc) => *acc += &g,
            slot => *slot = Some(g),
        }
    }

    fn wants(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Mat, grads: &mut [Option<Mat>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    let ga = g.dot(&self.value(*b).t());
                    self.accumulate(grads, *a, ga);
                }
                if self.wants(*b) {
                    let gb = self.value(*a).t().dot(g);
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, g.clone());
                if self.wants(*row) {
                    self.accumulate(grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                if self.wants(*b) {
                    self.accumulate(grads, *b, -g);
                }
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    self.accumulate(grads, *a, g * self.value(*b));
                }
                if self.wants(*b) {
                    self.accumulate(grads, *b, g * self.value(*a));
                }
            }
            Op::MulRow(a, row) => {
                if self.wants(*a) {
                    self.accumulate(grads, *a, g * self.value(*row));
                }
                if self.wants(*row) {
                    let gr = (g * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0));
                    self.accumulate(grads, *row, gr);
                }
            }
            Op::Scale(a, c) => self.accumulate(grads, *a, g * *c),
            Op::Gelu(a) => {
                let mut ga = self.value(*a).mapv(gelu_grad);
                ga *= g;
                self.accumulate(grads, *a, ga);
            }
            Op::Exp(a) => self.accumulate(grads, *a, g * &node.value),
            Op::Sum(a) => {
                let ga = Mat::from_elem(self.value(*a).raw_dim(), g[[0, 0]]);
                self.accumulate(grads, *a, ga);
            }
            Op::MeanRows(a) => {
                let n = self.shape(*a).0;
                let row = g / n as f64;
                let ga = row.broadcast(self.value(*a).raw_dim()).unwrap().to_owned();
                self.accumulate(grads, *a, ga);
            }
            Op::Softmax(a) => {
                let y = &node.value;
                let mut ga = Mat::zeros(y.raw_dim());
                Zip::from(ga.rows_mut())
                    .and(y.rows())
                    .and(g.rows())
                    .for_each(|mut out, yr, gr| {
                        let dot: f64 = yr.iter().zip(gr.iter()).map(|(a, b)| a * b).sum();
                        Zip::from(&mut out).and(&yr).and(&gr).for_each(|o, &yv, &gv| *o = yv * (gv - dot));
                    });
                self.accumulate(grads, *a, ga);
            }
            Op::LayerNorm { input, inv_std } => {
                let y = &node.value;
                let m = y.ncols() as f64;
                let mut ga = Mat::zeros(y.raw_dim());
                for (i, mut out) in ga.rows_mut().into_iter().enumerate() {
                    let yr = y.row(i);
                    let gr = g.row(i);
                    let mean_g = gr.sum() / m;
                    let mean_gy: f64 = yr.iter().zip(gr.iter()).map(|(a, b)| a * b).sum::<f64>() / m;
                    for j in 0..y.ncols() {
                        out[j] = inv_std[i] * (gr[j] - mean_g - yr[j] * mean_gy);
                    }
                }
                self.accumulate(grads, *input, ga);
            }
            Op::Transpose(a) => self.accumulate(grads, *a, g.t().to_owned()),
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let w = self.shape(*p).1;
                    if self.wants(*p) {
                        self.accumulate(grads, *p, g.slice(s![.., off..off + w]).to_owned());
                    }
                    off += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let h = self.shape(*p).0;
                    if self.wants(*p) {
                        self.accumulate(grads, *p, g.slice(s![off..off + h, ..]).to_owned());
                    }
                    off += h;
                }
            }
            Op::Rows(a, start) => {
                if self.wants(*a) {
                    let mut ga = Mat::zeros(self.value(*a).raw_dim());
                    ga.slice_mut(s![*start..*start + g.nrows(), ..]).assign(g);
                    self.accumulate(grads, *a, ga);
                }
            }
            Op::Cols(a, start) => {
                if self.wants(*a) {
                    let mut ga = Mat::zeros(self.value(*a).raw_dim());
                    ga.slice_mut(s![.., *start..*start + g.ncols()]).assign(g);
                    self.accumulate(grads, *a, ga);
                }
            }
            Op::Reshape(a) => {
                let flat: Vec<f64> = g.iter().copied().collect();
                let ga = Mat::from_shape_vec(self.value(*a).raw_dim(), flat).unwrap();
                self.accumulate(grads, *a, ga);
            }
            Op::Gather(a, idx) => {
                if self.wants(*a) {
                    let mut ga = Mat::zeros(self.value(*a).raw_dim());
                    for (r, &src) in idx.iter().enumerate() {
                        let mut row = ga.row_mut(src);
                        row += &g.row(r);
                    }
                    self.accumulate(grads, *a, ga);
                }
            }
            Op::GroupMax { input, argmax } => {
                let mut ga = Mat::zeros(self.value(*input).raw_dim());
                let c = g.ncols();
                for gi in 0..g.nrows() {
                    for j in 0..c {
                        ga[[argmax[gi * c + j], j]] += g[[gi, j]];
                    }
                }
                self.accumulate(grads, *input, ga);
            }
            Op::External { input, grad } => self.accumulate(grads, *input, grad * g[[0, 0]]),
        }
    }
}

pub struct Gradients {
    grads: Vec<Option<Mat>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Mat> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, id: NodeId) -> Option<Mat> {
        self.grads.get_mut(id.0).and_then(|g| g.take())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn fd_check(build: impl Fn(&mut Graph, NodeId) -> NodeId, x0: Mat) {
        let mut g = Graph::new();
        let x = g.param(x0.clone());
        let out = build(&mut g, x);
        let grads = g.backward(out);
        let analytic = grads.get(x).unwrap().clone();
        let h = 1e-6;
        for idx in 0..x0.len() {
            let (r, c) = (idx / x0.ncols(), idx % x0.ncols());
            let eval = |delta: f64| {
                let mut xp = x0.clone();
                xp[[r, c]] += delta;
                let mut g = Graph::new();
                let x = g.param(xp);
                let out = build(&mut g, x);
                g.scalar(out)
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let a = analytic[[r, c]];
            assert!((fd - a).abs() <= 1e-6 * (1.0 + fd.abs()), "entry ({r},{c}): analytic {a} vs fd {fd}");
        }
    }

    #[test]
    fn matmul_gelu_layernorm_gradient() {
        let w = array![[0.3, -0.2, 0.5], [0.1, 0.4, -0.6]];
        fd_check(
            |g, x| {
                let wc = g.constant(w.clone());
                let y = g.matmul(x, wc);
                let y = g.gelu(y);
                let y = g.layer_norm(y, 1e-5);
                let sq = g.mul(y, y);
                let sq = g.scale(sq, 0.7);
                let e = g.exp(y);
                let t = g.add(sq, e);
                g.sum(t)
            },
            array![[0.2, -1.0], [0.7, 0.3], [-0.4, 0.9]],
        );
    }

    #[test]
    fn masked_softmax_gradient_and_zeros() {
        let mask = array![[true, false, true], [false, true, true]];
        let x0 = array![[0.2, 1.0, -0.5], [0.3, 0.1, 0.9]];
        let weights = array![[1.0, 2.0, 3.0], [-1.0, 0.5, 2.0]];
        let mut g = Graph::new();
        let x = g.param(x0.clone());
        let y = g.softmax(x, Some(&mask));
        assert_eq!(g.value(y)[[0, 1]], 0.0);
        assert_eq!(g.value(y)[[1, 0]], 0.0);
        for row in g.value(y).rows() {
            assert!((row.sum() - 1.0).abs() < 1e-15);
        }
        fd_check(
            |g, x| {
                let y = g.softmax(x, Some(&mask));
                let w = g.constant(weights.clone());
                let p = g.mul(y, w);
                g.sum(p)
            },
            x0,
        );
    }

    #[test]
    fn structural_ops_gradient() {
        fd_check(
            |g, x| {
                let a = g.rows(x, 0, 2);
                let t = g.transpose(a);
                let tt = g.matmul(t, a);
                let r = g.reshape(tt, 1, 4);
                let m = g.mean_rows(x);
                let b = g.cols(m, 1, 2);
                let gm = g.group_max(x, 2);
                let gat = g.gather(x, &[3, 0, 3]);
                let cc = g.concat_rows(&[gat, gm]);
                let rr = g.concat_cols(&[m, b]);
                let s1 = g.sum(r);
                let s2 = g.sum(cc);
                let rrt = g.transpose(rr);
                let s3 = g.matmul(rr, rrt);
                let s = g.add(s1, s2);
                g.add(s, s3)
            },
            array![[0.2, -1.0], [0.7, 0.3], [-0.4, 0.9], [0.5, 0.25]],
        );
    }
}
