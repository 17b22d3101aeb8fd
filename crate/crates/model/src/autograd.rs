//! Minimal reverse-mode differentiation over dense matrices.
//!
//! Every value is an `n × m` matrix; scalars are `1 × 1`. Nodes are appended
//! in evaluation order, so a single reverse sweep visits each node after all
//! of its consumers.

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

pub type Mat = Array2<f64>;

const LN_EPS: f64 = 1e-5;

/// Storage precision of intermediate values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    /// Every op result is rounded through `f32`.
    F32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Mat,
        inv_std: Vec<f64>,
    },
    Attention {
        q: Var,
        k: Var,
        v: Var,
        heads: usize,
        probs: Vec<Mat>,
    },
    Gather {
        sources: Vec<(Var, usize)>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<(usize, usize)>,
        probs: Mat,
    },
}

struct Node {
    value: Mat,
    requires_grad: bool,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    precision: Precision,
}

pub struct Gradients {
    grads: Vec<Option<Mat>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Mat> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }
}

fn gelu(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let t = (c * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x)
}

fn softmax_row(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = if v.is_finite() { (*v - max).exp() } else { 0.0 };
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

impl Tape {
    pub fn new(precision: Precision) -> Self {
        Self {
            nodes: Vec::new(),
            precision,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, mut value: Mat, requires_grad: bool, op: Op) -> Var {
        if self.precision == Precision::F32 {
            value.mapv_inplace(|x| x as f32 as f64);
        }
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Mat, requires_grad: bool) -> Var {
        self.push(value, requires_grad, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, rg, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, rg, Op::Add(a, b))
    }

    /// `a + row`, broadcasting a `1 × m` row over every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let value = self.value(a) + self.value(row);
        let rg = self.rg(a) || self.rg(row);
        self.push(value, rg, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a) * factor;
        let rg = self.rg(a);
        self.push(value, rg, Op::Scale(a, factor))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(gelu);
        let rg = self.rg(a);
        self.push(value, rg, Op::Gelu(a))
    }

    /// Row-wise layer normalization with `1 × m` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let (n, m) = xv.dim();
        let mut xhat = Mat::zeros((n, m));
        let mut inv_std = Vec::with_capacity(n);
        for (i, row) in xv.rows().into_iter().enumerate() {
            let mean = row.sum() / m as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(is);
            for (j, v) in row.iter().enumerate() {
                xhat[[i, j]] = (v - mean) * is;
            }
        }
        let value = &xhat * self.value(gain) + self.value(bias);
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        self.push(
            value,
            rg,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        )
    }

    /// Multi-head scaled dot-product attention over rows of `q`, `k`, `v`.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, causal: bool) -> Var {
        let (n, d) = self.value(q).dim();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut out = Mat::zeros((n, d));
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let qh = self.value(q).slice(cols);
            let kh = self.value(k).slice(cols);
            let vh = self.value(v).slice(cols);
            let mut scores = qh.dot(&kh.t()) * scale;
            for (i, mut row) in scores.rows_mut().into_iter().enumerate() {
                if causal {
                    row.slice_mut(s![i + 1..]).fill(f64::NEG_INFINITY);
                }
                softmax_row(row.as_slice_mut().expect("contiguous row"));
            }
            out.slice_mut(cols).assign(&scores.dot(&vh));
            probs.push(scores);
        }
        let rg = self.rg(q) || self.rg(k) || self.rg(v);
        self.push(out, rg, Op::Attention { q, k, v, heads, probs })
    }

    /// Builds a matrix whose row `i` is row `sources[i].1` of `sources[i].0`.
    pub fn gather(&mut self, sources: Vec<(Var, usize)>) -> Var {
        let width = sources.first().map(|(v, _)| self.value(*v).ncols()).unwrap_or(0);
        let mut value = Mat::zeros((sources.len(), width));
        for (i, (src, row)) in sources.iter().enumerate() {
            value.row_mut(i).assign(&self.value(*src).row(*row));
        }
        let rg = sources.iter().any(|(v, _)| self.rg(*v));
        self.push(value, rg, Op::Gather { sources })
    }

    /// Mean negative log-likelihood of `(row, class)` targets; returns `1 × 1`.
    pub fn cross_entropy(&mut self, logits: Var, targets: Vec<(usize, usize)>) -> Var {
        let lv = self.value(logits);
        let mut probs = Mat::zeros((targets.len(), lv.ncols()));
        let mut nll = 0.0;
        for (t, &(row, class)) in targets.iter().enumerate() {
            let mut p = lv.row(row).to_owned();
            softmax_row(p.as_slice_mut().expect("contiguous row"));
            nll -= p[class].max(f64::MIN_POSITIVE).ln();
            probs.row_mut(t).assign(&p);
        }
        let loss = nll / targets.len().max(1) as f64;
        let rg = self.rg(logits);
        self.push(
            Mat::from_elem((1, 1), loss),
            rg,
            Op::CrossEntropy {
                logits,
                targets,
                probs,
            },
        )
    }

    /// Gradients of the scalar `loss` with respect to every node requiring them.
    pub fn backward(&self, loss: Var) -> Gradients {
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Mat::ones(self.value(loss).dim()));

        fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                }
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        acc(&mut grads, *a, g.dot(&self.value(*b).t()));
                    }
                    if self.rg(*b) {
                        acc(&mut grads, *b, self.value(*a).t().dot(&g));
                    }
                }
                Op::Add(a, b) => {
                    if self.rg(*a) {
                        acc(&mut grads, *a, g.clone());
                    }
                    if self.rg(*b) {
                        acc(&mut grads, *b, g);
                    }
                }
                Op::AddRow(a, row) => {
                    if self.rg(*row) {
                        acc(&mut grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if self.rg(*a) {
                        acc(&mut grads, *a, g);
                    }
                }
                Op::Scale(a, f) => acc(&mut grads, *a, g * *f),
                Op::Gelu(a) => {
                    let d = self.value(*a).mapv(gelu_grad);
                    acc(&mut grads, *a, g * d);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    if self.rg(*bias) {
                        acc(&mut grads, *bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if self.rg(*gain) {
                        acc(&mut grads, *gain, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if self.rg(*x) {
                        let dxhat = &g * self.value(*gain);
                        let m = xhat.ncols() as f64;
                        let mut dx = Mat::zeros(xhat.dim());
                        for i in 0..xhat.nrows() {
                            let dr = dxhat.row(i);
                            let xr = xhat.row(i);
                            let mean_d = dr.sum() / m;
                            let mean_dx = dr.dot(&xr) / m;
                            for j in 0..xhat.ncols() {
                                dx[[i, j]] = inv_std[i] * (dr[j] - mean_d - xr[j] * mean_dx);
                            }
                        }
                        acc(&mut grads, *x, dx);
                    }
                }
                Op::Attention { q, k, v, heads, probs } => {
                    let (n, d) = g.dim();
                    let dh = d / heads;
                    let scale = 1.0 / (dh as f64).sqrt();
                    let mut dq = Mat::zeros((n, d));
                    let mut dk = Mat::zeros((n, d));
                    let mut dv = Mat::zeros((n, d));
                    for (h, p) in probs.iter().enumerate() {
                        let cols = s![.., h * dh..(h + 1) * dh];
                        let go = g.slice(cols);
                        let qh = self.value(*q).slice(cols);
                        let kh = self.value(*k).slice(cols);
                        let vh = self.value(*v).slice(cols);
                        dv.slice_mut(cols).assign(&p.t().dot(&go));
                        let dp = go.dot(&vh.t());
                        let mut ds = &dp * p;
                        for (i, mut row) in ds.rows_mut().into_iter().enumerate() {
                            let dot: f64 = row.sum();
                            for (j, val) in row.iter_mut().enumerate() {
                                *val -= p[[i, j]] * dot;
                            }
                        }
                        ds *= scale;
                        dq.slice_mut(cols).assign(&ds.dot(&kh));
                        dk.slice_mut(cols).assign(&ds.t().dot(&qh));
                    }
                    if self.rg(*q) {
                        acc(&mut grads, *q, dq);
                    }
                    if self.rg(*k) {
                        acc(&mut grads, *k, dk);
                    }
                    if self.rg(*v) {
                        acc(&mut grads, *v, dv);
                    }
                }
                Op::Gather { sources } => {
                    for (i, (src, row)) in sources.iter().enumerate() {
                        if !self.rg(*src) {
                            continue;
                        }
                        let slot = grads[src.0].get_or_insert_with(|| Mat::zeros(self.value(*src).dim()));
                        let mut r = slot.row_mut(*row);
                        r += &g.row(i);
                    }
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    probs,
                } => {
                    let scale = g[[0, 0]] / targets.len().max(1) as f64;
                    let mut dl = Mat::zeros(self.value(*logits).dim());
                    for (t, &(row, class)) in targets.iter().enumerate() {
                        let mut r = dl.row_mut(row);
                        r.scaled_add(scale, &probs.row(t));
                        r[class] -= scale;
                    }
                    acc(&mut grads, *logits, dl);
                }
            }
        }
        Gradients { grads }
    }
}
