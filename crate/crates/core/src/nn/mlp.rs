use rand::Rng;

use super::linalg::gemm;
use crate::error::{Error, Result};
use crate::seed;

/// Fully connected ReLU network with a softmax head.
///
/// The input is `[onehot(i), ctx]`. The one-hot block is never materialized:
/// the first layer adds row `i` of its weight matrix to `ctx * W_ctx`, and
/// the context product is computed once per distinct context.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    n_onehot: usize,
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Inputs for one forward pass: distinct context rows plus `(onehot, ctx)` pairs.
#[derive(Clone, Debug, Default)]
pub struct Batch {
    pub ctx_dim: usize,
    /// `n_ctx x ctx_dim`, row-major.
    pub ctx: Vec<f64>,
    pub rows: Vec<(usize, usize)>,
}

impl Batch {
    pub fn new(ctx_dim: usize) -> Self {
        Self { ctx_dim, ..Default::default() }
    }

    pub fn n_ctx(&self) -> usize {
        if self.ctx_dim == 0 {
            // rows still reference context 0
            1
        } else {
            self.ctx.len() / self.ctx_dim
        }
    }

    /// Appends a context row and returns its index.
    pub fn push_ctx(&mut self, ctx: &[f64]) -> usize {
        debug_assert_eq!(ctx.len(), self.ctx_dim);
        let id = self.ctx.len() / self.ctx_dim.max(1);
        self.ctx.extend_from_slice(ctx);
        id
    }
}

#[derive(Clone, Debug)]
enum Node {
    Embed { rows: Vec<(usize, usize)>, ctx: Vec<f64>, n_ctx: usize },
    /// `input` is the ReLU output of the previous layer, so it doubles as the mask.
    Dense { layer: usize, input: Vec<f64> },
    Softmax,
}

/// Forward record, replayed in reverse by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    n_rows: usize,
    probs: Vec<f64>,
}

impl Tape {
    /// Action probabilities, `n_rows x n_out` row-major.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d probs`;
    /// returns `d loss / d ctx` (`n_ctx x ctx_dim`).
    pub fn backward(&self, net: &Mlp, d_probs: &[f64], grad: &mut [f64]) -> Vec<f64> {
        assert_eq!(grad.len(), net.params.len());
        let n = self.n_rows;
        let na = net.n_out();
        assert_eq!(d_probs.len(), n * na);
        let mut g = d_probs.to_vec();
        let mut d_ctx = Vec::new();
        for node in self.nodes.iter().rev() {
            match node {
                Node::Softmax => {
                    for (p, d) in self.probs.chunks(na).zip(g.chunks_mut(na)) {
                        let dot: f64 = p.iter().zip(d.iter()).map(|(p, d)| p * d).sum();
                        for (di, pi) in d.iter_mut().zip(p) {
                            *di = pi * (*di - dot);
                        }
                    }
                }
                Node::Dense { layer, input } => {
                    let (fan_in, fan_out) = (net.sizes[*layer], net.sizes[layer + 1]);
                    let (w, b) = net.layer_offsets(*layer);
                    if fan_out <= NARROW {
                        g = narrow_backward(input, &g, &net.params[w..b], grad, (w, b), fan_in, fan_out);
                        continue;
                    }
                    gemm(
                        fan_in,
                        n,
                        fan_out,
                        1.0,
                        input,
                        (1, fan_in),
                        &g,
                        (fan_out, 1),
                        1.0,
                        &mut grad[w..b],
                        fan_out,
                    );
                    for row in g.chunks(fan_out) {
                        for (gb, r) in grad[b..b + fan_out].iter_mut().zip(row) {
                            *gb += r;
                        }
                    }
                    let mut dx = vec![0.0; n * fan_in];
                    gemm(
                        n,
                        fan_out,
                        fan_in,
                        1.0,
                        &g,
                        (fan_out, 1),
                        &net.params[w..b],
                        (1, fan_out),
                        0.0,
                        &mut dx,
                        fan_in,
                    );
                    for (d, x) in dx.iter_mut().zip(input) {
                        if *x <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    g = dx;
                }
                Node::Embed { rows, ctx, n_ctx } => {
                    let h = net.sizes[1];
                    let cd = net.ctx_dim();
                    let (w, b) = net.layer_offsets(0);
                    let mut dc = vec![0.0; n_ctx * h];
                    for (r, &(i, c)) in rows.iter().enumerate() {
                        let gr = &g[r * h..(r + 1) * h];
                        let wrow = w + i * h;
                        for k in 0..h {
                            grad[wrow + k] += gr[k];
                            grad[b + k] += gr[k];
                            dc[c * h + k] += gr[k];
                        }
                    }
                    d_ctx = vec![0.0; n_ctx * cd];
                    if cd > 0 {
                        let wc = w + net.n_onehot * h;
                        gemm(
                            cd,
                            *n_ctx,
                            h,
                            1.0,
                            ctx,
                            (1, cd),
                            &dc,
                            (h, 1),
                            1.0,
                            &mut grad[wc..b],
                            h,
                        );
                        gemm(
                            *n_ctx,
                            h,
                            cd,
                            1.0,
                            &dc,
                            (h, 1),
                            &net.params[wc..b],
                            (1, h),
                            0.0,
                            &mut d_ctx,
                            cd,
                        );
                    }
                }
            }
        }
        d_ctx
    }
}

/// Output widths at or below this use row loops instead of a packed product.
const NARROW: usize = 8;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Column-major copy of a `fan_in x fan_out` weight block.
fn transpose(w: &[f64], fan_in: usize, fan_out: usize) -> Vec<f64> {
    let mut t = vec![0.0; w.len()];
    for k in 0..fan_in {
        for j in 0..fan_out {
            t[j * fan_in + k] = w[k * fan_out + j];
        }
    }
    t
}

fn narrow_forward(x: &[f64], w: &[f64], bias: &[f64], fan_in: usize, fan_out: usize) -> Vec<f64> {
    let wt = transpose(w, fan_in, fan_out);
    let mut z = Vec::with_capacity(x.len() / fan_in * fan_out);
    for row in x.chunks_exact(fan_in) {
        for j in 0..fan_out {
            z.push(bias[j] + dot(row, &wt[j * fan_in..(j + 1) * fan_in]));
        }
    }
    z
}

/// Accumulates the weight and bias gradients of a narrow layer and returns
/// the input gradient, masked where the ReLU input was inactive.
fn narrow_backward(
    input: &[f64],
    g: &[f64],
    w: &[f64],
    grad: &mut [f64],
    (wo, bo): (usize, usize),
    fan_in: usize,
    fan_out: usize,
) -> Vec<f64> {
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; fan_out];
    let mut dx = Vec::with_capacity(input.len());
    for (row, gr) in input.chunks_exact(fan_in).zip(g.chunks_exact(fan_out)) {
        for (k, &xk) in row.iter().enumerate() {
            let wk = &w[k * fan_out..(k + 1) * fan_out];
            let mut acc = 0.0;
            for j in 0..fan_out {
                dw[k * fan_out + j] += xk * gr[j];
                acc += wk[j] * gr[j];
            }
            dx.push(if xk > 0.0 { acc } else { 0.0 });
        }
        for j in 0..fan_out {
            db[j] += gr[j];
        }
    }
    for (gw, d) in grad[wo..bo].iter_mut().zip(&dw) {
        *gw += d;
    }
    for j in 0..fan_out {
        grad[bo + j] += db[j];
    }
    dx
}

fn softmax_rows(z: &mut [f64], width: usize) {
    for row in z.chunks_mut(width) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
}

impl Mlp {
    /// He-uniform weights on the ReLU layers, Glorot-uniform on the head, zero biases.
    pub fn new(n_onehot: usize, ctx_dim: usize, hidden: &[usize], n_out: usize, seed: u64) -> Self {
        let mut sizes = vec![n_onehot + ctx_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(n_out);
        let n_params = (0..sizes.len() - 1).map(|l| (sizes[l] + 1) * sizes[l + 1]).sum();
        let mut net = Self { n_onehot, sizes, params: vec![0.0; n_params] };
        let mut rng = seed::rng(seed);
        let last = net.n_layers() - 1;
        for l in 0..net.n_layers() {
            let (fan_in, fan_out) = (net.sizes[l], net.sizes[l + 1]);
            let bound = if l == last {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            let (w, b) = net.layer_offsets(l);
            for p in &mut net.params[w..b] {
                *p = rng.random_range(-bound..bound);
            }
        }
        net
    }

    pub fn from_parts(n_onehot: usize, sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes[0] < n_onehot {
            return Err(Error::InvalidParam(format!("bad layer sizes {sizes:?}")));
        }
        let expected = (0..sizes.len() - 1).map(|l| (sizes[l] + 1) * sizes[l + 1]).sum();
        if params.len() != expected {
            return Err(Error::Dimension {
                context: "mlp parameters",
                expected,
                got: params.len(),
            });
        }
        Ok(Self { n_onehot, sizes, params })
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_onehot(&self) -> usize {
        self.n_onehot
    }

    pub fn ctx_dim(&self) -> usize {
        self.sizes[0] - self.n_onehot
    }

    pub fn n_out(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Start of the weight block and of the bias block of layer `l`.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let w: usize = (0..l).map(|k| (self.sizes[k] + 1) * self.sizes[k + 1]).sum();
        (w, w + self.sizes[l] * self.sizes[l + 1])
    }

    fn embed(&self, batch: &Batch) -> Vec<f64> {
        let h = self.sizes[1];
        let cd = self.ctx_dim();
        assert_eq!(batch.ctx_dim, cd, "batch context width");
        let (w, b) = self.layer_offsets(0);
        let n_ctx = batch.n_ctx();
        let mut c = vec![0.0; n_ctx * h];
        if cd > 0 {
            let wc = w + self.n_onehot * h;
            gemm(n_ctx, cd, h, 1.0, &batch.ctx, (cd, 1), &self.params[wc..b], (h, 1), 0.0, &mut c, h);
        }
        let mut z = vec![0.0; batch.rows.len() * h];
        for (r, &(i, ci)) in batch.rows.iter().enumerate() {
            assert!(i < self.n_onehot && ci < n_ctx, "batch row ({i}, {ci}) out of range");
            let out = &mut z[r * h..(r + 1) * h];
            let wrow = &self.params[w + i * h..w + (i + 1) * h];
            let bias = &self.params[b..b + h];
            let crow = &c[ci * h..(ci + 1) * h];
            for k in 0..h {
                out[k] = wrow[k] + crow[k] + bias[k];
            }
        }
        z
    }

    fn dense(&self, l: usize, x: &[f64], n: usize) -> Vec<f64> {
        let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
        let (w, b) = self.layer_offsets(l);
        let bias = &self.params[b..b + fan_out];
        if fan_out <= NARROW {
            return narrow_forward(x, &self.params[w..b], bias, fan_in, fan_out);
        }
        let mut z: Vec<f64> = Vec::with_capacity(n * fan_out);
        for _ in 0..n {
            z.extend_from_slice(bias);
        }
        gemm(n, fan_in, fan_out, 1.0, x, (fan_in, 1), &self.params[w..b], (fan_out, 1), 1.0, &mut z, fan_out);
        z
    }

    fn run(&self, batch: &Batch, record: bool) -> Tape {
        let n = batch.rows.len();
        let mut nodes = Vec::new();
        let mut z = self.embed(batch);
        if record {
            nodes.push(Node::Embed {
                rows: batch.rows.clone(),
                ctx: batch.ctx.clone(),
                n_ctx: batch.n_ctx(),
            });
        }
        for l in 1..self.n_layers() {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
            let next = self.dense(l, &z, n);
            if record {
                nodes.push(Node::Dense { layer: l, input: std::mem::take(&mut z) });
            }
            z = next;
        }
        softmax_rows(&mut z, self.n_out());
        if record {
            nodes.push(Node::Softmax);
        }
        Tape { nodes, n_rows: n, probs: z }
    }

    /// Action probabilities for every row, `rows x n_out`.
    pub fn forward(&self, batch: &Batch) -> Vec<f64> {
        self.run(batch, false).probs
    }

    pub fn forward_tape(&self, batch: &Batch) -> Tape {
        self.run(batch, true)
    }
}

/// A policy network over `(t, x)` or, when adaptive, `(t, x, rho)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpPolicy {
    net: Mlp,
    adaptive: bool,
    horizon: usize,
}

impl MlpPolicy {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        adaptive: bool,
        hidden: &[usize],
        seed: u64,
    ) -> Self {
        let ctx_dim = 1 + if adaptive { n_states } else { 0 };
        Self { net: Mlp::new(n_states, ctx_dim, hidden, n_actions, seed), adaptive, horizon }
    }

    pub fn from_net(net: Mlp, adaptive: bool, horizon: usize) -> Result<Self> {
        let expected = 1 + if adaptive { net.n_onehot() } else { 0 };
        if net.ctx_dim() != expected {
            return Err(Error::Dimension {
                context: "mlp policy context width",
                expected,
                got: net.ctx_dim(),
            });
        }
        Ok(Self { net, adaptive, horizon })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn adaptive(&self) -> bool {
        self.adaptive
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.net.n_onehot()
    }

    pub fn n_actions(&self) -> usize {
        self.net.n_out()
    }

    pub fn ctx_dim(&self) -> usize {
        self.net.ctx_dim()
    }

    /// Context features `[t / H, rho (adaptive only)]`.
    pub fn context(&self, t: usize, rho: &[f64]) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.ctx_dim());
        c.push(t as f64 / self.horizon as f64);
        if self.adaptive {
            c.extend_from_slice(rho);
        }
        c
    }

    /// Batch holding every state under one context.
    pub fn state_batch(&self, t: usize, rho: &[f64]) -> Batch {
        let mut batch = Batch::new(self.ctx_dim());
        let c = batch.push_ctx(&self.context(t, rho));
        batch.rows = (0..self.n_states()).map(|x| (x, c)).collect();
        batch
    }

    pub fn eval_states(&self, t: usize, rho: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.net.forward(&self.state_batch(t, rho)));
    }

    pub fn eval_into(&self, t: usize, x: usize, rho: &[f64], out: &mut [f64]) {
        let mut batch = Batch::new(self.ctx_dim());
        let c = batch.push_ctx(&self.context(t, rho));
        batch.rows.push((x, c));
        out.copy_from_slice(&self.net.forward(&batch));
    }
}
