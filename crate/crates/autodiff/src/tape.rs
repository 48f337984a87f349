use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::{gemm, gemm_wide, Tensor};
use crate::LN_EPS;
use thiserror::Error;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Error, PartialEq)]
pub enum AutodiffError {
    #[error("backward called on an empty tape")]
    EmptyTape,
    #[error("loss must be a [1, 1] scalar, got {0:?}")]
    NotScalar([usize; 2]),
    #[error("loss is not finite: {0}")]
    NonFinite(f32),
}

/// One table lookup of [`Tape::embed_sum`]: add row `index` of table `table`
/// into output row `row`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbedEntry {
    pub row: u32,
    pub table: u16,
    pub index: u32,
}

enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    /// `b` has fewer rows than `a`; row `i` of `a` gets row `i % b.rows`.
    AddBcast(Var, Var),
    Scale(Var, f32),
    Reshape(Var),
    EmbedSum { tables: Vec<Var>, entries: Vec<EmbedEntry> },
    Gather(Var, Vec<usize>),
    Concat(Var, Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f32>, rstd: Vec<f32> },
    Gelu(Var),
    Tanh(Var),
    Attention { q: Var, k: Var, v: Var, heads: usize, seq: usize, probs: Vec<f32> },
    /// Gradient of the loss with respect to the logits, precomputed in forward.
    SoftmaxXent { logits: Var, dlogits: Vec<f32> },
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    /// Double-precision copy of scalar reductions, carried through `add` and `scale`.
    exact: Option<f64>,
}

/// Records a forward pass over parameters borrowed from a [`ParamStore`].
///
/// Shape mismatches are programming errors and panic.
pub struct Tape<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
    wide: bool,
}

const GELU_C: f32 = 0.797_884_6; // sqrt(2 / pi)
const GELU_A: f32 = 0.044_715;

/// Tanh-approximated GELU: `0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))`.
pub fn gelu(x: f32) -> f32 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f32) -> f32 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

impl<'p> Tape<'p> {
    pub fn new(store: &'p ParamStore) -> Tape<'p> {
        Tape { store, nodes: Vec::with_capacity(256), param_vars: vec![None; store.len()], wide: false }
    }

    /// A tape whose forward matrix products accumulate in double precision.
    /// Values are still stored as `f32`; this only removes summation error.
    pub fn wide(store: &'p ParamStore) -> Tape<'p> {
        Tape { wide: true, ..Tape::new(store) }
    }

    #[allow(clippy::too_many_arguments)]
    fn forward_gemm(
        wide: bool,
        m: usize,
        k: usize,
        n: usize,
        a: &[f32],
        sa: (usize, usize),
        b: &[f32],
        sb: (usize, usize),
        c: &mut [f32],
        rsc: usize,
    ) {
        if wide {
            gemm_wide(m, k, n, a, sa, b, sb, c, rsc);
        } else {
            gemm(m, k, n, a, sa, b, sb, 0.0, c, rsc);
        }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match self.nodes[v.0].op {
            Op::Param(id) => self.store.get(id),
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.value(v).shape()
    }

    /// Scalar value in double precision. Losses built from `softmax_xent`,
    /// `sum`, `add` and `scale` keep the unrounded value.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].exact.unwrap_or_else(|| self.value(v).item() as f64)
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op, exact: None });
        Var(self.nodes.len() - 1)
    }

    fn push_exact(&mut self, exact: f64, op: Op) -> Var {
        self.nodes.push(Node { value: Tensor::scalar(exact as f32), op, exact: Some(exact) });
        Var(self.nodes.len() - 1)
    }

    fn exact(&self, v: Var) -> Option<f64> {
        self.nodes[v.0].exact
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// The parameter as a tape value. Repeated calls return the same handle.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let v = self.push(Tensor::zeros(0, 0), Op::Param(id));
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.cols, y.rows, "matmul {:?} x {:?}", x.shape(), y.shape());
        let (m, k, n) = (x.rows, x.cols, y.cols);
        let mut out = Tensor::zeros(m, n);
        Self::forward_gemm(self.wide, m, k, n, &x.data, (k, 1), &y.data, (n, 1), &mut out.data, n);
        self.push(out, Op::MatMul(a, b))
    }

    /// `x · w + b` with `b` a `[1, n]` bias.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Var {
        let h = self.matmul(x, w);
        self.add_bcast(h, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        if let (Some(p), Some(q)) = (self.exact(a), self.exact(b)) {
            return self.push_exact(p + q, Op::Add(a, b));
        }
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "add shape mismatch");
        let data = x.data.iter().zip(&y.data).map(|(p, q)| p + q).collect();
        let out = Tensor::from_vec(x.rows, x.cols, data);
        self.push(out, Op::Add(a, b))
    }

    /// `a + b` where `b` is tiled over rows (`a.rows` must be a multiple of `b.rows`).
    pub fn add_bcast(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert!(
            x.cols == y.cols && y.rows > 0 && x.rows % y.rows == 0,
            "add_bcast {:?} + {:?}",
            x.shape(),
            y.shape()
        );
        let mut out = x.clone();
        for (r, chunk) in out.data.chunks_exact_mut(x.cols).enumerate() {
            chunk.iter_mut().zip(y.row(r % y.rows)).for_each(|(o, q)| *o += q);
        }
        self.push(out, Op::AddBcast(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f32) -> Var {
        if let Some(p) = self.exact(a) {
            return self.push_exact(p * s as f64, Op::Scale(a, s));
        }
        let x = self.value(a);
        let out = Tensor::from_vec(x.rows, x.cols, x.data.iter().map(|v| v * s).collect());
        self.push(out, Op::Scale(a, s))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let x = self.value(a);
        assert_eq!(x.len(), rows * cols, "reshape {:?} to [{rows}, {cols}]", x.shape());
        let out = Tensor::from_vec(rows, cols, x.data.clone());
        self.push(out, Op::Reshape(a))
    }

    /// Sum of table rows per output row. All tables share a width.
    pub fn embed_sum(&mut self, tables: &[Var], rows: usize, entries: Vec<EmbedEntry>) -> Var {
        let cols = self.value(tables[0]).cols;
        let mut out = Tensor::zeros(rows, cols);
        for e in &entries {
            let t = self.value(tables[e.table as usize]);
            assert_eq!(t.cols, cols, "embedding tables differ in width");
            assert!((e.index as usize) < t.rows, "embedding index {} >= {}", e.index, t.rows);
            out.row_mut(e.row as usize).iter_mut().zip(t.row(e.index as usize)).for_each(|(o, v)| *o += v);
        }
        self.push(out, Op::EmbedSum { tables: tables.to_vec(), entries })
    }

    /// Rows of `a` in the given order (repeats allowed).
    pub fn gather_rows(&mut self, a: Var, idx: Vec<usize>) -> Var {
        let x = self.value(a);
        let mut out = Tensor::zeros(idx.len(), x.cols);
        for (o, &i) in idx.iter().enumerate() {
            out.row_mut(o).copy_from_slice(x.row(i));
        }
        self.push(out, Op::Gather(a, idx))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.rows, y.rows, "concat_cols row mismatch");
        let mut out = Tensor::zeros(x.rows, x.cols + y.cols);
        for r in 0..x.rows {
            let row = out.row_mut(r);
            row[..x.cols].copy_from_slice(x.row(r));
            row[x.cols..].copy_from_slice(y.row(r));
        }
        self.push(out, Op::Concat(a, b))
    }

    /// Row-wise layer normalization with `[1, n]` gain and bias.
    pub fn layernorm(&mut self, a: Var, gamma: Var, beta: Var) -> Var {
        let (x, g, b) = (self.value(a), self.value(gamma), self.value(beta));
        assert!(g.shape() == [1, x.cols] && b.shape() == [1, x.cols], "layernorm parameter shape");
        let n = x.cols;
        let mut out = Tensor::zeros(x.rows, n);
        let mut xhat = vec![0.0; x.len()];
        let mut rstd = vec![0.0; x.rows];
        for r in 0..x.rows {
            let row = x.row(r);
            let mean = row.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
            let var = row.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n as f64;
            let rs = 1.0 / (var + LN_EPS as f64).sqrt();
            rstd[r] = rs as f32;
            for c in 0..n {
                let h = ((row[c] as f64 - mean) * rs) as f32;
                xhat[r * n + c] = h;
                out.data[r * n + c] = h * g.data[c] + b.data[c];
            }
        }
        self.push(out, Op::LayerNorm { x: a, gamma, beta, xhat, rstd })
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Tensor::from_vec(x.rows, x.cols, x.data.iter().map(|&v| gelu(v)).collect());
        self.push(out, Op::Gelu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Tensor::from_vec(x.rows, x.cols, x.data.iter().map(|v| v.tanh()).collect());
        self.push(out, Op::Tanh(a))
    }

    /// Multi-head scaled dot-product self-attention over `rows / seq`
    /// independent sequences of length `seq`. `q`, `k`, `v` are
    /// `[batch * seq, heads * head_dim]`; the output has the same shape.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, seq: usize) -> Var {
        let (qt, kt, vt) = (self.value(q), self.value(k), self.value(v));
        assert!(qt.shape() == kt.shape() && qt.shape() == vt.shape(), "attention q/k/v shapes differ");
        assert!(seq > 0 && qt.rows % seq == 0, "rows {} not a multiple of seq {seq}", qt.rows);
        assert!(heads > 0 && qt.cols % heads == 0, "width {} not divisible by {heads} heads", qt.cols);
        let d = qt.cols;
        let hd = d / heads;
        let batch = qt.rows / seq;
        let scale = 1.0 / (hd as f32).sqrt();
        let wide = self.wide;
        let mut probs = vec![0.0f32; batch * heads * seq * seq];
        let mut out = Tensor::zeros(qt.rows, d);
        for b in 0..batch {
            let base = b * seq * d;
            for h in 0..heads {
                let off = base + h * hd;
                let p = &mut probs[(b * heads + h) * seq * seq..][..seq * seq];
                // scores = Q_h K_h^T
                Self::forward_gemm(wide, seq, hd, seq, &qt.data[off..], (d, 1), &kt.data[off..], (1, d), p, seq);
                for row in p.chunks_exact_mut(seq) {
                    let mut max = f32::NEG_INFINITY;
                    for s in row.iter_mut() {
                        *s *= scale;
                        max = max.max(*s);
                    }
                    let mut z = 0.0;
                    for s in row.iter_mut() {
                        *s = (*s - max).exp();
                        z += *s;
                    }
                    row.iter_mut().for_each(|s| *s /= z);
                }
                // out_h = P V_h, written into the head's column block.
                Self::forward_gemm(wide, seq, seq, hd, p, (seq, 1), &vt.data[off..], (d, 1), &mut out.data[off..], d);
            }
        }
        self.push(out, Op::Attention { q, k, v, heads, seq, probs })
    }

    /// Weighted soft-target cross-entropy, summed over rows:
    /// `sum_r w_r * -sum_j t_rj log softmax(z_r)_j`.
    ///
    /// `mask` (same shape as the logits) excludes entries from the softmax;
    /// targets must be zero there. Returns a `[1, 1]` scalar.
    pub fn softmax_xent(&mut self, logits: Var, targets: &Tensor, mask: Option<&[bool]>, weights: &[f32]) -> Var {
        self.softmax_loss(logits, targets, mask, weights, false)
    }

    /// Cross-entropy minus the target entropy: `Σ_r w_r KL(target_r ‖ softmax(z_r))`.
    /// Same gradient as [`Tape::softmax_xent`], zero at a perfect fit.
    pub fn softmax_kl(&mut self, logits: Var, targets: &Tensor, mask: Option<&[bool]>, weights: &[f32]) -> Var {
        self.softmax_loss(logits, targets, mask, weights, true)
    }

    fn softmax_loss(&mut self, logits: Var, targets: &Tensor, mask: Option<&[bool]>, weights: &[f32], kl: bool) -> Var {
        let z = self.value(logits);
        assert_eq!(z.shape(), targets.shape(), "softmax_xent target shape");
        assert_eq!(weights.len(), z.rows, "softmax_xent weight count");
        if let Some(m) = mask {
            assert_eq!(m.len(), z.len(), "softmax_xent mask length");
        }
        let n = z.cols;
        let mut dlogits = vec![0.0f32; z.len()];
        let mut loss = 0.0f64;
        for r in 0..z.rows {
            let w = weights[r];
            if w == 0.0 {
                continue;
            }
            let zr = z.row(r);
            let tr = targets.row(r);
            let on = |c: usize| mask.is_none_or(|m| m[r * n + c]);
            let max = (0..n).filter(|&c| on(c)).map(|c| zr[c]).fold(f32::NEG_INFINITY, f32::max);
            assert!(max.is_finite(), "softmax_xent row {r} has no unmasked entries");
            let lse = max as f64 + (0..n).filter(|&c| on(c)).map(|c| ((zr[c] - max) as f64).exp()).sum::<f64>().ln();
            let tsum: f64 = tr.iter().map(|&t| t as f64).sum();
            let mut row_loss = 0.0f64;
            for c in 0..n {
                if !on(c) {
                    assert!(tr[c] == 0.0, "target mass on masked entry ({r}, {c})");
                    continue;
                }
                let logp = zr[c] as f64 - lse;
                row_loss -= tr[c] as f64 * logp;
                if kl && tr[c] > 0.0 {
                    row_loss += tr[c] as f64 * (tr[c] as f64).ln();
                }
                dlogits[r * n + c] = (w as f64 * (logp.exp() * tsum - tr[c] as f64)) as f32;
            }
            loss += w as f64 * row_loss;
        }
        self.push_exact(loss, Op::SoftmaxXent { logits, dlogits })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().map(|&v| v as f64).sum::<f64>();
        self.push_exact(s, Op::Sum(a))
    }

    /// `sum_i w_i * x_i` over same-shape values.
    pub fn weighted_sum(&mut self, terms: &[(Var, f32)]) -> Var {
        let (first, rest) = terms.split_first().expect("weighted_sum needs at least one term");
        let mut acc = self.scale(first.0, first.1);
        for &(v, w) in rest {
            let s = self.scale(v, w);
            acc = self.add(acc, s);
        }
        acc
    }

    /// Reverse pass from a scalar loss. Parameters the loss does not depend on
    /// get exactly zero gradient.
    pub fn backward(&self, loss: Var) -> Result<Gradients, AutodiffError> {
        if self.nodes.is_empty() {
            return Err(AutodiffError::EmptyTape);
        }
        let lv = self.value(loss);
        if lv.shape() != [1, 1] {
            return Err(AutodiffError::NotScalar(lv.shape()));
        }
        if !lv.data[0].is_finite() {
            return Err(AutodiffError::NonFinite(lv.data[0]));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut out = Gradients::zeros_like(self.store);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Param(id) => {
                    out.get_mut(*id).data.iter_mut().zip(&g.data).for_each(|(o, v)| *o += v);
                }
                Op::MatMul(a, b) => {
                    let (x, y) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (x.rows, x.cols, y.cols);
                    // da += g · b^T ; db += a^T · g
                    let da = self.grad_buf(&mut grads, *a);
                    gemm(m, n, k, &g.data, (n, 1), &y.data, (1, n), 1.0, da, k);
                    let db = self.grad_buf(&mut grads, *b);
                    gemm(k, m, n, &x.data, (1, k), &g.data, (n, 1), 1.0, db, n);
                }
                Op::Add(a, b) => {
                    add_into(self.grad_buf(&mut grads, *a), &g.data);
                    add_into(self.grad_buf(&mut grads, *b), &g.data);
                }
                Op::AddBcast(a, b) => {
                    add_into(self.grad_buf(&mut grads, *a), &g.data);
                    let rows = self.value(*b).rows;
                    let cols = g.cols;
                    let db = self.grad_buf(&mut grads, *b);
                    for (r, chunk) in g.data.chunks_exact(cols).enumerate() {
                        add_into(&mut db[(r % rows) * cols..][..cols], chunk);
                    }
                }
                Op::Scale(a, s) => {
                    let da = self.grad_buf(&mut grads, *a);
                    da.iter_mut().zip(&g.data).for_each(|(o, v)| *o += v * s);
                }
                Op::Reshape(a) => add_into(self.grad_buf(&mut grads, *a), &g.data),
                Op::EmbedSum { tables, entries } => {
                    let cols = g.cols;
                    for e in entries {
                        let dt = self.grad_buf(&mut grads, tables[e.table as usize]);
                        add_into(&mut dt[e.index as usize * cols..][..cols], g.row(e.row as usize));
                    }
                }
                Op::Gather(a, idx) => {
                    let cols = g.cols;
                    let da = self.grad_buf(&mut grads, *a);
                    for (o, &src) in idx.iter().enumerate() {
                        add_into(&mut da[src * cols..][..cols], g.row(o));
                    }
                }
                Op::Concat(a, b) => {
                    let ca = self.value(*a).cols;
                    let cb = g.cols - ca;
                    let da = self.grad_buf(&mut grads, *a);
                    for r in 0..g.rows {
                        add_into(&mut da[r * ca..][..ca], &g.row(r)[..ca]);
                    }
                    let db = self.grad_buf(&mut grads, *b);
                    for r in 0..g.rows {
                        add_into(&mut db[r * cb..][..cb], &g.row(r)[ca..]);
                    }
                }
                Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                    let n = g.cols;
                    let gam = self.value(*gamma).data.clone();
                    {
                        let dg = self.grad_buf(&mut grads, *gamma);
                        for r in 0..g.rows {
                            for c in 0..n {
                                dg[c] += g.data[r * n + c] * xhat[r * n + c];
                            }
                        }
                    }
                    {
                        let db = self.grad_buf(&mut grads, *beta);
                        for r in 0..g.rows {
                            add_into(db, g.row(r));
                        }
                    }
                    let dx = self.grad_buf(&mut grads, *x);
                    let mut dxhat = vec![0.0f32; n];
                    for r in 0..g.rows {
                        let xh = &xhat[r * n..][..n];
                        let mut m1 = 0.0f64;
                        let mut m2 = 0.0f64;
                        for c in 0..n {
                            dxhat[c] = g.data[r * n + c] * gam[c];
                            m1 += dxhat[c] as f64;
                            m2 += (dxhat[c] * xh[c]) as f64;
                        }
                        let (m1, m2) = ((m1 / n as f64) as f32, (m2 / n as f64) as f32);
                        for c in 0..n {
                            dx[r * n + c] += rstd[r] * (dxhat[c] - m1 - xh[c] * m2);
                        }
                    }
                }
                Op::Gelu(a) => {
                    let x = &self.value(*a).data;
                    let da = self.grad_buf(&mut grads, *a);
                    for ((o, &v), &gv) in da.iter_mut().zip(x).zip(&g.data) {
                        *o += gv * gelu_grad(v);
                    }
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[i].value.data;
                    let da = self.grad_buf(&mut grads, *a);
                    for ((o, &t), &gv) in da.iter_mut().zip(y).zip(&g.data) {
                        *o += gv * (1.0 - t * t);
                    }
                }
                Op::Attention { q, k, v, heads, seq, probs } => {
                    self.attention_backward(&mut grads, &g, [*q, *k, *v], *heads, *seq, probs);
                }
                Op::SoftmaxXent { logits, dlogits } => {
                    let s = g.data[0];
                    let dz = self.grad_buf(&mut grads, *logits);
                    dz.iter_mut().zip(dlogits).for_each(|(o, v)| *o += s * v);
                }
                Op::Sum(a) => {
                    let s = g.data[0];
                    self.grad_buf(&mut grads, *a).iter_mut().for_each(|o| *o += s);
                }
            }
        }
        Ok(out)
    }

    fn grad_buf<'g>(&self, grads: &'g mut [Option<Tensor>], v: Var) -> &'g mut [f32] {
        let [r, c] = self.shape(v);
        &mut grads[v.0].get_or_insert_with(|| Tensor::zeros(r, c)).data
    }

    fn attention_backward(
        &self,
        grads: &mut [Option<Tensor>],
        g: &Tensor,
        [q, k, v]: [Var; 3],
        heads: usize,
        seq: usize,
        probs: &[f32],
    ) {
        let (qt, kt, vt) = (self.value(q), self.value(k), self.value(v));
        let d = qt.cols;
        let hd = d / heads;
        let batch = qt.rows / seq;
        let scale = 1.0 / (hd as f32).sqrt();
        let mut dq = vec![0.0f32; qt.len()];
        let mut dk = vec![0.0f32; qt.len()];
        let mut dv = vec![0.0f32; qt.len()];
        let mut dp = vec![0.0f32; seq * seq];
        for b in 0..batch {
            let base = b * seq * d;
            for h in 0..heads {
                let off = base + h * hd;
                let p = &probs[(b * heads + h) * seq * seq..][..seq * seq];
                // dV_h += P^T dO_h
                gemm(seq, seq, hd, p, (1, seq), &g.data[off..], (d, 1), 1.0, &mut dv[off..], d);
                // dP = dO_h V_h^T
                gemm(seq, hd, seq, &g.data[off..], (d, 1), &vt.data[off..], (1, d), 0.0, &mut dp, seq);
                // dS = P * (dP - rowsum(dP * P)), folded with the score scale.
                for (prow, drow) in p.chunks_exact(seq).zip(dp.chunks_exact_mut(seq)) {
                    let dot: f32 = prow.iter().zip(drow.iter()).map(|(a, b)| a * b).sum();
                    for (dv_, &pv) in drow.iter_mut().zip(prow) {
                        *dv_ = pv * (*dv_ - dot) * scale;
                    }
                }
                // dQ_h += dS K_h ; dK_h += dS^T Q_h
                gemm(seq, seq, hd, &dp, (seq, 1), &kt.data[off..], (d, 1), 1.0, &mut dq[off..], d);
                gemm(seq, seq, hd, &dp, (1, seq), &qt.data[off..], (d, 1), 1.0, &mut dk[off..], d);
            }
        }
        add_into(self.grad_buf(grads, q), &dq);
        add_into(self.grad_buf(grads, k), &dk);
        add_into(self.grad_buf(grads, v), &dv);
    }
}

fn add_into(dst: &mut [f32], src: &[f32]) {
    debug_assert_eq!(dst.len(), src.len());
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}
