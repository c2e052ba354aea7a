//! Reverse-mode differentiation over batched multivector tensors.
//!
//! A [`Tape`] records every operation as an append-only node list; a tensor
//! handle ([`MvTensor`]) is an index into that list plus its shape
//! `(batch, channels, dim)`. Plain real matrices are tensors with `dim = 0`
//! (one blade per channel), so dense layers and losses share the same tape.
//!
//! [`Tape::backward`] walks the nodes in strict reverse insertion order and
//! accumulates adjoints by summation.

mod kernels;

use std::sync::Arc;

use crate::clifford::{CayleyTable, MAX_DIM};
use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};

pub(crate) use kernels::sigmoid;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MvTensor {
    id: usize,
    batch: usize,
    channels: usize,
    dim: usize,
}

impl MvTensor {
    pub fn id(&self) -> usize {
        self.id
    }
    pub fn batch(&self) -> usize {
        self.batch
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn blades(&self) -> usize {
        1 << self.dim
    }
    /// Values per batch row.
    pub fn width(&self) -> usize {
        self.channels << self.dim
    }
    pub fn len(&self) -> usize {
        self.batch * self.width()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn same_shape(&self, other: &MvTensor) -> bool {
        self.batch == other.batch && self.channels == other.channels && self.dim == other.dim
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nonlinearity {
    Relu,
    Sigmoid,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param { offset: usize },
    Add { a: usize, b: usize, broadcast: bool },
    Sub { a: usize, b: usize, broadcast: bool },
    Scale { x: usize, c: f64 },
    GeometricProduct { a: usize, b: usize },
    GradeScale { x: usize, w: usize },
    GradeMask { x: usize, grade: usize },
    Linear { x: usize, w: usize, bias: Option<usize> },
    GpLayer { x: usize, z: usize, w: usize, fully_connected: bool },
    Norm { x: usize, phi: usize },
    Activation { x: usize },
    Elementwise { x: usize, kind: Nonlinearity },
    Concat { inputs: Vec<usize> },
    Gather { x: usize, index: Arc<Vec<usize>> },
    SegmentSum { x: usize, segment: Arc<Vec<usize>> },
    SelectBlades { x: usize, blades: Vec<usize> },
    MulRows { x: usize, s: usize },
    RowSqNorm { x: usize },
    Mse { a: usize, b: usize },
    WeightedSum { x: usize, weights: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    tensor: MvTensor,
    value: Vec<f64>,
    op: Op,
}

/// Append-only record of a computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn table(dim: usize) -> Arc<CayleyTable> {
    CayleyTable::shared(dim).expect("tensor dims are validated on creation")
}

fn shape_err(msg: String) -> Error {
    Error::Shape(msg)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, t: MvTensor) -> &[f64] {
        &self.nodes[t.id].value
    }

    /// Scalar value of a single-entry tensor.
    pub fn scalar(&self, t: MvTensor) -> f64 {
        self.nodes[t.id].value[0]
    }

    /// Sign of every ReLU input on the tape, in recording order. Two
    /// evaluations with equal patterns lie on the same smooth piece.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let mut pattern = Vec::new();
        for node in &self.nodes {
            match node.op {
                Op::Activation { x } => {
                    let size = 1 << self.nodes[x].tensor.dim;
                    pattern.extend(self.nodes[x].value.iter().step_by(size).map(|&v| v > 0.0));
                }
                Op::Elementwise { x, kind: Nonlinearity::Relu } => {
                    pattern.extend(self.nodes[x].value.iter().map(|&v| v > 0.0));
                }
                _ => {}
            }
        }
        pattern
    }

    fn push(&mut self, batch: usize, channels: usize, dim: usize, value: Vec<f64>, op: Op) -> MvTensor {
        let tensor = MvTensor {
            id: self.nodes.len(),
            batch,
            channels,
            dim,
        };
        debug_assert_eq!(value.len(), tensor.len());
        self.nodes.push(Node { tensor, value, op });
        tensor
    }

    fn val(&self, t: MvTensor) -> &[f64] {
        &self.nodes[t.id].value
    }

    pub fn constant(&mut self, batch: usize, channels: usize, dim: usize, data: Vec<f64>) -> Result<MvTensor> {
        if dim > MAX_DIM {
            return Err(Error::DimensionUnsupported(dim));
        }
        if data.len() != batch * (channels << dim) {
            return Err(shape_err(format!(
                "constant of shape ({batch}, {channels}, dim {dim}) given {} values",
                data.len()
            )));
        }
        Ok(self.push(batch, channels, dim, data, Op::Constant))
    }

    pub fn zeros(&mut self, batch: usize, channels: usize, dim: usize) -> Result<MvTensor> {
        self.constant(batch, channels, dim, vec![0.0; batch * (channels << dim)])
    }

    /// Registers parameter `id` as a `(1, len, dim 0)` leaf.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> MvTensor {
        let entry = store.entry(id);
        let data = store.slice(id).to_vec();
        self.push(1, entry.len, 0, data, Op::Param { offset: entry.offset })
    }

    fn binary_check(&self, a: MvTensor, b: MvTensor, what: &str) -> Result<bool> {
        if a.same_shape(&b) {
            return Ok(false);
        }
        if b.batch == 1 && a.channels == b.channels && a.dim == b.dim {
            return Ok(true);
        }
        Err(shape_err(format!("{what}: {a:?} vs {b:?}")))
    }

    /// `a + b`; `b` may have batch 1 and is then broadcast.
    pub fn add(&mut self, a: MvTensor, b: MvTensor) -> Result<MvTensor> {
        let broadcast = self.binary_check(a, b, "add")?;
        let w = a.width();
        let bv = self.val(b);
        let value: Vec<f64> = self
            .val(a)
            .iter()
            .enumerate()
            .map(|(i, &x)| x + if broadcast { bv[i % w] } else { bv[i] })
            .collect();
        Ok(self.push(a.batch, a.channels, a.dim, value, Op::Add { a: a.id, b: b.id, broadcast }))
    }

    pub fn sub(&mut self, a: MvTensor, b: MvTensor) -> Result<MvTensor> {
        let broadcast = self.binary_check(a, b, "sub")?;
        let w = a.width();
        let bv = self.val(b);
        let value: Vec<f64> = self
            .val(a)
            .iter()
            .enumerate()
            .map(|(i, &x)| x - if broadcast { bv[i % w] } else { bv[i] })
            .collect();
        Ok(self.push(a.batch, a.channels, a.dim, value, Op::Sub { a: a.id, b: b.id, broadcast }))
    }

    pub fn scale(&mut self, x: MvTensor, c: f64) -> MvTensor {
        let value = self.val(x).iter().map(|v| v * c).collect();
        self.push(x.batch, x.channels, x.dim, value, Op::Scale { x: x.id, c })
    }

    /// Channelwise geometric product.
    pub fn geometric_product(&mut self, a: MvTensor, b: MvTensor) -> Result<MvTensor> {
        if !a.same_shape(&b) {
            return Err(shape_err(format!("geometric product: {a:?} vs {b:?}")));
        }
        let value = kernels::geometric_product_forward(&table(a.dim), self.val(a), self.val(b));
        Ok(self.push(a.batch, a.channels, a.dim, value, Op::GeometricProduct { a: a.id, b: b.id }))
    }

    /// Multiplies grade `k` of channel `c` by `w[c·(n+1) + k]`.
    pub fn grade_scale(&mut self, x: MvTensor, w: MvTensor) -> Result<MvTensor> {
        let k = x.dim + 1;
        if w.len() != x.channels * k {
            return Err(shape_err(format!(
                "grade scale weights have {} entries, expected {}",
                w.len(),
                x.channels * k
            )));
        }
        let t = table(x.dim);
        let s = x.blades();
        let wv = self.val(w);
        let value = self
            .val(x)
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let c = (i / s) % x.channels;
                v * wv[c * k + t.grade(i % s)]
            })
            .collect();
        Ok(self.push(x.batch, x.channels, x.dim, value, Op::GradeScale { x: x.id, w: w.id }))
    }

    /// Keeps only grade `grade`.
    pub fn grade_mask(&mut self, x: MvTensor, grade: usize) -> Result<MvTensor> {
        if grade > x.dim {
            return Err(Error::GradeOutOfRange { grade, dim: x.dim });
        }
        let s = x.blades();
        let value = self
            .val(x)
            .iter()
            .enumerate()
            .map(|(i, &v)| if (i % s).count_ones() as usize == grade { v } else { 0.0 })
            .collect();
        Ok(self.push(x.batch, x.channels, x.dim, value, Op::GradeMask { x: x.id, grade }))
    }

    /// Clifford linear layer; weights `[q][p][n+1]`, optional grade-0 bias `[q]`.
    pub fn linear(&mut self, x: MvTensor, w: MvTensor, bias: Option<MvTensor>, q: usize) -> Result<MvTensor> {
        let p = x.channels;
        let k = x.dim + 1;
        if w.len() != q * p * k {
            return Err(shape_err(format!(
                "linear weights have {} entries, expected {q}×{p}×{k}",
                w.len()
            )));
        }
        if let Some(b) = bias {
            if b.len() != q {
                return Err(shape_err(format!("linear bias has {} entries, expected {q}", b.len())));
            }
        }
        let value = kernels::linear_forward(
            &table(x.dim),
            self.val(x),
            self.val(w),
            bias.map(|b| self.val(b)),
            x.batch,
            p,
            q,
        );
        Ok(self.push(
            x.batch,
            q,
            x.dim,
            value,
            Op::Linear {
                x: x.id,
                w: w.id,
                bias: bias.map(|b| b.id),
            },
        ))
    }

    /// Weighted grade-pair geometric product of `x` with `z` (same shape).
    pub fn gp_layer(
        &mut self,
        x: MvTensor,
        z: MvTensor,
        w: MvTensor,
        q: usize,
        fully_connected: bool,
    ) -> Result<MvTensor> {
        if !x.same_shape(&z) {
            return Err(shape_err(format!("geometric product layer: {x:?} vs {z:?}")));
        }
        let p = x.channels;
        let k = x.dim + 1;
        let expected = if fully_connected {
            q * p * k * k * k
        } else {
            if q != p {
                return Err(shape_err(format!(
                    "plain geometric product layer must be square, got {p} → {q}"
                )));
            }
            p * k * k * k
        };
        if w.len() != expected {
            return Err(shape_err(format!(
                "geometric product weights have {} entries, expected {expected}",
                w.len()
            )));
        }
        let value = kernels::gp_layer_forward(
            &table(x.dim),
            self.val(x),
            self.val(z),
            self.val(w),
            x.batch,
            p,
            q,
            fully_connected,
        );
        Ok(self.push(
            x.batch,
            q,
            x.dim,
            value,
            Op::GpLayer {
                x: x.id,
                z: z.id,
                w: w.id,
                fully_connected,
            },
        ))
    }

    /// Per-grade normalization with learnable `φ[c·(n+1) + m]`.
    pub fn normalize(&mut self, x: MvTensor, phi: MvTensor) -> Result<MvTensor> {
        if phi.len() != x.channels * (x.dim + 1) {
            return Err(shape_err(format!(
                "normalization parameters have {} entries, expected {}",
                phi.len(),
                x.channels * (x.dim + 1)
            )));
        }
        let value = kernels::norm_forward(&table(x.dim), self.val(x), self.val(phi), x.channels);
        Ok(self.push(x.batch, x.channels, x.dim, value, Op::Norm { x: x.id, phi: phi.id }))
    }

    /// Parameter-free gated activation (ReLU on grade 0, `σ(q)` gates above).
    pub fn activation(&mut self, x: MvTensor) -> MvTensor {
        let value = kernels::activation_forward(&table(x.dim), self.val(x));
        self.push(x.batch, x.channels, x.dim, value, Op::Activation { x: x.id })
    }

    /// Elementwise nonlinearity on every stored coefficient.
    pub fn nonlin(&mut self, x: MvTensor, kind: Nonlinearity) -> MvTensor {
        let value = self
            .val(x)
            .iter()
            .map(|&v| match kind {
                Nonlinearity::Relu => v.max(0.0),
                Nonlinearity::Sigmoid => sigmoid(v),
            })
            .collect();
        self.push(x.batch, x.channels, x.dim, value, Op::Elementwise { x: x.id, kind })
    }

    /// Concatenates along channels.
    pub fn concat(&mut self, inputs: &[MvTensor]) -> Result<MvTensor> {
        let first = *inputs
            .first()
            .ok_or_else(|| shape_err("concat of zero tensors".into()))?;
        for t in inputs {
            if t.batch != first.batch || t.dim != first.dim {
                return Err(shape_err(format!("concat: {first:?} vs {t:?}")));
            }
        }
        let channels: usize = inputs.iter().map(|t| t.channels).sum();
        let mut value = Vec::with_capacity(first.batch * (channels << first.dim));
        for b in 0..first.batch {
            for t in inputs {
                let w = t.width();
                value.extend_from_slice(&self.val(*t)[b * w..(b + 1) * w]);
            }
        }
        Ok(self.push(
            first.batch,
            channels,
            first.dim,
            value,
            Op::Concat {
                inputs: inputs.iter().map(|t| t.id).collect(),
            },
        ))
    }

    /// Row `r` of the output is row `index[r]` of `x`.
    pub fn gather(&mut self, x: MvTensor, index: Arc<Vec<usize>>) -> Result<MvTensor> {
        let w = x.width();
        if let Some(&bad) = index.iter().find(|&&i| i >= x.batch) {
            return Err(shape_err(format!("gather index {bad} out of range {}", x.batch)));
        }
        let src = self.val(x);
        let mut value = Vec::with_capacity(index.len() * w);
        for &i in index.iter() {
            value.extend_from_slice(&src[i * w..(i + 1) * w]);
        }
        Ok(self.push(index.len(), x.channels, x.dim, value, Op::Gather { x: x.id, index }))
    }

    /// Output row `j` is the sum of the rows `r` of `x` with `segment[r] == j`.
    pub fn segment_sum(&mut self, x: MvTensor, segment: Arc<Vec<usize>>, segments: usize) -> Result<MvTensor> {
        if segment.len() != x.batch {
            return Err(shape_err(format!(
                "segment ids have {} entries for batch {}",
                segment.len(),
                x.batch
            )));
        }
        if let Some(&bad) = segment.iter().find(|&&j| j >= segments) {
            return Err(shape_err(format!("segment id {bad} out of range {segments}")));
        }
        let w = x.width();
        let src = self.val(x);
        let mut value = vec![0.0; segments * w];
        for (r, &j) in segment.iter().enumerate() {
            let dst = &mut value[j * w..(j + 1) * w];
            for (d, s) in dst.iter_mut().zip(&src[r * w..(r + 1) * w]) {
                *d += s;
            }
        }
        Ok(self.push(segments, x.channels, x.dim, value, Op::SegmentSum { x: x.id, segment }))
    }

    /// Extracts the listed blades of every channel as a real (`dim = 0`)
    /// tensor with `channels · blades.len()` columns.
    pub fn select_blades(&mut self, x: MvTensor, blades: &[usize]) -> Result<MvTensor> {
        let s = x.blades();
        if let Some(&bad) = blades.iter().find(|&&b| b >= s) {
            return Err(shape_err(format!("blade {bad} out of range {s}")));
        }
        let src = self.val(x);
        let mut value = Vec::with_capacity(x.batch * x.channels * blades.len());
        for row in src.chunks(s) {
            value.extend(blades.iter().map(|&b| row[b]));
        }
        Ok(self.push(
            x.batch,
            x.channels * blades.len(),
            0,
            value,
            Op::SelectBlades {
                x: x.id,
                blades: blades.to_vec(),
            },
        ))
    }

    /// Scales each row of `x` by the matching entry of the `(batch, 1, 0)` tensor `s`.
    pub fn mul_rows(&mut self, x: MvTensor, s: MvTensor) -> Result<MvTensor> {
        if s.batch != x.batch || s.width() != 1 {
            return Err(shape_err(format!("mul_rows: {x:?} by {s:?}")));
        }
        let w = x.width();
        let sv = self.val(s);
        let value = self
            .val(x)
            .iter()
            .enumerate()
            .map(|(i, &v)| v * sv[i / w])
            .collect();
        Ok(self.push(x.batch, x.channels, x.dim, value, Op::MulRows { x: x.id, s: s.id }))
    }

    /// Sum of squares of each row, shape `(batch, 1, 0)`.
    pub fn row_sq_norm(&mut self, x: MvTensor) -> MvTensor {
        let w = x.width();
        let value = self
            .val(x)
            .chunks(w.max(1))
            .map(|r| r.iter().map(|v| v * v).sum())
            .collect();
        self.push(x.batch, 1, 0, value, Op::RowSqNorm { x: x.id })
    }

    /// Mean squared error over all entries, a single scalar.
    pub fn mse(&mut self, a: MvTensor, b: MvTensor) -> Result<MvTensor> {
        if !a.same_shape(&b) {
            return Err(shape_err(format!("mse: {a:?} vs {b:?}")));
        }
        if a.is_empty() {
            return Err(shape_err("mse of empty tensors".into()));
        }
        let n = a.len() as f64;
        let v = self
            .val(a)
            .iter()
            .zip(self.val(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / n;
        Ok(self.push(1, 1, 0, vec![v], Op::Mse { a: a.id, b: b.id }))
    }

    /// `Σ_i weights[i] · x[i]`, a single scalar.
    pub fn weighted_sum(&mut self, x: MvTensor, weights: Vec<f64>) -> Result<MvTensor> {
        if weights.len() != x.len() {
            return Err(shape_err(format!(
                "weighted sum with {} weights over {} values",
                weights.len(),
                x.len()
            )));
        }
        let v = self.val(x).iter().zip(&weights).map(|(a, b)| a * b).sum();
        Ok(self.push(1, 1, 0, vec![v], Op::WeightedSum { x: x.id, weights }))
    }

    /// Reverse pass from a single-valued `loss`.
    pub fn backward(&self, loss: MvTensor) -> Result<Gradients> {
        if loss.len() != 1 {
            return Err(shape_err(format!("loss must be a single value, got {loss:?}")));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.id] = Some(vec![1.0]);
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        let params = self
            .nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Param { offset } => Some((n.tensor.id, offset)),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads, params })
    }

    fn propagate(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[id];
        let out = node.tensor;
        match &node.op {
            Op::Constant | Op::Param { .. } => {}
            Op::Add { a, b, broadcast } | Op::Sub { a, b, broadcast } => {
                let sign = if matches!(node.op, Op::Sub { .. }) { -1.0 } else { 1.0 };
                add_into(slot(grads, &self.nodes[*a]), g, 1.0);
                let gb = slot(grads, &self.nodes[*b]);
                if *broadcast {
                    let w = out.width();
                    for (i, v) in g.iter().enumerate() {
                        gb[i % w] += sign * v;
                    }
                } else {
                    add_into(gb, g, sign);
                }
            }
            Op::Scale { x, c } => add_into(slot(grads, &self.nodes[*x]), g, *c),
            Op::GeometricProduct { a, b } => {
                let t = table(out.dim);
                let (av, bv) = (&self.nodes[*a].value, &self.nodes[*b].value);
                let mut ga = vec![0.0; av.len()];
                let mut gb = vec![0.0; bv.len()];
                kernels::geometric_product_backward(&t, av, bv, g, &mut ga, &mut gb);
                add_into(slot(grads, &self.nodes[*a]), &ga, 1.0);
                add_into(slot(grads, &self.nodes[*b]), &gb, 1.0);
            }
            Op::GradeScale { x, w } => {
                let t = table(out.dim);
                let s = out.blades();
                let k = out.dim + 1;
                let (xv, wv) = (&self.nodes[*x].value, &self.nodes[*w].value);
                {
                    let gx = slot(grads, &self.nodes[*x]);
                    for (i, v) in g.iter().enumerate() {
                        let c = (i / s) % out.channels;
                        gx[i] += v * wv[c * k + t.grade(i % s)];
                    }
                }
                let gw = slot(grads, &self.nodes[*w]);
                for (i, v) in g.iter().enumerate() {
                    let c = (i / s) % out.channels;
                    gw[c * k + t.grade(i % s)] += v * xv[i];
                }
            }
            Op::GradeMask { x, grade } => {
                let s = out.blades();
                let gx = slot(grads, &self.nodes[*x]);
                for (i, v) in g.iter().enumerate() {
                    if (i % s).count_ones() as usize == *grade {
                        gx[i] += v;
                    }
                }
            }
            Op::Linear { x, w, bias } => {
                let t = table(out.dim);
                let xn = &self.nodes[*x];
                let wn = &self.nodes[*w];
                let p = xn.tensor.channels;
                let mut gx = vec![0.0; xn.value.len()];
                let mut gw = vec![0.0; wn.value.len()];
                let mut gb = bias.map(|b| vec![0.0; self.nodes[b].value.len()]);
                kernels::linear_backward(
                    &t,
                    &xn.value,
                    &wn.value,
                    g,
                    out.batch,
                    p,
                    out.channels,
                    Some(&mut gx),
                    Some(&mut gw),
                    gb.as_deref_mut(),
                );
                add_into(slot(grads, xn), &gx, 1.0);
                add_into(slot(grads, wn), &gw, 1.0);
                if let (Some(b), Some(gb)) = (bias, gb) {
                    add_into(slot(grads, &self.nodes[*b]), &gb, 1.0);
                }
            }
            Op::GpLayer {
                x,
                z,
                w,
                fully_connected,
            } => {
                let t = table(out.dim);
                let (xn, zn, wn) = (&self.nodes[*x], &self.nodes[*z], &self.nodes[*w]);
                let mut gx = vec![0.0; xn.value.len()];
                let mut gz = vec![0.0; zn.value.len()];
                let mut gw = vec![0.0; wn.value.len()];
                kernels::gp_layer_backward(
                    &t,
                    &xn.value,
                    &zn.value,
                    &wn.value,
                    g,
                    out.batch,
                    xn.tensor.channels,
                    out.channels,
                    *fully_connected,
                    &mut gx,
                    &mut gz,
                    Some(&mut gw),
                );
                add_into(slot(grads, xn), &gx, 1.0);
                add_into(slot(grads, zn), &gz, 1.0);
                add_into(slot(grads, wn), &gw, 1.0);
            }
            Op::Norm { x, phi } => {
                let t = table(out.dim);
                let (xn, pn) = (&self.nodes[*x], &self.nodes[*phi]);
                let mut gx = vec![0.0; xn.value.len()];
                let mut gp = vec![0.0; pn.value.len()];
                kernels::norm_backward(
                    &t,
                    &xn.value,
                    &pn.value,
                    out.channels,
                    g,
                    Some(&mut gx),
                    Some(&mut gp),
                );
                add_into(slot(grads, xn), &gx, 1.0);
                add_into(slot(grads, pn), &gp, 1.0);
            }
            Op::Activation { x } => {
                let t = table(out.dim);
                let xn = &self.nodes[*x];
                let mut gx = vec![0.0; xn.value.len()];
                kernels::activation_backward(&t, &xn.value, g, &mut gx);
                add_into(slot(grads, xn), &gx, 1.0);
            }
            Op::Elementwise { x, kind } => {
                let xn = &self.nodes[*x];
                let xv = &xn.value;
                let yv = &node.value;
                let gx = slot(grads, xn);
                for i in 0..g.len() {
                    gx[i] += match kind {
                        Nonlinearity::Relu => {
                            if xv[i] > 0.0 {
                                g[i]
                            } else {
                                0.0
                            }
                        }
                        Nonlinearity::Sigmoid => g[i] * yv[i] * (1.0 - yv[i]),
                    };
                }
            }
            Op::Concat { inputs } => {
                let mut col = 0;
                let total = out.width();
                for &inp in inputs {
                    let n = &self.nodes[inp];
                    let w = n.tensor.width();
                    let gi = slot(grads, n);
                    for b in 0..out.batch {
                        let src = &g[b * total + col..b * total + col + w];
                        for (d, s) in gi[b * w..(b + 1) * w].iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                    col += w;
                }
            }
            Op::Gather { x, index } => {
                let w = out.width();
                let gx = slot(grads, &self.nodes[*x]);
                for (r, &i) in index.iter().enumerate() {
                    for (d, s) in gx[i * w..(i + 1) * w].iter_mut().zip(&g[r * w..(r + 1) * w]) {
                        *d += s;
                    }
                }
            }
            Op::SegmentSum { x, segment } => {
                let w = out.width();
                let gx = slot(grads, &self.nodes[*x]);
                for (r, &j) in segment.iter().enumerate() {
                    for (d, s) in gx[r * w..(r + 1) * w].iter_mut().zip(&g[j * w..(j + 1) * w]) {
                        *d += s;
                    }
                }
            }
            Op::SelectBlades { x, blades } => {
                let xn = &self.nodes[*x];
                let s = xn.tensor.blades();
                let gx = slot(grads, xn);
                for (row, gr) in g.chunks(blades.len()).enumerate() {
                    for (&b, &v) in blades.iter().zip(gr) {
                        gx[row * s + b] += v;
                    }
                }
            }
            Op::MulRows { x, s } => {
                let w = out.width();
                let (xn, sn) = (&self.nodes[*x], &self.nodes[*s]);
                let (xv, sv) = (&xn.value, &sn.value);
                {
                    let gx = slot(grads, xn);
                    for i in 0..g.len() {
                        gx[i] += g[i] * sv[i / w];
                    }
                }
                let gs = slot(grads, sn);
                for i in 0..g.len() {
                    gs[i / w] += g[i] * xv[i];
                }
            }
            Op::RowSqNorm { x } => {
                let xn = &self.nodes[*x];
                let w = xn.tensor.width();
                let xv = &xn.value;
                let gx = slot(grads, xn);
                for i in 0..xv.len() {
                    gx[i] += 2.0 * xv[i] * g[i / w];
                }
            }
            Op::Mse { a, b } => {
                let (an, bn) = (&self.nodes[*a], &self.nodes[*b]);
                let n = an.value.len() as f64;
                let diff: Vec<f64> = an
                    .value
                    .iter()
                    .zip(&bn.value)
                    .map(|(x, y)| 2.0 * (x - y) / n * g[0])
                    .collect();
                add_into(slot(grads, an), &diff, 1.0);
                add_into(slot(grads, bn), &diff, -1.0);
            }
            Op::WeightedSum { x, weights } => {
                add_into(slot(grads, &self.nodes[*x]), weights, g[0]);
            }
        }
    }
}

fn slot<'a>(grads: &'a mut [Option<Vec<f64>>], node: &Node) -> &'a mut Vec<f64> {
    grads[node.tensor.id].get_or_insert_with(|| vec![0.0; node.value.len()])
}

fn add_into(dst: &mut [f64], src: &[f64], c: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += c * s;
    }
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient with respect to `t`; `None` if `t` does not influence the loss.
    pub fn get(&self, t: MvTensor) -> Option<&[f64]> {
        self.grads.get(t.id).and_then(|g| g.as_deref())
    }

    /// Gradient with respect to `t`, zeros if unreachable.
    pub fn get_or_zero(&self, t: MvTensor) -> Vec<f64> {
        self.get(t).map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec)
    }

    /// Flat gradient in the layout of `store`, summed over repeated
    /// registrations of the same parameter.
    pub fn param_grads(&self, store: &ParamStore) -> Vec<f64> {
        let mut out = vec![0.0; store.len()];
        for &(node, offset) in &self.params {
            if let Some(g) = &self.grads[node] {
                for (d, s) in out[offset..offset + g.len()].iter_mut().zip(g) {
                    *d += s;
                }
            }
        }
        out
    }
}
