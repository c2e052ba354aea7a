//! Reference models on plain real vectors: an ordinary message-passing
//! network (not rotation aware) and an E(n)-equivariant network that only
//! exchanges invariants and relative positions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{MvTensor, Nonlinearity, Tape};
use crate::error::{Error, Result};
use crate::layers::LinearLayer;
use crate::model::{check_graph_layout, BatchOptions, GraphBatch, GraphModel, Head, ModelConfig, ModelKind, PairMode};
use crate::params::ParamStore;

/// Dense network `in → hidden → hidden → out` with ReLU between layers.
#[derive(Clone, Debug)]
pub struct DenseMlp {
    layers: Vec<LinearLayer>,
}

impl DenseMlp {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        output: usize,
        rng: &mut R,
    ) -> Self {
        let widths = [input, hidden, hidden, output];
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                LinearLayer::with_bound(store, &format!("{name}.{i}"), 0, w[0], w[1], true, bound, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[LinearLayer] {
        &self.layers
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: MvTensor) -> Result<MvTensor> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                h = tape.nonlin(h, Nonlinearity::Relu);
            }
            h = layer.forward(tape, store, h)?;
        }
        Ok(h)
    }
}

fn check_kind(config: &ModelConfig, kind: ModelKind) -> Result<()> {
    config.validate()?;
    if config.kind != kind {
        return Err(Error::Config(format!("expected a {kind} config, got {}", config.kind)));
    }
    Ok(())
}

fn pooled_or_nodes(tape: &mut Tape, batch: &GraphBatch, per_node: MvTensor) -> Result<MvTensor> {
    tape.segment_sum(per_node, batch.node_graph.clone(), batch.graphs)
}

/// Message passing on raw coordinates:
/// `m_ij = φ_m(h_i, h_j, e_ij)`, `h_i ← φ_h(h_i, Σ_j m_ij)`.
#[derive(Clone, Debug)]
pub struct Gnn {
    config: ModelConfig,
    store: ParamStore,
    embed: DenseMlp,
    layers: Vec<(DenseMlp, DenseMlp)>,
    head: DenseMlp,
}

impl Gnn {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        check_kind(&config, ModelKind::Gnn)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let hd = config.hidden;
        let input = config.dim * (1 + config.vector_features) + config.scalar_features;
        let embed = DenseMlp::new(&mut store, "embed", input, hd, hd, &mut rng);
        let layers = (0..config.layers)
            .map(|l| {
                let m = DenseMlp::new(
                    &mut store,
                    &format!("layer{l}.message"),
                    2 * hd + config.edge_attr_dim,
                    hd,
                    hd,
                    &mut rng,
                );
                let u = DenseMlp::new(&mut store, &format!("layer{l}.update"), 2 * hd, hd, hd, &mut rng);
                (m, u)
            })
            .collect();
        let out = match config.head {
            Head::Vector => config.dim,
            Head::Scalar => 1,
        };
        let head = DenseMlp::new(&mut store, "head", hd, hd, out, &mut rng);
        Ok(Self {
            config,
            store,
            embed,
            layers,
            head,
        })
    }
}

impl GraphModel for Gnn {
    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn batch_options(&self) -> BatchOptions {
        BatchOptions {
            hops: 1,
            orders: Vec::new(),
            max_subsets_per_node: self.config.max_subsets_per_node,
            pairs: PairMode::Edges,
        }
    }

    fn forward(&self, tape: &mut Tape, batch: &GraphBatch) -> Result<MvTensor> {
        check_graph_layout(&self.config, batch)?;
        let n = batch.dim;
        let (r, s) = (batch.vector_count, batch.scalar_count);
        let width = n * (1 + r) + s;
        let mut data = Vec::with_capacity(batch.nodes * width);
        for i in 0..batch.nodes {
            data.extend_from_slice(&batch.positions[i * n..(i + 1) * n]);
            data.extend_from_slice(&batch.vector_features[i * r * n..(i + 1) * r * n]);
            data.extend_from_slice(&batch.scalar_features[i * s..(i + 1) * s]);
        }
        let x = tape.constant(batch.nodes, width, 0, data)?;
        let mut h = self.embed.forward(tape, &self.store, x)?;
        let pairs = batch
            .pairs
            .as_ref()
            .ok_or_else(|| Error::Graph("batch built without edge pairs".into()))?;
        let attrs = if self.config.edge_attr_dim > 0 && !pairs.is_empty() {
            Some(tape.constant(pairs.len(), self.config.edge_attr_dim, 0, pairs.attrs.clone())?)
        } else {
            None
        };
        for (message, update) in &self.layers {
            let agg = if pairs.is_empty() {
                tape.zeros(batch.nodes, self.config.hidden, 0)?
            } else {
                let hi = tape.gather(h, pairs.receivers.clone())?;
                let hj = tape.gather(h, pairs.senders.clone())?;
                let input = match attrs {
                    Some(a) => tape.concat(&[hi, hj, a])?,
                    None => tape.concat(&[hi, hj])?,
                };
                let m = message.forward(tape, &self.store, input)?;
                tape.segment_sum(m, pairs.receivers.clone(), batch.nodes)?
            };
            let joined = tape.concat(&[h, agg])?;
            h = update.forward(tape, &self.store, joined)?;
        }
        let y = self.head.forward(tape, &self.store, h)?;
        match self.config.head {
            Head::Vector => {
                let x0 = tape.constant(batch.nodes, n, 0, batch.positions.clone())?;
                tape.add(x0, y)
            }
            Head::Scalar => pooled_or_nodes(tape, batch, y),
        }
    }
}

/// E(n)-equivariant message passing on invariant node features and relative
/// positions:
/// `m_ij = φ_m(h_i, h_j, ‖x_i − x_j‖², e_ij)`,
/// `x_i ← x_i + (M−1)⁻¹ Σ_{j≠i} (x_i − x_j) φ_x(m_ij)`,
/// `h_i ← φ_h(h_i, Σ_{j∈N(i)} m_ij)`.
#[derive(Clone, Debug)]
pub struct Egnn {
    config: ModelConfig,
    store: ParamStore,
    embed: DenseMlp,
    layers: Vec<EgnnLayer>,
    head: Option<DenseMlp>,
}

#[derive(Clone, Debug)]
struct EgnnLayer {
    message: DenseMlp,
    coord: DenseMlp,
    update: DenseMlp,
}

impl Egnn {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        check_kind(&config, ModelKind::Egnn)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let hd = config.hidden;
        let invariants = (config.vector_features + config.scalar_features).max(1);
        let embed = DenseMlp::new(&mut store, "embed", invariants, hd, hd, &mut rng);
        let layers = (0..config.layers)
            .map(|l| EgnnLayer {
                message: DenseMlp::new(
                    &mut store,
                    &format!("layer{l}.message"),
                    2 * hd + 1 + config.edge_attr_dim,
                    hd,
                    hd,
                    &mut rng,
                ),
                coord: DenseMlp::new(&mut store, &format!("layer{l}.coord"), hd, hd, 1, &mut rng),
                update: DenseMlp::new(&mut store, &format!("layer{l}.update"), 2 * hd, hd, hd, &mut rng),
            })
            .collect();
        let head = (config.head == Head::Scalar).then(|| DenseMlp::new(&mut store, "head", hd, hd, 1, &mut rng));
        Ok(Self {
            config,
            store,
            embed,
            layers,
            head,
        })
    }
}

impl GraphModel for Egnn {
    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn batch_options(&self) -> BatchOptions {
        BatchOptions {
            hops: 1,
            orders: Vec::new(),
            max_subsets_per_node: self.config.max_subsets_per_node,
            pairs: PairMode::All,
        }
    }

    fn forward(&self, tape: &mut Tape, batch: &GraphBatch) -> Result<MvTensor> {
        check_graph_layout(&self.config, batch)?;
        let n = batch.dim;
        if let Some(&m) = batch.node_graph_size.iter().find(|&&m| m < 2) {
            return Err(Error::Graph(format!(
                "equivariant baseline needs at least 2 nodes per graph, got {m}"
            )));
        }
        let (r, s) = (batch.vector_count, batch.scalar_count);
        let width = (r + s).max(1);
        let mut data = Vec::with_capacity(batch.nodes * width);
        for i in 0..batch.nodes {
            if r + s == 0 {
                data.push(1.0);
            }
            for v in 0..r {
                let vec = &batch.vector_features[(i * r + v) * n..(i * r + v + 1) * n];
                data.push(vec.iter().map(|c| c * c).sum());
            }
            data.extend_from_slice(&batch.scalar_features[i * s..(i + 1) * s]);
        }
        let inv = tape.constant(batch.nodes, width, 0, data)?;
        let mut h = self.embed.forward(tape, &self.store, inv)?;
        let mut x = tape.constant(batch.nodes, n, 0, batch.positions.clone())?;
        let pairs = batch
            .pairs
            .as_ref()
            .ok_or_else(|| Error::Graph("batch built without node pairs".into()))?;
        let inv_count: Vec<f64> = batch
            .node_graph_size
            .iter()
            .map(|&m| 1.0 / (m - 1) as f64)
            .collect();
        let inv_count = tape.constant(batch.nodes, 1, 0, inv_count)?;
        let mask = tape.constant(pairs.len(), 1, 0, pairs.edge_mask.clone())?;
        let attrs = if self.config.edge_attr_dim > 0 {
            Some(tape.constant(pairs.len(), self.config.edge_attr_dim, 0, pairs.attrs.clone())?)
        } else {
            None
        };
        for layer in &self.layers {
            let xi = tape.gather(x, pairs.receivers.clone())?;
            let xj = tape.gather(x, pairs.senders.clone())?;
            let rel = tape.sub(xi, xj)?;
            let dist = tape.row_sq_norm(rel);
            let hi = tape.gather(h, pairs.receivers.clone())?;
            let hj = tape.gather(h, pairs.senders.clone())?;
            let input = match attrs {
                Some(a) => tape.concat(&[hi, hj, dist, a])?,
                None => tape.concat(&[hi, hj, dist])?,
            };
            let m = layer.message.forward(tape, &self.store, input)?;
            let weight = layer.coord.forward(tape, &self.store, m)?;
            let shift = tape.mul_rows(rel, weight)?;
            let shift = tape.segment_sum(shift, pairs.receivers.clone(), batch.nodes)?;
            let shift = tape.mul_rows(shift, inv_count)?;
            x = tape.add(x, shift)?;
            let masked = tape.mul_rows(m, mask)?;
            let agg = tape.segment_sum(masked, pairs.receivers.clone(), batch.nodes)?;
            let joined = tape.concat(&[h, agg])?;
            h = layer.update.forward(tape, &self.store, joined)?;
        }
        match &self.head {
            None => Ok(x),
            Some(head) => {
                let y = head.forward(tape, &self.store, h)?;
                pooled_or_nodes(tape, batch, y)
            }
        }
    }
}
