//! Model configuration, batched graph preprocessing and the common model
//! interface shared by the Clifford network and the baselines.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::autodiff::{MvTensor, Tape};
use crate::baselines::{Egnn, Gnn};
use crate::cgegnn::CgEgnn;
use crate::error::{Error, Result};
use crate::geograph::{enumerate_subsets, k_hop, GeometricGraph};
use crate::kv::KeyValues;
use crate::params::ParamStore;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Cgegnn,
    Gnn,
    Egnn,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Cgegnn => "cgegnn",
            ModelKind::Gnn => "gnn",
            ModelKind::Egnn => "egnn",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cgegnn" => Ok(ModelKind::Cgegnn),
            "gnn" => Ok(ModelKind::Gnn),
            "egnn" => Ok(ModelKind::Egnn),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

/// What the model predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Head {
    /// One position per node.
    Vector,
    /// One number per graph (sum over nodes).
    Scalar,
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Head::Vector => "vector",
            Head::Scalar => "scalar",
        })
    }
}

impl FromStr for Head {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vector" => Ok(Head::Vector),
            "scalar" => Ok(Head::Scalar),
            other => Err(Error::Config(format!("unknown head `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Space dimension `n`.
    pub dim: usize,
    /// Multivector channels per node (Clifford model).
    pub channels: usize,
    /// Hidden width of the dense baselines.
    pub hidden: usize,
    pub layers: usize,
    /// Highest message order `D`.
    pub max_order: usize,
    /// Message orders actually used, a subset of `1..=max_order`.
    pub orders: Vec<usize>,
    pub hops: usize,
    pub vector_features: usize,
    pub scalar_features: usize,
    pub edge_attr_dim: usize,
    pub head: Head,
    /// Repetitions of the linear / product / norm / activation block inside
    /// every internal Clifford network.
    pub mlp_blocks: usize,
    pub fully_connected: bool,
    pub max_subsets_per_node: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Cgegnn,
            dim: 3,
            channels: 8,
            hidden: 64,
            layers: 4,
            max_order: 1,
            orders: vec![1],
            hops: 1,
            vector_features: 0,
            scalar_features: 0,
            edge_attr_dim: 0,
            head: Head::Vector,
            mlp_blocks: 2,
            fully_connected: true,
            max_subsets_per_node: 10_000,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(1..=crate::clifford::MAX_DIM).contains(&self.dim) {
            return Err(Error::DimensionUnsupported(self.dim));
        }
        if self.layers < 1 {
            return fail("layers must be at least 1".into());
        }
        if self.channels < 1 || self.hidden < 1 {
            return fail("channel widths must be at least 1".into());
        }
        if self.hops < 1 {
            return fail("hop radius must be at least 1".into());
        }
        if self.max_order < 1 {
            return fail("highest message order must be at least 1".into());
        }
        if self.orders.is_empty() {
            return fail("at least one message order is required".into());
        }
        let mut seen = BTreeSet::new();
        for &d in &self.orders {
            if d < 1 || d > self.max_order {
                return fail(format!("message order {d} outside 1..={}", self.max_order));
            }
            if !seen.insert(d) {
                return fail(format!("message order {d} repeated"));
            }
        }
        if self.max_subsets_per_node < 1 {
            return fail("max_subsets_per_node must be at least 1".into());
        }
        if self.kind != ModelKind::Cgegnn && self.orders != [1] {
            return fail(format!("{} supports only first-order messages", self.kind));
        }
        Ok(())
    }

    /// Human-readable label, e.g. `CG-EGNN-1-2`.
    pub fn label(&self) -> String {
        match self.kind {
            ModelKind::Cgegnn => {
                let orders: Vec<String> = self.orders.iter().map(usize::to_string).collect();
                format!("CG-EGNN-{}", orders.join("-"))
            }
            ModelKind::Gnn => "GNN".into(),
            ModelKind::Egnn => "EGNN".into(),
        }
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("model", self.kind);
        kv.set("dim", self.dim);
        kv.set("channels", self.channels);
        kv.set("hidden", self.hidden);
        kv.set("layers", self.layers);
        kv.set("max_order", self.max_order);
        let orders: Vec<String> = self.orders.iter().map(usize::to_string).collect();
        kv.set("orders", orders.join(","));
        kv.set("hops", self.hops);
        kv.set("vector_features", self.vector_features);
        kv.set("scalar_features", self.scalar_features);
        kv.set("edge_attr_dim", self.edge_attr_dim);
        kv.set("head", self.head);
        kv.set("mlp_blocks", self.mlp_blocks);
        kv.set("fully_connected", self.fully_connected);
        kv.set("max_subsets_per_node", self.max_subsets_per_node);
        kv
    }

    /// Reads every model key present in `kv`, defaulting the rest. When
    /// `orders` is given without `max_order`, the latter is their maximum.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = ModelConfig::default();
        let orders = kv.list::<usize>("orders")?.unwrap_or(d.orders.clone());
        let max_order = kv.parsed("max_order")?.unwrap_or_else(|| orders.iter().copied().max().unwrap_or(1));
        let cfg = ModelConfig {
            kind: kv.parsed_or("model", d.kind)?,
            dim: kv.parsed_or("dim", d.dim)?,
            channels: kv.parsed_or("channels", d.channels)?,
            hidden: kv.parsed_or("hidden", d.hidden)?,
            layers: kv.parsed_or("layers", d.layers)?,
            max_order,
            orders,
            hops: kv.parsed_or("hops", d.hops)?,
            vector_features: kv.parsed_or("vector_features", d.vector_features)?,
            scalar_features: kv.parsed_or("scalar_features", d.scalar_features)?,
            edge_attr_dim: kv.parsed_or("edge_attr_dim", d.edge_attr_dim)?,
            head: kv.parsed_or("head", d.head)?,
            mlp_blocks: kv.parsed_or("mlp_blocks", d.mlp_blocks)?,
            fully_connected: kv.parsed_or("fully_connected", d.fully_connected)?,
            max_subsets_per_node: kv.parsed_or("max_subsets_per_node", d.max_subsets_per_node)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Which node pairs a model exchanges first-order messages over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairMode {
    None,
    /// Both directions of every graph edge.
    Edges,
    /// Every ordered pair of distinct nodes in the same graph.
    All,
}

/// Preprocessing a model needs from a batch of graphs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchOptions {
    pub hops: usize,
    pub orders: Vec<usize>,
    pub max_subsets_per_node: usize,
    pub pairs: PairMode,
}

/// Rows of one message order: each row is a receiver and a subset of its
/// neighborhood.
#[derive(Clone, Debug)]
pub struct SubsetIndex {
    pub order: usize,
    pub rows: usize,
    pub receivers: Arc<Vec<usize>>,
    /// Node id of every subset member, flattened over rows.
    pub members: Arc<Vec<usize>>,
    /// Row of every entry of `members`.
    pub member_rows: Arc<Vec<usize>>,
    /// Mean edge attribute of each row (`rows × edge_attr_dim`).
    pub attrs: Vec<f64>,
}

/// Ordered node pairs `(receiver, sender)`.
#[derive(Clone, Debug)]
pub struct PairIndex {
    pub receivers: Arc<Vec<usize>>,
    pub senders: Arc<Vec<usize>>,
    /// `pairs × edge_attr_dim`, zero where no edge exists.
    pub attrs: Vec<f64>,
    /// 1 where the pair is an edge of the graph.
    pub edge_mask: Vec<f64>,
}

impl PairIndex {
    pub fn len(&self) -> usize {
        self.receivers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.receivers.is_empty()
    }
}

/// Several graphs stacked node-wise with precomputed message indices.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub dim: usize,
    pub nodes: usize,
    pub graphs: usize,
    pub node_graph: Arc<Vec<usize>>,
    /// Node count of the graph each node belongs to.
    pub node_graph_size: Vec<usize>,
    pub positions: Vec<f64>,
    /// Positions minus their per-graph mean.
    pub centered: Vec<f64>,
    pub vector_count: usize,
    pub vector_features: Vec<f64>,
    pub scalar_count: usize,
    pub scalar_features: Vec<f64>,
    pub edge_attr_dim: usize,
    pub subsets: Vec<SubsetIndex>,
    pub pairs: Option<PairIndex>,
}

static SUBSET_CAP_WARNED: AtomicBool = AtomicBool::new(false);

impl GraphBatch {
    pub fn new(graphs: &[&GeometricGraph], opts: &BatchOptions) -> Result<Self> {
        let first = graphs
            .first()
            .ok_or_else(|| Error::Graph("empty batch".into()))?;
        let dim = first.dim();
        let (r, s, e) = (first.vector_count(), first.scalar_count(), first.edge_attr_dim());
        for g in graphs {
            if g.dim() != dim || g.vector_count() != r || g.scalar_count() != s || g.edge_attr_dim() != e {
                return Err(Error::Shape("graphs in a batch must share feature layout".into()));
            }
            if g.node_count() == 0 {
                return Err(Error::Graph("graph without nodes".into()));
            }
        }
        let mut b = GraphBatch {
            dim,
            nodes: 0,
            graphs: graphs.len(),
            node_graph: Arc::new(Vec::new()),
            node_graph_size: Vec::new(),
            positions: Vec::new(),
            centered: Vec::new(),
            vector_count: r,
            vector_features: Vec::new(),
            scalar_count: s,
            scalar_features: Vec::new(),
            edge_attr_dim: e,
            subsets: Vec::new(),
            pairs: None,
        };
        let mut node_graph = Vec::new();
        let mut subset_parts: Vec<(Vec<usize>, Vec<usize>, Vec<usize>, Vec<f64>)> =
            vec![Default::default(); opts.orders.len()];
        let mut pair_parts: (Vec<usize>, Vec<usize>, Vec<f64>, Vec<f64>) = Default::default();
        for (gi, g) in graphs.iter().enumerate() {
            let offset = b.nodes;
            let m = g.node_count();
            let mut mean = vec![0.0; dim];
            for i in 0..m {
                for (a, x) in mean.iter_mut().zip(g.position(i)) {
                    *a += x;
                }
            }
            mean.iter_mut().for_each(|a| *a /= m as f64);
            for i in 0..m {
                b.positions.extend_from_slice(g.position(i));
                b.centered.extend(g.position(i).iter().zip(&mean).map(|(x, c)| x - c));
                node_graph.push(gi);
                b.node_graph_size.push(m);
            }
            b.vector_features.extend_from_slice(g.vector_features());
            b.scalar_features.extend_from_slice(g.scalar_features());

            if !opts.orders.is_empty() {
                let neigh = k_hop(g, opts.hops)?;
                for (slot, &d) in opts.orders.iter().enumerate() {
                    let (recv, members, member_rows, attrs) = &mut subset_parts[slot];
                    for i in 0..m {
                        let mut count = 0;
                        for subset in enumerate_subsets(neigh.neighbors(i), d) {
                            if count == opts.max_subsets_per_node {
                                if !SUBSET_CAP_WARNED.swap(true, Ordering::Relaxed) {
                                    log::warn!(
                                        "node {i} has more than {} subsets of order {d}; keeping the first {}",
                                        opts.max_subsets_per_node,
                                        opts.max_subsets_per_node
                                    );
                                }
                                break;
                            }
                            count += 1;
                            let row = recv.len();
                            recv.push(offset + i);
                            for &j in &subset {
                                members.push(offset + j);
                                member_rows.push(row);
                            }
                            if e > 0 {
                                let found: Option<Vec<&[f64]>> =
                                    subset.iter().map(|&j| g.edge_attr(i, j)).collect();
                                match found {
                                    Some(list) => {
                                        let mut avg = vec![0.0; e];
                                        for a in &list {
                                            for (s, v) in avg.iter_mut().zip(a.iter()) {
                                                *s += v;
                                            }
                                        }
                                        attrs.extend(avg.iter().map(|v| v / list.len() as f64));
                                    }
                                    None => attrs.extend(std::iter::repeat(0.0).take(e)),
                                }
                            }
                        }
                    }
                }
            }

            let (recv, send, attrs, mask) = &mut pair_parts;
            let mut push_pair = |i: usize, j: usize| {
                recv.push(offset + i);
                send.push(offset + j);
                match g.edge_attr(i, j) {
                    Some(a) => attrs.extend_from_slice(a),
                    None => attrs.extend(std::iter::repeat(0.0).take(e)),
                }
            };
            match opts.pairs {
                PairMode::None => {}
                PairMode::Edges => {
                    for (i, list) in g.adjacency().iter().enumerate() {
                        for &j in list {
                            push_pair(i, j);
                            mask.push(1.0);
                        }
                    }
                }
                PairMode::All => {
                    let adj = g.adjacency();
                    for (i, list) in adj.iter().enumerate() {
                        for j in (0..m).filter(|&j| j != i) {
                            push_pair(i, j);
                            mask.push(if list.binary_search(&j).is_ok() { 1.0 } else { 0.0 });
                        }
                    }
                }
            }
            b.nodes += m;
        }
        b.node_graph = Arc::new(node_graph);
        b.subsets = opts
            .orders
            .iter()
            .zip(subset_parts)
            .map(|(&order, (recv, members, member_rows, attrs))| SubsetIndex {
                order,
                rows: recv.len(),
                receivers: Arc::new(recv),
                members: Arc::new(members),
                member_rows: Arc::new(member_rows),
                attrs,
            })
            .collect();
        if opts.pairs != PairMode::None {
            let (recv, send, attrs, mask) = pair_parts;
            b.pairs = Some(PairIndex {
                receivers: Arc::new(recv),
                senders: Arc::new(send),
                attrs,
                edge_mask: mask,
            });
        }
        Ok(b)
    }

    pub fn subset_index(&self, order: usize) -> Option<&SubsetIndex> {
        self.subsets.iter().find(|s| s.order == order)
    }

    /// Node count of each graph.
    pub fn graph_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.graphs];
        for &g in self.node_graph.iter() {
            sizes[g] += 1;
        }
        sizes
    }
}

/// Interface shared by every trainable graph model.
pub trait GraphModel: Send + Sync {
    fn config(&self) -> &ModelConfig;
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    fn batch_options(&self) -> BatchOptions;

    /// Records the forward pass on `tape`. The result has shape
    /// `(nodes, n, 0)` for a vector head and `(graphs, 1, 0)` for a scalar head.
    fn forward(&self, tape: &mut Tape, batch: &GraphBatch) -> Result<MvTensor>;

    /// Convenience wrapper returning the flat prediction.
    fn predict(&self, graphs: &[&GeometricGraph]) -> Result<Vec<f64>> {
        let batch = GraphBatch::new(graphs, &self.batch_options())?;
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, &batch)?;
        Ok(tape.value(out).to_vec())
    }
}

/// Builds a freshly initialised model of `config.kind`.
pub fn build_model(config: &ModelConfig, seed: u64) -> Result<Box<dyn GraphModel>> {
    config.validate()?;
    Ok(match config.kind {
        ModelKind::Cgegnn => Box::new(CgEgnn::new(config.clone(), seed)?),
        ModelKind::Gnn => Box::new(Gnn::new(config.clone(), seed)?),
        ModelKind::Egnn => Box::new(Egnn::new(config.clone(), seed)?),
    })
}

/// Checks a graph against the feature layout a model expects.
pub(crate) fn check_graph_layout(config: &ModelConfig, batch: &GraphBatch) -> Result<()> {
    if batch.dim != config.dim {
        return Err(Error::DimensionMismatch(config.dim, batch.dim));
    }
    if batch.vector_count != config.vector_features
        || batch.scalar_count != config.scalar_features
        || batch.edge_attr_dim != config.edge_attr_dim
    {
        return Err(Error::Shape(format!(
            "graph has {} vector / {} scalar / {} edge features, model expects {} / {} / {}",
            batch.vector_count,
            batch.scalar_count,
            batch.edge_attr_dim,
            config.vector_features,
            config.scalar_features,
            config.edge_attr_dim
        )));
    }
    Ok(())
}
