//! Clifford group equivariant graph network with high-order messages.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{MvTensor, Tape};
use crate::error::{Error, Result};
use crate::layers::{CliffordMlp, LinearLayer, MlpSpec};
use crate::model::{check_graph_layout, BatchOptions, GraphBatch, GraphModel, Head, ModelConfig, ModelKind, PairMode};
use crate::params::ParamStore;

/// Message and update networks of one convolution layer.
#[derive(Clone, Debug)]
pub struct ConvLayer {
    /// `messages[d − 1]` handles subsets of size `d`.
    pub messages: Vec<CliffordMlp>,
    pub update: CliffordMlp,
}

#[derive(Clone, Debug)]
pub struct CgEgnn {
    config: ModelConfig,
    store: ParamStore,
    embed: CliffordMlp,
    layers: Vec<ConvLayer>,
    head: LinearLayer,
}

impl CgEgnn {
    /// Parameters are registered in the order embed, then per layer the
    /// message networks for orders `1..=D` and the update network, then the head.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.kind != ModelKind::Cgegnn {
            return Err(Error::Config(format!("expected a cgegnn config, got {}", config.kind)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let n = config.dim;
        let nf = config.channels;
        let spec = MlpSpec::standard(config.mlp_blocks, nf, nf, config.fully_connected);
        let input_channels = 1 + config.vector_features + config.scalar_features;
        let embed = CliffordMlp::new(&mut store, "embed", n, input_channels, &spec, &mut rng)?;
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let messages = (1..=config.max_order)
                .map(|d| {
                    CliffordMlp::new(
                        &mut store,
                        &format!("layer{l}.message{d}"),
                        n,
                        2 * nf + config.edge_attr_dim,
                        &spec,
                        &mut rng,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let update = CliffordMlp::new(
                &mut store,
                &format!("layer{l}.update"),
                n,
                nf * (1 + config.max_order),
                &spec,
                &mut rng,
            )?;
            layers.push(ConvLayer { messages, update });
        }
        let head = LinearLayer::new(&mut store, "head", n, nf, 1, true, &mut rng);
        Ok(Self {
            config,
            store,
            embed,
            layers,
            head,
        })
    }

    pub fn embed_net(&self) -> &CliffordMlp {
        &self.embed
    }

    pub fn conv_layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn head(&self) -> &LinearLayer {
        &self.head
    }

    /// Input multivectors: centred position and vector features at grade 1,
    /// scalar features at grade 0.
    fn input_tensor(&self, tape: &mut Tape, batch: &GraphBatch) -> Result<MvTensor> {
        let n = batch.dim;
        let s = 1usize << n;
        let (r, sc) = (batch.vector_count, batch.scalar_count);
        let channels = 1 + r + sc;
        let mut data = vec![0.0; batch.nodes * channels * s];
        for i in 0..batch.nodes {
            let base = i * channels * s;
            for a in 0..n {
                data[base + (1 << a)] = batch.centered[i * n + a];
            }
            for v in 0..r {
                for a in 0..n {
                    data[base + (1 + v) * s + (1 << a)] = batch.vector_features[(i * r + v) * n + a];
                }
            }
            for c in 0..sc {
                data[base + (1 + r + c) * s] = batch.scalar_features[i * sc + c];
            }
        }
        tape.constant(batch.nodes, channels, n, data)
    }

    /// Node features after embedding.
    pub fn embed(&self, tape: &mut Tape, batch: &GraphBatch) -> Result<MvTensor> {
        check_graph_layout(&self.config, batch)?;
        let x = self.input_tensor(tape, batch)?;
        self.embed.forward(tape, &self.store, x)
    }

    /// One convolution: high-order messages summed per receiver, then the update network.
    pub fn convolve(&self, tape: &mut Tape, batch: &GraphBatch, layer: usize, h: MvTensor) -> Result<MvTensor> {
        let conv = &self.layers[layer];
        let n = batch.dim;
        let nf = self.config.channels;
        let mut slots = vec![h];
        for d in 1..=self.config.max_order {
            let index = batch.subset_index(d).filter(|ix| ix.rows > 0);
            let agg = match index {
                Some(ix) if self.config.orders.contains(&d) => {
                    let gathered = tape.gather(h, ix.members.clone())?;
                    let summed = tape.segment_sum(gathered, ix.member_rows.clone(), ix.rows)?;
                    let own = tape.gather(h, ix.receivers.clone())?;
                    let input = if self.config.edge_attr_dim > 0 {
                        let e = self.config.edge_attr_dim;
                        let s = 1usize << n;
                        let mut data = vec![0.0; ix.rows * e * s];
                        for (row, attr) in ix.attrs.chunks(e).enumerate() {
                            for (c, &v) in attr.iter().enumerate() {
                                data[(row * e + c) * s] = v;
                            }
                        }
                        let attrs = tape.constant(ix.rows, e, n, data)?;
                        tape.concat(&[own, summed, attrs])?
                    } else {
                        tape.concat(&[own, summed])?
                    };
                    let m = conv.messages[d - 1].forward(tape, &self.store, input)?;
                    tape.segment_sum(m, ix.receivers.clone(), batch.nodes)?
                }
                _ => tape.zeros(batch.nodes, nf, n)?,
            };
            slots.push(agg);
        }
        let joined = tape.concat(&slots)?;
        conv.update.forward(tape, &self.store, joined)
    }

    /// Original positions plus the grade-1 part of the head output.
    pub fn project_vector(&self, tape: &mut Tape, batch: &GraphBatch, h: MvTensor) -> Result<MvTensor> {
        if self.config.head != Head::Vector {
            return Err(Error::Config("model has a scalar head".into()));
        }
        let y = self.head.forward(tape, &self.store, h)?;
        let vector_blades: Vec<usize> = (0..batch.dim).map(|a| 1 << a).collect();
        let delta = tape.select_blades(y, &vector_blades)?;
        let x0 = tape.constant(batch.nodes, batch.dim, 0, batch.positions.clone())?;
        tape.add(x0, delta)
    }

    /// Per-node grade-0 head output, shape `(nodes, 1, 0)`.
    pub fn project_scalar_nodes(&self, tape: &mut Tape, h: MvTensor) -> Result<MvTensor> {
        if self.config.head != Head::Scalar {
            return Err(Error::Config("model has a vector head".into()));
        }
        let y = self.head.forward(tape, &self.store, h)?;
        tape.select_blades(y, &[0])
    }
}

impl GraphModel for CgEgnn {
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
            hops: self.config.hops,
            orders: self.config.orders.clone(),
            max_subsets_per_node: self.config.max_subsets_per_node,
            pairs: PairMode::None,
        }
    }

    fn forward(&self, tape: &mut Tape, batch: &GraphBatch) -> Result<MvTensor> {
        let mut h = self.embed(tape, batch)?;
        for l in 0..self.layers.len() {
            h = self.convolve(tape, batch, l, h)?;
        }
        match self.config.head {
            Head::Vector => self.project_vector(tape, batch, h),
            Head::Scalar => {
                let per_node = self.project_scalar_nodes(tape, h)?;
                tape.segment_sum(per_node, batch.node_graph.clone(), batch.graphs)
            }
        }
    }
}
