//! Equivariant Clifford layers and their composition into small networks.
//!
//! Every layer maps a tensor of `p` multivector channels to `q` channels and
//! commutes with the outermorphism action of O(n) on each channel.

use rand::Rng;

use crate::autodiff::{MvTensor, Tape};
use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};

/// Per-grade channel mixing: `y⁽ᵏ⁾[co] = Σ_ci w[co, ci, k] x⁽ᵏ⁾[ci]`, plus an
/// optional grade-0 bias per output channel.
#[derive(Clone, Debug)]
pub struct LinearLayer {
    dim: usize,
    in_channels: usize,
    out_channels: usize,
    weight: ParamId,
    bias: Option<ParamId>,
}

impl LinearLayer {
    /// Weights uniform with variance `1 / in_channels`, bias zero.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        in_channels: usize,
        out_channels: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let bound = (3.0 / in_channels as f64).sqrt();
        Self::with_bound(store, name, dim, in_channels, out_channels, bias, bound, rng)
    }

    /// Weights uniform on `[-bound, bound]`, bias zero.
    #[allow(clippy::too_many_arguments)]
    pub fn with_bound<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        in_channels: usize,
        out_channels: usize,
        bias: bool,
        bound: f64,
        rng: &mut R,
    ) -> Self {
        let weight = store.add_uniform(
            &format!("{name}.weight"),
            out_channels * in_channels * (dim + 1),
            bound,
            rng,
        );
        let bias = bias.then(|| store.add_constant(&format!("{name}.bias"), out_channels, 0.0));
        Self {
            dim,
            in_channels,
            out_channels,
            weight,
            bias,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn weight(&self) -> ParamId {
        self.weight
    }

    pub fn bias(&self) -> Option<ParamId> {
        self.bias
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: MvTensor) -> Result<MvTensor> {
        check_input(x, self.dim, self.in_channels, "linear layer")?;
        let w = tape.param(store, self.weight);
        let b = self.bias.map(|b| tape.param(store, b));
        tape.linear(x, w, b, self.out_channels)
    }
}

fn check_input(x: MvTensor, dim: usize, channels: usize, what: &str) -> Result<()> {
    if x.dim() != dim {
        return Err(Error::DimensionMismatch(dim, x.dim()));
    }
    if x.channels() != channels {
        return Err(Error::Shape(format!(
            "{what} expects {channels} channels, got {}",
            x.channels()
        )));
    }
    Ok(())
}

/// Weighted geometric product of the input with a linear image of itself:
/// `y⁽ᵏ⁾ = Σ_ij φ_ijk (x⁽ⁱ⁾ z⁽ʲ⁾)⁽ᵏ⁾` with `z = pre_linear(x)`.
///
/// The pre-linear bias starts at one, so a fresh layer already passes a
/// linear image of its input through the product.
///
/// The fully connected form also sums over input channels and may change the
/// channel count; the plain form acts channel by channel and keeps it.
#[derive(Clone, Debug)]
pub struct GeomProductLayer {
    dim: usize,
    in_channels: usize,
    out_channels: usize,
    fully_connected: bool,
    pre_linear: LinearLayer,
    mix: ParamId,
}

impl GeomProductLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        in_channels: usize,
        out_channels: usize,
        fully_connected: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if !fully_connected && in_channels != out_channels {
            return Err(Error::Config(format!(
                "plain geometric product layer must keep its width ({in_channels} → {out_channels})"
            )));
        }
        let pre_linear = LinearLayer::new(
            store,
            &format!("{name}.pre"),
            dim,
            in_channels,
            in_channels,
            true,
            rng,
        );
        if let Some(b) = pre_linear.bias {
            store.slice_mut(b).fill(1.0);
        }
        let k = dim + 1;
        let len = if fully_connected {
            out_channels * in_channels * k * k * k
        } else {
            in_channels * k * k * k
        };
        let bound = 1.0 / (in_channels as f64).sqrt();
        let mix = store.add_uniform(&format!("{name}.mix"), len, bound, rng);
        Ok(Self {
            dim,
            in_channels,
            out_channels,
            fully_connected,
            pre_linear,
            mix,
        })
    }

    pub fn pre_linear(&self) -> &LinearLayer {
        &self.pre_linear
    }

    /// Mixing weights indexed `[co][ci][i][j][k]` (fully connected) or
    /// `[c][i][j][k]` (plain).
    pub fn mix(&self) -> ParamId {
        self.mix
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: MvTensor) -> Result<MvTensor> {
        check_input(x, self.dim, self.in_channels, "geometric product layer")?;
        let z = self.pre_linear.forward(tape, store, x)?;
        let w = tape.param(store, self.mix);
        tape.gp_layer(x, z, w, self.out_channels, self.fully_connected)
    }
}

/// `x⁽ᵐ⁾ / (σ(φ_m)(q(x⁽ᵐ⁾) − 1) + 1)` per channel and grade.
#[derive(Clone, Debug)]
pub struct NormLayer {
    dim: usize,
    channels: usize,
    phi: ParamId,
}

impl NormLayer {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, channels: usize) -> Self {
        let phi = store.add_constant(&format!("{name}.phi"), channels * (dim + 1), 0.0);
        Self { dim, channels, phi }
    }

    pub fn phi(&self) -> ParamId {
        self.phi
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: MvTensor) -> Result<MvTensor> {
        check_input(x, self.dim, self.channels, "normalization layer")?;
        let phi = tape.param(store, self.phi);
        tape.normalize(x, phi)
    }
}

/// One step of a [`MlpSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Linear { out: usize },
    GeomProduct { out: usize, fully_connected: bool },
    Norm,
    Activation,
}

/// Ordered layer list of a small Clifford network.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MlpSpec {
    pub layers: Vec<LayerSpec>,
}

impl MlpSpec {
    /// `blocks` repetitions of linear → normalization → geometric product →
    /// activation at width `hidden`, then a final linear map to `out`.
    pub fn standard(blocks: usize, hidden: usize, out: usize, fully_connected: bool) -> Self {
        let mut layers = Vec::with_capacity(4 * blocks + 1);
        for _ in 0..blocks {
            layers.extend([
                LayerSpec::Linear { out: hidden },
                LayerSpec::Norm,
                LayerSpec::GeomProduct { out: hidden, fully_connected },
                LayerSpec::Activation,
            ]);
        }
        layers.push(LayerSpec::Linear { out });
        Self { layers }
    }

    /// Output width for a given input width.
    pub fn out_channels(&self, in_channels: usize) -> usize {
        self.layers.iter().fold(in_channels, |c, l| match *l {
            LayerSpec::Linear { out } | LayerSpec::GeomProduct { out, .. } => out,
            LayerSpec::Norm | LayerSpec::Activation => c,
        })
    }
}

#[derive(Clone, Debug)]
pub enum Layer {
    Linear(LinearLayer),
    GeomProduct(GeomProductLayer),
    Norm(NormLayer),
    Activation,
}

/// Sequential composition of Clifford layers.
#[derive(Clone, Debug)]
pub struct CliffordMlp {
    dim: usize,
    in_channels: usize,
    out_channels: usize,
    layers: Vec<Layer>,
}

impl CliffordMlp {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dim: usize,
        in_channels: usize,
        spec: &MlpSpec,
        rng: &mut R,
    ) -> Result<Self> {
        if in_channels == 0 {
            return Err(Error::Config(format!("{name}: zero input channels")));
        }
        let mut width = in_channels;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (i, l) in spec.layers.iter().enumerate() {
            let lname = format!("{name}.{i}");
            let layer = match *l {
                LayerSpec::Linear { out } => {
                    Layer::Linear(LinearLayer::new(store, &lname, dim, width, out, true, rng))
                }
                LayerSpec::GeomProduct {
                    out,
                    fully_connected,
                } => Layer::GeomProduct(GeomProductLayer::new(
                    store,
                    &lname,
                    dim,
                    width,
                    out,
                    fully_connected,
                    rng,
                )?),
                LayerSpec::Norm => Layer::Norm(NormLayer::new(store, &lname, dim, width)),
                LayerSpec::Activation => Layer::Activation,
            };
            width = match *l {
                LayerSpec::Linear { out } | LayerSpec::GeomProduct { out, .. } => out,
                _ => width,
            };
            if width == 0 {
                return Err(Error::Config(format!("{lname}: zero output channels")));
            }
            layers.push(layer);
        }
        Ok(Self {
            dim,
            in_channels,
            out_channels: width,
            layers,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: MvTensor) -> Result<MvTensor> {
        check_input(x, self.dim, self.in_channels, "Clifford network")?;
        let mut h = x;
        for layer in &self.layers {
            h = match layer {
                Layer::Linear(l) => l.forward(tape, store, h)?,
                Layer::GeomProduct(l) => l.forward(tape, store, h)?,
                Layer::Norm(l) => l.forward(tape, store, h)?,
                Layer::Activation => tape.activation(h),
            };
        }
        Ok(h)
    }
}
