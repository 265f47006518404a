use rand::Rng;

use super::graph::{Graph, NodeId};
use super::tensor::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Standard deviation of the learned lookup tables.
pub const INIT_STD: f64 = 0.02;

/// Fan-in scaled standard deviation for affine weights.
pub fn linear_init_std(inputs: usize) -> f64 {
    1.0 / (inputs.max(1) as f64).sqrt()
}

/// Affine layer with weights stored as `[in, out]`.
#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Linear {
            weight: store.add(
                format!("{name}.weight"),
                Tensor::randn(&[inputs, outputs], linear_init_std(inputs), rng),
            ),
            bias: store.add(format!("{name}.bias"), Tensor::randn(&[outputs], INIT_STD, rng)),
        }
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: NodeId) -> Result<NodeId> {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        g.linear(x, w, Some(b))
    }
}

/// Two affine layers with a ReLU in between.
#[derive(Clone, Copy, Debug)]
pub struct Mlp {
    pub hidden: Linear,
    pub output: Linear,
}

impl Mlp {
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        hidden: usize,
        outputs: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Mlp {
            hidden: Linear::register(store, &format!("{name}.fc1"), inputs, hidden, rng),
            output: Linear::register(store, &format!("{name}.fc2"), hidden, outputs, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: NodeId) -> Result<NodeId> {
        let h = self.hidden.forward(g, x)?;
        let h = g.relu(h);
        self.output.forward(g, h)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LayerNormParams {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNormParams {
    pub fn register(store: &mut ParamStore, name: &str, width: usize) -> Self {
        LayerNormParams {
            gamma: store.add(format!("{name}.gamma"), Tensor::full(&[width], 1.0)),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(&[width])),
        }
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: NodeId) -> Result<NodeId> {
        let gamma = g.param(self.gamma);
        let beta = g.param(self.beta);
        g.layer_norm(x, gamma, beta)
    }
}

/// One post-norm transformer encoder layer.
#[derive(Clone, Copy, Debug)]
pub struct EncoderLayerParams {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub norm1: LayerNormParams,
    pub ff: Mlp,
    pub norm2: LayerNormParams,
}

/// Stack of encoder layers sharing a head count.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub width: usize,
    pub heads: usize,
    pub layers: Vec<EncoderLayerParams>,
}

impl Encoder {
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        width: usize,
        heads: usize,
        depth: usize,
        ff_width: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if heads == 0 || width % heads != 0 {
            return Err(Error::Config(format!(
                "{name}: {heads} heads do not divide model width {width}"
            )));
        }
        let layers = (0..depth)
            .map(|l| {
                let p = format!("{name}.layer{l}");
                EncoderLayerParams {
                    query: Linear::register(store, &format!("{p}.attn.query"), width, width, rng),
                    key: Linear::register(store, &format!("{p}.attn.key"), width, width, rng),
                    value: Linear::register(store, &format!("{p}.attn.value"), width, width, rng),
                    output: Linear::register(store, &format!("{p}.attn.output"), width, width, rng),
                    norm1: LayerNormParams::register(store, &format!("{p}.norm1"), width),
                    ff: Mlp::register(store, &format!("{p}.ff"), width, ff_width, width, rng),
                    norm2: LayerNormParams::register(store, &format!("{p}.norm2"), width),
                }
            })
            .collect();
        Ok(Encoder {
            width,
            heads,
            layers,
        })
    }

    /// Runs all layers over `tokens: [S, D]`; also returns the attention
    /// node of every layer so callers can read the weights back.
    pub fn forward(&self, g: &mut Graph<'_>, tokens: NodeId) -> Result<(NodeId, Vec<NodeId>)> {
        let s = g.value(tokens).rows();
        if s == 0 {
            return Err(Error::Contract("encoder over an empty sequence".into()));
        }
        if g.value(tokens).cols() != self.width {
            return Err(Error::Dimension {
                op: "encoder",
                left: g.value(tokens).shape().to_vec(),
                right: vec![self.width],
            });
        }
        let mut x = tokens;
        let mut attention = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let q = layer.query.forward(g, x)?;
            let k = layer.key.forward(g, x)?;
            let v = layer.value.forward(g, x)?;
            let a = g.attention(q, k, v, self.heads)?;
            attention.push(a);
            let a = layer.output.forward(g, a)?;
            let r = g.add(x, a)?;
            let h = layer.norm1.forward(g, r)?;
            let f = layer.ff.forward(g, h)?;
            let r = g.add(h, f)?;
            x = layer.norm2.forward(g, r)?;
        }
        Ok((x, attention))
    }
}
