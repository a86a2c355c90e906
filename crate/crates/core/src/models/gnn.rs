//! Graph Isomorphism Network regressor.
//!
//! Three GIN layers update node embeddings by
//! `h_v <- MLP((1 + eps) * h_v + sum_{u in N(v)} h_u)` with a learnable scalar
//! `eps` per layer and `MLP = Linear -> BatchNorm -> ReLU -> Linear`. The graph
//! embedding concatenates mean and sum pooling over nodes (or uses the mean
//! alone) and a final linear layer maps it to the prediction.
//!
//! Batches stack all nodes into one matrix; batch normalization in training
//! mode therefore pools statistics over every node in the batch.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::{Forward, NormSite, OutputAffine, Surrogate};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::Rng;
use crate::tensor::{BatchNormMode, Checkpoint, Mode, NeighborIndex, ParamId, ParamSet, Scalar, Tape, Tensor, Var};

pub const KIND: &str = "gin-v1";
pub const LAYERS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    MeanAdd,
    MeanOnly,
}

impl Pooling {
    pub fn tag(self) -> &'static str {
        match self {
            Pooling::MeanAdd => "mean_add",
            Pooling::MeanOnly => "mean_only",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GinConfig {
    pub hidden: usize,
    pub pooling: Pooling,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl Default for GinConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            pooling: Pooling::MeanAdd,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
        }
    }
}

/// Input embedding: row `v` is `[1, deg(v) / max(1, n - 1), 0, ..., 0]`.
pub fn initial_features<T: Scalar>(g: &Graph, d: usize) -> Result<Tensor<T>> {
    if d < 2 {
        return Err(Error::param(format!("feature width {d} < 2")));
    }
    let n = g.n();
    let denom = n.saturating_sub(1).max(1) as f64;
    let mut data = vec![T::zero(); n * d];
    for (v, row) in data.chunks_mut(d).enumerate() {
        row[0] = T::one();
        row[1] = T::of(g.neighbors(v).len() as f64 / denom);
    }
    Tensor::new([n, d], data)
}

/// Parameter handles of one GIN layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GinLayer {
    pub eps: ParamId,
    pub lin1_w: ParamId,
    pub lin1_b: ParamId,
    pub bn_gamma: ParamId,
    pub bn_beta: ParamId,
    pub bn_mean: ParamId,
    pub bn_var: ParamId,
    pub lin2_w: ParamId,
    pub lin2_b: ParamId,
}

impl GinLayer {
    fn build<T: Scalar>(params: &mut ParamSet<T>, i: usize, d: usize, rng: &mut Rng) -> Self {
        let p = |s: &str| format!("gin{i}.{s}");
        Self {
            eps: params.add(p("eps"), Tensor::scalar(T::zero())),
            lin1_w: params.add_uniform(p("lin1.weight"), [d, d], d, rng),
            lin1_b: params.add_uniform(p("lin1.bias"), [d], d, rng),
            bn_gamma: params.add(p("bn.weight"), Tensor::full([d], T::one())),
            bn_beta: params.add(p("bn.bias"), Tensor::zeros([d])),
            bn_mean: params.add_buffer(p("bn.running_mean"), Tensor::zeros([d])),
            bn_var: params.add_buffer(p("bn.running_var"), Tensor::full([d], T::one())),
            lin2_w: params.add_uniform(p("lin2.weight"), [d, d], d, rng),
            lin2_b: params.add_uniform(p("lin2.bias"), [d], d, rng),
        }
    }

    /// Aggregation `(1 + eps) * h_v + sum_{u in N(v)} h_u`, before the MLP.
    pub fn aggregate<'p, T: Scalar>(
        &self,
        tape: &mut Tape<'p, T>,
        params: &'p ParamSet<T>,
        index: &Rc<NeighborIndex>,
        h: Var,
    ) -> Result<Var> {
        let eps = tape.param(params, self.eps);
        let one_plus = tape.add_scalar(eps, T::one());
        let own = tape.scale(h, one_plus)?;
        let neighbors = tape.neighbor_sum(h, index.clone())?;
        tape.add(own, neighbors)
    }

    /// Full layer; returns the new embeddings and the batch-norm node.
    pub fn forward<'p, T: Scalar>(
        &self,
        tape: &mut Tape<'p, T>,
        params: &'p ParamSet<T>,
        index: &Rc<NeighborIndex>,
        h: Var,
        mode: Mode,
        bn_eps: f64,
    ) -> Result<(Var, Var)> {
        let agg = self.aggregate(tape, params, index, h)?;
        let (w, b) = (tape.param(params, self.lin1_w), tape.param(params, self.lin1_b));
        let z = tape.linear(agg, w, b)?;
        let bn_mode = match mode {
            Mode::Train => BatchNormMode::Train,
            Mode::Eval => BatchNormMode::Eval {
                mean: tape.param(params, self.bn_mean),
                var: tape.param(params, self.bn_var),
            },
        };
        let (g, bt) = (tape.param(params, self.bn_gamma), tape.param(params, self.bn_beta));
        let normed = tape.batchnorm(z, g, bt, bn_mode, T::of(bn_eps))?;
        let act = tape.relu(normed);
        let (w, b) = (tape.param(params, self.lin2_w), tape.param(params, self.lin2_b));
        Ok((tape.linear(act, w, b)?, normed))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GinModel<T: Scalar> {
    config: GinConfig,
    params: ParamSet<T>,
    layers: [GinLayer; LAYERS],
    readout_w: ParamId,
    readout_b: ParamId,
    affine: OutputAffine,
}

impl<T: Scalar> GinModel<T> {
    pub fn new(config: GinConfig, seed: u64) -> Result<Self> {
        if config.hidden < 2 {
            return Err(Error::param(format!("hidden width {} < 2", config.hidden)));
        }
        if !(config.bn_eps >= 0.0) || !(0.0..=1.0).contains(&config.bn_momentum) {
            return Err(Error::param("batch-norm eps must be >= 0 and momentum in [0, 1]"));
        }
        let mut rng = Rng::new(seed);
        let mut params = ParamSet::new();
        let d = config.hidden;
        let layers = [0, 1, 2].map(|i| GinLayer::build(&mut params, i, d, &mut rng));
        let pooled = match config.pooling {
            Pooling::MeanAdd => 2 * d,
            Pooling::MeanOnly => d,
        };
        let readout_w = params.add_uniform("readout.weight", [pooled, 1], pooled, &mut rng);
        let readout_b = params.add_uniform("readout.bias", [1], pooled, &mut rng);
        let affine = OutputAffine::build(&mut params);
        Ok(Self {
            config,
            params,
            layers,
            readout_w,
            readout_b,
            affine,
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(KIND)?;
        let config: GinConfig = serde_json::from_value(ck.meta["model"].clone())?;
        let loaded: ParamSet<T> = ck.to_params()?;
        let mut model = Self::new(config, 0)?;
        for id in model.params.ids().collect::<Vec<_>>() {
            let name = model.params.name(id).to_string();
            let src = loaded
                .find(&name)
                .ok_or_else(|| Error::Integrity(format!("checkpoint lacks tensor {name}")))?;
            model.params.set_value(id, loaded.value(src).clone())?;
        }
        if loaded.len() != model.params.len() {
            return Err(Error::Integrity("checkpoint has unexpected tensors".into()));
        }
        Ok(model)
    }

    pub fn config(&self) -> &GinConfig {
        &self.config
    }

    pub fn layer(&self, i: usize) -> &GinLayer {
        &self.layers[i]
    }

    pub fn readout_ids(&self) -> (ParamId, ParamId) {
        (self.readout_w, self.readout_b)
    }

    /// Stacked initial features and neighbor index for a batch.
    pub fn batch_inputs(&self, graphs: &[&Graph]) -> Result<(Tensor<T>, Rc<NeighborIndex>, Rc<[usize]>)> {
        let d = self.config.hidden;
        let mut offsets = vec![0];
        let mut data = Vec::new();
        for g in graphs {
            if g.n() == 0 {
                return Err(Error::contract("GIN forward on an empty graph"));
            }
            data.extend(initial_features::<T>(g, d)?.into_data());
            offsets.push(offsets.last().unwrap() + g.n());
        }
        let total = *offsets.last().unwrap();
        let x = Tensor::new([total, d], data)?;
        let index = Rc::new(NeighborIndex::from_graphs(graphs.iter().copied()));
        Ok((x, index, Rc::from(offsets)))
    }

    /// Pools node embeddings `h` per graph and applies the readout layer.
    pub fn readout<'p>(
        &self,
        tape: &mut Tape<'p, T>,
        params: &'p ParamSet<T>,
        h: Var,
        offsets: Rc<[usize]>,
    ) -> Result<Var> {
        let mean = tape.segment_mean(h, offsets.clone())?;
        let pooled = match self.config.pooling {
            Pooling::MeanAdd => {
                let sum = tape.segment_sum(h, offsets)?;
                tape.concat_cols(mean, sum)?
            }
            Pooling::MeanOnly => mean,
        };
        let (w, b) = (tape.param(params, self.readout_w), tape.param(params, self.readout_b));
        let out = tape.linear(pooled, w, b)?;
        self.affine.apply(tape, params, out)
    }
}

impl<T: Scalar> Surrogate<T> for GinModel<T> {
    fn kind(&self) -> &'static str {
        KIND
    }

    fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    fn forward_with<'p>(
        &self,
        tape: &mut Tape<'p, T>,
        params: &'p ParamSet<T>,
        graphs: &[&Graph],
        mode: Mode,
    ) -> Result<Forward> {
        if graphs.is_empty() {
            return Err(Error::contract("GIN forward on an empty batch"));
        }
        let (x, index, offsets) = self.batch_inputs(graphs)?;
        let mut h = tape.constant(x);
        let mut norms = Vec::with_capacity(LAYERS);
        for layer in &self.layers {
            let (out, bn) = layer.forward(tape, params, &index, h, mode, self.config.bn_eps)?;
            norms.push(NormSite {
                node: bn,
                mean: layer.bn_mean,
                var: layer.bn_var,
                momentum: self.config.bn_momentum,
            });
            h = out;
        }
        let output = self.readout(tape, params, h, offsets)?;
        Ok(Forward { output, norms })
    }

    fn config_json(&self) -> serde_json::Value {
        serde_json::to_value(self.config).expect("config serializes")
    }

    fn output_affine(&self) -> OutputAffine {
        self.affine
    }
}
