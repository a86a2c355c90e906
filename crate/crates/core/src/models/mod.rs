//! Neural surrogates mapping a graph to an estimate of its domination number.

pub mod cnn;
pub mod gnn;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::{Checkpoint, Mode, ParamId, ParamSet, Scalar, Tape, Tensor, Var};

pub use cnn::{encode_adjacency_image, AdjacencyImage, CnnModel};
pub use gnn::{initial_features, GinConfig, GinLayer, GinModel, Pooling};

/// A model whose forward pass maps a batch of graphs to a `[batch, 1]` output.
pub trait Surrogate<T: Scalar>: Clone {
    /// Checkpoint kind tag.
    fn kind(&self) -> &'static str;

    fn params(&self) -> &ParamSet<T>;

    fn params_mut(&mut self) -> &mut ParamSet<T>;

    /// Forward pass reading weights from `params`, which must have the
    /// layout of [`Surrogate::params`].
    fn forward_with<'p>(
        &self,
        tape: &mut Tape<'p, T>,
        params: &'p ParamSet<T>,
        graphs: &[&Graph],
        mode: Mode,
    ) -> Result<Forward>;

    fn forward<'p>(&'p self, tape: &mut Tape<'p, T>, graphs: &[&Graph], mode: Mode) -> Result<Forward> {
        self.forward_with(tape, self.params(), graphs, mode)
    }

    /// Model configuration stored alongside the parameters.
    fn config_json(&self) -> serde_json::Value;

    fn output_affine(&self) -> OutputAffine;

    /// Eval-mode predictions, one per graph.
    fn predict(&self, graphs: &[&Graph]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let fwd = self.forward(&mut tape, graphs, Mode::Eval)?;
        Ok(tape.value(fwd.output).data().iter().map(|x| x.as_f64()).collect())
    }

    fn to_checkpoint(&self, extra: serde_json::Value) -> Checkpoint {
        let meta = serde_json::json!({ "model": self.config_json(), "train": extra });
        Checkpoint::from_params(self.kind(), meta, self.params())
    }
}

/// Either surrogate, chosen at run time from a checkpoint's kind tag.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel<T: Scalar> {
    Cnn(CnnModel<T>),
    Gin(GinModel<T>),
}

impl<T: Scalar> AnyModel<T> {
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        match ck.kind.as_str() {
            cnn::KIND => CnnModel::from_checkpoint(ck).map(AnyModel::Cnn),
            gnn::KIND => GinModel::from_checkpoint(ck).map(AnyModel::Gin),
            other => Err(Error::Integrity(format!("unknown model kind {other:?}"))),
        }
    }
}

impl<T: Scalar> From<CnnModel<T>> for AnyModel<T> {
    fn from(m: CnnModel<T>) -> Self {
        AnyModel::Cnn(m)
    }
}

impl<T: Scalar> From<GinModel<T>> for AnyModel<T> {
    fn from(m: GinModel<T>) -> Self {
        AnyModel::Gin(m)
    }
}

impl<T: Scalar> Surrogate<T> for AnyModel<T> {
    fn kind(&self) -> &'static str {
        match self {
            AnyModel::Cnn(m) => m.kind(),
            AnyModel::Gin(m) => m.kind(),
        }
    }

    fn params(&self) -> &ParamSet<T> {
        match self {
            AnyModel::Cnn(m) => m.params(),
            AnyModel::Gin(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> &mut ParamSet<T> {
        match self {
            AnyModel::Cnn(m) => m.params_mut(),
            AnyModel::Gin(m) => m.params_mut(),
        }
    }

    fn forward_with<'p>(
        &self,
        tape: &mut Tape<'p, T>,
        params: &'p ParamSet<T>,
        graphs: &[&Graph],
        mode: Mode,
    ) -> Result<Forward> {
        match self {
            AnyModel::Cnn(m) => m.forward_with(tape, params, graphs, mode),
            AnyModel::Gin(m) => m.forward_with(tape, params, graphs, mode),
        }
    }

    fn config_json(&self) -> serde_json::Value {
        match self {
            AnyModel::Cnn(m) => m.config_json(),
            AnyModel::Gin(m) => m.config_json(),
        }
    }

    fn output_affine(&self) -> OutputAffine {
        match self {
            AnyModel::Cnn(m) => m.output_affine(),
            AnyModel::Gin(m) => m.output_affine(),
        }
    }
}

/// Fixed map `y * scale + shift` applied to the network output, letting the
/// network fit standardized targets while predictions stay in units of γ.
/// Both values are non-trainable buffers, identity by default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutputAffine {
    scale: ParamId,
    shift: ParamId,
}

impl OutputAffine {
    pub(crate) fn build<T: Scalar>(params: &mut ParamSet<T>) -> Self {
        OutputAffine {
            scale: params.add_buffer("output.scale", Tensor::full([1, 1], T::one())),
            shift: params.add_buffer("output.shift", Tensor::zeros([1])),
        }
    }

    pub(crate) fn apply<'p, T: Scalar>(
        &self,
        tape: &mut Tape<'p, T>,
        params: &'p ParamSet<T>,
        out: Var,
    ) -> Result<Var> {
        let (scale, shift) = (tape.param(params, self.scale), tape.param(params, self.shift));
        tape.linear(out, scale, shift)
    }

    /// `(shift, scale)`.
    pub fn get<T: Scalar>(&self, params: &ParamSet<T>) -> (f64, f64) {
        let item = |id| params.value(id).data()[0].as_f64();
        (item(self.shift), item(self.scale))
    }

    pub fn set<T: Scalar>(&self, params: &mut ParamSet<T>, shift: f64, scale: f64) -> Result<()> {
        if !(scale.is_finite() && scale != 0.0 && shift.is_finite()) {
            return Err(Error::param(format!("invalid output scale {scale} / shift {shift}")));
        }
        params.set_value(self.scale, Tensor::full([1, 1], T::of(scale)))?;
        params.set_value(self.shift, Tensor::full([1], T::of(shift)))
    }
}

/// Output of a forward pass plus the normalization layers it ran in
/// training mode.
pub struct Forward {
    pub output: Var,
    norms: Vec<NormSite>,
}

struct NormSite {
    node: Var,
    mean: ParamId,
    var: ParamId,
    momentum: f64,
}

/// Running-statistics update harvested from a finished forward pass.
pub struct StatUpdate<T> {
    mean: ParamId,
    var: ParamId,
    batch_mean: Tensor<T>,
    batch_var: Tensor<T>,
    momentum: f64,
}

impl Forward {
    pub(crate) fn new(output: Var) -> Self {
        Self {
            output,
            norms: Vec::new(),
        }
    }

    pub fn stat_updates<T: Scalar>(&self, tape: &Tape<'_, T>) -> Vec<StatUpdate<T>> {
        self.norms
            .iter()
            .filter_map(|site| {
                tape.batch_stats(site.node).map(|(m, v)| StatUpdate {
                    mean: site.mean,
                    var: site.var,
                    batch_mean: m.clone(),
                    batch_var: v.clone(),
                    momentum: site.momentum,
                })
            })
            .collect()
    }
}

/// `running = (1 - momentum) * running + momentum * batch` for mean and
/// (unbiased) variance.
pub fn apply_stat_updates<T: Scalar>(params: &mut ParamSet<T>, updates: &[StatUpdate<T>]) {
    for u in updates {
        let mom = T::of(u.momentum);
        for (id, batch) in [(u.mean, &u.batch_mean), (u.var, &u.batch_var)] {
            for (r, &b) in params.value_mut(id).data_mut().iter_mut().zip(batch.data()) {
                *r = (T::one() - mom) * *r + mom * b;
            }
        }
    }
}
