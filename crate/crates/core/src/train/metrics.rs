use serde::{Deserialize, Serialize};

use crate::dataset::LabeledInstance;
use crate::error::{Error, Result};
use crate::models::Surrogate;
use crate::tensor::Scalar;

/// Regression metrics. `r2` is `None` when the targets have zero variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    pub r2: Option<f64>,
}

/// MAE, RMSE, and `R² = 1 - SSE / SST`.
pub fn metrics(preds: &[f64], targets: &[f64]) -> Result<Metrics> {
    if preds.len() != targets.len() {
        return Err(Error::param(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::param("metrics need at least one prediction"));
    }
    let n = preds.len() as f64;
    let (mut abs, mut sse) = (0.0, 0.0);
    for (p, t) in preds.iter().zip(targets) {
        let e = p - t;
        abs += e.abs();
        sse += e * e;
    }
    let mean = targets.iter().sum::<f64>() / n;
    let sst: f64 = targets.iter().map(|t| (t - mean) * (t - mean)).sum();
    Ok(Metrics {
        mae: abs / n,
        rmse: (sse / n).sqrt(),
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
    })
}

/// Inclusive vertex-count ranges used for per-size reporting.
pub const SIZE_BUCKETS: [(usize, usize); 3] = [(5, 20), (21, 40), (41, 64)];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub min_n: usize,
    pub max_n: usize,
    pub n_eval: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_eval: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
    /// Only buckets containing at least one instance are listed.
    pub per_bucket: Vec<BucketReport>,
}

impl EvalReport {
    /// Scores real-valued predictions against integer labels, without rounding.
    pub fn from_predictions(sizes: &[usize], preds: &[f64], targets: &[f64]) -> Result<Self> {
        if sizes.len() != preds.len() {
            return Err(Error::param(format!(
                "{} sizes for {} predictions",
                sizes.len(),
                preds.len()
            )));
        }
        let overall = metrics(preds, targets)?;
        let mut per_bucket = Vec::new();
        for (lo, hi) in SIZE_BUCKETS {
            let idx: Vec<usize> = (0..sizes.len()).filter(|&i| (lo..=hi).contains(&sizes[i])).collect();
            if idx.is_empty() {
                continue;
            }
            let p: Vec<f64> = idx.iter().map(|&i| preds[i]).collect();
            let t: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
            per_bucket.push(BucketReport {
                min_n: lo,
                max_n: hi,
                n_eval: idx.len(),
                metrics: metrics(&p, &t)?,
            });
        }
        Ok(EvalReport {
            n_eval: preds.len(),
            metrics: overall,
            per_bucket,
        })
    }

    pub fn mae(&self) -> f64 {
        self.metrics.mae
    }

    pub fn r2(&self) -> Option<f64> {
        self.metrics.r2
    }
}

/// Graphs per forward pass during evaluation.
pub const EVAL_BATCH: usize = 64;

/// Eval-mode predictions in fixed-size chunks, in instance order.
pub fn predict_all<T: Scalar, M: Surrogate<T>>(model: &M, instances: &[LabeledInstance]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(instances.len());
    for chunk in instances.chunks(EVAL_BATCH) {
        let graphs: Vec<_> = chunk.iter().map(|i| &i.graph).collect();
        out.extend(model.predict(&graphs)?);
    }
    Ok(out)
}

pub fn evaluate<T: Scalar, M: Surrogate<T>>(model: &M, instances: &[LabeledInstance]) -> Result<EvalReport> {
    let preds = predict_all(model, instances)?;
    let sizes: Vec<usize> = instances.iter().map(|i| i.n()).collect();
    let targets: Vec<f64> = instances.iter().map(|i| i.gamma as f64).collect();
    EvalReport::from_predictions(&sizes, &preds, &targets)
}
