use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::config::{ModelKind, TrainConfig};
use super::fit::{build_model, train};
use super::metrics::{evaluate, EvalReport};
use crate::dataset::{DatasetSplit, LabeledInstance};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::models::{Pooling, Surrogate};
use crate::solver::domination_number;
use crate::tensor::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub mean_add: EvalReport,
    pub mean_only: EvalReport,
}

/// Trains two GINs that differ only in pooling and scores both on the same
/// test set.
pub fn pooling_ablation<T: Scalar>(split: &DatasetSplit, cfg: &TrainConfig) -> Result<AblationReport> {
    if cfg.model != ModelKind::Gin {
        return Err(Error::param("the pooling ablation applies to GIN configurations"));
    }
    let run = |pooling: Pooling| -> Result<EvalReport> {
        let cfg = TrainConfig { pooling, ..cfg.clone() };
        let outcome = train(build_model::<T>(&cfg)?, split, &cfg)?;
        evaluate(&outcome.model, &split.test)
    };
    Ok(AblationReport {
        mean_add: run(Pooling::MeanAdd)?,
        mean_only: run(Pooling::MeanOnly)?,
    })
}

/// `cells[i][j]`: model trained on domain `i` evaluated on domain `j`,
/// domains ordered ER, BA.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossDomainReport {
    pub domains: [String; 2],
    pub cells: [[EvalReport; 2]; 2],
}

impl CrossDomainReport {
    pub fn cell(&self, trained_on: usize, tested_on: usize) -> &EvalReport {
        &self.cells[trained_on][tested_on]
    }
}

pub fn cross_domain_eval<T: Scalar, M: Surrogate<T>>(
    model_er: &M,
    model_ba: &M,
    test_er: &[LabeledInstance],
    test_ba: &[LabeledInstance],
) -> Result<CrossDomainReport> {
    let row = |m: &M| -> Result<[EvalReport; 2]> { Ok([evaluate(m, test_er)?, evaluate(m, test_ba)?]) };
    Ok(CrossDomainReport {
        domains: ["er".into(), "ba".into()],
        cells: [row(model_er)?, row(model_ba)?],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub hidden: usize,
    pub pooling: Pooling,
    pub best_epoch: usize,
    pub val_mae: f64,
    pub test: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub entries: Vec<GridEntry>,
    /// Index of the entry with the lowest validation MAE (first on ties).
    pub best: usize,
}

pub const GRID_WIDTHS: [usize; 3] = [32, 64, 128];
pub const GRID_POOLINGS: [Pooling; 2] = [Pooling::MeanAdd, Pooling::MeanOnly];

/// GIN sweep over width x pooling; selection uses validation MAE only.
pub fn grid_search<T: Scalar>(
    split: &DatasetSplit,
    cfg: &TrainConfig,
    widths: &[usize],
    poolings: &[Pooling],
) -> Result<GridReport> {
    if cfg.model != ModelKind::Gin {
        return Err(Error::param("grid search applies to GIN configurations"));
    }
    if widths.is_empty() || poolings.is_empty() {
        return Err(Error::param("grid search needs at least one width and one pooling"));
    }
    let mut entries = Vec::new();
    for &hidden in widths {
        for &pooling in poolings {
            let cfg = TrainConfig {
                hidden,
                pooling,
                ..cfg.clone()
            };
            let outcome = train(build_model::<T>(&cfg)?, split, &cfg)?;
            entries.push(GridEntry {
                hidden,
                pooling,
                best_epoch: outcome.best_epoch,
                val_mae: outcome.val_report.mae(),
                test: evaluate(&outcome.model, &split.test)?,
            });
        }
    }
    let best = (0..entries.len())
        .min_by(|&a, &b| entries[a].val_mae.total_cmp(&entries[b].val_mae))
        .expect("grid is non-empty");
    Ok(GridReport { entries, best })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: String,
    pub mean_ms: f64,
    /// Exact-solver mean divided by this method's mean.
    pub speedup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuntimeReport {
    pub n: usize,
    pub graphs: usize,
    pub trials: usize,
    pub methods: Vec<MethodTiming>,
}

impl RuntimeReport {
    pub fn method(&self, name: &str) -> Option<&MethodTiming> {
        self.methods.iter().find(|m| m.method == name)
    }
}

/// Per-graph wall-clock latency of the exact solver and each surrogate.
///
/// Every method first makes one untimed pass over all graphs; then each of
/// `trials` passes times every graph individually (surrogates see a batch of
/// one, including input encoding). Means are over `trials * graphs` calls.
pub fn benchmark_runtime(
    graphs: &[Graph],
    trials: usize,
    surrogates: &[(&str, &dyn Fn(&Graph) -> Result<f64>)],
) -> Result<RuntimeReport> {
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    let n = match graphs.first() {
        None => return Err(Error::param("benchmark needs at least one graph")),
        Some(g) => g.n(),
    };
    if graphs.iter().any(|g| g.n() != n) {
        return Err(Error::param("benchmark graphs must share one vertex count"));
    }

    let exact = |g: &Graph| domination_number(g, None).map(|r| r.gamma as f64);
    let mut methods = vec![("exact", mean_latency(graphs, trials, &exact)?)];
    for &(name, f) in surrogates {
        methods.push((name, mean_latency(graphs, trials, f)?));
    }
    let exact_ms = methods[0].1;
    Ok(RuntimeReport {
        n,
        graphs: graphs.len(),
        trials,
        methods: methods
            .into_iter()
            .map(|(method, mean_ms)| MethodTiming {
                method: method.to_owned(),
                mean_ms,
                speedup: exact_ms / mean_ms,
            })
            .collect(),
    })
}

fn mean_latency(graphs: &[Graph], trials: usize, f: &dyn Fn(&Graph) -> Result<f64>) -> Result<f64> {
    for g in graphs {
        std::hint::black_box(f(g)?);
    }
    let mut total = Duration::ZERO;
    for _ in 0..trials {
        for g in graphs {
            let start = Instant::now();
            std::hint::black_box(f(std::hint::black_box(g))?);
            total += start.elapsed();
        }
    }
    Ok(total.as_secs_f64() * 1e3 / (trials * graphs.len()) as f64)
}

/// Adapts a surrogate to the benchmark's single-graph call.
pub fn single_graph<T: Scalar, M: Surrogate<T>>(model: &M) -> impl Fn(&Graph) -> Result<f64> + '_ {
    move |g| Ok(model.predict(&[g])?[0])
}
