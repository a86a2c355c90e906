//! Training, evaluation, and the experiment drivers built on them.

mod config;
mod experiments;
mod fit;
mod metrics;
pub mod report;

pub use config::{ModelKind, TrainConfig};
pub use experiments::{
    benchmark_runtime, cross_domain_eval, grid_search, pooling_ablation, single_graph, AblationReport,
    CrossDomainReport, GridEntry, GridReport, MethodTiming, RuntimeReport, GRID_POOLINGS, GRID_WIDTHS,
};
pub use fit::{build_model, train, EpochRecord, TrainOutcome};
pub use metrics::{evaluate, metrics, predict_all, BucketReport, EvalReport, Metrics, EVAL_BATCH, SIZE_BUCKETS};
