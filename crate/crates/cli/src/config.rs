//! Experiment configuration files.

use std::path::{Path, PathBuf};

use domnet::dataset::{generate_dataset, load_jsonl, GenerateOptions, LabeledInstance, SplitConfig};
use domnet::train::TrainConfig;
use domnet::{Error, Family};
use serde::{Deserialize, Serialize};

/// One experiment: where the data comes from, how it is split, and how the
/// model is trained. Relative paths resolve against the config file's
/// directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Existing JSON-Lines dataset. Exactly one of `data` and `generate` is required.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateSpec>,
    #[serde(default)]
    pub split: SplitSpec,
    pub train: TrainConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub family: Family,
    pub count: usize,
    pub seed: u64,
    #[serde(default = "default_n_min")]
    pub n_min: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_n_min() -> usize {
    *domnet::dataset::DEFAULT_N_RANGE.start()
}

fn default_n_max() -> usize {
    *domnet::dataset::DEFAULT_N_RANGE.end()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_frac: 0.2,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))?;
        match (&cfg.data, &cfg.generate) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(Error::Parameter(format!(
                    "{}: exactly one of \"data\" and \"generate\" must be given",
                    path.display()
                )))
            }
        }
        if let Some(data) = cfg.data.take() {
            let base = path.parent().unwrap_or(Path::new(""));
            cfg.data = Some(base.join(data));
        }
        Ok(cfg)
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            test_frac: self.split.test_frac,
            val_frac: self.train.val_frac,
            seed: self.split.seed,
        }
    }

    pub fn dataset(&self) -> Result<Vec<LabeledInstance>, Error> {
        match (&self.data, &self.generate) {
            (Some(path), _) => load_jsonl(path),
            (None, Some(g)) => {
                let opts = GenerateOptions {
                    n_range: g.n_min..=g.n_max,
                    ..GenerateOptions::default()
                };
                generate_dataset(g.family, g.count, g.seed, &opts)
            }
            (None, None) => unreachable!("checked on load"),
        }
    }

    /// Data provenance recorded in checkpoints.
    pub fn source(&self) -> serde_json::Value {
        match (&self.data, &self.generate) {
            (Some(path), _) => serde_json::json!({ "path": path }),
            (None, Some(g)) => serde_json::json!({ "generate": g }),
            (None, None) => serde_json::Value::Null,
        }
    }
}
