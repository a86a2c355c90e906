use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{GinConfig, Pooling};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cnn,
    Gin,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Cnn => "cnn",
            ModelKind::Gin => "gin",
        })
    }
}

/// Optimization settings. Missing keys in a JSON document take the defaults
/// of its `model` kind; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartialConfig")]
pub struct TrainConfig {
    pub model: ModelKind,
    pub lr: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub patience: usize,
    pub val_frac: f64,
    /// GIN only.
    pub pooling: Pooling,
    /// GIN only.
    pub hidden: usize,
    /// Fit `(γ - mean) / std` of the training labels; predictions are mapped back.
    pub standardize_targets: bool,
    pub seed: u64,
}

impl TrainConfig {
    pub fn defaults(model: ModelKind) -> Self {
        let (max_epochs, patience) = match model {
            ModelKind::Cnn => (25, 5),
            ModelKind::Gin => (200, 20),
        };
        TrainConfig {
            model,
            lr: 1e-3,
            max_epochs,
            batch_size: 32,
            clip_norm: 1.0,
            patience,
            val_frac: 0.1,
            pooling: Pooling::MeanAdd,
            hidden: GinConfig::default().hidden,
            standardize_targets: true,
            seed: 0,
        }
    }

    pub fn cnn() -> Self {
        Self::defaults(ModelKind::Cnn)
    }

    pub fn gin() -> Self {
        Self::defaults(ModelKind::Gin)
    }

    pub fn gin_config(&self) -> GinConfig {
        GinConfig {
            hidden: self.hidden,
            pooling: self.pooling,
            ..GinConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::param(m));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr={} must be finite and non-negative", self.lr));
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.hidden == 0 {
            return bad("max_epochs, batch_size and hidden must be positive".into());
        }
        if !(self.clip_norm > 0.0) {
            return bad(format!("clip_norm={} must be positive", self.clip_norm));
        }
        if self.patience == 0 || self.patience >= self.max_epochs {
            return bad(format!(
                "patience={} must lie in [1, max_epochs={})",
                self.patience, self.max_epochs
            ));
        }
        if !(self.val_frac > 0.0 && self.val_frac < 1.0) {
            return bad(format!("val_frac={} must lie in (0, 1)", self.val_frac));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    model: ModelKind,
    lr: Option<f64>,
    max_epochs: Option<usize>,
    batch_size: Option<usize>,
    clip_norm: Option<f64>,
    patience: Option<usize>,
    val_frac: Option<f64>,
    pooling: Option<Pooling>,
    hidden: Option<usize>,
    standardize_targets: Option<bool>,
    seed: Option<u64>,
}

impl TryFrom<PartialConfig> for TrainConfig {
    type Error = Error;

    fn try_from(p: PartialConfig) -> Result<Self> {
        let d = TrainConfig::defaults(p.model);
        let cfg = TrainConfig {
            model: p.model,
            lr: p.lr.unwrap_or(d.lr),
            max_epochs: p.max_epochs.unwrap_or(d.max_epochs),
            batch_size: p.batch_size.unwrap_or(d.batch_size),
            clip_norm: p.clip_norm.unwrap_or(d.clip_norm),
            patience: p.patience.unwrap_or(d.patience),
            val_frac: p.val_frac.unwrap_or(d.val_frac),
            pooling: p.pooling.unwrap_or(d.pooling),
            hidden: p.hidden.unwrap_or(d.hidden),
            standardize_targets: p.standardize_targets.unwrap_or(d.standardize_targets),
            seed: p.seed.unwrap_or(d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_per_kind() {
        let c = TrainConfig::cnn();
        assert_eq!((c.lr, c.max_epochs, c.batch_size, c.clip_norm), (1e-3, 25, 32, 1.0));
        let g = TrainConfig::gin();
        assert_eq!((g.max_epochs, g.patience), (200, 20));
        c.validate().unwrap();
        g.validate().unwrap();
    }

    #[test]
    fn json_fills_missing_keys_and_round_trips() {
        let cfg: TrainConfig = serde_json::from_str(r#"{"model":"gin","hidden":32}"#).unwrap();
        assert_eq!(
            cfg,
            TrainConfig {
                hidden: 32,
                ..TrainConfig::gin()
            }
        );
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        for doc in [
            r#"{"model":"gin","learning_rate":0.1}"#,
            r#"{"model":"mlp"}"#,
            r#"{"lr":0.1}"#,
            r#"{"model":"gin","patience":200}"#,
            r#"{"model":"cnn","batch_size":0}"#,
            r#"{"model":"cnn","clip_norm":-1}"#,
        ] {
            assert!(serde_json::from_str::<TrainConfig>(doc).is_err(), "{doc}");
        }
    }
}
