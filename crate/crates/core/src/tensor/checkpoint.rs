//! Parameter checkpoints.
//!
//! A checkpoint is one JSON object:
//!
//! ```json
//! {
//!   "format": "domnet-checkpoint/1",
//!   "kind": "gin-v1",
//!   "meta": { ... model configuration ... },
//!   "tensors": [
//!     { "name": "gin0.lin1.w", "shape": [64, 64], "trainable": true, "data": [ ... ] }
//!   ]
//! }
//! ```
//!
//! `data` is row-major. Values are written in shortest round-trip decimal
//! form, so loading a saved checkpoint reproduces every value bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParamSet, Scalar, Tensor};
use crate::error::{Error, Result};
use crate::fsutil;

pub const FORMAT: &str = "domnet-checkpoint/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub kind: String,
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn from_params<T: Scalar>(kind: &str, meta: serde_json::Value, params: &ParamSet<T>) -> Self {
        let tensors = params
            .ids()
            .map(|id| {
                let value = params.value(id);
                TensorRecord {
                    name: params.name(id).to_string(),
                    shape: value.shape().to_vec(),
                    trainable: params.is_trainable(id),
                    data: value.data().iter().map(|x| x.as_f64()).collect(),
                }
            })
            .collect();
        Self {
            format: FORMAT.to_string(),
            kind: kind.to_string(),
            meta,
            tensors,
        }
    }

    pub fn to_params<T: Scalar>(&self) -> Result<ParamSet<T>> {
        let mut params = ParamSet::new();
        for rec in &self.tensors {
            if params.find(&rec.name).is_some() {
                return Err(Error::Integrity(format!("duplicate tensor {}", rec.name)));
            }
            let value = Tensor::from_f64(rec.shape.clone(), &rec.data)?;
            if rec.trainable {
                params.add(rec.name.clone(), value);
            } else {
                params.add_buffer(rec.name.clone(), value);
            }
        }
        Ok(params)
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.format != FORMAT {
            return Err(Error::Integrity(format!("unknown checkpoint format {:?}", self.format)));
        }
        if self.kind != kind {
            return Err(Error::Integrity(format!(
                "checkpoint kind {:?}, expected {kind:?}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fsutil::write_atomic(path.as_ref(), text.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = Rng::new(4);
        let mut ps = ParamSet::<f64>::new();
        ps.add_uniform("w", [3, 5], 3, &mut rng);
        ps.add_buffer("running", Tensor::from_f64([2], &[0.1 + 0.2, 1e-300]).unwrap());
        ps.add("tiny", Tensor::scalar(f64::MIN_POSITIVE / 3.0));
        let ck = Checkpoint::from_params("test-v1", serde_json::json!({"d": 3}), &ps);
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        let restored: ParamSet<f64> = back.to_params().unwrap();
        assert_eq!(restored, ps);
        assert!(back.expect_kind("test-v1").is_ok());
        assert!(back.expect_kind("gin-v1").is_err());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_shapes() {
        let bad = r#"{"format":"domnet-checkpoint/1","kind":"k","meta":null,"tensors":[],"extra":1}"#;
        assert!(Checkpoint::from_json(bad).is_err());
        let ck = Checkpoint::from_json(
            r#"{"format":"domnet-checkpoint/1","kind":"k","meta":null,
                "tensors":[{"name":"a","shape":[2],"trainable":true,"data":[1.0]}]}"#,
        )
        .unwrap();
        assert!(ck.to_params::<f64>().is_err());
    }
}
