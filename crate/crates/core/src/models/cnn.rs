//! Convolutional regressor over adjacency images.
//!
//! Pipeline for one `64 x 64` single-channel image (pixels divided by 255):
//!
//! ```text
//! conv 3x3 (32) -> relu -> maxpool 2x2    64 -> 62 -> 31
//! conv 3x3 (64) -> relu -> maxpool 2x2    31 -> 29 -> 14
//! conv 3x3 (64) -> relu -> flatten        14 -> 12, 12 * 12 * 64 = 9216
//! dense 9216 -> 64 -> relu -> dense 64 -> 1
//! ```

use super::{Forward, OutputAffine, Surrogate};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::Rng;
use crate::tensor::{Checkpoint, Mode, ParamId, ParamSet, Scalar, Tape, Tensor};

pub const IMAGE_SIZE: usize = 64;
pub const KIND: &str = "cnn-v1";

const CONV_CHANNELS: [usize; 3] = [32, 64, 64];
const KERNEL: usize = 3;
const DENSE_WIDTH: usize = 64;

/// Spatial size after the conv/pool stack.
const fn trunk_side() -> usize {
    let s = (IMAGE_SIZE - KERNEL + 1) / 2;
    let s = (s - KERNEL + 1) / 2;
    s - KERNEL + 1
}

pub const FLATTEN_DIM: usize = trunk_side() * trunk_side() * CONV_CHANNELS[2];
const _: () = assert!(FLATTEN_DIM == 9216);

/// Zero-padded adjacency matrix with scaled degrees on the diagonal.
///
/// `pixels[i][j] = 255` for every edge, `pixels[i][i] = 255 * deg(i) / max(1, n - 1)`,
/// and every cell outside the top-left `n x n` block is 0.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyImage {
    pixels: Vec<f64>,
}

impl AdjacencyImage {
    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pixels[i * IMAGE_SIZE + j]
    }
}

pub fn encode_adjacency_image(g: &Graph) -> Result<AdjacencyImage> {
    let n = g.n();
    if n > IMAGE_SIZE {
        return Err(Error::param(format!(
            "graph with {n} vertices does not fit a {IMAGE_SIZE}x{IMAGE_SIZE} image"
        )));
    }
    let mut pixels = vec![0.0; IMAGE_SIZE * IMAGE_SIZE];
    let denom = n.saturating_sub(1).max(1) as f64;
    for v in 0..n {
        let row = &mut pixels[v * IMAGE_SIZE..(v + 1) * IMAGE_SIZE];
        for &u in g.neighbors(v) {
            row[u] = 255.0;
        }
        row[v] = 255.0 * g.neighbors(v).len() as f64 / denom;
    }
    Ok(AdjacencyImage { pixels })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CnnModel<T: Scalar> {
    params: ParamSet<T>,
    conv: [(ParamId, ParamId); 3],
    dense1: (ParamId, ParamId),
    dense2: (ParamId, ParamId),
    affine: OutputAffine,
}

impl<T: Scalar> CnnModel<T> {
    /// Fresh model with uniform `±sqrt(1 / fan_in)` initialization.
    pub fn new(seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let mut params = ParamSet::new();
        let mut in_ch = 1;
        let conv = CONV_CHANNELS.map(|out_ch| {
            let i = params.len() / 2 + 1;
            let fan_in = in_ch * KERNEL * KERNEL;
            let w = params.add_uniform(
                format!("conv{i}.weight"),
                [out_ch, in_ch, KERNEL, KERNEL],
                fan_in,
                &mut rng,
            );
            let b = params.add_uniform(format!("conv{i}.bias"), [out_ch], fan_in, &mut rng);
            in_ch = out_ch;
            (w, b)
        });
        let dense1 = (
            params.add_uniform("dense1.weight", [FLATTEN_DIM, DENSE_WIDTH], FLATTEN_DIM, &mut rng),
            params.add_uniform("dense1.bias", [DENSE_WIDTH], FLATTEN_DIM, &mut rng),
        );
        let dense2 = (
            params.add_uniform("dense2.weight", [DENSE_WIDTH, 1], DENSE_WIDTH, &mut rng),
            params.add_uniform("dense2.bias", [1], DENSE_WIDTH, &mut rng),
        );
        let affine = OutputAffine::build(&mut params);
        Self {
            params,
            conv,
            dense1,
            dense2,
            affine,
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(KIND)?;
        let loaded: ParamSet<T> = ck.to_params()?;
        let mut model = Self::new(0);
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

    /// Forward pass over pre-encoded images.
    pub fn forward_images<'p>(
        &self,
        tape: &mut Tape<'p, T>,
        params: &'p ParamSet<T>,
        images: &[&AdjacencyImage],
    ) -> Result<Forward> {
        let batch = images.len();
        let scale = T::of(1.0 / 255.0);
        let data: Vec<T> = images
            .iter()
            .flat_map(|img| img.pixels.iter().map(move |&p| T::of(p) * scale))
            .collect();
        let input = Tensor::new([batch, 1, IMAGE_SIZE, IMAGE_SIZE], data)?;
        let mut h = tape.constant(input);
        for (i, &(w, b)) in self.conv.iter().enumerate() {
            let (w, b) = (tape.param(params, w), tape.param(params, b));
            h = tape.conv2d(h, w, b)?;
            h = tape.relu(h);
            if i < 2 {
                h = tape.maxpool2d(h)?;
            }
        }
        h = tape.reshape(h, [batch, FLATTEN_DIM])?;
        let (w, b) = (tape.param(params, self.dense1.0), tape.param(params, self.dense1.1));
        h = tape.linear(h, w, b)?;
        h = tape.relu(h);
        let (w, b) = (tape.param(params, self.dense2.0), tape.param(params, self.dense2.1));
        let out = tape.linear(h, w, b)?;
        let out = self.affine.apply(tape, params, out)?;
        Ok(Forward::new(out))
    }
}

impl<T: Scalar> Surrogate<T> for CnnModel<T> {
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
        _mode: Mode,
    ) -> Result<Forward> {
        let images = graphs
            .iter()
            .map(|g| encode_adjacency_image(g))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&AdjacencyImage> = images.iter().collect();
        self.forward_images(tape, params, &refs)
    }

    fn config_json(&self) -> serde_json::Value {
        serde_json::json!({
            "image_size": IMAGE_SIZE,
            "conv_channels": CONV_CHANNELS,
            "dense_width": DENSE_WIDTH,
        })
    }

    fn output_affine(&self) -> OutputAffine {
        self.affine
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{erdos_renyi, GenParams};

    #[test]
    fn edgeless_graph_encodes_to_zeros() {
        let img = encode_adjacency_image(&Graph::empty(4)).unwrap();
        assert!(img.pixels().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn k2_encoding() {
        let img = encode_adjacency_image(&Graph::complete(2)).unwrap();
        assert_eq!(img.get(0, 1), 255.0);
        assert_eq!(img.get(1, 0), 255.0);
        assert_eq!(img.get(0, 0), 255.0);
        assert_eq!(img.get(1, 1), 255.0);
        assert_eq!(img.pixels().iter().filter(|&&p| p != 0.0).count(), 4);
    }

    #[test]
    fn permuted_graph_permutes_image() {
        let g = erdos_renyi(&GenParams::ErdosRenyi { n: 9, p: 0.4, seed: 2 }).unwrap();
        let perm = [3, 0, 8, 1, 7, 2, 6, 4, 5];
        let a = encode_adjacency_image(&g).unwrap();
        let b = encode_adjacency_image(&g.permute(&perm).unwrap()).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(a.get(i, j), b.get(perm[i], perm[j]));
            }
        }
    }

    #[test]
    fn encoding_determines_the_graph() {
        let g = erdos_renyi(&GenParams::ErdosRenyi { n: 64, p: 0.3, seed: 5 }).unwrap();
        let img = encode_adjacency_image(&g).unwrap();
        let edges: Vec<_> = (0..64)
            .flat_map(|i| (i + 1..64).map(move |j| (i, j)))
            .filter(|&(i, j)| img.get(i, j) == 255.0)
            .collect();
        assert_eq!(Graph::from_edges(64, &edges).unwrap(), g);
    }

    #[test]
    fn oversized_graph_is_rejected() {
        assert!(encode_adjacency_image(&Graph::empty(65)).is_err());
    }

    #[test]
    fn parameter_shapes() {
        let m = CnnModel::<f64>::new(1);
        let p = m.params();
        let shape = |name: &str| p.value(p.find(name).unwrap()).shape().to_vec();
        assert_eq!(shape("conv1.weight"), [32, 1, 3, 3]);
        assert_eq!(shape("conv2.weight"), [64, 32, 3, 3]);
        assert_eq!(shape("conv3.weight"), [64, 64, 3, 3]);
        assert_eq!(shape("dense1.weight"), [9216, 64]);
        assert_eq!(shape("dense2.weight"), [64, 1]);
        assert_eq!(shape("dense2.bias"), [1]);
    }

    #[test]
    fn zero_model_predicts_zero() {
        let mut m = CnnModel::<f64>::new(1);
        for id in m.params().ids().collect::<Vec<_>>() {
            let shape = m.params().value(id).shape().to_vec();
            m.params_mut().set_value(id, Tensor::zeros(shape)).unwrap();
        }
        let g = Graph::cycle(7);
        assert_eq!(m.predict(&[&g]).unwrap(), vec![0.0]);
    }

    #[test]
    fn predictions_are_deterministic() {
        let m = CnnModel::<f64>::new(3);
        let g = Graph::cycle(10);
        assert_eq!(m.predict(&[&g, &g]).unwrap()[0], m.predict(&[&g]).unwrap()[0]);
    }
}
