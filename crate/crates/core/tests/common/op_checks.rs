//! Gradient-check cases for every differentiable tape operation and for
//! both full models. Each case returns the worst entry it found.

use std::rc::Rc;

use super::gradcheck::{check, Worst};
use domnet::graph::{erdos_renyi, GenParams};
use domnet::models::{CnnModel, GinConfig, GinModel, Surrogate};
use domnet::rng::Rng;
use domnet::tensor::{BatchNormMode, NeighborIndex, ParamSet, Tensor};
use domnet::Mode;

fn random(rng: &mut Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
}

pub fn matmul_and_linear() -> Vec<(&'static str, Worst)> {
    let mut out = Vec::new();
    let mut rng = Rng::new(1);
    let mut ps = ParamSet::new();
    let a = ps.add("a", random(&mut rng, &[3, 4]));
    let b = ps.add("b", random(&mut rng, &[4, 2]));
    let bias = ps.add("bias", random(&mut rng, &[2]));
    let target = random(&mut rng, &[3, 2]);
    out.push((
        "matmul",
        check(&ps, 100, 0, |t, p| {
            let (va, vb) = (t.param(p, a), t.param(p, b));
            let y = t.matmul(va, vb)?;
            let tv = t.constant(target.clone());
            t.mse_loss(y, tv)
        }),
    ));
    out.push((
        "linear",
        check(&ps, 100, 0, |t, p| {
            let (va, vb, vc) = (t.param(p, a), t.param(p, b), t.param(p, bias));
            let y = t.linear(va, vb, vc)?;
            let y = t.mul(y, y)?;
            Ok(t.sum_all(y))
        }),
    ));
    out
}

pub fn elementwise_ops() -> Vec<(&'static str, Worst)> {
    let mut out = Vec::new();
    let mut rng = Rng::new(2);
    let mut ps = ParamSet::new();
    let x = ps.add("x", random(&mut rng, &[2, 5]));
    let y = ps.add("y", random(&mut rng, &[2, 5]));
    let s = ps.add("s", Tensor::scalar(0.3));
    out.push((
        "add/mul/scale/add_scalar/relu/mean_all",
        check(&ps, 100, 0, |t, p| {
            let (vx, vy, vs) = (t.param(p, x), t.param(p, y), t.param(p, s));
            let one_plus = t.add_scalar(vs, 1.0);
            let z = t.scale(vx, one_plus)?;
            let z = t.add(z, vy)?;
            let z = t.relu(z);
            let z = t.mul(z, vx)?;
            t.mean_all(z)
        }),
    ));
    out
}

pub fn conv_pool_reshape() -> Vec<(&'static str, Worst)> {
    let mut out = Vec::new();
    let mut rng = Rng::new(3);
    let mut ps = ParamSet::new();
    let x = ps.add("x", random(&mut rng, &[2, 2, 7, 6]));
    let k = ps.add("k", random(&mut rng, &[3, 2, 3, 3]));
    let b = ps.add("b", random(&mut rng, &[3]));
    let w = ps.add("w", random(&mut rng, &[3 * 2 * 2, 1]));
    out.push((
        "conv2d/maxpool/reshape",
        check(&ps, 200, 0, |t, p| {
            let (vx, vk, vb) = (t.param(p, x), t.param(p, k), t.param(p, b));
            let y = t.conv2d(vx, vk, vb)?; // [2, 3, 5, 4]
            let y = t.relu(y);
            let y = t.maxpool2d(y)?; // [2, 3, 2, 2]
            let y = t.reshape(y, [2, 12])?;
            let vw = t.param(p, w);
            let y = t.matmul(y, vw)?;
            let y = t.mul(y, y)?;
            Ok(t.sum_all(y))
        }),
    ));
    out
}

pub fn batchnorm_both_modes() -> Vec<(&'static str, Worst)> {
    let mut out = Vec::new();
    let mut rng = Rng::new(4);
    let mut ps = ParamSet::new();
    let x = ps.add("x", random(&mut rng, &[6, 3]));
    let gamma = ps.add("gamma", random(&mut rng, &[3]));
    let beta = ps.add("beta", random(&mut rng, &[3]));
    let mean = ps.add_buffer("mean", random(&mut rng, &[3]));
    let var = ps.add_buffer("var", Tensor::from_f64([3], &[0.5, 1.5, 2.0]).unwrap());
    let w = random(&mut rng, &[6, 3]);
    for train in [true, false] {
        out.push((
            if train { "batchnorm/train" } else { "batchnorm/eval" },
            check(&ps, 100, 0, |t, p| {
                let (vx, vg, vb) = (t.param(p, x), t.param(p, gamma), t.param(p, beta));
                let mode = if train {
                    BatchNormMode::Train
                } else {
                    BatchNormMode::Eval {
                        mean: t.param(p, mean),
                        var: t.param(p, var),
                    }
                };
                let y = t.batchnorm(vx, vg, vb, mode, 1e-5)?;
                let wv = t.constant(w.clone());
                let y = t.mul(y, wv)?;
                let y = t.mul(y, y)?;
                Ok(t.sum_all(y))
            }),
        ));
    }
    out
}

pub fn pooling_concat_and_neighbor_sum() -> Vec<(&'static str, Worst)> {
    let mut out = Vec::new();
    let mut rng = Rng::new(5);
    let graphs = [
        erdos_renyi(&GenParams::ErdosRenyi { n: 4, p: 0.6, seed: 1 }).unwrap(),
        erdos_renyi(&GenParams::ErdosRenyi { n: 3, p: 0.9, seed: 2 }).unwrap(),
    ];
    let index = Rc::new(NeighborIndex::from_graphs(&graphs));
    let offsets: Rc<[usize]> = Rc::from(vec![0, 4, 7]);
    let mut ps = ParamSet::new();
    let x = ps.add("x", random(&mut rng, &[7, 3]));
    let w = ps.add("w", random(&mut rng, &[6, 1]));
    let target = random(&mut rng, &[2, 1]);
    out.push((
        "segment/concat/neighbor_sum",
        check(&ps, 100, 0, |t, p| {
            let vx = t.param(p, x);
            let h = t.neighbor_sum(vx, index.clone())?;
            let h = t.add(h, vx)?;
            let mean = t.segment_mean(h, offsets.clone())?;
            let sum = t.segment_sum(h, offsets.clone())?;
            let z = t.concat_cols(mean, sum)?;
            let vw = t.param(p, w);
            let y = t.matmul(z, vw)?;
            let tv = t.constant(target.clone());
            t.mse_loss(y, tv)
        }),
    ));
    out.push((
        "sum_rows/mean_rows",
        check(&ps, 100, 0, |t, p| {
            let vx = t.param(p, x);
            let a = t.sum_rows(vx)?;
            let b = t.mean_rows(vx)?;
            let z = t.mul(a, b)?;
            Ok(t.sum_all(z))
        }),
    ));
    out
}

pub fn mse_of_linear_map() -> Vec<(&'static str, Worst)> {
    let mut out = Vec::new();
    // loss = mse(W x, y)
    let mut rng = Rng::new(6);
    let mut ps = ParamSet::new();
    let w = ps.add("W", random(&mut rng, &[4, 3]));
    let x = random(&mut rng, &[3, 1]);
    let y = random(&mut rng, &[4, 1]);
    let worst = check(&ps, 100, 0, |t, p| {
        let vw = t.param(p, w);
        let vx = t.constant(x.clone());
        let pred = t.matmul(vw, vx)?;
        let vy = t.constant(y.clone());
        t.mse_loss(pred, vy)
    });
    out.push(("mse(Wx, y)", worst));
    out
}

pub fn cnn_model() -> Vec<(&'static str, Worst)> {
    let g = erdos_renyi(&GenParams::ErdosRenyi { n: 8, p: 0.5, seed: 21 }).unwrap();
    let model = CnnModel::<f64>::new(7);
    let worst = check(model.params(), 6, 3, |t, p| {
        Ok(model.forward_with(t, p, &[&g], Mode::Train)?.output)
    });
    vec![("cnn", worst)]
}

pub fn gin_model() -> Vec<(&'static str, Worst)> {
    let g = erdos_renyi(&GenParams::ErdosRenyi { n: 6, p: 0.5, seed: 4 }).unwrap();
    let h = erdos_renyi(&GenParams::ErdosRenyi { n: 5, p: 0.4, seed: 5 }).unwrap();
    let config = GinConfig {
        hidden: 8,
        ..GinConfig::default()
    };
    let model = GinModel::<f64>::new(config, 9).unwrap();
    let mut out = Vec::new();
    for mode in [Mode::Train, Mode::Eval] {
        let worst = check(model.params(), 64, 1, |t, p| {
            let y = model.forward_with(t, p, &[&g, &h], mode)?.output;
            let w = t.constant(Tensor::from_f64([2, 1], &[1.0, -0.5]).unwrap());
            let y = t.mul(y, w)?;
            Ok(t.sum_all(y))
        });
        out.push((if mode == Mode::Train { "gin/train" } else { "gin/eval" }, worst));
    }
    // full width on a single 6-vertex graph
    let g = erdos_renyi(&GenParams::ErdosRenyi { n: 6, p: 0.5, seed: 12 }).unwrap();
    let model = GinModel::<f64>::new(GinConfig::default(), 2).unwrap();
    let worst = check(model.params(), 32, 5, |t, p| {
        Ok(model.forward_with(t, p, &[&g], Mode::Eval)?.output)
    });
    out.push(("gin/single", worst));
    out
}

pub fn all() -> Vec<(&'static str, Worst)> {
    [
        matmul_and_linear,
        elementwise_ops,
        conv_pool_reshape,
        batchnorm_both_modes,
        pooling_concat_and_neighbor_sum,
        mse_of_linear_map,
        cnn_model,
        gin_model,
    ]
    .into_iter()
    .flat_map(|case| case())
    .collect()
}
