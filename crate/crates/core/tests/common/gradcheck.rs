//! Central finite-difference gradient checks.
//!
//! The numerical side only ever evaluates the forward pass, so it shares no
//! code with the backward rules it validates.

use domnet::rng::Rng;
use domnet::tensor::{ParamId, ParamSet, Tape, Var};
use domnet::Result;

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
/// Magnitude below which errors are measured absolutely.
pub const FLOOR: f64 = 1e-6;

#[derive(Debug)]
pub struct Worst {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(FLOOR)
}

/// Compares analytic and numerical gradients of the one-element output of
/// `f`. Tensors larger than `max_per_tensor` are checked on a seeded random
/// sample of entries. Returns the worst entry.
pub fn check<F>(params: &ParamSet<f64>, max_per_tensor: usize, seed: u64, f: F) -> Worst
where
    F: for<'p> Fn(&mut Tape<'p, f64>, &'p ParamSet<f64>) -> Result<Var>,
{
    let analytic = {
        let mut tape = Tape::new();
        let out = f(&mut tape, params).expect("forward");
        tape.backward(out).expect("backward")
    };
    let eval = |ps: &ParamSet<f64>| -> f64 {
        let mut tape = Tape::new();
        let out = f(&mut tape, ps).expect("forward");
        tape.value(out).item().expect("scalar output")
    };

    let mut rng = Rng::new(seed);
    let mut worst = Worst {
        param: String::new(),
        index: 0,
        analytic: 0.0,
        numeric: 0.0,
        rel_error: 0.0,
    };
    let ids: Vec<ParamId> = params.trainable_ids().collect();
    let mut probe = params.clone();
    for id in ids {
        let len = params.value(id).len();
        let indices: Vec<usize> = if len <= max_per_tensor {
            (0..len).collect()
        } else {
            (0..max_per_tensor).map(|_| rng.below(len as u64) as usize).collect()
        };
        for i in indices {
            let original = params.value(id).data()[i];
            probe.value_mut(id).data_mut()[i] = original + STEP;
            let up = eval(&probe);
            probe.value_mut(id).data_mut()[i] = original - STEP;
            let down = eval(&probe);
            probe.value_mut(id).data_mut()[i] = original;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic.get(id).map_or(0.0, |g| g.data()[i]);
            let err = rel_error(a, numeric);
            if err > worst.rel_error || worst.param.is_empty() {
                worst = Worst {
                    param: params.name(id).to_string(),
                    index: i,
                    analytic: a,
                    numeric,
                    rel_error: err,
                };
            }
        }
    }
    worst
}
