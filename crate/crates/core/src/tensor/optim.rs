use super::{ParamId, ParamSet, Scalar, Tensor};
use crate::error::{Error, Result};

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: Vec<(ParamId, Tensor<T>, Tensor<T>)>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update to every trainable parameter from its stored gradient.
    pub fn step(&mut self, params: &mut ParamSet<T>) -> Result<()> {
        let ids: Vec<ParamId> = params.trainable_ids().collect();
        if let Some(&id) = ids.iter().find(|&&id| params.grad(id).is_none()) {
            return Err(Error::contract(format!(
                "parameter {} has no gradient",
                params.name(id)
            )));
        }
        if self.moments.is_empty() {
            self.moments = ids
                .iter()
                .map(|&id| {
                    let shape = params.value(id).shape().to_vec();
                    (id, Tensor::zeros(shape.clone()), Tensor::zeros(shape))
                })
                .collect();
        } else if self.moments.len() != ids.len()
            || self
                .moments
                .iter()
                .zip(&ids)
                .any(|((mid, m, _), &id)| *mid != id || m.shape() != params.value(id).shape())
        {
            return Err(Error::contract("Adam moments do not match the parameter set"));
        }

        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let correction1 = T::of(1.0 - self.beta1.powi(t));
        let correction2 = T::of(1.0 - self.beta2.powi(t));
        let (lr, eps) = (T::of(self.lr), T::of(self.eps));
        for (id, m, v) in &mut self.moments {
            let grad = params.grad(*id).expect("checked above").data().to_vec();
            let value = params.value_mut(*id).data_mut();
            for (((p, g), mi), vi) in value.iter_mut().zip(grad).zip(m.data_mut()).zip(v.data_mut()) {
                *mi = b1 * *mi + (T::one() - b1) * g;
                *vi = b2 * *vi + (T::one() - b2) * g * g;
                let m_hat = *mi / correction1;
                let v_hat = *vi / correction2;
                *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
///
/// Returns the factor applied (1 when no clipping was needed).
pub fn clip_grad_norm<T: Scalar>(params: &mut ParamSet<T>, max_norm: f64) -> Result<f64> {
    if !(max_norm > 0.0) {
        return Err(Error::param(format!("max_norm must be positive, got {max_norm}")));
    }
    let ids: Vec<ParamId> = params.trainable_ids().collect();
    let total: f64 = ids
        .iter()
        .filter_map(|&id| params.grad(id))
        .flat_map(|g| g.data().iter().map(|x| x.as_f64() * x.as_f64()))
        .sum();
    let norm = total.sqrt();
    if norm <= max_norm {
        return Ok(1.0);
    }
    let factor = max_norm / norm;
    let f = T::of(factor);
    for id in ids {
        if let Some(g) = params.grad_mut(id) {
            g.data_mut().iter_mut().for_each(|x| *x = *x * f);
        }
    }
    Ok(factor)
}
