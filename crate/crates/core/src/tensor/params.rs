use super::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Handle to an entry of a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq)]
struct Entry<T> {
    name: String,
    value: Tensor<T>,
    grad: Option<Tensor<T>>,
    trainable: bool,
}

/// Named tensors owned by a model: trainable parameters plus non-trainable
/// buffers such as batch-norm running statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet<T> {
    entries: Vec<Entry<T>>,
}

/// Gradients produced by one backward pass, keyed by parameter.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    pub(crate) entries: Vec<(ParamId, Tensor<T>)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.entries.iter().find(|(p, _)| *p == id).map(|(_, g)| g)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor<T>)> {
        self.entries.iter().map(|(p, g)| (*p, g))
    }
}

impl<T: Scalar> Default for ParamSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        self.push(name.into(), value, true)
    }

    /// Adds a non-trainable buffer.
    pub fn add_buffer(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        self.push(name.into(), value, false)
    }

    /// Adds a trainable tensor drawn uniformly from `±sqrt(1 / fan_in)`.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        shape: impl Into<Vec<usize>>,
        fan_in: usize,
        rng: &mut Rng,
    ) -> ParamId {
        let shape = shape.into();
        let bound = (1.0 / fan_in.max(1) as f64).sqrt();
        let numel = shape.iter().product();
        let data = (0..numel).map(|_| T::of(rng.uniform(-bound, bound))).collect();
        let value = Tensor::new(shape, data).expect("shape and data agree");
        self.add(name, value)
    }

    fn push(&mut self, name: String, value: Tensor<T>, trainable: bool) -> ParamId {
        assert!(self.find(&name).is_none(), "duplicate parameter {name}");
        self.entries.push(Entry {
            name,
            value,
            grad: None,
            trainable,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn trainable_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.ids().filter(|&id| self.entries[id.0].trainable)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id.0].trainable
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.entries[id.0].value
    }

    /// Replaces a value, keeping the shape.
    pub fn set_value(&mut self, id: ParamId, value: Tensor<T>) -> Result<()> {
        let entry = &mut self.entries[id.0];
        if entry.value.shape() != value.shape() {
            return Err(Error::shape("set_value", entry.value.shape(), value.shape()));
        }
        entry.value = value;
        Ok(())
    }

    pub fn grad(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.entries[id.0].grad.as_ref()
    }

    pub fn grad_mut(&mut self, id: ParamId) -> Option<&mut Tensor<T>> {
        self.entries[id.0].grad.as_mut()
    }

    pub fn set_grad(&mut self, id: ParamId, grad: Tensor<T>) -> Result<()> {
        let entry = &mut self.entries[id.0];
        if entry.value.shape() != grad.shape() {
            return Err(Error::shape("set_grad", entry.value.shape(), grad.shape()));
        }
        entry.grad = Some(grad);
        Ok(())
    }

    /// Adds a backward pass's gradients into the stored buffers.
    pub fn accumulate(&mut self, grads: &Gradients<T>) -> Result<()> {
        for (id, g) in grads.iter() {
            let entry = self
                .entries
                .get_mut(id.0)
                .ok_or_else(|| Error::contract("gradient for unknown parameter"))?;
            if entry.value.shape() != g.shape() {
                return Err(Error::shape("accumulate", entry.value.shape(), g.shape()));
            }
            match &mut entry.grad {
                Some(acc) => acc.add_assign(g),
                slot @ None => *slot = Some(g.clone()),
            }
        }
        Ok(())
    }

    /// Clears every gradient buffer.
    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            e.grad = None;
        }
    }

    /// Number of trainable scalars.
    pub fn num_trainable(&self) -> usize {
        self.entries.iter().filter(|e| e.trainable).map(|e| e.value.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|e| Entry {
                    name: e.name.clone(),
                    value: e.value.cast(),
                    grad: None,
                    trainable: e.trainable,
                })
                .collect(),
        }
    }
}
