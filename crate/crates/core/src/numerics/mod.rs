//! Tensor arithmetic, reverse-mode autodiff, and the optimizer/scheduler
//! machinery used by the training loops. All math runs in `f64`.

pub mod conv;
mod graph;
mod optim;
mod sched;
mod tensor;

pub use graph::{Grads, Graph, Var};
pub use optim::AdamState;
pub use sched::{EarlyStopState, PlateauState};
pub use tensor::Tensor;

use std::collections::HashMap;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("contract error: {0}")]
    Contract(String),
    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },
}

/// Index of a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named, ordered collection of trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tracked parameter. Names must be unique.
    pub fn insert(&mut self, name: &str, mut t: Tensor) -> Result<ParamId, NumericsError> {
        if self.index.contains_key(name) {
            return Err(NumericsError::Contract(format!("duplicate parameter `{name}`")));
        }
        t.set_requires_grad(true);
        self.index.insert(name.to_string(), self.tensors.len());
        self.names.push(name.to_string());
        self.tensors.push(t);
        Ok(ParamId(self.tensors.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    /// Total element count over all parameters.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Freezes every parameter whose name starts with `prefix`; frozen
    /// parameters carry no gradient buffer.
    pub fn freeze_prefix(&mut self, prefix: &str) {
        for (n, t) in self.names.iter().zip(&mut self.tensors) {
            if n.starts_with(prefix) {
                t.set_requires_grad(false);
            }
        }
    }

    pub fn unfreeze_prefix(&mut self, prefix: &str) {
        for (n, t) in self.names.iter().zip(&mut self.tensors) {
            if n.starts_with(prefix) {
                t.set_requires_grad(true);
            }
        }
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    /// Copies every parameter of `other` whose name starts with `prefix`
    /// into this store under the same name, keeping the frozen state of `other`.
    pub fn extend_from(&mut self, other: &ParamStore, prefix: &str) -> Result<(), NumericsError> {
        for (_, name, t) in other.iter().filter(|(_, n, _)| n.starts_with(prefix)) {
            let id = self.insert(name, Tensor::new(t.shape(), t.data().to_vec())?)?;
            self.get_mut(id).set_requires_grad(t.requires_grad());
        }
        Ok(())
    }

    pub(crate) fn tensors_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter_mut())
    }
}
