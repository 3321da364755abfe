use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub type ParamId = usize;

/// A named tensor owned by a [`ParamStore`].
///
/// Trainable parameters receive gradients; buffers (running statistics)
/// are carried along for checkpointing but never updated by the optimizer.
#[derive(Clone, Debug)]
pub struct Param {
    pub id: ParamId,
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub trainable: bool,
}

#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) -> ParamId {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter name `{name}`"
        );
        let id = self.params.len();
        let grad = Tensor::zeros(value.shape());
        self.index.insert(name.clone(), id);
        self.params.push(Param {
            id,
            name,
            value,
            grad,
            trainable,
        });
        id
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id].value
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.id_of(name).map(|id| &self.params[id])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Total element count of trainable parameters.
    pub fn num_trainable(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.numel())
            .sum()
    }

    /// Replaces the value of a named tensor, checking the shape.
    pub fn set_value(&mut self, name: &str, value: Tensor) -> Result<()> {
        let id = self
            .id_of(name)
            .ok_or_else(|| Error::IncompatibleCheckpoint {
                tensor: name.to_string(),
                detail: "is not part of this model".into(),
            })?;
        let p = &mut self.params[id];
        if p.value.shape() != value.shape() {
            return Err(Error::IncompatibleCheckpoint {
                tensor: name.to_string(),
                detail: format!(
                    "has shape {:?}, model expects {:?}",
                    value.shape(),
                    p.value.shape()
                ),
            });
        }
        p.value = value;
        Ok(())
    }
}
