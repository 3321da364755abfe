//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every primitive pushes one node holding its output value, the handles of
//! its inputs and a boxed backward rule. [`Tape::backward`] walks the nodes in
//! reverse order once, accumulating gradients into leaves and into the
//! [`ParamStore`].

mod params;

pub use params::{Param, ParamId, ParamStore};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Vector-Jacobian product of one primitive.
///
/// Returns one entry per input; entries for inputs with `needs[i] == false`
/// may be `None`.
pub(crate) trait BackwardOp {
    fn backward(
        &self,
        grad_out: &Tensor,
        inputs: &[&Tensor],
        output: &Tensor,
        needs: &[bool],
    ) -> Vec<Option<Tensor>>;
}

struct Node {
    value: Tensor,
    inputs: Vec<Var>,
    op: Option<Box<dyn BackwardOp>>,
    param: Option<ParamId>,
    requires_grad: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BackwardStats {
    pub ops_visited: usize,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    leaf_grads: Vec<Option<Tensor>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A constant or differentiable input that is not a parameter.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            inputs: Vec::new(),
            op: None,
            param: None,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Snapshot of a parameter; its gradient flows back into the store.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let p = store.get(id);
        self.nodes.push(Node {
            value: p.value.clone(),
            inputs: Vec::new(),
            op: None,
            param: Some(id),
            requires_grad: p.trainable,
        });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn push(&mut self, value: Tensor, inputs: Vec<Var>, op: Box<dyn BackwardOp>) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            inputs,
            op: requires_grad.then_some(op),
            param: None,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient retained for a non-parameter leaf after [`Tape::backward`].
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.leaf_grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Back-propagates from the scalar `loss`, adding into parameter grads.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<BackwardStats> {
        let node = &self.nodes[loss.0];
        if node.value.numel() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                node.value.shape()
            )));
        }
        if !node.requires_grad {
            return Err(Error::Usage(
                "backward on a tensor detached from every parameter".into(),
            ));
        }

        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        self.leaf_grads = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(node.value.shape(), 1.0));
        let mut stats = BackwardStats::default();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match (&node.op, node.param) {
                (Some(op), _) => {
                    stats.ops_visited += 1;
                    let inputs: Vec<&Tensor> =
                        node.inputs.iter().map(|v| &self.nodes[v.0].value).collect();
                    let needs: Vec<bool> = node
                        .inputs
                        .iter()
                        .map(|v| self.nodes[v.0].requires_grad)
                        .collect();
                    let in_grads = op.backward(&g, &inputs, &node.value, &needs);
                    debug_assert_eq!(in_grads.len(), node.inputs.len());
                    for ((v, need), ig) in node.inputs.iter().zip(&needs).zip(in_grads) {
                        if !need {
                            continue;
                        }
                        let Some(ig) = ig else { continue };
                        match &mut grads[v.0] {
                            Some(acc) => acc.add_assign(&ig),
                            slot @ None => *slot = Some(ig),
                        }
                    }
                }
                (None, Some(pid)) => {
                    store.get_mut(pid).grad.add_assign(&g);
                }
                (None, None) => {
                    self.leaf_grads[i] = Some(g);
                }
            }
        }
        Ok(stats)
    }
}
