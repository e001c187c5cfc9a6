use std::collections::HashMap;

use crate::error::TensorError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Backward rule recorded on an op's output.
///
/// `parents` returns the op inputs in a fixed order; `backward` returns one
/// gradient buffer per parent, aligned with that order, given the gradient
/// of the output.
pub trait GradFn<T: Scalar>: Send + Sync {
    fn parents(&self) -> Vec<Tensor<T>>;
    fn backward(&self, grad_out: &[T]) -> Vec<Vec<T>>;
}

impl<T: Scalar> Tensor<T> {
    /// Reverse-mode sweep from a scalar loss. Accumulates gradients into
    /// every tracked tensor reachable through recorded operations.
    ///
    /// Fails if the tensor is not scalar, or if its gradient is already set
    /// (backward was already run and not reset via `clear_grad`).
    pub fn backward(&self) -> Result<(), TensorError> {
        if !self.shape().is_scalar() {
            return Err(TensorError::Precondition(format!(
                "backward requires a scalar loss, got shape {}",
                self.shape()
            )));
        }
        if self.has_grad() {
            return Err(TensorError::State(
                "backward already ran for this value; clear_grad before running again".into(),
            ));
        }
        if !self.requires_grad() {
            return Err(TensorError::Precondition(
                "loss is not connected to any tracked tensor".into(),
            ));
        }

        let order = topo_order(self);
        let mut pending: HashMap<u64, Vec<T>> = HashMap::new();
        pending.insert(self.id(), vec![T::one()]);

        // `order` lists the loss first and leaves last, so each node's
        // gradient is complete before it is propagated to its parents.
        for node in &order {
            let Some(grad) = pending.remove(&node.id()) else {
                continue;
            };
            if node.requires_grad() {
                node.accumulate_grad(&grad);
            }
            if let Some(op) = node.op() {
                let parents = op.parents();
                let grads = op.backward(&grad);
                debug_assert_eq!(parents.len(), grads.len());
                for (parent, pgrad) in parents.into_iter().zip(grads) {
                    if !parent.requires_grad() {
                        continue;
                    }
                    debug_assert_eq!(pgrad.len(), parent.shape().len());
                    match pending.get_mut(&parent.id()) {
                        Some(acc) => {
                            for (a, g) in acc.iter_mut().zip(&pgrad) {
                                *a = *a + *g;
                            }
                        }
                        None => {
                            pending.insert(parent.id(), pgrad);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Reverse topological order (root first) over the recorded graph.
fn topo_order<T: Scalar>(root: &Tensor<T>) -> Vec<Tensor<T>> {
    // Iterative post-order DFS; post-order guarantees parents come after all
    // their consumers once the list is reversed... here we collect post-order
    // (leaves first) and reverse to get root-first dependency order.
    let mut visited: HashMap<u64, ()> = HashMap::new();
    let mut post: Vec<Tensor<T>> = Vec::new();
    let mut stack: Vec<(Tensor<T>, bool)> = vec![(root.clone(), false)];

    while let Some((node, expanded)) = stack.pop() {
        if expanded {
            post.push(node);
            continue;
        }
        if visited.contains_key(&node.id()) {
            continue;
        }
        visited.insert(node.id(), ());
        stack.push((node.clone(), true));
        if let Some(op) = node.op() {
            for parent in op.parents() {
                if !visited.contains_key(&parent.id()) && parent.requires_grad() {
                    stack.push((parent, false));
                }
            }
        }
    }
    post.reverse();
    post
}
