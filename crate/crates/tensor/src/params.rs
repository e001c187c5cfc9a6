use std::collections::BTreeMap;

use crate::error::TensorError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// One named tensor owned by a [`ParamStore`].
#[derive(Clone)]
pub struct ParamEntry<T: Scalar = f64> {
    pub tensor: Tensor<T>,
    /// Trainable entries receive gradients and optimiser updates; buffers
    /// (for example input statistics) are saved and loaded but never updated.
    pub trainable: bool,
}

/// Named parameter collection with deterministic (lexicographic) iteration
/// order. Paths are `/`-separated, unique, and assigned at model build time.
#[derive(Default, Clone)]
pub struct ParamStore<T: Scalar = f64> {
    entries: BTreeMap<String, ParamEntry<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, path: &str, tensor: Tensor<T>) -> Result<(), TensorError> {
        self.insert_entry(path, tensor, true)
    }

    pub fn insert_buffer(&mut self, path: &str, tensor: Tensor<T>) -> Result<(), TensorError> {
        self.insert_entry(path, tensor, false)
    }

    fn insert_entry(
        &mut self,
        path: &str,
        tensor: Tensor<T>,
        trainable: bool,
    ) -> Result<(), TensorError> {
        if path.is_empty() {
            return Err(TensorError::Usage("empty parameter path".into()));
        }
        if self.entries.contains_key(path) {
            return Err(TensorError::State(format!(
                "parameter path '{path}' registered twice"
            )));
        }
        if trainable && !tensor.requires_grad() {
            return Err(TensorError::Precondition(format!(
                "trainable parameter '{path}' must track gradients"
            )));
        }
        self.entries.insert(path.to_string(), ParamEntry { tensor, trainable });
        Ok(())
    }

    pub fn get(&self, path: &str) -> Option<&ParamEntry<T>> {
        self.entries.get(path)
    }

    pub fn tensor(&self, path: &str) -> Result<&Tensor<T>, TensorError> {
        self.entries
            .get(path)
            .map(|e| &e.tensor)
            .ok_or_else(|| TensorError::State(format!("no parameter at path '{path}'")))
    }

    /// Replaces the tensor at `path`, keeping its trainable flag. The new
    /// tensor must match the existing shape.
    pub fn set(&mut self, path: &str, tensor: Tensor<T>) -> Result<(), TensorError> {
        let entry = self
            .entries
            .get_mut(path)
            .ok_or_else(|| TensorError::State(format!("no parameter at path '{path}'")))?;
        if tensor.shape() != entry.tensor.shape() {
            return Err(TensorError::Precondition(format!(
                "replacement for '{path}' has shape {}, expected {}",
                tensor.shape(),
                entry.tensor.shape()
            )));
        }
        if entry.trainable && !tensor.requires_grad() {
            return Err(TensorError::Precondition(format!(
                "trainable parameter '{path}' must track gradients"
            )));
        }
        entry.tensor = tensor;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamEntry<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn trainable_iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries
            .iter()
            .filter(|(_, e)| e.trainable)
            .map(|(k, e)| (k.as_str(), &e.tensor))
    }

    pub fn paths(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total element count across trainable tensors.
    pub fn param_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| e.trainable)
            .map(|e| e.tensor.shape().len())
            .sum()
    }

    pub fn zero_grads(&self) {
        for e in self.entries.values() {
            e.tensor.clear_grad();
        }
    }

    /// Fresh copy whose tensors share no gradient state with the original.
    pub fn deep_clone(&self) -> ParamStore<T> {
        let mut out = ParamStore::new();
        for (path, e) in &self.entries {
            let data = e.tensor.data().to_vec();
            let t = if e.trainable {
                Tensor::param(e.tensor.shape(), data).expect("shape already validated")
            } else {
                Tensor::from_vec(e.tensor.shape(), data).expect("shape already validated")
            };
            out.entries.insert(
                path.clone(),
                ParamEntry {
                    tensor: t,
                    trainable: e.trainable,
                },
            );
        }
        out
    }

    /// Deep clone with one coordinate of one tensor nudged by `delta`;
    /// the backbone of finite-difference gradient checking.
    pub fn perturbed(
        &self,
        path: &str,
        index: usize,
        delta: T,
    ) -> Result<ParamStore<T>, TensorError> {
        let entry = self
            .entries
            .get(path)
            .ok_or_else(|| TensorError::State(format!("no parameter at path '{path}'")))?;
        if index >= entry.tensor.shape().len() {
            return Err(TensorError::Precondition(format!(
                "coordinate {index} out of range for '{path}'"
            )));
        }
        let mut out = self.deep_clone();
        let mut data = entry.tensor.data().to_vec();
        data[index] = data[index] + delta;
        let t = if entry.trainable {
            Tensor::param(entry.tensor.shape(), data)?
        } else {
            Tensor::from_vec(entry.tensor.shape(), data)?
        };
        out.entries.get_mut(path).expect("clone kept path").tensor = t;
        Ok(out)
    }
}
