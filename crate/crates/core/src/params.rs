use crate::error::{CoreError, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// Ordered collection of named parameter tensors. A parameter's position is
/// its key inside computation graphs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> usize {
        self.names.push(name.into());
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, key: usize) -> &Tensor<T> {
        &self.tensors[key]
    }

    pub fn get_mut(&mut self, key: usize) -> &mut Tensor<T> {
        &mut self.tensors[key]
    }

    pub fn name(&self, key: usize) -> &str {
        &self.names[key]
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.tensors.iter_mut())
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Overwrites values from `other`, matched by name and shape.
    pub fn load_values(&mut self, other: &[(String, Tensor<f32>)]) -> Result<()> {
        for (name, t) in other {
            let key = self
                .find(name)
                .ok_or_else(|| CoreError::Format(format!("unknown parameter '{name}'")))?;
            let dst = &mut self.tensors[key];
            if dst.shape() != t.shape() {
                return Err(CoreError::Format(format!(
                    "parameter '{name}' has shape {:?}, checkpoint holds {:?}",
                    dst.shape(),
                    t.shape()
                )));
            }
            dst.data_mut()
                .iter_mut()
                .zip(t.data())
                .for_each(|(d, &s)| *d = T::of(s as f64));
        }
        Ok(())
    }

    pub fn to_named_f32(&self) -> Vec<(String, Tensor<f32>)> {
        self.iter()
            .map(|(n, t)| (n.to_string(), t.cast()))
            .collect()
    }
}
