use crate::error::{dim_err, Result};
use crate::real::Real;

/// Dense row-major tensor with an optional gradient buffer.
///
/// The shape is fixed at construction. Image-like tensors use the
/// channel-first `(C, H, W)` layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
    pub requires_grad: bool,
    grad: Option<Vec<T>>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return dim_err("tensor", format!("shape {shape:?} has a zero extent"));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return dim_err(
                "tensor",
                format!("shape {shape:?} needs {numel} elements, got {}", data.len()),
            );
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let numel = shape.iter().product();
        Self::new(shape, vec![value; numel]).expect("full: valid shape")
    }

    pub fn from_f64(shape: &[usize], data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&x| T::of(x)).collect())
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    pub fn set_grad(&mut self, grad: Vec<T>) -> Result<()> {
        if grad.len() != self.data.len() {
            return dim_err(
                "set_grad",
                format!(
                    "gradient of length {} for tensor of {}",
                    grad.len(),
                    self.data.len()
                ),
            );
        }
        self.grad = Some(grad);
        Ok(())
    }

    /// Adds `grad` into the gradient buffer, allocating it on first use.
    pub fn accumulate_grad(&mut self, grad: &[T]) -> Result<()> {
        if grad.len() != self.data.len() {
            return dim_err(
                "accumulate_grad",
                format!(
                    "gradient of length {} for tensor of {}",
                    grad.len(),
                    self.data.len()
                ),
            );
        }
        match &mut self.grad {
            Some(g) => g.iter_mut().zip(grad).for_each(|(a, &b)| *a = *a + b),
            None => self.grad = Some(grad.to_vec()),
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    /// Element-wise conversion to another precision; gradients are dropped.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| U::of(x.as_f64())).collect(),
            requires_grad: self.requires_grad,
            grad: None,
        }
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_length() {
        assert!(Tensor::<f32>::new(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::new(&[0, 3], vec![]).is_err());
        let t = Tensor::<f32>::new(&[2, 3], vec![0.0; 6]).unwrap();
        assert_eq!(t.shape(), &[2, 3]);
    }

    #[test]
    fn grad_buffer_tracks_length() {
        let mut t = Tensor::<f64>::zeros(&[4]);
        assert!(t.set_grad(vec![1.0; 3]).is_err());
        t.accumulate_grad(&[1.0; 4]).unwrap();
        t.accumulate_grad(&[0.5; 4]).unwrap();
        assert_eq!(t.grad().unwrap(), &[1.5; 4]);
        t.zero_grad();
        assert!(t.grad().is_none());
    }
}
