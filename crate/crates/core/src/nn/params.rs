use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor};

/// Ordered, named collection of parameter tensors.
///
/// Gradients use the same type with identical names and shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor<T>) {
        self.names.push(name.into());
        self.tensors.push(tensor);
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self {
            names: other.names.clone(),
            tensors: other.tensors.iter().map(Tensor::zeros_like).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.names != other.names {
            return Err(Error::shape("parameter sets have different names"));
        }
        for (i, (a, b)) in self.tensors.iter().zip(&other.tensors).enumerate() {
            if a.shape() != b.shape() {
                return Err(Error::shape(format!(
                    "parameter `{}`: {:?} vs {:?}",
                    self.names[i],
                    a.shape(),
                    b.shape()
                )));
            }
        }
        Ok(())
    }

    /// `self += other * scale`.
    pub fn add_scaled(&mut self, other: &Self, scale: T) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_scaled(b, scale)?;
        }
        Ok(())
    }

    /// Elementwise sum of gradient sets, accumulated left to right.
    pub fn sum_ordered(mut parts: Vec<Self>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::shape("cannot sum zero parameter sets"));
        }
        let mut acc = parts.remove(0);
        for p in &parts {
            acc.add_scaled(p, T::one())?;
        }
        Ok(acc)
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }

    /// Flat view over every scalar, in parameter order.
    pub fn flat_values(&self) -> Vec<T> {
        self.tensors
            .iter()
            .flat_map(|t| t.values().iter().copied())
            .collect()
    }

    /// Mutable access to the `index`-th scalar in flat order.
    pub fn flat_mut(&mut self, mut index: usize) -> Option<&mut T> {
        for t in &mut self.tensors {
            if index < t.len() {
                return Some(&mut t.values_mut()[index]);
            }
            index -= t.len();
        }
        None
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.tensors
            .iter()
            .zip(&other.tensors)
            .flat_map(|(a, b)| a.values().iter().zip(b.values()))
            .map(|(x, y)| (x.as_f64() - y.as_f64()).abs())
            .fold(0.0, f64::max)
    }
}

impl<T: Scalar> Default for ParamSet<T> {
    fn default() -> Self {
        Self::new()
    }
}
