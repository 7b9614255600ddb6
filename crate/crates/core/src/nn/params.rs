use std::collections::BTreeMap;

use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Tensor,
    pub grad: Option<Vec<f64>>,
}

/// Named trainable tensors, iterated in name order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet {
    entries: BTreeMap<String, Parameter>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        self.entries.insert(
            name.into(),
            Parameter {
                value: value.with_grad(),
                grad: None,
            },
        );
    }

    /// Inserts a matrix drawn uniformly from `±sqrt(1 / fan_in)`.
    pub fn insert_uniform<R: Rng>(&mut self, name: impl Into<String>, rows: usize, cols: usize, fan_in: usize, rng: &mut R) {
        let bound = (1.0 / fan_in.max(1) as f64).sqrt();
        let values = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
        self.insert(name, Tensor::matrix(rows, cols, values).expect("shape matches"));
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .get(name)
            .map(|p| &p.value)
            .ok_or_else(|| Error::State(format!("no parameter named {name:?}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.entries
            .get_mut(name)
            .map(|p| &mut p.value)
            .ok_or_else(|| Error::State(format!("no parameter named {name:?}")))
    }

    pub fn grad(&self, name: &str) -> Option<&[f64]> {
        self.entries.get(name)?.grad.as_deref()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Parameter)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub(crate) fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Parameter)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }

    /// Sets every gradient to zero, marking it as populated.
    pub fn zero_grad(&mut self) {
        for p in self.entries.values_mut() {
            p.grad = Some(vec![0.0; p.value.len()]);
        }
    }

    /// Drops all gradients.
    pub fn clear_grad(&mut self) {
        for p in self.entries.values_mut() {
            p.grad = None;
        }
    }

    /// Adds `scale * grad` for each named gradient.
    pub fn accumulate(&mut self, grads: &BTreeMap<String, Vec<f64>>, scale: f64) -> Result<()> {
        for (name, g) in grads {
            let p = self
                .entries
                .get_mut(name)
                .ok_or_else(|| Error::State(format!("gradient for unknown parameter {name:?}")))?;
            if g.len() != p.value.len() {
                return Err(Error::Shape(format!(
                    "gradient for {name} has {} values, parameter {}",
                    g.len(),
                    p.value.len()
                )));
            }
            let dst = p.grad.get_or_insert_with(|| vec![0.0; g.len()]);
            for (d, s) in dst.iter_mut().zip(g) {
                *d += scale * s;
            }
        }
        Ok(())
    }
}
