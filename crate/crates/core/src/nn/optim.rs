use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ParameterSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub algorithm: Algorithm,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    /// First and second moment accumulators per parameter.
    pub moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Default for OptimizerState {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

impl OptimizerState {
    pub fn adam(lr: f64) -> Self {
        Self {
            algorithm: Algorithm::Adam,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: BTreeMap::new(),
        }
    }
}

/// One bias-corrected Adam update over every parameter. Every parameter must
/// carry a gradient (see [`ParameterSet::zero_grad`]).
pub fn adam_step(params: &mut ParameterSet, state: &mut OptimizerState) -> Result<()> {
    if let Some((name, _)) = params.iter().find(|(_, p)| p.grad.is_none()) {
        return Err(Error::State(format!("parameter {name:?} has no gradient")));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (name, p) in params.iter_mut() {
        let grad = p.grad.as_ref().expect("checked above");
        let (m, v) = state
            .moments
            .entry(name.to_owned())
            .or_insert_with(|| (vec![0.0; grad.len()], vec![0.0; grad.len()]));
        if m.len() != grad.len() {
            return Err(Error::State(format!(
                "moment shape for {name} does not match its parameter"
            )));
        }
        for (((w, g), mi), vi) in p.value.values_mut().iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (1.0 - b1) * g;
            *vi = b2 * *vi + (1.0 - b2) * g * g;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}
