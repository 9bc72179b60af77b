use std::collections::BTreeMap;

use super::{DiffError, ParamStore};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const GRAD_CLIP_NORM: f64 = 0.5;

/// First and second moment estimates for every parameter of a store.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros = |_: ()| {
            params
                .iter()
                .map(|(n, t)| (n.clone(), vec![0.0; t.len()]))
                .collect::<BTreeMap<_, _>>()
        };
        Self {
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            m: zeros(()),
            v: zeros(()),
        }
    }

    pub fn first_moment(&self, name: &str) -> Option<&[f64]> {
        self.m.get(name).map(Vec::as_slice)
    }

    pub fn second_moment(&self, name: &str) -> Option<&[f64]> {
        self.v.get(name).map(Vec::as_slice)
    }
}

/// One bias-corrected Adam update using the gradients stored in `params`.
/// Increments the store's step count.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState, lr: f64) -> Result<(), DiffError> {
    let t = params.bump_step() as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (name, tensor) in params.iter_mut() {
        let m = state
            .m
            .get_mut(name.as_str())
            .ok_or_else(|| DiffError::MissingParam(name.clone()))?;
        let v = state
            .v
            .get_mut(name.as_str())
            .ok_or_else(|| DiffError::MissingParam(name.clone()))?;
        if m.len() != tensor.len() {
            return Err(DiffError::ShapeMismatch {
                context: format!("adam moments for `{name}`"),
                expected: tensor.shape().to_vec(),
                found: vec![m.len()],
            });
        }
        let (data, grad) = tensor.split_mut();
        for i in 0..data.len() {
            let g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the factor applied (1.0 when untouched).
pub fn clip_global_norm(params: &mut ParamStore, max_norm: f64) -> f64 {
    let total: f64 = params
        .iter()
        .filter_map(|(_, t)| t.grad())
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if total <= max_norm || total == 0.0 {
        return 1.0;
    }
    let factor = max_norm / total;
    for (_, t) in params.iter_mut() {
        if t.grad().is_some() {
            t.grad_mut().iter_mut().for_each(|g| *g *= factor);
        }
    }
    factor
}
