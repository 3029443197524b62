use crate::autodiff::{Gradients, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Moment buffers and momentum schedule of the Nadam optimiser.
#[derive(Clone, Debug)]
pub struct NadamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decay of the momentum schedule `μ_t = β1 (1 - ½ · 0.96^(t · decay))`.
    pub momentum_decay: f64,
    pub step: u64,
    mu_product: f64,
    moments: Vec<Option<(Tensor, Tensor)>>,
}

impl Default for NadamState {
    fn default() -> Self {
        Self::new(0.9, 0.999, 1e-8)
    }
}

impl NadamState {
    pub fn new(beta1: f64, beta2: f64, epsilon: f64) -> Self {
        NadamState {
            beta1,
            beta2,
            epsilon,
            momentum_decay: 0.004,
            step: 0,
            mu_product: 1.0,
            moments: Vec::new(),
        }
    }

    pub fn mu(&self, t: u64) -> f64 {
        self.beta1 * (1.0 - 0.5 * 0.96f64.powf(t as f64 * self.momentum_decay))
    }

    /// First and second moment of a parameter, if it has been updated.
    pub fn moments(&self, index: usize) -> Option<(&Tensor, &Tensor)> {
        self.moments.get(index)?.as_ref().map(|(m, v)| (m, v))
    }
}

/// One Nadam update of every trainable parameter that received a gradient.
///
/// ```text
/// m ← β1 m + (1-β1) g          v ← β2 v + (1-β2) g²
/// w ← w - lr · ( μ_{t+1} m / (1 - Π_{s≤t+1} μ_s) + (1-μ_t) g / (1 - Π_{s≤t} μ_s) ) / (√(v / (1-β2^t)) + ε)
/// ```
///
/// A non-finite gradient aborts before anything is modified.
pub fn nadam_step(params: &mut ParamStore, grads: &Gradients, state: &mut NadamState, lr: f64) -> Result<()> {
    let updates: Vec<_> = grads
        .params()
        .into_iter()
        .filter(|(id, _)| params.is_trainable(*id))
        .collect();
    if let Some((id, _)) = updates.iter().find(|(_, g)| !g.all_finite()) {
        return Err(Error::NonFinite(format!("gradient of parameter `{}`", params.name(*id))));
    }
    state.step += 1;
    let t = state.step;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let (mu, mu_next) = (state.mu(t), state.mu(t + 1));
    state.mu_product *= mu;
    let grad_coef = (1.0 - mu) / (1.0 - state.mu_product);
    let moment_coef = mu_next / (1.0 - state.mu_product * mu_next);
    let c2 = 1.0 - b2.powi(t as i32);
    if state.moments.len() < params.len() {
        state.moments.resize(params.len(), None);
    }
    for (id, g) in updates {
        let slot = state.moments[id.index()].get_or_insert_with(|| (Tensor::zeros(g.shape()), Tensor::zeros(g.shape())));
        let (m, v) = slot;
        let w = params.get_mut(id).data_mut();
        for (((wi, gi), mi), vi) in w.iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let denom = (*vi / c2).sqrt() + eps;
            *wi -= lr * (moment_coef * *mi + grad_coef * gi) / denom;
        }
    }
    Ok(())
}
