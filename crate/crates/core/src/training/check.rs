use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::loss::h_loss;
use crate::autodiff::{gradcheck_params, Graph};
use crate::error::Result;
use crate::model::{Batch, ForwardOptions, PdsNet};

/// Worst relative error between the backpropagated gradient of the
/// training objective and central differences, over every trainable scalar.
/// The latent noise is replayed from `noise_seed` on every evaluation.
///
/// `stop_posterior_grad` is switched off for the check: a detached posterior
/// makes the training gradient a surrogate rather than a derivative.
pub fn loss_gradcheck(net: &PdsNet, batch: &Batch, cfg: &TrainConfig, noise_seed: u64, eps: f64) -> Result<f64> {
    let cfg = &TrainConfig {
        stop_posterior_grad: false,
        ..cfg.clone()
    };
    let y = batch.labels();
    let opts = ForwardOptions::train(cfg.ablation);
    gradcheck_params(
        net.params(),
        |g: &mut Graph<'_>| {
            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
            let trace = net.forward(g, batch, &mut rng, &opts)?;
            Ok(h_loss(g, &trace, &y, cfg)?.loss)
        },
        eps,
    )
}
