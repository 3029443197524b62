//! Diagonal Gaussians over the latent space.
//!
//! Every distribution here is a pair of graph nodes, so sampling and the KL
//! divergence are differentiable with respect to the mean and scale.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `N(mu, diag(sigma²))` with `mu` and `sigma` both `[B, N]`.
#[derive(Clone, Copy, Debug)]
pub struct DiagGaussian {
    pub mu: Var,
    pub sigma: Var,
}

impl DiagGaussian {
    /// Wraps existing nodes, checking shapes and strict positivity of `sigma`.
    pub fn new(g: &Graph<'_>, mu: Var, sigma: Var) -> Result<Self> {
        if g.shape(mu) != g.shape(sigma) || g.shape(mu).len() != 2 {
            return Err(Error::Shape {
                op: "DiagGaussian",
                lhs: g.shape(mu).to_vec(),
                rhs: g.shape(sigma).to_vec(),
            });
        }
        if let Some(bad) = g.value(sigma).data().iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::NonFinite(format!("sigma entry {bad} is not a positive finite value")));
        }
        Ok(DiagGaussian { mu, sigma })
    }

    /// Splits a `[B, 2N]` head output: the first half is the mean, the second
    /// half goes through softplus to give the scale.
    pub fn from_heads(g: &mut Graph<'_>, e: Var) -> Result<Self> {
        let shape = g.shape(e).to_vec();
        if shape.len() != 2 || !shape[1].is_multiple_of(2) || shape[1] == 0 {
            return Err(Error::InvalidArgument(format!(
                "head output must be [B, 2N], got {shape:?}"
            )));
        }
        let n = shape[1] / 2;
        let mu = g.slice_cols(e, 0, n)?;
        let raw = g.slice_cols(e, n, n)?;
        let sigma = g.softplus(raw);
        Self::new(g, mu, sigma)
    }

    pub fn latent_dim(&self, g: &Graph<'_>) -> usize {
        g.shape(self.mu)[1]
    }

    pub fn batch(&self, g: &Graph<'_>) -> usize {
        g.shape(self.mu)[0]
    }

    /// Copies of `mu` and `sigma` with gradients stopped.
    pub fn detached(&self, g: &mut Graph<'_>) -> Self {
        DiagGaussian {
            mu: g.detach(self.mu),
            sigma: g.detach(self.sigma),
        }
    }

    /// Reparameterised draw `mu + sigma ⊙ eps`, one `eps ~ N(0, I)` per entry.
    pub fn sample<R: Rng + ?Sized>(&self, g: &mut Graph<'_>, rng: &mut R) -> Result<Var> {
        let shape = g.shape(self.mu).to_vec();
        let n: usize = shape.iter().product();
        let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        self.sample_with(g, Tensor::new(shape, eps)?)
    }

    /// Reparameterised draw with caller-supplied noise.
    pub fn sample_with(&self, g: &mut Graph<'_>, eps: Tensor) -> Result<Var> {
        let e = g.constant(eps);
        let spread = g.mul(self.sigma, e)?;
        g.add(self.mu, spread)
    }

    /// `[B, 1]` log-density of `z`, summed over the latent dimension.
    pub fn log_prob(&self, g: &mut Graph<'_>, z: Var) -> Result<Var> {
        let shape = g.shape(self.mu).to_vec();
        if g.shape(z) != shape.as_slice() {
            return Err(Error::Shape {
                op: "log_prob",
                lhs: shape,
                rhs: g.shape(z).to_vec(),
            });
        }
        let diff = g.sub(z, self.mu)?;
        let std = g.div(diff, self.sigma)?;
        let sq = g.square(std);
        let half_sq = g.scale(sq, -0.5);
        let log_sigma = g.ln(self.sigma);
        let t = g.sub(half_sq, log_sigma)?;
        let c = g.constant(Tensor::full(&shape, -0.5 * LN_2PI));
        let per = g.add(t, c)?;
        Ok(g.sum_rows(per))
    }
}

/// Per-record `KL(post ‖ prior)` as a `[B, 1]` column.
///
/// Closed form for diagonal Gaussians, summed over the latent dimension:
/// `ln(σ_p/σ_q) + (σ_q² + (μ_q − μ_p)²) / (2σ_p²) − ½` with `q = post`,
/// `p = prior`.
pub fn kl_per_record(g: &mut Graph<'_>, post: &DiagGaussian, prior: &DiagGaussian) -> Result<Var> {
    let (sp, sq) = (g.shape(post.mu).to_vec(), g.shape(prior.mu).to_vec());
    if sp != sq {
        return Err(Error::Shape {
            op: "kl",
            lhs: sp,
            rhs: sq,
        });
    }
    let ln_prior = g.ln(prior.sigma);
    let ln_post = g.ln(post.sigma);
    let log_ratio = g.sub(ln_prior, ln_post)?;
    let var_post = g.square(post.sigma);
    let dmu = g.sub(post.mu, prior.mu)?;
    let dmu2 = g.square(dmu);
    let num = g.add(var_post, dmu2)?;
    let var_prior = g.square(prior.sigma);
    let den = g.scale(var_prior, 2.0);
    let frac = g.div(num, den)?;
    let t = g.add(log_ratio, frac)?;
    let half = g.constant(Tensor::full(&sp, -0.5));
    let per = g.add(t, half)?;
    Ok(g.sum_rows(per))
}

/// Batch-mean `KL(post ‖ prior)` as a scalar node.
pub fn kl(g: &mut Graph<'_>, post: &DiagGaussian, prior: &DiagGaussian) -> Result<Var> {
    let per = kl_per_record(g, post, prior)?;
    Ok(g.mean(per))
}
