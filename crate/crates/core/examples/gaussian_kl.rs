//! Diagonal Gaussians: reparameterised sampling, log-density and the
//! closed-form KL divergence used to align priors with the posterior.

use pdsnet::autodiff::{Graph, Tensor};
use pdsnet::distributions::{kl, kl_per_record, DiagGaussian};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pdsnet::Result<()> {
    let mut g = Graph::new();
    let mu_r = g.constant(Tensor::from_rows(&[vec![0.0, 1.0], vec![0.5, -0.5]])?);
    let s_r = g.constant(Tensor::from_rows(&[vec![1.0, 0.5], vec![0.2, 0.2]])?);
    let mu_p = g.constant(Tensor::from_rows(&[vec![0.0, 0.0], vec![0.5, -0.5]])?);
    let s_p = g.constant(Tensor::from_rows(&[vec![1.0, 1.0], vec![0.2, 0.2]])?);
    let posterior = DiagGaussian::new(&g, mu_r, s_r)?;
    let prior = DiagGaussian::new(&g, mu_p, s_p)?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let z = posterior.sample(&mut g, &mut rng)?;
    println!("z ~ posterior:\n{:?}", g.value(z).data());
    let lp = posterior.log_prob(&mut g, z)?;
    println!("log posterior(z) per record: {:?}", g.value(lp).data());

    let per = kl_per_record(&mut g, &posterior, &prior)?;
    println!("KL(posterior ‖ prior) per record: {:?}", g.value(per).data());
    let mean = kl(&mut g, &posterior, &prior)?;
    println!("batch mean: {:.6}", g.value(mean).item()?);
    // Second record has identical parameters on both sides.
    assert_eq!(g.value(per).data()[1], 0.0);
    Ok(())
}
