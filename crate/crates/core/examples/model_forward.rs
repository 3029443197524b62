//! Forward passes through the network in training and evaluation mode, and a
//! checkpoint round trip.

use pdsnet::dataio::EncodedRecord;
use pdsnet::model::{load_params, save_params, Ablation, Architecture, Batch, ForwardOptions, ModelSpec, PdsNet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pdsnet::Result<()> {
    let spec = ModelSpec {
        embed_exp: 3,
        latent_dim: 8,
        prior_hidden: 16,
        posterior_hidden: 16,
        head_widths: [32, 16, 8],
    };
    let arch = Architecture::new(spec, [10, 20, 5, 5, 6, 6])?;
    println!("{}: {} parameters", arch.fingerprint(), arch.parameter_count());
    let net = PdsNet::init(arch.clone(), 1)?;

    let records = [
        EncodedRecord { ids: [1, 3, 2, 1, 4, 2], rt: 0.8 },
        EncodedRecord { ids: [4, 7, 0, 3, 0, 5], rt: 2.1 },
    ];
    let batch = Batch::from_records(&records);
    let mut g = net.graph();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let trace = net.forward(&mut g, &batch, &mut rng, &ForwardOptions::train(Ablation::Full))?;
    println!("prior levels: {}", trace.priors.len());
    println!("main prediction ŷ1: {:?}", g.value(trace.y1).data());
    let post = trace.posterior.as_ref().expect("training mode runs the posterior branch");
    println!("posterior-branch prediction ŷ2: {:?}", g.value(post.y2).data());

    let sampled = net.predict(&records, &ForwardOptions::eval(Ablation::Full, false), 5)?;
    let mean = net.predict(&records, &ForwardOptions::eval(Ablation::Full, true), 5)?;
    println!("eval (one latent draw): {sampled:?}");
    println!("eval (latent mean):     {mean:?}");

    let path = std::env::temp_dir().join("pdsnet-example.ckpt");
    save_params(&net, &path)?;
    let back = load_params(&path, Some(&arch))?;
    assert!(back.params().bitwise_eq(net.params()));
    println!("checkpoint round trip through {} ok", path.display());
    Ok(())
}
