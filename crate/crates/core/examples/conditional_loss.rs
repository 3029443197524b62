//! The trusted/untrusted split of the training objective: records whose
//! main-branch residual is below δ pay the task losses, the rest pay the
//! weighted prior-to-posterior KL terms.

use pdsnet::autodiff::Tensor;
use pdsnet::dataio::EncodedRecord;
use pdsnet::model::{Ablation, Architecture, Batch, ForwardOptions, ModelSpec, PdsNet};
use pdsnet::training::{h_loss, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> pdsnet::Result<()> {
    let spec = ModelSpec {
        embed_exp: 2,
        latent_dim: 4,
        prior_hidden: 8,
        posterior_hidden: 8,
        head_widths: [12, 8, 6],
    };
    let net = PdsNet::init(Architecture::new(spec, [5; 6])?, 2)?;
    let records: Vec<EncodedRecord> = (0..6).map(|i| EncodedRecord { ids: [i % 5; 6], rt: 1.0 }).collect();
    let batch = Batch::from_records(&records);

    let mut g = net.graph();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let trace = net.forward(&mut g, &batch, &mut rng, &ForwardOptions::train(Ablation::Full))?;
    let y1 = g.value(trace.y1).data().to_vec();
    let offsets = [0.1, -0.2, 1.5, 0.0, -3.0, 0.7];
    let y = Tensor::column(&y1.iter().zip(offsets).map(|(p, o)| p + o).collect::<Vec<_>>());

    let cfg = TrainConfig::default();
    let out = h_loss(&mut g, &trace, &y, &cfg)?;
    println!("δ = {}: {} trusted, {} untrusted", cfg.delta, out.stats.trusted, out.stats.untrusted);
    println!("objective = {:.6}", g.value(out.loss).item()?);
    let grads = g.backward(out.loss)?;
    let task = grads.wrt(out.task).map(|t| t.data().to_vec());
    println!("d objective / d task-loss per record: {task:?}");
    if let Some(align) = &out.align {
        for (level, k) in align.kl.iter().enumerate() {
            println!("d objective / d KL{} per record: {:?}", level + 1, grads.wrt(*k).map(|t| t.data().to_vec()));
        }
    }
    Ok(())
}
