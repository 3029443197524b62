//! Trains the full network on a small synthetic corpus and compares its
//! test error with the label-noise floor.

use pdsnet::dataio::SynthConfig;
use pdsnet::experiment::{prepare, run_pds, DataConfig};
use pdsnet::model::ModelSpec;
use pdsnet::training::TrainConfig;

fn main() -> pdsnet::Result<()> {
    let data = prepare(&DataConfig {
        fractions: [0.3, 0.6, 0.1],
        synth: SynthConfig {
            n_users: 30,
            n_services: 40,
            ..SynthConfig::default()
        },
        ..DataConfig::default()
    })?;
    let spec = ModelSpec {
        embed_exp: 3,
        latent_dim: 8,
        prior_hidden: 32,
        posterior_hidden: 32,
        head_widths: [64, 32, 16],
    };
    let cfg = TrainConfig {
        epochs: 40,
        ..TrainConfig::default()
    };
    let run = run_pds(&data, &spec, &cfg, 0)?;
    print!("{}", run.history.to_csv());
    println!("best epoch: {:?}, stopped early: {}", run.history.best_epoch, run.history.stopped_early);
    println!(
        "test MAE {:.4}, RMSE {:.4}, noise floor {:.4}",
        run.report.all.mae.unwrap(),
        run.report.all.rmse.unwrap(),
        data.noise_floor.unwrap()
    );
    Ok(())
}
