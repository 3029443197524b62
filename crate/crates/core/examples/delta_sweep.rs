//! Sweeps the residual threshold δ and the task loss, one config per value.

use pdsnet::eval::summary_table;
use pdsnet::experiment::{sweep, ExperimentConfig};

fn main() -> pdsnet::Result<()> {
    let mut cfg = ExperimentConfig::default();
    for (k, v) in [
        ("data.synth.n_users", "20"),
        ("data.synth.n_services", "30"),
        ("data.synth.noise_user_fraction", "0.1"),
        ("E", "2"),
        ("N", "4"),
        ("model.prior_hidden", "16"),
        ("model.posterior_hidden", "16"),
        ("model.head_widths", "[16, 8, 4]"),
        ("epochs", "10"),
        ("run.seeds", "[0]"),
    ] {
        cfg.set(k, v)?;
    }
    let deltas: Vec<String> = ["0.1", "0.3", "0.5", "0.7", "1.0"].map(String::from).to_vec();
    print!("{}", summary_table(&sweep(&cfg, "delta", &deltas)?));
    let losses: Vec<String> = ["mae", "mse", "huber"].map(String::from).to_vec();
    print!("{}", summary_table(&sweep(&cfg, "loss_kind", &losses)?));
    Ok(())
}
