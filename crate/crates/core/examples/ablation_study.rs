//! Runs the full network and both ablations from a config string and writes
//! the report CSV.

use pdsnet::eval::{reports_to_csv, summary_table};
use pdsnet::experiment::{ablate, ExperimentConfig};

const CONFIG: &str = r#"
[data]
fractions = [0.3, 0.6, 0.1]
[data.synth]
n_users = 25
n_services = 30
noise_user_fraction = 0.2
missing_fraction = 0.2
[model]
embed_exp = 3
latent_dim = 8
prior_hidden = 16
posterior_hidden = 16
head_widths = [32, 16, 8]
[train]
epochs = 15
eval_use_mean = true
[run]
seeds = [0, 1]
"#;

fn main() -> pdsnet::Result<()> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    println!("config fingerprint {}", cfg.fingerprint());
    let reports = ablate(&cfg)?;
    print!("{}", summary_table(&reports));
    print!("{}", reports_to_csv(&reports));
    Ok(())
}
