//! Forges the city and AS of a fraction of users, leaving labels intact.

use pdsnet::dataio::{inject_feature_noise, synth_generate, SynthConfig};

fn main() -> pdsnet::Result<()> {
    let (records, _) = synth_generate(&SynthConfig {
        n_users: 20,
        n_services: 10,
        ..SynthConfig::default()
    })?;
    let noisy = inject_feature_noise(&records, 0.2, 42)?;
    println!("corrupted users: {:?}", noisy.corrupted_users);
    let u = noisy.corrupted_users[0];
    let before = records.iter().find(|r| r.user_id == u).unwrap();
    let after = noisy.records.iter().find(|r| r.user_id == u).unwrap();
    println!("user {u} city {:?} -> {:?}", before.user_city, after.user_city);
    println!("user {u} AS   {:?} -> {:?}", before.user_as, after.user_as);
    assert!(records.iter().zip(&noisy.records).all(|(a, b)| a.rt == b.rt));
    Ok(())
}
