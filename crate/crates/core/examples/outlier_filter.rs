//! Isolation-forest filtering of response-time outliers.

use pdsnet::dataio::{filter_outliers_iforest, IsolationForest, QoSRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pdsnet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut records: Vec<QoSRecord> = (0..5000)
        .map(|i| QoSRecord::bare(i % 50, i / 50, rng.random_range(0.2..2.0)))
        .collect();
    for (i, rt) in [25.0, 60.0, 19.9].into_iter().enumerate() {
        records.push(QoSRecord::bare(i as u32, 999, rt));
    }

    let rts: Vec<f64> = records.iter().map(|r| r.rt).collect();
    let forest = IsolationForest::fit(&rts, 100, 256, 1)?;
    for x in [0.5, 1.9, 19.9, 60.0] {
        println!("rt {x:>5}: outlier score {:.3}", forest.outlier_score(x));
    }

    let kept = filter_outliers_iforest(&records, 0.1, 100, 256, 1)?;
    println!("kept {} of {} records", kept.len(), records.len());
    assert!(kept.iter().all(|r| r.rt < 10.0));
    Ok(())
}
