//! UPCC, IPCC and UIPCC on a hand-made matrix and on a synthetic split.

use pdsnet::baselines::{upcc_predict, ipcc_predict, uipcc_predict, CfMethod, RatingMatrix};
use pdsnet::dataio::SynthConfig;
use pdsnet::experiment::{prepare, run_baseline, DataConfig};
use pdsnet::eval::summary_table;

fn main() -> pdsnet::Result<()> {
    let m = RatingMatrix::from_rows(&[
        vec![Some(1.0), Some(2.0), None, Some(4.0)],
        vec![Some(2.0), Some(3.5), Some(1.0), Some(3.0)],
        vec![None, Some(1.0), Some(3.0), Some(2.5)],
        vec![Some(4.0), Some(1.5), Some(2.0), Some(1.0)],
    ])?;
    println!("UPCC(0,2)  = {:?}", upcc_predict(&m, 0, 2, 10));
    println!("IPCC(0,2)  = {:?}", ipcc_predict(&m, 0, 2, 10));
    println!("UIPCC(0,2) = {:.6}", uipcc_predict(&m, 0, 2, 0.5, 10)?);

    let data = prepare(&DataConfig {
        fractions: [0.2, 0.7, 0.1],
        synth: SynthConfig::default(),
        ..DataConfig::default()
    })?;
    let reports = [CfMethod::Upcc, CfMethod::Ipcc, CfMethod::Uipcc(0.5)]
        .into_iter()
        .map(|method| run_baseline(&data, method, 10))
        .collect::<pdsnet::Result<Vec<_>>>()?;
    print!("{}", summary_table(&reports));
    Ok(())
}
