//! Minimises f(w) = w² with the Nadam optimiser.

use pdsnet::autodiff::{Graph, ParamStore, Tensor};
use pdsnet::training::{nadam_step, NadamState};

fn main() -> pdsnet::Result<()> {
    let mut params = ParamStore::new();
    let w = params.add("w", Tensor::scalar(1.0))?;
    let mut state = NadamState::default();
    for step in 1..=300 {
        let grads = {
            let mut g = Graph::with_params(&params);
            let v = g.param(w);
            let loss = g.square(v);
            let loss = g.sum(loss);
            g.backward(loss)?
        };
        nadam_step(&mut params, &grads, &mut state, 0.1)?;
        if step <= 5 || step % 50 == 0 {
            println!("step {step:>3}: w = {:+.6}", params.get(w).data()[0]);
        }
    }
    assert!(params.get(w).data()[0].abs() < 0.05);
    Ok(())
}
