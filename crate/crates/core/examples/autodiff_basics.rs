//! Builds a tiny two-layer network by hand, backpropagates a loss and checks
//! the gradient against central differences.

use pdsnet::autodiff::{gradcheck_params, Activation, Graph, ParamStore, Tensor};

fn main() -> pdsnet::Result<()> {
    let mut params = ParamStore::new();
    let w1 = params.add("w1", Tensor::from_rows(&[vec![0.5, -0.3, 0.8], vec![0.1, 0.9, -0.4]])?)?;
    let b1 = params.add("b1", Tensor::new(vec![1, 3], vec![0.1, 0.0, -0.1])?)?;
    let w2 = params.add("w2", Tensor::new(vec![3, 1], vec![0.7, -0.2, 0.5])?)?;
    let x = Tensor::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.3], vec![0.2, -1.2]])?;
    let y = Tensor::column(&[0.9, 0.1, -0.3]);

    let loss_fn = |g: &mut Graph<'_>| {
        let input = g.constant(x.clone());
        let (w1, b1, w2) = (g.param(w1), g.param(b1), g.param(w2));
        let h = g.dense(input, w1, b1, Activation::Softplus)?;
        let out = g.matmul(h, w2)?;
        let target = g.constant(y.clone());
        let diff = g.sub(out, target)?;
        let sq = g.square(diff);
        Ok(g.mean(sq))
    };

    let mut g = Graph::with_params(&params);
    let loss = loss_fn(&mut g)?;
    let grads = g.backward(loss)?;
    println!("loss = {:.6}", g.value(loss).item()?);
    for (id, name, _) in params.iter() {
        println!("d loss / d {name} = {:?}", grads.param(id).map(|t| t.data().to_vec()));
    }
    let err = gradcheck_params(&params, loss_fn, 1e-6)?;
    println!("max relative gradient error vs finite differences: {err:.2e}");
    assert!(err < 1e-6);
    Ok(())
}
