use super::{Graph, ParamStore, Tensor, Var};
use crate::error::{Error, Result};

/// Denominator floor for relative errors, so exactly-zero gradients compare
/// against finite-difference roundoff rather than dividing by zero.
pub const REL_ERR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

fn scalar_of(g: &Graph<'_>, v: Var) -> Result<f64> {
    let x = g.value(v).item()?;
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("loss evaluated to {x}")));
    }
    Ok(x)
}

/// Compares backward gradients against central differences at `point`.
///
/// `f` receives the graph and the leaf holding `point` and must return a
/// scalar. Returns the maximum relative error over all coordinates.
pub fn gradcheck<F>(f: F, point: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph<'_>, Var) -> Result<Var>,
{
    if eps <= 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be > 0, got {eps}")));
    }
    let mut g = Graph::new();
    let x = g.constant(point.clone());
    let loss = f(&mut g, x)?;
    scalar_of(&g, loss)?;
    let grads = g.backward(loss)?;
    let zeros = Tensor::zeros(point.shape());
    let analytic = grads.wrt(x).unwrap_or(&zeros);
    if !analytic.all_finite() {
        return Err(Error::NonFinite("analytic gradient".into()));
    }

    let eval = |p: Tensor| -> Result<f64> {
        let mut g = Graph::new();
        let x = g.constant(p);
        let loss = f(&mut g, x)?;
        scalar_of(&g, loss)
    };

    let mut worst = 0.0f64;
    for i in 0..point.len() {
        let mut plus = point.clone();
        plus.data_mut()[i] += eps;
        let mut minus = point.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}

/// Like [`gradcheck`] but perturbs every scalar of every trainable parameter
/// in `params`; `f` rebuilds the loss from a graph bound to the store.
pub fn gradcheck_params<F>(params: &ParamStore, f: F, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    if eps <= 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be > 0, got {eps}")));
    }
    let grads = {
        let mut g = Graph::with_params(params);
        let loss = f(&mut g)?;
        scalar_of(&g, loss)?;
        g.backward(loss)?
    };

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut g = Graph::with_params(store);
        let loss = f(&mut g)?;
        scalar_of(&g, loss)
    };

    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for id in params.ids().filter(|id| params.is_trainable(*id)) {
        let zeros = Tensor::zeros(params.get(id).shape());
        let analytic = grads.param(id).unwrap_or(&zeros).clone();
        for i in 0..params.get(id).len() {
            let orig = params.get(id).data()[i];
            probe.get_mut(id).data_mut()[i] = orig + eps;
            let up = eval(&probe)?;
            probe.get_mut(id).data_mut()[i] = orig - eps;
            let down = eval(&probe)?;
            probe.get_mut(id).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(analytic.data()[i], numeric));
        }
    }
    Ok(worst)
}
