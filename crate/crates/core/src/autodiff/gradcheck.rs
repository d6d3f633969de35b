//! Central finite-difference gradient checker.

use super::{AutodiffError, Tensor};

pub const DEFAULT_EPS: f64 = 1e-4;

/// [`grad_check_with`] at the default step `ε = 1e-4`.
pub fn grad_check<F, E>(f: F, inputs: &[Tensor]) -> Result<f64, E>
where
    F: Fn(&[Tensor]) -> Result<Tensor, E>,
    E: From<AutodiffError>,
{
    grad_check_with(f, inputs, DEFAULT_EPS)
}

/// Max relative error `|a − n| / max(|a|, |n|, 1e-8)` between analytic and
/// central-difference gradients of the scalar `f` with respect to every
/// input that requires a gradient. Other inputs are held fixed.
pub fn grad_check_with<F, E>(f: F, inputs: &[Tensor], eps: f64) -> Result<f64, E>
where
    F: Fn(&[Tensor]) -> Result<Tensor, E>,
    E: From<AutodiffError>,
{
    let leaves: Vec<Tensor> = inputs
        .iter()
        .map(|t| if t.requires_grad() { Tensor::leaf(t.to_vec(), t.shape()) } else { Ok(t.clone()) })
        .collect::<Result<_, AutodiffError>>()?;
    f(&leaves)?.backward()?;

    let mut probe: Vec<Tensor> = inputs.iter().map(Tensor::detach).collect();
    let mut worst = 0.0f64;
    for (k, input) in inputs.iter().enumerate() {
        if !input.requires_grad() {
            continue;
        }
        let analytic = leaves[k].grad().unwrap_or_else(|| vec![0.0; input.numel()]);
        let mut values = input.to_vec();
        for i in 0..values.len() {
            let orig = values[i];
            values[i] = orig + eps;
            probe[k] = Tensor::new(values.clone(), input.shape())?;
            let plus = f(&probe)?.item();
            values[i] = orig - eps;
            probe[k] = Tensor::new(values.clone(), input.shape())?;
            let minus = f(&probe)?.item();
            values[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(err);
        }
        probe[k] = input.detach();
    }
    Ok(worst)
}
