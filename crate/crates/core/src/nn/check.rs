//! Central-difference check of the analytic gradient.

use ndarray::Array2;
use rand::Rng;

use super::{cost, cost_and_gradient, init_params, Batch, NetworkShape, ParamVector, Penalty};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

/// Outcome of [`gradient_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub param_count: usize,
    pub max_relative_error: f64,
    /// Index of the worst parameter.
    pub worst: usize,
}

/// Random parameters, uniform inputs in `[0, 1)` and random one-hot targets.
pub fn random_instance(shape: &NetworkShape, samples: usize, seed: u64) -> Result<(ParamVector, Batch)> {
    let params = init_params(shape, seed);
    let mut rng = seed::rng(seed::derive(seed, Stream::GradCheck));
    let inputs = Array2::from_shape_fn((samples, shape.inputs()), |_| rng.random::<f64>());
    let mut targets = Array2::zeros((samples, shape.outputs()));
    for mut row in targets.rows_mut() {
        row[rng.random_range(0..shape.outputs())] = 1.0;
    }
    Ok((params, Batch::new(inputs, targets)?))
}

/// Largest `|analytic − numeric| / max(1, |analytic|, |numeric|)` over all
/// parameters, with numeric derivatives from central differences of `step`.
pub fn max_relative_error(
    params: &ParamVector,
    batch: &Batch,
    penalty: Penalty,
    analytic: &[f64],
    step: f64,
) -> Result<(f64, usize)> {
    if analytic.len() != params.len() {
        return Err(Error::config(format!(
            "gradient has {} entries for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    let mut theta = params.as_slice().to_vec();
    let (mut worst, mut at) = (0.0, 0);
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + step;
        let plus = cost(&ParamVector::new(params.shape().clone(), theta.clone())?, batch, penalty)?;
        theta[i] = orig - step;
        let minus = cost(&ParamVector::new(params.shape().clone(), theta.clone())?, batch, penalty)?;
        theta[i] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let err = (analytic[i] - numeric).abs() / 1f64.max(analytic[i].abs()).max(numeric.abs());
        if err > worst {
            worst = err;
            at = i;
        }
    }
    Ok((worst, at))
}

/// Compares backpropagation against central differences on a random
/// instance. `perturb` may alter the analytic gradient first (used to make
/// sure the check can fail).
pub fn gradient_check(
    shape: &NetworkShape,
    samples: usize,
    penalty: Penalty,
    seed: u64,
    perturb: impl FnOnce(&mut [f64]),
) -> Result<GradCheck> {
    let (params, batch) = random_instance(shape, samples, seed)?;
    let (_, mut grad) = cost_and_gradient(&params, &batch, penalty)?;
    perturb(&mut grad);
    let (max_relative_error, worst) = max_relative_error(&params, &batch, penalty, &grad, 1e-5)?;
    Ok(GradCheck {
        param_count: params.len(),
        max_relative_error,
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_and_detects_corruption() {
        let shape = NetworkShape::new(vec![4, 3, 2]).unwrap();
        let ok = gradient_check(&shape, 5, Penalty::new(5.0), 3, |_| {}).unwrap();
        assert_eq!(ok.param_count, 23);
        assert!(ok.max_relative_error < 1e-6, "{}", ok.max_relative_error);
        let bad = gradient_check(&shape, 5, Penalty::new(5.0), 3, |g| g[7] += 1e-3).unwrap();
        assert!(bad.max_relative_error > 1e-6);
        assert_eq!(bad.worst, 7);
    }
}
