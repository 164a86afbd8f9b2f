use crate::error::{Error, Result};
use crate::nn::{self, Batch, ParamVector, Penalty};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdOptions {
    pub learning_rate: f64,
    /// Passes over the training list, in the same order each time.
    pub passes: usize,
    /// Evaluate every this many updates (plus at step 0 and the last step).
    pub record_every: usize,
}

impl SgdOptions {
    pub fn new(learning_rate: f64) -> Self {
        SgdOptions {
            learning_rate,
            passes: 1,
            record_every: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.passes == 0 || self.record_every == 0 {
            return Err(Error::config("passes and record_every must be at least 1"));
        }
        Ok(())
    }
}

/// `θ − α·∇J(θ)` for a single sample (`m = 1`).
pub fn sgd_step(
    params: &ParamVector,
    input: &[f64],
    target: &[f64],
    alpha: f64,
    lambda: f64,
) -> Result<ParamVector> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::config(format!("learning rate must be positive, got {alpha}")));
    }
    let batch = Batch::single(input, target)?;
    let grad = nn::gradient(params, &batch, Penalty::new(lambda))?;
    let theta: Vec<f64> = params
        .as_slice()
        .iter()
        .zip(&grad)
        .map(|(t, g)| t - alpha * g)
        .collect();
    ParamVector::new(params.shape().clone(), theta)
        .map_err(|e| Error::Numerical(format!("SGD update diverged: {e}")))
}

/// Metrics recorded along one SGD run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub steps: Vec<usize>,
    pub records: Vec<T>,
    pub final_params: ParamVector,
}

/// Unregularized per-sample SGD over `training`, visiting rows in order.
pub fn train_student<T, E>(
    initial: &ParamVector,
    training: &Batch,
    options: &SgdOptions,
    mut evaluator: E,
) -> Result<Trajectory<T>>
where
    E: FnMut(&ParamVector) -> Result<T>,
{
    options.validate()?;
    let total = training.len() * options.passes;
    let mut params = initial.clone();
    let mut steps = vec![0];
    let mut records = vec![evaluator(&params)?];
    for step in 1..=total {
        let (input, target) = training.row((step - 1) % training.len());
        params = sgd_step(
            &params,
            input.as_slice().expect("rows are contiguous"),
            target.as_slice().expect("rows are contiguous"),
            options.learning_rate,
            0.0,
        )
        .map_err(|e| match e {
            Error::Numerical(m) => Error::Numerical(format!("step {step}: {m}")),
            other => other,
        })?;
        if step % options.record_every == 0 || step == total {
            steps.push(step);
            records.push(evaluator(&params)?);
        }
    }
    Ok(Trajectory {
        steps,
        records,
        final_params: params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, NetworkShape};
    use ndarray::Array2;

    fn toy_batch(n: usize) -> Batch {
        let inputs = Array2::from_shape_fn((n, 4), |(i, j)| ((i * 7 + j * 3) % 5) as f64 / 5.0);
        let targets = Array2::from_shape_fn((n, 2), |(i, j)| if i % 2 == j { 1.0 } else { 0.0 });
        Batch::new(inputs, targets).unwrap()
    }

    #[test]
    fn step_arithmetic() {
        // One output, no inputs beyond the bias: J(b) = -ln σ(b) for y = 1,
        // so dJ/db = σ(b) - 1. Pick b with σ(b) - 1 = -0.5 at b = 0.
        let shape = NetworkShape::new(vec![1, 1]).unwrap();
        let p = ParamVector::new(shape, vec![0.0, 0.0]).unwrap();
        let next = sgd_step(&p, &[0.0], &[1.0], 0.1, 0.0).unwrap();
        assert!((next.as_slice()[0] - 0.05).abs() < 1e-15);
        assert_eq!(next.as_slice()[1], 0.0);
    }

    #[test]
    fn zero_rate_rejected() {
        let p = ParamVector::zeros(NetworkShape::new(vec![1, 1]).unwrap());
        assert!(matches!(sgd_step(&p, &[0.0], &[1.0], 0.0, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn recording_grid() {
        let p = init_params(&NetworkShape::new(vec![4, 3, 2]).unwrap(), 1);
        let t = train_student(&p, &toy_batch(500), &SgdOptions::new(0.5), |_| Ok(())).unwrap();
        assert_eq!(t.steps.len(), 51);
        assert_eq!(t.steps[..3], [0, 10, 20]);
        assert_eq!(*t.steps.last().unwrap(), 500);

        let t = train_student(&p, &toy_batch(25), &SgdOptions::new(0.5), |_| Ok(())).unwrap();
        assert_eq!(t.steps, vec![0, 10, 20, 25]);
    }

    #[test]
    fn single_sample_single_update() {
        let p = init_params(&NetworkShape::new(vec![4, 3, 2]).unwrap(), 1);
        let b = toy_batch(1);
        let t = train_student(&p, &b, &SgdOptions::new(0.5), |_| Ok(())).unwrap();
        assert_eq!(t.steps, vec![0, 1]);
        let (x, y) = b.row(0);
        let once = sgd_step(&p, x.as_slice().unwrap(), y.as_slice().unwrap(), 0.5, 0.0).unwrap();
        assert_eq!(t.final_params, once);
    }

    #[test]
    fn multiple_passes_repeat_order() {
        let p = init_params(&NetworkShape::new(vec![4, 3, 2]).unwrap(), 2);
        let b = toy_batch(3);
        let opts = SgdOptions {
            passes: 2,
            record_every: 100,
            ..SgdOptions::new(0.3)
        };
        let t = train_student(&p, &b, &opts, |_| Ok(())).unwrap();
        assert_eq!(t.steps, vec![0, 6]);
        let mut manual = p.clone();
        for i in [0, 1, 2, 0, 1, 2] {
            let (x, y) = b.row(i);
            manual = sgd_step(&manual, x.as_slice().unwrap(), y.as_slice().unwrap(), 0.3, 0.0).unwrap();
        }
        assert_eq!(t.final_params, manual);
    }
}
