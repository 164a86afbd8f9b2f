//! Metrics, teacher training, multi-seed scenarios and the figure presets.

mod curve;
mod figures;
mod report;
mod scenario;

use crate::data::{Dataset, TargetVector};
use crate::error::{Error, Result};
use crate::nn::{self, init_params, Batch, NetworkShape, ParamVector, Penalty};
use crate::optim::{minimize_cg, CgOptions, CgReport};

pub use curve::{mean_and_std, LearningCurve, SeedSeries};
pub use figures::{figure_arms, FigureResult, FigureRun, SweepRow, TeacherSweep, FIGURE_IDS, SWEEP_LAMBDAS, SWEEP_SIZES};
pub use report::{curve_csv, figure_manifest, sweep_csv, write_figure};
pub use scenario::{ArmData, DataSelection, Lab, LearningSource, ScenarioConfig, ScenarioOutcome, SeedAudit};

/// Test-set accuracy and unregularized cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub cost: f64,
}

/// A test set prepared once for repeated evaluation.
#[derive(Debug, Clone)]
pub struct EvalSet {
    batch: Batch,
    labels: Vec<usize>,
}

impl EvalSet {
    pub fn new(test: &Dataset) -> Result<Self> {
        if test.is_empty() {
            return Err(Error::config("test set is empty"));
        }
        let hard: Vec<TargetVector> = test.labels().into_iter().map(TargetVector::one_hot).collect();
        let batch = test.with_targets(test.name(), &hard)?.to_batch()?;
        Ok(EvalSet {
            batch,
            labels: test.labels().into_iter().map(usize::from).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn evaluate(&self, params: &ParamVector) -> Result<Metrics> {
        let (predicted, cost) = nn::predict_and_cost(params, &self.batch)?;
        let correct = predicted
            .iter()
            .zip(&self.labels)
            .filter(|(p, l)| p == l)
            .count();
        Ok(Metrics {
            accuracy: correct as f64 / self.labels.len() as f64,
            cost,
        })
    }
}

/// Accuracy against the true labels and cost with `λ = 0`.
pub fn evaluate(params: &ParamVector, test: &Dataset) -> Result<Metrics> {
    EvalSet::new(test)?.evaluate(params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeacherOptions {
    pub cg: CgOptions,
    pub regularize_bias: bool,
}

impl Default for TeacherOptions {
    fn default() -> Self {
        TeacherOptions {
            cg: CgOptions::default(),
            regularize_bias: true,
        }
    }
}

/// Fits a canonical network to the first `size` samples of `pool` by
/// conjugate gradient, starting from `init_params(seed)`.
pub fn fit_teacher(
    pool: &Dataset,
    size: usize,
    lambda: f64,
    seed: u64,
    options: &TeacherOptions,
) -> Result<(ParamVector, CgReport)> {
    if size == 0 {
        return Err(Error::config("teacher needs at least one training sample"));
    }
    let training = pool.head("teacher", size)?.to_batch()?;
    let penalty = Penalty::new(lambda).with_bias(options.regularize_bias);
    let shape = NetworkShape::canonical();
    let init = init_params(&shape, seed);
    // Validate lambda before the optimizer starts.
    nn::cost(&init, &training, penalty)?;
    let report = minimize_cg(
        |theta, grad| {
            let params = ParamVector::new(shape.clone(), theta.to_vec())?;
            let (c, g) = nn::cost_and_gradient(&params, &training, penalty)?;
            grad.copy_from_slice(&g);
            Ok(c)
        },
        init.as_slice(),
        &options.cg,
    )?;
    let params = ParamVector::new(shape, report.x.clone())?;
    Ok((params, report))
}

pub fn train_teacher(pool: &Dataset, size: usize, lambda: f64, seed: u64) -> Result<ParamVector> {
    fit_teacher(pool, size, lambda, seed, &TeacherOptions::default()).map(|(p, _)| p)
}
