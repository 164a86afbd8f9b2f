use crate::error::{Error, Result};

/// Accuracy and cost of one seed on the shared step grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSeries {
    pub seed: u64,
    pub accuracy: Vec<f64>,
    pub cost: Vec<f64>,
}

/// Per-seed learning curves of one scenario arm with their mean and
/// sample standard deviation at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub label: String,
    pub steps: Vec<usize>,
    pub per_seed: Vec<SeedSeries>,
    pub acc_mean: Vec<f64>,
    pub acc_std: Vec<f64>,
    pub cost_mean: Vec<f64>,
    pub cost_std: Vec<f64>,
}

/// Mean and sample (n − 1) standard deviation; the deviation of a single
/// value is 0.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl LearningCurve {
    pub fn from_series(label: impl Into<String>, steps: Vec<usize>, per_seed: Vec<SeedSeries>) -> Result<Self> {
        if per_seed.is_empty() {
            return Err(Error::config("learning curve needs at least one seed"));
        }
        if let Some(s) = per_seed
            .iter()
            .find(|s| s.accuracy.len() != steps.len() || s.cost.len() != steps.len())
        {
            return Err(Error::config(format!(
                "seed {} has {} points on a grid of {}",
                s.seed,
                s.accuracy.len(),
                steps.len()
            )));
        }
        let column = |i: usize, pick: fn(&SeedSeries) -> &Vec<f64>| -> Vec<f64> {
            per_seed.iter().map(|s| pick(s)[i]).collect()
        };
        let (mut acc_mean, mut acc_std, mut cost_mean, mut cost_std) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in 0..steps.len() {
            let (m, s) = mean_and_std(&column(i, |s| &s.accuracy));
            acc_mean.push(m);
            acc_std.push(s);
            let (m, s) = mean_and_std(&column(i, |s| &s.cost));
            cost_mean.push(m);
            cost_std.push(s);
        }
        Ok(LearningCurve {
            label: label.into(),
            steps,
            per_seed,
            acc_mean,
            acc_std,
            cost_mean,
            cost_std,
        })
    }

    pub fn final_accuracy(&self) -> f64 {
        *self.acc_mean.last().unwrap()
    }

    pub fn final_cost(&self) -> f64 {
        *self.cost_mean.last().unwrap()
    }
}
