//! Teacher soft targets: the ten sigmoid outputs scaled to sum to one.

use ndarray::ArrayView2;

use crate::data::{Dataset, TargetVector, CLASSES};
use crate::error::{Error, Result};
use crate::nn::{self, ParamVector};

/// Soft targets for a list of inputs, index-aligned with it.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftTargets {
    pub targets: Vec<TargetVector>,
    /// Fingerprint of the teacher that produced them.
    pub provenance: String,
}

impl SoftTargets {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// `inputs` with its targets replaced by these soft targets.
    pub fn apply_to(&self, inputs: &Dataset) -> Result<Dataset> {
        inputs.with_targets(format!("{}+soft", inputs.name()), &self.targets)
    }
}

/// Runs the teacher on every input row and normalizes its outputs.
///
/// No rounding toward the most likely class: the student sees the full
/// distribution. Sigmoid outputs are strictly positive, so the normalized
/// vectors are too.
pub fn soft_targets(teacher: &ParamVector, inputs: ArrayView2<'_, f64>) -> Result<SoftTargets> {
    if teacher.shape().outputs() != CLASSES {
        return Err(Error::config(format!(
            "teacher {} does not have {CLASSES} outputs",
            teacher.shape()
        )));
    }
    let outputs = nn::outputs(teacher, inputs)?;
    let targets = outputs
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let sum: f64 = row.sum();
            let mut probs = [0.0; CLASSES];
            for (p, &h) in probs.iter_mut().zip(row.iter()) {
                *p = h / sum;
            }
            TargetVector::from_probs(probs)
                .map_err(|e| Error::Numerical(format!("soft target for input {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SoftTargets {
        targets,
        provenance: teacher.fingerprint(),
    })
}

/// Soft targets for every sample of `dataset`.
pub fn distill_dataset(teacher: &ParamVector, dataset: &Dataset) -> Result<SoftTargets> {
    soft_targets(teacher, dataset.inputs().view())
}
