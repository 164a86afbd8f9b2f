//! Digit datasets: types, file formats, seeded splits and hardness tails.

mod idx;
pub(crate) mod io_util;
mod portable;
mod resample;
mod synthetic;

use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nn::{self, Batch, NetworkShape, ParamVector};
use crate::seed;

pub use idx::{convert_idx, idx_labels_path, load_idx, read_idx_images, read_idx_labels, IdxImages};
pub use io_util::write_atomic;
pub use portable::{read_portable, write_portable, TargetEncoding};
pub use resample::resample_bilinear;
pub use synthetic::generate_synthetic;

/// Side length of the square images the network consumes.
pub const SIDE: usize = 20;
pub const PIXELS: usize = SIDE * SIDE;
pub const CLASSES: usize = 10;

/// Tolerance on the unit sum of a target vector.
pub const TARGET_SUM_TOL: f64 = 1e-9;

/// One 20×20 grayscale image (row-major, values in `[0, 1]`) and its digit.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pixels: Vec<f32>,
    label: u8,
}

impl Sample {
    pub fn new(pixels: Vec<f32>, label: u8) -> Result<Self> {
        if pixels.len() != PIXELS {
            return Err(Error::Data(format!(
                "sample has {} pixels, expected {PIXELS}",
                pixels.len()
            )));
        }
        if let Some(i) = pixels
            .iter()
            .position(|p| !(p.is_finite() && (0.0..=1.0).contains(p)))
        {
            return Err(Error::Data(format!(
                "pixel {i} = {} is outside [0, 1]",
                pixels[i]
            )));
        }
        if usize::from(label) >= CLASSES {
            return Err(Error::Data(format!("label {label} is not a digit")));
        }
        Ok(Sample { pixels, label })
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn label(&self) -> u8 {
        self.label
    }
}

/// Probability vector over the ten digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetVector([f64; CLASSES]);

impl TargetVector {
    /// Digit `d` maps to index `d`.
    pub fn one_hot(label: u8) -> Self {
        let mut probs = [0.0; CLASSES];
        probs[usize::from(label)] = 1.0;
        TargetVector(probs)
    }

    pub fn from_probs(probs: [f64; CLASSES]) -> Result<Self> {
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Data(format!(
                "target entries must lie in [0, 1]: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > TARGET_SUM_TOL {
            return Err(Error::Data(format!("target sums to {sum}, not 1")));
        }
        Ok(TargetVector(probs))
    }

    pub fn probs(&self) -> &[f64; CLASSES] {
        &self.0
    }

    pub fn is_one_hot(&self) -> bool {
        self.0.iter().filter(|&&p| p == 1.0).count() == 1
            && self.0.iter().filter(|&&p| p == 0.0).count() == CLASSES - 1
    }

    pub fn argmax(&self) -> usize {
        nn::argmax(self.0.iter().copied())
    }
}

/// A sample, its training target and its position in the source corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// Index of the sample in the file it was loaded from. Subsets keep it,
    /// so overlap between derived sets can be audited.
    pub id: usize,
    pub sample: Sample,
    pub target: TargetVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, examples: Vec<Example>) -> Self {
        Dataset {
            name: name.into(),
            examples,
        }
    }

    /// Dataset with one-hot targets and ids `0..n`.
    pub fn from_samples(name: impl Into<String>, samples: Vec<Sample>) -> Self {
        let examples = samples
            .into_iter()
            .enumerate()
            .map(|(id, sample)| Example {
                id,
                target: TargetVector::one_hot(sample.label),
                sample,
            })
            .collect();
        Dataset::new(name, examples)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Example> {
        self.examples.iter()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.id).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.examples.iter().map(|e| e.sample.label).collect()
    }

    /// Examples at `positions`, in that order.
    pub fn subset(&self, name: impl Into<String>, positions: &[usize]) -> Dataset {
        Dataset::new(
            name,
            positions.iter().map(|&i| self.examples[i].clone()).collect(),
        )
    }

    /// The first `n` examples.
    pub fn head(&self, name: impl Into<String>, n: usize) -> Result<Dataset> {
        if n > self.len() {
            return Err(Error::config(format!(
                "requested {n} samples from {} which has {}",
                self.name,
                self.len()
            )));
        }
        Ok(Dataset::new(name, self.examples[..n].to_vec()))
    }

    /// Same samples with replacement targets, index-aligned.
    pub fn with_targets(&self, name: impl Into<String>, targets: &[TargetVector]) -> Result<Dataset> {
        if targets.len() != self.len() {
            return Err(Error::config(format!(
                "{} targets for {} samples",
                targets.len(),
                self.len()
            )));
        }
        let examples = self
            .examples
            .iter()
            .zip(targets)
            .map(|(e, t)| Example {
                target: *t,
                ..e.clone()
            })
            .collect();
        Ok(Dataset::new(name, examples))
    }

    /// `len × 400` matrix of pixels.
    pub fn inputs(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.len(), PIXELS));
        for (mut row, e) in m.rows_mut().into_iter().zip(&self.examples) {
            for (dst, &p) in row.iter_mut().zip(&e.sample.pixels) {
                *dst = f64::from(p);
            }
        }
        m
    }

    /// `len × 10` matrix of targets.
    pub fn targets(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.len(), CLASSES));
        for (mut row, e) in m.rows_mut().into_iter().zip(&self.examples) {
            row.assign(&ndarray::ArrayView1::from(&e.target.0[..]));
        }
        m
    }

    pub fn to_batch(&self) -> Result<Batch> {
        if self.is_empty() {
            return Err(Error::config(format!("dataset {} is empty", self.name)));
        }
        Batch::new(self.inputs(), self.targets())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// `DLAB` files written by [`write_portable`].
    Portable,
    /// An MNIST-style IDX image file; labels are read from the sibling file
    /// named by [`idx_labels_path`]. Images are resampled to 20×20.
    Idx,
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset> {
    let path = path.as_ref();
    match format {
        DatasetFormat::Portable => read_portable(path),
        DatasetFormat::Idx => load_idx(path, idx_labels_path(path)?),
    }
}

/// Sizes of the three disjoint subsets carved from a shuffled corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub test_count: usize,
    pub student_count: usize,
    pub teacher_pool_count: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_count: 1000,
            student_count: 500,
            teacher_pool_count: 3500,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec {
            seed,
            ..SplitSpec::default()
        }
    }

    fn total(&self) -> usize {
        self.test_count + self.student_count + self.teacher_pool_count
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub test: Dataset,
    pub student: Dataset,
    pub teacher_pool: Dataset,
}

/// Shuffles with `spec.seed` and takes test, student and teacher-pool
/// subsets from consecutive ranges of the permutation.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<Split> {
    if spec.test_count == 0 || spec.student_count == 0 || spec.teacher_pool_count == 0 {
        return Err(Error::config(format!("split counts must be positive: {spec:?}")));
    }
    if spec.total() > dataset.len() {
        return Err(Error::config(format!(
            "split needs {} samples but {} has {}",
            spec.total(),
            dataset.name(),
            dataset.len()
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut seed::rng(spec.seed));
    let (test, rest) = order.split_at(spec.test_count);
    let (student, rest) = rest.split_at(spec.student_count);
    let pool = &rest[..spec.teacher_pool_count];
    Ok(Split {
        test: dataset.subset("test", test),
        student: dataset.subset("student", student),
        teacher_pool: dataset.subset("teacher_pool", pool),
    })
}

fn check_canonical(params: &ParamVector) -> Result<()> {
    if params.shape() != &NetworkShape::canonical() {
        return Err(Error::config(format!(
            "expected a {} network, got {}",
            NetworkShape::canonical(),
            params.shape()
        )));
    }
    Ok(())
}

/// Positions in `pool` ordered by unregularized single-sample cost, lowest
/// first; equal costs keep position order.
pub fn rank_by_cost(pool: &Dataset, params: &ParamVector) -> Result<Vec<(usize, f64)>> {
    check_canonical(params)?;
    if pool.is_empty() {
        return Ok(Vec::new());
    }
    let costs = nn::per_sample_cost(params, &pool.to_batch()?)?;
    let mut ranked: Vec<(usize, f64)> = costs.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Hardest tail, easiest tail, and everything else from a pool.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedSets {
    pub hard: Dataset,
    pub easy: Dataset,
    pub remainder: Dataset,
}

/// Splits `pool` into the `tail_size` highest-cost and lowest-cost samples
/// and the rest. Each output keeps the pool's order, so the tails are not
/// sorted by difficulty.
pub fn make_biased_sets(pool: &Dataset, params: &ParamVector, tail_size: usize) -> Result<BiasedSets> {
    check_canonical(params)?;
    if 2 * tail_size > pool.len() {
        return Err(Error::config(format!(
            "two tails of {tail_size} do not fit in a pool of {}",
            pool.len()
        )));
    }
    let ranked = rank_by_cost(pool, params)?;
    Ok(tails_from_ranking(pool, &ranked, tail_size))
}

pub(crate) fn tails_from_ranking(
    pool: &Dataset,
    ranked: &[(usize, f64)],
    tail_size: usize,
) -> BiasedSets {
    let n = ranked.len();
    let mut easy: Vec<usize> = ranked[..tail_size].iter().map(|r| r.0).collect();
    let mut hard: Vec<usize> = ranked[n - tail_size..].iter().map(|r| r.0).collect();
    let mut rest: Vec<usize> = ranked[tail_size..n - tail_size].iter().map(|r| r.0).collect();
    easy.sort_unstable();
    hard.sort_unstable();
    rest.sort_unstable();
    BiasedSets {
        hard: pool.subset("hard", &hard),
        easy: pool.subset("easy", &easy),
        remainder: pool.subset("remainder", &rest),
    }
}
