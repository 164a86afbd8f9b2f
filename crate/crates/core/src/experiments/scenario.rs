use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::curve::{LearningCurve, SeedSeries};
use super::{fit_teacher, EvalSet, Metrics, TeacherOptions};
use crate::data::{self, read_portable, tails_from_ranking, BiasedSets, Dataset, Split, SplitSpec};
use crate::distill::distill_dataset;
use crate::error::{Error, Result};
use crate::nn::{init_params, NetworkShape, ParamVector};
use crate::optim::{train_student, CgOptions, SgdOptions};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataSelection {
    /// Uniformly drawn samples.
    Typical,
    /// Highest-cost tail under the ranking network.
    Hard,
    /// Lowest-cost tail under the ranking network.
    Easy,
}

impl DataSelection {
    pub fn as_str(&self) -> &'static str {
        match self {
            DataSelection::Typical => "typical",
            DataSelection::Hard => "hard",
            DataSelection::Easy => "easy",
        }
    }
}

impl std::str::FromStr for DataSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "typical" => Ok(DataSelection::Typical),
            "hard" => Ok(DataSelection::Hard),
            "easy" => Ok(DataSelection::Easy),
            other => Err(Error::config(format!(
                "unknown data selection {other:?} (expected typical, hard or easy)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearningSource {
    /// One-hot labels.
    FromData,
    /// Teacher soft targets on the same inputs.
    FromTeacher,
}

impl LearningSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            LearningSource::FromData => "data",
            LearningSource::FromTeacher => "teacher",
        }
    }
}

impl std::str::FromStr for LearningSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "data" | "from_data" => Ok(LearningSource::FromData),
            "teacher" | "from_teacher" => Ok(LearningSource::FromTeacher),
            other => Err(Error::config(format!(
                "unknown learning source {other:?} (expected data or teacher)"
            ))),
        }
    }
}

/// One experiment arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub label: String,
    /// Teacher training samples; 0 means no teacher.
    pub teacher_size: usize,
    pub teacher_lambda: f64,
    pub teacher_data: DataSelection,
    pub student_alpha: f64,
    pub student_data: DataSelection,
    pub learning_source: LearningSource,
    pub seeds: usize,
    pub base_seed: u64,
    pub passes: usize,
    pub record_every: usize,
    pub regularize_bias: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            label: "from_data".into(),
            teacher_size: 0,
            teacher_lambda: 0.0,
            teacher_data: DataSelection::Typical,
            student_alpha: 0.5,
            student_data: DataSelection::Typical,
            learning_source: LearningSource::FromData,
            seeds: 10,
            base_seed: 0,
            passes: 1,
            record_every: 10,
            regularize_bias: true,
        }
    }
}

impl ScenarioConfig {
    /// A from-teacher arm with the given teacher size and `λ`.
    pub fn from_teacher(teacher_size: usize, lambda: f64) -> Self {
        ScenarioConfig {
            label: format!("teacher_lambda{lambda}"),
            teacher_size,
            teacher_lambda: lambda,
            learning_source: LearningSource::FromTeacher,
            ..ScenarioConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_source == LearningSource::FromTeacher && self.teacher_size == 0 {
            return Err(Error::config("learning from a teacher needs teacher_size > 0"));
        }
        if self.seeds == 0 {
            return Err(Error::config("seeds must be at least 1"));
        }
        if !(self.teacher_lambda >= 0.0 && self.teacher_lambda.is_finite()) {
            return Err(Error::config(format!(
                "teacher lambda must be non-negative, got {}",
                self.teacher_lambda
            )));
        }
        if self.learning_source == LearningSource::FromTeacher
            && self.teacher_data != DataSelection::Typical
            && self.teacher_data == self.student_data
        {
            return Err(Error::config(format!(
                "teacher and student cannot both train on the {} tail",
                self.teacher_data.as_str()
            )));
        }
        SgdOptions {
            learning_rate: self.student_alpha,
            passes: self.passes,
            record_every: self.record_every,
        }
        .validate()
    }

    pub fn seed_values(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.seeds as u64).map(move |i| self.base_seed.wrapping_add(i))
    }

    fn uses_tails(&self) -> bool {
        self.student_data != DataSelection::Typical
            || (self.learning_source == LearningSource::FromTeacher
                && self.teacher_data != DataSelection::Typical)
    }

    /// `key = value` lines describing the arm.
    pub fn manifest_lines(&self) -> Vec<(String, String)> {
        vec![
            ("label".into(), self.label.clone()),
            ("learning_source".into(), self.learning_source.as_str().into()),
            ("teacher_size".into(), self.teacher_size.to_string()),
            ("teacher_lambda".into(), self.teacher_lambda.to_string()),
            ("teacher_data".into(), self.teacher_data.as_str().into()),
            ("student_alpha".into(), self.student_alpha.to_string()),
            ("student_data".into(), self.student_data.as_str().into()),
            ("seeds".into(), self.seeds.to_string()),
            ("base_seed".into(), self.base_seed.to_string()),
            ("passes".into(), self.passes.to_string()),
            ("record_every".into(), self.record_every.to_string()),
            ("regularize_bias".into(), self.regularize_bias.to_string()),
        ]
    }
}

/// Corpus ids used by one seed of one arm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedAudit {
    pub seed: u64,
    pub test_ids: Vec<usize>,
    pub student_ids: Vec<usize>,
    /// Empty when the arm has no teacher.
    pub teacher_ids: Vec<usize>,
}

impl SeedAudit {
    /// Teacher, student and test sets must be pairwise disjoint.
    pub fn check_disjoint(&self) -> Result<()> {
        let test: HashSet<usize> = self.test_ids.iter().copied().collect();
        let student: HashSet<usize> = self.student_ids.iter().copied().collect();
        if let Some(id) = self.teacher_ids.iter().find(|id| student.contains(id)) {
            return Err(Error::Data(format!(
                "seed {}: sample {id} is in both the teacher and student sets",
                self.seed
            )));
        }
        if let Some(id) = self
            .teacher_ids
            .iter()
            .chain(&self.student_ids)
            .find(|id| test.contains(id))
        {
            return Err(Error::Data(format!(
                "seed {}: test sample {id} leaked into training",
                self.seed
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub curve: LearningCurve,
    pub audits: Vec<SeedAudit>,
}

/// Everything one seed of one arm trains on.
#[derive(Debug, Clone)]
pub struct ArmData {
    pub split: Split,
    /// Student training samples with their true one-hot targets.
    pub student: Dataset,
    pub teacher: Option<Arc<ParamVector>>,
    pub teacher_ids: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum TeacherSource {
    Pool,
    Remainder,
    Hard,
    Easy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct TeacherKey {
    seed: u64,
    source: TeacherSource,
    size: usize,
    lambda_bits: u64,
    regularize_bias: bool,
}

/// Pool positions with their per-sample cost, lowest first.
type Ranking = Arc<Vec<(usize, f64)>>;

/// A corpus plus memoized per-seed rankings and teachers, shared by every
/// arm and figure run against it.
///
/// For seed `s` the corpus split uses `s` directly; the student, teacher
/// and ranking-network initializations use independent streams derived
/// from `s`. All arms of a seed therefore share the split, the student
/// initialization and the sample order.
pub struct Lab {
    corpus: Dataset,
    split_sizes: SplitSpec,
    tail_size: usize,
    teacher_options: CgOptions,
    rankings: Mutex<HashMap<u64, Ranking>>,
    teachers: Mutex<HashMap<TeacherKey, Arc<ParamVector>>>,
}

impl Lab {
    /// Default split sizes (1000 test, 500 student, 3500 teacher pool) and
    /// 500-sample tails.
    pub fn new(corpus: Dataset) -> Self {
        let split_sizes = SplitSpec::default();
        Lab {
            corpus,
            tail_size: split_sizes.student_count,
            split_sizes,
            teacher_options: CgOptions::default(),
            rankings: Mutex::new(HashMap::new()),
            teachers: Mutex::new(HashMap::new()),
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Lab::new(read_portable(path)?))
    }

    /// Overrides the split sizes (the seed field is ignored) and tail size.
    pub fn with_sizes(mut self, split_sizes: SplitSpec, tail_size: usize) -> Self {
        self.split_sizes = split_sizes;
        self.tail_size = tail_size;
        self
    }

    pub fn with_teacher_options(mut self, options: CgOptions) -> Self {
        self.teacher_options = options;
        self
    }

    pub fn corpus(&self) -> &Dataset {
        &self.corpus
    }

    pub fn split(&self, seed: u64) -> Result<Split> {
        data::split(&self.corpus, &SplitSpec { seed, ..self.split_sizes })
    }

    /// Hard, easy and remainder sets of the seed's teacher pool, ranked by a
    /// `λ = 0` network trained on the whole pool.
    pub fn biased_sets(&self, seed: u64, split: &Split) -> Result<BiasedSets> {
        let pool = &split.teacher_pool;
        if 2 * self.tail_size > pool.len() {
            return Err(Error::config(format!(
                "two tails of {} do not fit in a pool of {}",
                self.tail_size,
                pool.len()
            )));
        }
        let cached = self.rankings.lock().unwrap().get(&seed).cloned();
        let ranking = match cached {
            Some(r) => r,
            None => {
                let options = TeacherOptions {
                    cg: self.teacher_options,
                    regularize_bias: true,
                };
                let ranker_seed = seed::derive(seed, Stream::RankerInit);
                let (ranker, _) = fit_teacher(pool, pool.len(), 0.0, ranker_seed, &options)?;
                let r = Arc::new(data::rank_by_cost(pool, &ranker)?);
                self.rankings.lock().unwrap().insert(seed, r.clone());
                r
            }
        };
        Ok(tails_from_ranking(pool, &ranking, self.tail_size))
    }

    fn teacher(
        &self,
        key: TeacherKey,
        training: &Dataset,
    ) -> Result<Arc<ParamVector>> {
        if let Some(t) = self.teachers.lock().unwrap().get(&key) {
            return Ok(t.clone());
        }
        let options = TeacherOptions {
            cg: self.teacher_options,
            regularize_bias: key.regularize_bias,
        };
        let (params, _) = fit_teacher(
            training,
            key.size,
            f64::from_bits(key.lambda_bits),
            seed::derive(key.seed, Stream::TeacherInit),
            &options,
        )?;
        let params = Arc::new(params);
        self.teachers.lock().unwrap().insert(key, params.clone());
        Ok(params)
    }

    /// Teacher trained on the first `size` samples of the seed's pool.
    pub fn pool_teacher(&self, seed: u64, size: usize, lambda: f64, regularize_bias: bool) -> Result<Arc<ParamVector>> {
        let split = self.split(seed)?;
        let key = TeacherKey {
            seed,
            source: TeacherSource::Pool,
            size,
            lambda_bits: lambda.to_bits(),
            regularize_bias,
        };
        self.teacher(key, &split.teacher_pool)
    }

    /// Resolves the student set and (if any) the teacher of one seed.
    ///
    /// A typical teacher draws from the whole pool when the student set is
    /// typical, and from the pool minus both tails when the student trains
    /// on a tail.
    pub fn prepare_arm(&self, config: &ScenarioConfig, seed: u64) -> Result<ArmData> {
        config.validate()?;
        let split = self.split(seed)?;
        let biased = if config.uses_tails() {
            Some(self.biased_sets(seed, &split)?)
        } else {
            None
        };
        let tail = |sel: DataSelection| -> &Dataset {
            let b = biased.as_ref().expect("tails computed when a tail is selected");
            match sel {
                DataSelection::Hard => &b.hard,
                DataSelection::Easy => &b.easy,
                DataSelection::Typical => &b.remainder,
            }
        };
        let student = match config.student_data {
            DataSelection::Typical => split.student.clone(),
            sel => tail(sel).clone(),
        };
        let (teacher, teacher_ids) = match config.learning_source {
            LearningSource::FromData => (None, Vec::new()),
            LearningSource::FromTeacher => {
                let (source, set) = match (config.teacher_data, config.student_data) {
                    (DataSelection::Typical, DataSelection::Typical) => {
                        (TeacherSource::Pool, &split.teacher_pool)
                    }
                    (DataSelection::Typical, _) => (TeacherSource::Remainder, tail(DataSelection::Typical)),
                    (DataSelection::Hard, _) => (TeacherSource::Hard, tail(DataSelection::Hard)),
                    (DataSelection::Easy, _) => (TeacherSource::Easy, tail(DataSelection::Easy)),
                };
                let key = TeacherKey {
                    seed,
                    source,
                    size: config.teacher_size,
                    lambda_bits: config.teacher_lambda.to_bits(),
                    regularize_bias: config.regularize_bias,
                };
                let ids = set.head("teacher", config.teacher_size)?.ids();
                (Some(self.teacher(key, set)?), ids)
            }
        };
        Ok(ArmData {
            split,
            student,
            teacher,
            teacher_ids,
        })
    }

    fn run_seed(&self, config: &ScenarioConfig, seed: u64) -> Result<(Vec<usize>, SeedSeries, SeedAudit)> {
        let arm = self.prepare_arm(config, seed)?;
        let training = match &arm.teacher {
            None => arm.student.to_batch()?,
            Some(teacher) => distill_dataset(teacher, &arm.student)?
                .apply_to(&arm.student)?
                .to_batch()?,
        };
        let eval = EvalSet::new(&arm.split.test)?;
        let init = init_params(&NetworkShape::canonical(), seed::derive(seed, Stream::StudentInit));
        let options = SgdOptions {
            learning_rate: config.student_alpha,
            passes: config.passes,
            record_every: config.record_every,
        };
        let trajectory = train_student(&init, &training, &options, |p| eval.evaluate(p))?;
        let series = SeedSeries {
            seed,
            accuracy: trajectory.records.iter().map(|m: &Metrics| m.accuracy).collect(),
            cost: trajectory.records.iter().map(|m| m.cost).collect(),
        };
        let audit = SeedAudit {
            seed,
            test_ids: arm.split.test.ids(),
            student_ids: arm.student.ids(),
            teacher_ids: arm.teacher_ids,
        };
        audit.check_disjoint()?;
        Ok((trajectory.steps, series, audit))
    }

    /// Runs every seed of an arm and aggregates the learning curves.
    pub fn run_scenario(&self, config: &ScenarioConfig) -> Result<ScenarioOutcome> {
        config.validate()?;
        let seeds: Vec<u64> = config.seed_values().collect();
        let runs = seeds
            .par_iter()
            .map(|&s| {
                self.run_seed(config, s).map_err(|e| match e {
                    Error::Numerical(m) => Error::Numerical(format!("seed {s}: {m}")),
                    Error::Config(m) => Error::Config(format!("seed {s}: {m}")),
                    Error::Data(m) => Error::Data(format!("seed {s}: {m}")),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let steps = runs[0].0.clone();
        let mut per_seed = Vec::with_capacity(runs.len());
        let mut audits = Vec::with_capacity(runs.len());
        for (_, series, audit) in runs {
            per_seed.push(series);
            audits.push(audit);
        }
        Ok(ScenarioOutcome {
            curve: LearningCurve::from_series(config.label.clone(), steps, per_seed)?,
            audits,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;

    fn small_lab() -> Lab {
        let corpus = generate_synthetic(200, 4, 0.6).unwrap();
        Lab::new(corpus)
            .with_sizes(
                SplitSpec {
                    test_count: 40,
                    student_count: 30,
                    teacher_pool_count: 120,
                    seed: 0,
                },
                30,
            )
            .with_teacher_options(CgOptions {
                max_iterations: 30,
                ..CgOptions::default()
            })
    }

    fn config(source: LearningSource) -> ScenarioConfig {
        ScenarioConfig {
            learning_source: source,
            teacher_size: if source == LearningSource::FromTeacher { 30 } else { 0 },
            teacher_lambda: 1.0,
            seeds: 2,
            base_seed: 5,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        let mut c = ScenarioConfig::default();
        assert!(c.validate().is_ok());
        c.learning_source = LearningSource::FromTeacher;
        assert!(c.validate().is_err());
        c.teacher_size = 10;
        assert!(c.validate().is_ok());
        c.teacher_data = DataSelection::Hard;
        c.student_data = DataSelection::Hard;
        assert!(c.validate().is_err());
        c.student_data = DataSelection::Easy;
        assert!(c.validate().is_ok());
        c.seeds = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn arms_share_student_inputs() {
        let lab = small_lab();
        let data_arm = lab.prepare_arm(&config(LearningSource::FromData), 5).unwrap();
        let teacher_arm = lab.prepare_arm(&config(LearningSource::FromTeacher), 5).unwrap();
        assert_eq!(data_arm.student, teacher_arm.student);
        assert!(data_arm.teacher.is_none());
        assert_eq!(teacher_arm.teacher_ids.len(), 30);
    }

    #[test]
    fn scenario_runs_and_audits() {
        let lab = small_lab();
        let out = lab.run_scenario(&config(LearningSource::FromTeacher)).unwrap();
        assert_eq!(out.curve.per_seed.len(), 2);
        assert_eq!(out.curve.steps, vec![0, 10, 20, 30]);
        assert_eq!(out.audits.len(), 2);
        for a in &out.audits {
            a.check_disjoint().unwrap();
        }
        let again = lab.run_scenario(&config(LearningSource::FromTeacher)).unwrap();
        assert_eq!(out.curve, again.curve);
    }

    #[test]
    fn biased_student_uses_remainder_teacher() {
        let lab = small_lab();
        let c = ScenarioConfig {
            student_data: DataSelection::Hard,
            ..config(LearningSource::FromTeacher)
        };
        let arm = lab.prepare_arm(&c, 5).unwrap();
        let tails = lab.biased_sets(5, &arm.split).unwrap();
        assert_eq!(arm.student.ids(), tails.hard.ids());
        let remainder: HashSet<usize> = tails.remainder.ids().into_iter().collect();
        assert!(arm.teacher_ids.iter().all(|id| remainder.contains(id)));
    }

    #[test]
    fn audit_detects_overlap() {
        let a = SeedAudit {
            seed: 1,
            test_ids: vec![1, 2],
            student_ids: vec![3, 4],
            teacher_ids: vec![4, 5],
        };
        assert!(a.check_disjoint().is_err());
        let b = SeedAudit {
            teacher_ids: vec![2],
            ..a.clone()
        };
        assert!(b.check_disjoint().is_err());
        let c = SeedAudit {
            teacher_ids: vec![5, 6],
            ..a
        };
        assert!(c.check_disjoint().is_ok());
    }
}
