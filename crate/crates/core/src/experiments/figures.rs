use rayon::prelude::*;

use super::curve::{mean_and_std, LearningCurve};
use super::scenario::{DataSelection, Lab, ScenarioConfig, SeedAudit};
use super::{evaluate, Metrics};
use crate::error::{Error, Result};

pub const FIGURE_IDS: std::ops::RangeInclusive<u32> = 1..=9;
/// Teacher training-set sizes of the figure 1 sweep.
pub const SWEEP_SIZES: [usize; 4] = [500, 1000, 2000, 3500];
pub const SWEEP_LAMBDAS: [f64; 3] = [0.0, 5.0, 10.0];

fn check_figure(id: u32) -> Result<()> {
    if FIGURE_IDS.contains(&id) {
        Ok(())
    } else {
        Err(Error::config(format!(
            "unknown figure {id}; valid range {}..{}",
            FIGURE_IDS.start(),
            FIGURE_IDS.end()
        )))
    }
}

/// The arms of a learning-curve figure (2 to 9): a from-data student and
/// three from-teacher students with teacher `λ` of 0, 5 and 10.
///
/// Figure 1 is a teacher sweep and has no arms.
pub fn figure_arms(id: u32, base_seed: u64, seeds: usize) -> Result<Vec<ScenarioConfig>> {
    check_figure(id)?;
    let mut alpha = 0.5;
    let mut teacher_size = 500;
    let mut teacher_data = DataSelection::Typical;
    let mut student_data = DataSelection::Typical;
    match id {
        1 => return Ok(Vec::new()),
        2 => {}
        3 => teacher_size = 100,
        4 => teacher_data = DataSelection::Hard,
        5 => alpha = 0.1,
        6 => student_data = DataSelection::Hard,
        7 => teacher_size = 3500,
        8 => teacher_data = DataSelection::Easy,
        9 => student_data = DataSelection::Easy,
        _ => unreachable!(),
    }
    let base = ScenarioConfig {
        student_alpha: alpha,
        student_data,
        teacher_data,
        seeds,
        base_seed,
        ..ScenarioConfig::default()
    };
    let mut arms = vec![ScenarioConfig {
        label: "from_data".into(),
        ..base.clone()
    }];
    for lambda in SWEEP_LAMBDAS {
        let t = ScenarioConfig::from_teacher(teacher_size, lambda);
        arms.push(ScenarioConfig {
            label: t.label,
            teacher_size,
            teacher_lambda: lambda,
            learning_source: t.learning_source,
            ..base.clone()
        });
    }
    Ok(arms)
}

/// Teacher test metrics for one (size, λ) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub size: usize,
    pub lambda: f64,
    pub per_seed: Vec<(u64, Metrics)>,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub cost_mean: f64,
    pub cost_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeacherSweep {
    pub rows: Vec<SweepRow>,
}

impl TeacherSweep {
    pub fn row(&self, size: usize, lambda: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.size == size && r.lambda == lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FigureResult {
    TeacherSweep(TeacherSweep),
    Curves(Vec<(ScenarioConfig, LearningCurve)>),
}

#[derive(Debug, Clone)]
pub struct FigureRun {
    pub id: u32,
    pub base_seed: u64,
    pub seeds: usize,
    pub result: FigureResult,
    /// Per-arm, per-seed index sets.
    pub audits: Vec<SeedAudit>,
}

impl Lab {
    /// Teacher test accuracy and cost for every size and `λ`, averaged over
    /// seeds.
    pub fn teacher_sweep(
        &self,
        sizes: &[usize],
        lambdas: &[f64],
        base_seed: u64,
        seeds: usize,
        regularize_bias: bool,
    ) -> Result<TeacherSweep> {
        if seeds == 0 {
            return Err(Error::config("seeds must be at least 1"));
        }
        let seed_values: Vec<u64> = (0..seeds as u64).map(|i| base_seed.wrapping_add(i)).collect();
        let mut cells = Vec::new();
        for &size in sizes {
            for &lambda in lambdas {
                for &s in &seed_values {
                    cells.push((size, lambda, s));
                }
            }
        }
        let metrics = cells
            .par_iter()
            .map(|&(size, lambda, s)| {
                let teacher = self.pool_teacher(s, size, lambda, regularize_bias)?;
                evaluate(&teacher, &self.split(s)?.test)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for (chunk, cell) in metrics.chunks(seeds).zip(cells.chunks(seeds)) {
            let acc: Vec<f64> = chunk.iter().map(|m| m.accuracy).collect();
            let cost: Vec<f64> = chunk.iter().map(|m| m.cost).collect();
            let (acc_mean, acc_std) = mean_and_std(&acc);
            let (cost_mean, cost_std) = mean_and_std(&cost);
            rows.push(SweepRow {
                size: cell[0].0,
                lambda: cell[0].1,
                per_seed: cell.iter().map(|c| c.2).zip(chunk.iter().copied()).collect(),
                acc_mean,
                acc_std,
                cost_mean,
                cost_std,
            });
        }
        Ok(TeacherSweep { rows })
    }

    /// Runs a figure preset.
    pub fn run_figure(&self, id: u32, base_seed: u64, seeds: usize) -> Result<FigureRun> {
        self.run_arms(id, base_seed, seeds, figure_arms(id, base_seed, seeds)?)
    }

    /// Runs a figure with caller-adjusted arms (e.g. command-line overrides).
    pub fn run_arms(
        &self,
        id: u32,
        base_seed: u64,
        seeds: usize,
        arms: Vec<ScenarioConfig>,
    ) -> Result<FigureRun> {
        check_figure(id)?;
        if id == 1 {
            let regularize_bias = arms.first().map_or(true, |a| a.regularize_bias);
            let sweep = self.teacher_sweep(&SWEEP_SIZES, &SWEEP_LAMBDAS, base_seed, seeds, regularize_bias)?;
            return Ok(FigureRun {
                id,
                base_seed,
                seeds,
                result: FigureResult::TeacherSweep(sweep),
                audits: Vec::new(),
            });
        }
        let mut curves = Vec::with_capacity(arms.len());
        let mut audits = Vec::new();
        for arm in arms {
            let outcome = self
                .run_scenario(&arm)
                .map_err(|e| annotate(e, &format!("figure {id}, arm {}", arm.label)))?;
            audits.extend(outcome.audits);
            curves.push((arm, outcome.curve));
        }
        Ok(FigureRun {
            id,
            base_seed,
            seeds,
            result: FigureResult::Curves(curves),
            audits,
        })
    }
}

fn annotate(e: Error, context: &str) -> Error {
    match e {
        Error::Numerical(m) => Error::Numerical(format!("{context}: {m}")),
        Error::Config(m) => Error::Config(format!("{context}: {m}")),
        Error::Data(m) => Error::Data(format!("{context}: {m}")),
        other => other,
    }
}
