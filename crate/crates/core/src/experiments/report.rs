use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::curve::LearningCurve;
use super::figures::{FigureResult, FigureRun, TeacherSweep};
use crate::data::write_atomic;
use crate::error::{Error, Result};

/// One row per step: means, sample deviations, then every seed's pair.
pub fn curve_csv(curve: &LearningCurve) -> String {
    let mut out = String::from("step,acc_mean,acc_std,cost_mean,cost_std");
    for s in &curve.per_seed {
        let _ = write!(out, ",seed{0}_acc,seed{0}_cost", s.seed);
    }
    out.push('\n');
    for (i, step) in curve.steps.iter().enumerate() {
        let _ = write!(
            out,
            "{step},{},{},{},{}",
            curve.acc_mean[i], curve.acc_std[i], curve.cost_mean[i], curve.cost_std[i]
        );
        for s in &curve.per_seed {
            let _ = write!(out, ",{},{}", s.accuracy[i], s.cost[i]);
        }
        out.push('\n');
    }
    out
}

pub fn sweep_csv(sweep: &TeacherSweep) -> String {
    let mut out = String::from("size,lambda,acc_mean,acc_std,cost_mean,cost_std");
    if let Some(first) = sweep.rows.first() {
        for (seed, _) in &first.per_seed {
            let _ = write!(out, ",seed{seed}_acc,seed{seed}_cost");
        }
    }
    out.push('\n');
    for r in &sweep.rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            r.size, r.lambda, r.acc_mean, r.acc_std, r.cost_mean, r.cost_std
        );
        for (_, m) in &r.per_seed {
            let _ = write!(out, ",{},{}", m.accuracy, m.cost);
        }
        out.push('\n');
    }
    out
}

/// `key = value` manifest of a figure run. Arm settings are prefixed with
/// `arm<i>.`; `extra` pairs (command line, dataset checksum, ...) come first.
pub fn figure_manifest(run: &FigureRun, extra: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in extra {
        let _ = writeln!(out, "{k} = {v}");
    }
    let _ = writeln!(out, "figure = {}", run.id);
    let _ = writeln!(out, "base_seed = {}", run.base_seed);
    let _ = writeln!(out, "seeds = {}", run.seeds);
    match &run.result {
        FigureResult::TeacherSweep(sweep) => {
            let sizes: Vec<String> = dedup(sweep.rows.iter().map(|r| r.size.to_string()));
            let lambdas: Vec<String> = dedup(sweep.rows.iter().map(|r| r.lambda.to_string()));
            let _ = writeln!(out, "sweep.sizes = {}", sizes.join(","));
            let _ = writeln!(out, "sweep.lambdas = {}", lambdas.join(","));
            let _ = writeln!(out, "output = {}", sweep_file_name(run.id));
        }
        FigureResult::Curves(curves) => {
            for (i, (config, _)) in curves.iter().enumerate() {
                for (k, v) in config.manifest_lines() {
                    let _ = writeln!(out, "arm{i}.{k} = {v}");
                }
                let _ = writeln!(out, "arm{i}.output = {}", curve_file_name(run.id, &config.label));
            }
        }
    }
    out
}

fn dedup(items: impl Iterator<Item = String>) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for item in items {
        if !seen.contains(&item) {
            seen.push(item);
        }
    }
    seen
}

fn curve_file_name(id: u32, label: &str) -> String {
    format!("figure{id}_{label}.csv")
}

fn sweep_file_name(id: u32) -> String {
    format!("figure{id}_teacher_sweep.csv")
}

pub fn manifest_file_name(id: u32) -> String {
    format!("figure{id}_manifest.txt")
}

/// Writes every CSV of the run plus its manifest into `out_dir` and returns
/// the paths, manifest last.
pub fn write_figure(out_dir: &Path, run: &FigureRun, extra: &[(String, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    match &run.result {
        FigureResult::TeacherSweep(sweep) => {
            let path = out_dir.join(sweep_file_name(run.id));
            write_atomic(&path, sweep_csv(sweep).as_bytes())?;
            written.push(path);
        }
        FigureResult::Curves(curves) => {
            for (config, curve) in curves {
                let path = out_dir.join(curve_file_name(run.id, &config.label));
                write_atomic(&path, curve_csv(curve).as_bytes())?;
                written.push(path);
            }
        }
    }
    let path = out_dir.join(manifest_file_name(run.id));
    write_atomic(&path, figure_manifest(run, extra).as_bytes())?;
    written.push(path);
    Ok(written)
}
