//! `dlab`: dataset conversion, teacher training, distillation, scenario and
//! figure runs, and a gradient self-check.

mod svg;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use dlab_core::data::{
    convert_idx, idx_labels_path, load_dataset, write_atomic, write_portable, DatasetFormat, TargetEncoding,
};
use dlab_core::distill::distill_dataset;
use dlab_core::experiments::{
    curve_csv, figure_arms, write_figure, DataSelection, FigureResult, Lab, LearningSource, FIGURE_IDS,
};
use dlab_core::nn::{gradient_check, read_model, write_model, NetworkShape, Penalty};
use dlab_core::{evaluate, Dataset, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "dlab", version, about = "Teacher/student distillation experiments on 20×20 digits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert an MNIST IDX image/label pair into the portable format.
    Convert {
        /// IDX3 image file (optionally gzipped).
        #[arg(long)]
        images: PathBuf,
        /// IDX1 label file; inferred from the image file name when omitted.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a teacher on the head of one seed's teacher pool.
    TrainTeacher {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value_t = 500)]
        teacher_size: usize,
        #[arg(long, default_value_t = 5.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        regularize_bias: bool,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace the targets of a dataset with a teacher's soft targets.
    Distill {
        #[command(flatten)]
        data: DataArg,
        /// Teacher model file.
        #[arg(long)]
        model: PathBuf,
        /// Portable file to write (soft-target encoding).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one scenario arm over several seeds.
    RunScenario {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, alias = "base-seed", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, default_value_t = 5.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 500)]
        teacher_size: usize,
        #[arg(long, default_value = "typical")]
        teacher_data: DataSelection,
        #[arg(long, default_value = "typical")]
        student_data: DataSelection,
        #[arg(long, default_value = "teacher")]
        source: LearningSource,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        regularize_bias: bool,
        /// Arm name used in the output file names.
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        svg: bool,
    },
    /// Run a figure preset (1 to 9).
    RunFigure {
        #[arg(value_parser = parse_figure_id)]
        figure: u32,
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long, alias = "base-seed", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Overrides the preset student learning rate.
        #[arg(long)]
        alpha: Option<f64>,
        /// Overrides the preset teacher size.
        #[arg(long)]
        teacher_size: Option<usize>,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        regularize_bias: bool,
        #[arg(long)]
        svg: bool,
    },
    /// Compare backpropagation with central differences on a random instance.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Layer sizes, comma separated.
        #[arg(long, default_value = "4,3,2", value_parser = parse_shape)]
        shape: NetworkShape,
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long, default_value_t = 5.0)]
        lambda: f64,
        /// Adds an error to one gradient entry so the check must fail.
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
}

#[derive(Args, Debug)]
struct DataArg {
    /// Portable dataset, or an IDX3 image file whose label file sits next to it.
    #[arg(long, env = "DLAB_DATA")]
    data: PathBuf,
}

fn parse_figure_id(s: &str) -> Result<u32, String> {
    let range = format!("valid range {}..{}", FIGURE_IDS.start(), FIGURE_IDS.end());
    match s.parse::<u32>() {
        Ok(id) if FIGURE_IDS.contains(&id) => Ok(id),
        _ => Err(format!("unknown figure {s:?}; {range}")),
    }
}

fn parse_shape(s: &str) -> Result<NetworkShape, String> {
    let sizes = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    NetworkShape::new(sizes).map_err(|e| e.to_string())
}

/// Errors found before any work starts exit with status 2.
enum Failure {
    Usage(String),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn check_lambda(lambda: f64) -> Result<(), Failure> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--lambda must be non-negative, got {lambda}")))
    }
}

fn check_alpha(alpha: f64) -> Result<(), Failure> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--alpha must be positive, got {alpha}")))
    }
}

fn check_exists(path: &Path) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Run(anyhow!("{}: no such file", path.display())))
    }
}

fn is_idx(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.contains("idx3"))
}

fn load(path: &Path) -> anyhow::Result<Dataset> {
    let format = if is_idx(path) {
        DatasetFormat::Idx
    } else {
        DatasetFormat::Portable
    };
    load_dataset(path, format).with_context(|| format!("loading {}", path.display()))
}

fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// Command line, dataset checksum and version: with the run settings this
/// is enough to reproduce the outputs.
fn run_header(data: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let command_line: Vec<String> = std::env::args().collect();
    let mut pairs = vec![
        ("command_line".to_string(), command_line.join(" ")),
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("dataset".to_string(), data.display().to_string()),
        ("dataset_sha256".to_string(), sha256_file(data)?),
    ];
    if is_idx(data) {
        let labels = idx_labels_path(data)?;
        pairs.push(("labels_sha256".to_string(), sha256_file(&labels)?));
    }
    Ok(pairs)
}

fn manifest_text(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Convert { images, labels, out } => {
            let labels = match labels {
                Some(l) => l,
                None => idx_labels_path(&images).map_err(|e| usage(e.to_string()))?,
            };
            check_exists(&images)?;
            check_exists(&labels)?;
            let n = convert_idx(&images, &labels, &out).map_err(anyhow::Error::from)?;
            println!("wrote {n} samples to {}", out.display());
        }
        Command::TrainTeacher {
            data,
            teacher_size,
            lambda,
            seed,
            regularize_bias,
            out,
        } => {
            check_lambda(lambda)?;
            if teacher_size == 0 {
                return Err(usage("--teacher-size must be positive"));
            }
            check_exists(&data.data)?;
            let lab = Lab::new(load(&data.data)?);
            let teacher = lab
                .pool_teacher(seed, teacher_size, lambda, regularize_bias)
                .map_err(anyhow::Error::from)?;
            let metrics = evaluate(&teacher, &lab.split(seed).map_err(anyhow::Error::from)?.test)
                .map_err(anyhow::Error::from)?;
            write_model(&out, &teacher).map_err(anyhow::Error::from)?;
            let mut pairs = run_header(&data.data)?;
            pairs.extend([
                ("seed".to_string(), seed.to_string()),
                ("teacher_size".to_string(), teacher_size.to_string()),
                ("lambda".to_string(), lambda.to_string()),
                ("regularize_bias".to_string(), regularize_bias.to_string()),
                ("model".to_string(), out.display().to_string()),
                ("model_fingerprint".to_string(), teacher.fingerprint()),
            ]);
            let manifest = with_suffix(&out, ".manifest.txt");
            write_atomic(&manifest, manifest_text(&pairs).as_bytes()).map_err(anyhow::Error::from)?;
            println!("accuracy {:.6} cost {:.6}", metrics.accuracy, metrics.cost);
        }
        Command::Distill { data, model, out } => {
            check_exists(&data.data)?;
            check_exists(&model)?;
            let dataset = load(&data.data)?;
            let teacher = read_model(&model).map_err(anyhow::Error::from)?;
            let soft = distill_dataset(&teacher, &dataset).map_err(anyhow::Error::from)?;
            let distilled = soft.apply_to(&dataset).map_err(anyhow::Error::from)?;
            write_portable(&out, &distilled, TargetEncoding::Soft).map_err(anyhow::Error::from)?;
            println!("wrote {} soft targets from teacher {} to {}", soft.len(), soft.provenance, out.display());
        }
        Command::RunScenario {
            data,
            out,
            seed,
            seeds,
            lambda,
            alpha,
            teacher_size,
            teacher_data,
            student_data,
            source,
            regularize_bias,
            label,
            svg,
        } => {
            check_lambda(lambda)?;
            check_alpha(alpha)?;
            let teacher_size = if source == LearningSource::FromData { 0 } else { teacher_size };
            let config = ScenarioConfig {
                label: label.unwrap_or_else(|| match source {
                    LearningSource::FromData => "from_data".to_string(),
                    LearningSource::FromTeacher => format!("teacher_lambda{lambda}"),
                }),
                teacher_size,
                teacher_lambda: lambda,
                teacher_data,
                student_alpha: alpha,
                student_data,
                learning_source: source,
                seeds,
                base_seed: seed,
                regularize_bias,
                ..ScenarioConfig::default()
            };
            config.validate().map_err(|e| usage(e.to_string()))?;
            if config.label.is_empty() || config.label.contains(['/', '\\']) {
                return Err(usage("--label must be a plain file-name fragment"));
            }
            check_exists(&data.data)?;
            let lab = Lab::new(load(&data.data)?);
            let outcome = lab.run_scenario(&config).map_err(anyhow::Error::from)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let csv_path = out.join(format!("scenario_{}.csv", config.label));
            write_atomic(&csv_path, curve_csv(&outcome.curve).as_bytes()).map_err(anyhow::Error::from)?;
            let mut outputs = vec![csv_path.clone()];
            if svg {
                let p = out.join(format!("scenario_{}.svg", config.label));
                let chart = svg::learning_chart(&config.label, &[&outcome.curve]);
                write_atomic(&p, chart.as_bytes()).map_err(anyhow::Error::from)?;
                outputs.push(p);
            }
            let mut pairs = run_header(&data.data)?;
            pairs.extend(config.manifest_lines());
            for (i, p) in outputs.iter().enumerate() {
                pairs.push((format!("output{i}"), p.display().to_string()));
            }
            let manifest = out.join(format!("scenario_{}_manifest.txt", config.label));
            write_atomic(&manifest, manifest_text(&pairs).as_bytes()).map_err(anyhow::Error::from)?;
            println!(
                "{}: final accuracy {:.4} cost {:.4} over {} seeds",
                config.label,
                outcome.curve.final_accuracy(),
                outcome.curve.final_cost(),
                seeds
            );
        }
        Command::RunFigure {
            figure,
            data,
            out,
            seed,
            seeds,
            alpha,
            teacher_size,
            regularize_bias,
            svg,
        } => {
            if seeds == 0 {
                return Err(usage("--seeds must be at least 1"));
            }
            if let Some(a) = alpha {
                check_alpha(a)?;
            }
            let mut arms = figure_arms(figure, seed, seeds).map_err(|e| usage(e.to_string()))?;
            for arm in &mut arms {
                arm.regularize_bias = regularize_bias;
                if let Some(a) = alpha {
                    arm.student_alpha = a;
                }
                if let (Some(n), LearningSource::FromTeacher) = (teacher_size, arm.learning_source) {
                    arm.teacher_size = n;
                }
                arm.validate().map_err(|e| usage(e.to_string()))?;
            }
            if figure == 1 && (alpha.is_some() || teacher_size.is_some()) {
                return Err(usage("figure 1 is a teacher sweep; --alpha and --teacher-size do not apply"));
            }
            check_exists(&data.data)?;
            let lab = Lab::new(load(&data.data)?);
            let run = if figure == 1 {
                let sweep_arm = ScenarioConfig {
                    regularize_bias,
                    ..ScenarioConfig::default()
                };
                lab.run_arms(1, seed, seeds, vec![sweep_arm])
            } else {
                lab.run_arms(figure, seed, seeds, arms)
            }
            .map_err(anyhow::Error::from)?;
            let mut extra = run_header(&data.data)?;
            extra.push(("regularize_bias".to_string(), regularize_bias.to_string()));
            let written = write_figure(&out, &run, &extra).map_err(anyhow::Error::from)?;
            match &run.result {
                FigureResult::TeacherSweep(sweep) => {
                    for r in &sweep.rows {
                        println!(
                            "size {:>4} lambda {:>4}: accuracy {:.4} ± {:.4} cost {:.4}",
                            r.size, r.lambda, r.acc_mean, r.acc_std, r.cost_mean
                        );
                    }
                    if svg {
                        let p = out.join(format!("figure{figure}.svg"));
                        write_atomic(&p, svg::sweep_chart(figure, sweep).as_bytes()).map_err(anyhow::Error::from)?;
                    }
                }
                FigureResult::Curves(curves) => {
                    for (config, curve) in curves {
                        println!(
                            "{:<18} final accuracy {:.4} cost {:.4}",
                            config.label,
                            curve.final_accuracy(),
                            curve.final_cost()
                        );
                    }
                    if svg {
                        let p = out.join(format!("figure{figure}.svg"));
                        let refs: Vec<_> = curves.iter().map(|(_, c)| c).collect();
                        let chart = svg::learning_chart(&format!("Figure {figure}"), &refs);
                        write_atomic(&p, chart.as_bytes()).map_err(anyhow::Error::from)?;
                    }
                }
            }
            println!("wrote {} files to {}", written.len() + usize::from(svg), out.display());
        }
        Command::Gradcheck {
            seed,
            shape,
            samples,
            lambda,
            corrupt_gradient,
        } => {
            check_lambda(lambda)?;
            if samples == 0 {
                return Err(usage("--samples must be positive"));
            }
            let report = gradient_check(&shape, samples, Penalty::new(lambda), seed, |g| {
                if corrupt_gradient {
                    g[0] += 1e-2;
                }
            })
            .map_err(anyhow::Error::from)?;
            println!("shape {shape}: {} parameters", report.param_count);
            println!("max relative error {:.3e}", report.max_relative_error);
            if report.max_relative_error >= 1e-6 {
                return Err(Failure::Run(anyhow!(
                    "gradient check failed at parameter {}: relative error {:.3e} ≥ 1e-6",
                    report.worst,
                    report.max_relative_error
                )));
            }
        }
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
