//! Teacher-student distillation experiments on 20×20 handwritten digits.
//!
//! A 400-25-10 sigmoid network is trained in two roles:
//!
//! - the *teacher* is fit to convergence with batch Polak–Ribière conjugate
//!   gradient ([`optim::minimize_cg`]) on a regularized cross-entropy cost;
//! - the *student* learns one sample at a time by plain SGD
//!   ([`optim::train_student`]), either from the true one-hot labels or from
//!   the teacher's normalized outputs ([`distill::soft_targets`]).
//!
//! [`experiments`] wires these into seeded, multi-seed scenarios and the nine
//! figure presets, with per-arm CSV output.
//!
//! # Modules
//!
//! - [`data`]: datasets, portable and IDX file formats, splits, hardness tails
//! - [`nn`]: network shape, parameters, forward pass, cost and gradient
//! - [`optim`]: conjugate gradient and SGD
//! - [`distill`]: soft targets
//! - [`experiments`]: metrics, scenarios, figures, reports

pub mod data;
pub mod distill;
pub mod error;
pub mod experiments;
pub mod nn;
pub mod optim;
pub mod seed;

pub use data::{Dataset, Example, Sample, SplitSpec, TargetVector, CLASSES, PIXELS};
pub use distill::{soft_targets, SoftTargets};
pub use error::{Error, Result};
pub use experiments::{evaluate, LearningCurve, Metrics, ScenarioConfig};
pub use nn::{Batch, NetworkShape, ParamVector, Penalty};
pub use optim::{minimize_cg, CgOptions, SgdOptions};
