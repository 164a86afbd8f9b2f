//! Optimizers: batch conjugate gradient for teachers, per-sample SGD for students.

mod cg;
mod sgd;

pub use cg::{minimize_cg, CgOptions, CgReport, CgStatus};
pub use sgd::{sgd_step, train_student, SgdOptions, Trajectory};
