use rand::Rng;

use super::{Dataset, Sample, CLASSES, SIDE};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

/// Noisy class prototypes for tests and smoke runs.
///
/// Digit `c` is a bright horizontal band over rows `2c` and `2c + 1` on a
/// dark background. Every pixel gets uniform noise in
/// `[-difficulty, difficulty]`, clamped to `[0, 1]`. Sample `i` has label
/// `i mod 10`, so the first ten samples cover every class once.
pub fn generate_synthetic(n: usize, seed: u64, difficulty: f64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::config("synthetic dataset needs at least one sample"));
    }
    if !(0.0..=1.0).contains(&difficulty) {
        return Err(Error::config(format!(
            "difficulty must lie in [0, 1], got {difficulty}"
        )));
    }
    let band = SIDE * SIDE / CLASSES;
    let mut rng = seed::rng(seed::derive(seed, Stream::Synthetic));
    let samples = (0..n)
        .map(|i| {
            let label = (i % CLASSES) as u8;
            let lit = usize::from(label) * band..(usize::from(label) + 1) * band;
            let pixels = (0..SIDE * SIDE)
                .map(|p| {
                    let base = if lit.contains(&p) { 1.0 } else { 0.0 };
                    let noise = if difficulty > 0.0 {
                        rng.random_range(-difficulty..=difficulty)
                    } else {
                        0.0
                    };
                    (base + noise).clamp(0.0, 1.0) as f32
                })
                .collect();
            Sample::new(pixels, label)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::from_samples(format!("synthetic-{n}-{seed}"), samples))
}
