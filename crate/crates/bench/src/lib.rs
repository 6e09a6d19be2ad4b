//! Shared fixtures for the benchmarks.

use bifcurrent_core::lattice::{modular_torus, FuchsianSurface, Word};
use bifcurrent_core::seed::derive_seed;

/// Uniform draws from the orbit ball of radius `r`, fixed by `tag`.
pub fn ball_words(surface: &FuchsianSurface, r: f64, n: usize, tag: &str) -> Vec<Word> {
    (0..n)
        .map(|k| surface.sample_ball_uniform(r, derive_seed(1, &format!("{tag}/{k}"))).expect("radius within cap"))
        .collect()
}

pub fn surface() -> FuchsianSurface {
    modular_torus()
}
