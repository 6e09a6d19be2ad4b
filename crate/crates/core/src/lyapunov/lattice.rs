//! Estimators over lattice points: random draws from orbit balls, the
//! deviation census, and the comparison exponent.

use rayon::prelude::*;

use super::{LyapunovEstimate, Method, Representation};
use crate::error::{Error, Result};
use crate::lattice::{ball_cached, FuchsianSurface, Word, DEFAULT_MAX_RADIUS};
use crate::seed::rng_from_seed;
use crate::stats::{linear_fit, mean, stderr, LinearFit};

/// Cutoff radii `r_n = min(base + scale·n^exponent, cap)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub base: f64,
    pub scale: f64,
    pub exponent: f64,
    pub cap: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { base: 6.0, scale: 1.0, exponent: 0.7, cap: 12.0 }
    }
}

impl Schedule {
    pub fn radius(&self, n: usize) -> f64 {
        (self.base + self.scale * (n as f64).powf(self.exponent)).min(self.cap)
    }

    /// Polynomial growth `scale·n^exponent` with positive exponent makes
    /// `Σ e^{−c·r_n}` converge for every `c > 0`.
    pub fn validate(&self, min_exponent: f64) -> Result<()> {
        if !(self.scale > 0.0 && self.exponent >= min_exponent && self.exponent > 0.0) {
            return Err(Error::Config(format!(
                "schedule growth {}·n^{} is not admissible (exponent must be ≥ {min_exponent} and positive)",
                self.scale, self.exponent
            )));
        }
        if !(self.cap > 0.0 && self.cap <= DEFAULT_MAX_RADIUS && self.base >= 0.0) {
            return Err(Error::Config(format!("schedule cap {} outside (0, {DEFAULT_MAX_RADIUS}]", self.cap)));
        }
        Ok(())
    }
}

/// Independent uniform draws `γ_n ∈ B_Γ(r_n)`, reusable across
/// representations.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDraws {
    pub words: Vec<Word>,
    pub distances: Vec<f64>,
    pub radii: Vec<f64>,
    pub seed: u64,
}

pub fn draw_lattice(surface: &FuchsianSurface, schedule: &Schedule, n_draws: usize, seed: u64) -> Result<LatticeDraws> {
    let radii: Vec<f64> = (1..=n_draws).map(|n| schedule.radius(n)).collect();
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let ball = ball_cached(surface, r_max)?;
    let mut rng = rng_from_seed(seed);
    let (words, distances) = radii
        .iter()
        .map(|&r| {
            let e = ball.sample(r, &mut rng);
            (e.word.clone(), e.distance)
        })
        .unzip();
    Ok(LatticeDraws { words, distances, radii, seed })
}

/// The per-draw growth quantity: `½ log ‖ρ(γ)‖²` or `½ log |tr² ρ(γ)|`.
/// `None` for a vanishing trace, which carries no information.
pub fn lattice_statistic(rep: &Representation, word: &Word, use_trace: bool) -> Option<f64> {
    let m = rep.eval_scaled(word);
    if use_trace {
        let v = 0.5 * m.log_abs_trace_sq();
        (v > 0.5 * 1e-12f64.ln()).then_some(v)
    } else {
        Some(m.log_op_norm())
    }
}

/// Least-squares slope of the growth quantity against `d(γ)` over the draws
/// with `d(γ) ≥ min_distance`. The tail average of the per-draw ratio
/// `growth / d(γ)` over the second half of the draws is the endpoint value.
pub fn estimate_lattice(rep: &Representation, draws: &LatticeDraws, use_trace: bool, min_distance: f64) -> Result<LyapunovEstimate> {
    let pts: Vec<(usize, f64, f64)> = draws
        .words
        .par_iter()
        .zip(&draws.distances)
        .enumerate()
        .filter(|(_, (_, &d))| d >= min_distance)
        .filter_map(|(n, (w, &d))| lattice_statistic(rep, w, use_trace).map(|y| (n, d, y)))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Estimator("too few usable lattice draws".into()));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.2).collect();
    let fit = linear_fit(&xs, &ys);
    let half = draws.words.len() / 2;
    let tail: Vec<f64> = pts.iter().filter(|p| p.0 >= half && p.1 > 0.0).map(|p| p.2 / p.1).collect();
    let method = if use_trace { Method::LatticeTrace } else { Method::LatticeNorm };
    let excluded = draws.words.len() - pts.len();
    Ok(LyapunovEstimate::new(
        fit.slope,
        fit.slope_stderr,
        method,
        mean(&tail),
        stderr(&tail),
        pts.len(),
        serde_json::json!({ "seed": draws.seed, "draws": draws.words.len(), "excluded": excluded, "min_distance": min_distance }),
    ))
}

pub fn chi_lattice(
    surface: &FuchsianSurface,
    rep: &Representation,
    schedule: &Schedule,
    n_draws: usize,
    seed: u64,
    use_trace: bool,
) -> Result<LyapunovEstimate> {
    let draws = draw_lattice(surface, schedule, n_draws, seed)?;
    estimate_lattice(rep, &draws, use_trace, 1.0)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CensusRow {
    pub radius: f64,
    pub total: usize,
    pub bad: usize,
    pub bad_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CensusReport {
    pub epsilon: f64,
    pub chi_ref: f64,
    pub rows: Vec<CensusRow>,
    /// Fit of `log(bad_fraction)` against the radius (rows with a positive
    /// fraction, at least two of them).
    pub fit: Option<LinearFit>,
}

/// Exact count over `B_Γ(r)` of the `γ` with
/// `|(1/2r)·log|tr² ρ(γ)| − chi_ref| > ε`, for each radius of the ladder.
pub fn deviation_census(
    surface: &FuchsianSurface,
    rep: &Representation,
    radii: &[f64],
    epsilon: f64,
    chi_ref: f64,
) -> Result<CensusReport> {
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let ball = ball_cached(surface, r_max)?;
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        if r <= 0.0 {
            return Err(Error::Domain(format!("census radius {r} must be positive")));
        }
        let n = ball.count_within(r);
        let bad = ball.elements[..n]
            .par_iter()
            .filter(|e| {
                let v = rep.eval_scaled(&e.word).log_abs_trace_sq() / (2.0 * r);
                !((v - chi_ref).abs() <= epsilon)
            })
            .count();
        rows.push(CensusRow { radius: r, total: n, bad, bad_fraction: bad as f64 / n as f64 });
    }
    let pos: Vec<&CensusRow> = rows.iter().filter(|row| row.bad > 0).collect();
    let fit = (pos.len() >= 2).then(|| {
        let xs: Vec<f64> = pos.iter().map(|row| row.radius).collect();
        let ys: Vec<f64> = pos.iter().map(|row| row.bad_fraction.ln()).collect();
        linear_fit(&xs, &ys)
    });
    Ok(CensusReport { epsilon, chi_ref, rows, fit })
}

/// `max log ‖ρ(γ)‖ / log ‖ρ_can(γ)‖` over non-identity `γ ∈ B_Γ(r)`.
pub fn fit_comparison_exponent(surface: &FuchsianSurface, rep: &Representation, r: f64) -> Result<f64> {
    let ball = ball_cached(surface, r)?;
    let can = Representation::canonical(surface);
    let beta = ball
        .elements
        .par_iter()
        .filter(|e| !e.word.is_empty())
        .map(|e| rep.log_norm(&e.word) / can.log_norm(&e.word))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    if !beta.is_finite() {
        return Err(Error::Estimator(format!("no non-identity element in B({r})")));
    }
    Ok(beta)
}
