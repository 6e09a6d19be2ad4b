use rayon::prelude::*;

use super::ddc::{ddc_field, total_mass};
use super::divisor::divisor_zeros;
use super::family::ParameterFamily;
use super::geodesic::{GeodesicModel, GeodesicSampler};
use super::grid::{CurrentGrid, GridSpec};
use crate::error::{Error, Result};
use crate::lattice::{FuchsianSurface, Word};
use crate::lyapunov::fit_comparison_exponent;
use crate::moebius::{Complex, ScaledMoebius};
use crate::seed::derive_seed;

/// Lower clamp for `log|tr² − t|`, keeping grid sums finite near zeros.
pub const POTENTIAL_FLOOR: f64 = -40.0;

/// `u(λ) = max(log|tr² ρ_λ(word) − t|, floor) / (2·normalizer)` at every node.
pub fn log_potential(family: &ParameterFamily, word: &Word, t: Complex, spec: &GridSpec, normalizer: f64) -> Result<Vec<f64>> {
    spec.nodes()
        .par_iter()
        .map(|&l| {
            let images = family.images(l)?;
            let m = word.letters().iter().fold(ScaledMoebius::identity(), |acc, l| {
                let g = images[l.generator()];
                acc.mul_element(&if l.is_inverse() { g.inverse() } else { g })
            });
            Ok(m.log_abs_trace_sq_minus(t).max(POTENTIAL_FLOOR) / (2.0 * normalizer))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquidistConfig {
    pub model: GeodesicModel,
    /// Cutoffs `r_n`, one draw per entry.
    pub radii: Vec<f64>,
    pub t: Complex,
    /// Side, in nodes, of the square bins used for the mass distance.
    pub bin: usize,
    /// Ball radius for the per-node comparison exponent; `None` skips the
    /// upper-bound check.
    pub beta_radius: Option<f64>,
}

impl EquidistConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config("equidistribution needs positive cutoffs".into()));
        }
        if self.bin == 0 {
            return Err(Error::Config("bin size must be positive".into()));
        }
        if !self.t.is_finite() {
            return Err(Error::Config("t must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EquidistStep {
    pub n: usize,
    pub radius: f64,
    pub word: Word,
    pub length: f64,
    pub resamples: u32,
    /// `Σ |u_n − χ|·cell area` over nodes where `χ` is defined.
    pub l1_distance: f64,
    /// `Σ |divisor mass − current mass|` over bins.
    pub mass_distance: f64,
    pub divisor_mass: f64,
    /// Total discrete current of `u_n` itself.
    pub potential_mass: f64,
    pub ambiguous_cells: usize,
    /// `Z(γ_n, t)` was all of parameter space, so its divisor counts as zero.
    pub whole_space: bool,
    /// `max (u_n − β/2)` over nodes; `NaN` without comparison exponents.
    pub max_excess: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EquidistReport {
    pub config: EquidistConfig,
    pub master_seed: u64,
    pub steps: Vec<EquidistStep>,
    /// `u_n` per step, row-major over the grid.
    pub potentials: Vec<Vec<f64>>,
    /// Comparison exponent per node (empty when skipped).
    pub beta: Vec<f64>,
}

impl EquidistReport {
    pub fn first_last_l1(&self) -> Option<(f64, f64)> {
        Some((self.steps.first()?.l1_distance, self.steps.last()?.l1_distance))
    }
}

fn binned_distance(spec: &GridSpec, a: &[f64], b: &[f64], bin: usize) -> f64 {
    let bx = (spec.nx - 2).div_ceil(bin);
    let by = (spec.ny - 2).div_ceil(bin);
    let mut diff = vec![0.0; bx * by];
    for j in 1..spec.ny - 1 {
        for i in 1..spec.nx - 1 {
            let k = spec.index(i, j);
            let v = a[k].max_finite(0.0) - b[k].max_finite(0.0);
            diff[((j - 1) / bin) * bx + (i - 1) / bin] += v;
        }
    }
    diff.iter().map(|d| d.abs()).sum()
}

trait FiniteOr {
    fn max_finite(self, default: f64) -> f64;
}

impl FiniteOr for f64 {
    fn max_finite(self, default: f64) -> f64 {
        if self.is_finite() {
            self
        } else {
            default
        }
    }
}

/// Draw `γ_n` at each cutoff and compare the potential
/// `u_n = log|tr² ρ_λ(γ_n) − t| / (2·length(γ_n))` with the grid's
/// Lyapunov values, and the normalized divisor with the grid's current.
pub fn equidist_experiment(
    surface: &FuchsianSurface,
    family: &ParameterFamily,
    grid: &CurrentGrid,
    cfg: &EquidistConfig,
    master_seed: u64,
) -> Result<EquidistReport> {
    cfg.validate()?;
    let spec = grid.spec;
    if grid.chi.iter().all(|v| !v.is_finite()) {
        return Err(Error::Config("grid has no Lyapunov values".into()));
    }
    let ddc = if grid.ddc.iter().any(|v| v.is_finite()) { grid.ddc.clone() } else { ddc_field(&spec, &grid.chi) };
    let beta: Vec<f64> = match cfg.beta_radius {
        Some(r) => spec
            .nodes()
            .par_iter()
            .map(|&l| family.representation(l).and_then(|rep| fit_comparison_exponent(surface, &rep, r)))
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let r_max = cfg.radii.iter().copied().fold(0.0, f64::max);
    let base = GeodesicSampler::new(surface, cfg.model, r_max)?;
    let area = spec.cell_area();
    let mut steps = Vec::with_capacity(cfg.radii.len());
    let mut potentials = Vec::with_capacity(cfg.radii.len());
    for (n, &r) in cfg.radii.iter().enumerate() {
        let sample = base.with_cutoff(r)?.sample(derive_seed(master_seed, &format!("equidist/{n}")))?;
        let u = log_potential(family, &sample.word, cfg.t, &spec, sample.length)?;
        let l1_distance: f64 =
            u.iter().zip(&grid.chi).filter(|(_, c)| c.is_finite()).map(|(a, c)| (a - c).abs() * area).sum();
        let div = divisor_zeros(family, &sample.word, cfg.t, &spec, sample.length)?;
        let max_excess = if beta.is_empty() {
            f64::NAN
        } else {
            u.iter().zip(&beta).map(|(a, b)| a - b / 2.0).fold(f64::NEG_INFINITY, f64::max)
        };
        steps.push(EquidistStep {
            n,
            radius: r,
            word: sample.word.clone(),
            length: sample.length,
            resamples: sample.resamples,
            l1_distance,
            mass_distance: binned_distance(&spec, &div.mass, &ddc, cfg.bin),
            divisor_mass: div.total_mass(),
            potential_mass: total_mass(&ddc_field(&spec, &u)),
            ambiguous_cells: div.ambiguous.len(),
            whole_space: div.whole_space,
            max_excess,
        });
        potentials.push(u);
    }
    Ok(EquidistReport { config: cfg.clone(), master_seed, steps, potentials, beta })
}

/// Divisor mass against the discrete current of the log potential over one
/// window of interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LelongComparison {
    /// Inclusive node ranges `[i0, i1] × [j0, j1]`.
    pub window: [usize; 4],
    pub divisor_mass: f64,
    pub current_mass: f64,
    /// Mass of a single zero, `1 / (2·normalizer)`.
    pub unit_mass: f64,
}

impl LelongComparison {
    /// `|current − divisor| / max(divisor, unit)`.
    pub fn relative_error(&self) -> f64 {
        (self.current_mass - self.divisor_mass).abs() / self.divisor_mass.abs().max(self.unit_mass)
    }
}

/// The discrete current of `log|f|/(2N)` summed over a window equals a
/// discrete flux through the window's edge, which matches the zero count
/// inside only when no zero lies close to that edge. The window starts
/// `margin` nodes in from the grid boundary and each side moves inward
/// until every zero found is at least `margin` cells from it.
pub fn lelong_comparison(
    family: &ParameterFamily,
    word: &Word,
    t: Complex,
    spec: &GridSpec,
    normalizer: f64,
    margin: usize,
) -> Result<LelongComparison> {
    let div = divisor_zeros(family, word, t, spec, normalizer)?;
    let u = log_potential(family, word, div.t, spec, normalizer)?;
    let current = ddc_field(spec, &u);
    let zeros: Vec<(usize, usize)> = div.cells.iter().map(|c| (c.i, c.j)).chain(div.ambiguous.iter().copied()).collect();
    let (mut i0, mut i1) = (margin, spec.nx.saturating_sub(1 + margin));
    let (mut j0, mut j1) = (margin, spec.ny.saturating_sub(1 + margin));
    let near = |a: usize, b: usize| a.abs_diff(b) < margin;
    loop {
        if i0 >= i1 || j0 >= j1 {
            return Err(Error::Domain(format!("no window keeps {margin} cells from the zeros of tr² {word} − t")));
        }
        let in_j = |j: usize| j + margin > j0 && j < j1 + margin;
        let in_i = |i: usize| i + margin > i0 && i < i1 + margin;
        let moved = if zeros.iter().any(|&(i, j)| near(i, i0) && in_j(j)) {
            i0 += 1;
            true
        } else if zeros.iter().any(|&(i, j)| near(i, i1) && in_j(j)) {
            i1 -= 1;
            true
        } else if zeros.iter().any(|&(i, j)| near(j, j0) && in_i(i)) {
            j0 += 1;
            true
        } else if zeros.iter().any(|&(i, j)| near(j, j1) && in_i(i)) {
            j1 -= 1;
            true
        } else {
            false
        };
        if !moved {
            break;
        }
    }
    let sum = |field: &[f64]| -> f64 {
        (j0..=j1).flat_map(|j| (i0..=i1).map(move |i| (i, j))).map(|(i, j)| field[spec.index(i, j)]).filter(|v| v.is_finite()).sum()
    };
    Ok(LelongComparison {
        window: [i0, i1, j0, j1],
        divisor_mass: sum(&div.mass),
        current_mass: sum(&current),
        unit_mass: 1.0 / (2.0 * normalizer),
    })
}
