//! Stopping-time discretisation of Brownian motion on the surface.
//!
//! Around every orbit point `γ·i` sit two concentric spheres of radii
//! `r < R`. A cycle diffuses until the path enters some inner ball, then
//! until it leaves the outer ball around the same centre. The exit is kept
//! with probability `p / P(u, θ − φ)`, where `P` is the exit density seen
//! from the entry angle `φ`; kept exits are uniform on the outer sphere, so
//! the centres visited at kept exits form a right random walk on the lattice.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng as _;

use crate::brownian::{Piece, StepSampler, WordTracker, DEFAULT_DT, DEFAULT_FULL_REDUCE_EVERY, DEFAULT_MAX_DEPTH, DEFAULT_STEP_CAP};
use crate::error::{Error, Result};
use crate::lattice::{FuchsianSurface, Real2, Word};
use crate::moebius::MoebiusElement;
use crate::seed::{derive_seed, rng_from_seed};
use crate::stats::batch_means_stderr;

pub const DEFAULT_INNER_RADIUS: f64 = 0.15;
pub const DEFAULT_OUTER_RADIUS: f64 = 0.45;
pub const DEFAULT_ACCEPT_PROBABILITY: f64 = 0.49;
pub const DEFAULT_MAX_CYCLES: u32 = 10_000;

/// Pieces shorter than this are never split when locating a crossing.
const MIN_PIECE: f64 = 1e-10;

/// Exit density on the outer circle of a started-off-centre walk, normalised
/// to mean 1 over angle: the Poisson kernel `(1 − u²)/(1 − 2u cos θ + u²)`.
pub fn harmonic_exit_density(u: f64, theta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::Domain(format!("radius ratio {u} outside [0, 1)")));
    }
    Ok((1.0 - u * u) / (1.0 - 2.0 * u * theta.cos() + u * u))
}

/// Euclidean radius ratio of the inner to the outer sphere in the disk model
/// centred at their common centre.
pub fn radius_ratio(inner: f64, outer: f64) -> f64 {
    (inner / 2.0).tanh() / (outer / 2.0).tanh()
}

/// Largest admissible acceptance probability: the minimum of the exit density.
pub fn max_accept_probability(inner: f64, outer: f64) -> f64 {
    let u = radius_ratio(inner, outer);
    (1.0 - u) / (1.0 + u)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlsConfig {
    /// Inner radius.
    pub r: f64,
    /// Outer radius.
    #[serde(rename = "R")]
    pub big_r: f64,
    /// Acceptance probability.
    pub p: f64,
    pub max_cycles: u32,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

impl Default for FlsConfig {
    fn default() -> Self {
        FlsConfig {
            r: DEFAULT_INNER_RADIUS,
            big_r: DEFAULT_OUTER_RADIUS,
            p: DEFAULT_ACCEPT_PROBABILITY,
            max_cycles: DEFAULT_MAX_CYCLES,
            dt: DEFAULT_DT,
        }
    }
}

impl FlsConfig {
    pub fn validate(&self, surface: &FuchsianSurface) -> Result<()> {
        if !(self.r > 0.0 && self.r < self.big_r) {
            return Err(Error::Config(format!("need 0 < r < R, got r = {}, R = {}", self.r, self.big_r)));
        }
        if 2.0 * self.big_r >= surface.systole() || 2.0 * self.big_r >= surface.min_orbit_displacement() {
            return Err(Error::Config(format!(
                "outer radius {} too large: balls around orbit points must be disjoint (systole {})",
                self.big_r,
                surface.systole()
            )));
        }
        let p_max = max_accept_probability(self.r, self.big_r);
        if !(self.p > 0.0 && self.p <= p_max) {
            return Err(Error::Config(format!("acceptance probability {} outside (0, {p_max}]", self.p)));
        }
        if self.max_cycles == 0 {
            return Err(Error::Config("max_cycles must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt <= 1e-2) {
            return Err(Error::Config(format!("time step {} outside (0, 0.01]", self.dt)));
        }
        Ok(())
    }
}

/// One realisation of the chain.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DiscretizationRun {
    /// Centre of the outer sphere at each kept exit, as a word.
    pub centres: Vec<Word>,
    /// `centres[k-1]⁻¹ · centres[k]`, with `centres[-1]` the identity.
    pub increments: Vec<Word>,
    pub stop_times: Vec<f64>,
    /// Rejected cycles before each kept exit.
    pub rejected_cycles: Vec<u32>,
    /// Angle of each kept exit point about its centre.
    pub exit_angles: Vec<f64>,
    /// Distance of each kept exit point from its centre.
    pub exit_radii: Vec<f64>,
    pub start_angle: f64,
    pub seed: u64,
    pub config: FlsConfig,
}

impl DiscretizationRun {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn total_cycles(&self) -> u64 {
        self.rejected_cycles.iter().map(|&c| u64::from(c) + 1).sum()
    }

    /// Kept exits per cycle.
    pub fn acceptance_rate(&self) -> f64 {
        self.len() as f64 / self.total_cycles() as f64
    }

    /// Waiting times `T_k − T_{k−1}` with `T_0 = 0`.
    pub fn waiting_times(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.stop_times
            .iter()
            .map(|&t| {
                let w = t - prev;
                prev = t;
                w
            })
            .collect()
    }
}

/// Crossings are located by bridge refinement until the first point past the
/// sphere lies within this distance of it.
pub const CROSSING_TOL: f64 = 1e-3;

struct Crossing {
    time: f64,
    angle: f64,
    distance: f64,
}

/// Run the sampler until the distance to the current tile centre crosses
/// `target` (from above when `inward`, otherwise from below).
fn diffuse_until(
    tracker: &mut WordTracker<'_>,
    sampler: &mut StepSampler,
    t: &mut f64,
    t_limit: f64,
    dt: f64,
    target: f64,
    inward: bool,
) -> Result<Crossing> {
    let crossed = |d: f64| if inward { d <= target } else { d >= target };
    let d0 = tracker.distance_to_tile_centre();
    if crossed(d0) {
        return Ok(Crossing { time: *t, angle: tracker.frame().apply_base().angle_from_base(), distance: d0 });
    }
    let centre = tracker.word().clone();
    let mut hit: Option<Crossing> = None;
    let mut err: Option<Error> = None;
    let mut prev = (*t, d0);
    while hit.is_none() {
        if *t > t_limit {
            return Err(Error::Chain(format!("no sphere crossing before time {t_limit}")));
        }
        let _ = sampler.step_with(dt, DEFAULT_STEP_CAP, &mut |tau, h| {
            let mut run = || -> Result<Piece> {
                let d = tracker.peek_distance(h)?;
                if crossed(d) && (d - target).abs() > CROSSING_TOL && tau > MIN_PIECE {
                    return Ok(Piece::Split);
                }
                tracker.apply_step(h)?;
                let now = *t + tau;
                *t = now;
                let d = tracker.distance_to_tile_centre();
                if crossed(d) {
                    let frac = (target - prev.1) / (d - prev.1);
                    let time = prev.0 + frac.clamp(0.0, 1.0) * (now - prev.0);
                    let angle = tracker.frame().apply_base().angle_from_base();
                    hit = Some(Crossing { time, angle, distance: d });
                    return Ok(Piece::Stop);
                }
                prev = (now, d);
                Ok(Piece::Take)
            };
            run().unwrap_or_else(|e| {
                err = Some(e);
                Piece::Stop
            })
        })?;
        if let Some(e) = err.take() {
            return Err(e);
        }
    }
    if !inward && tracker.word() != &centre {
        return Err(Error::Tracking(format!("left tile {centre} before leaving its outer ball")));
    }
    Ok(hit.expect("loop exits on a crossing"))
}

/// Run the chain for `n_steps` kept exits, starting uniformly on the outer
/// sphere about `i`.
pub fn run_chain(surface: &FuchsianSurface, cfg: &FlsConfig, n_steps: usize, seed: u64) -> Result<DiscretizationRun> {
    let start_angle = rng_from_seed(derive_seed(seed, "fls/start")).random_range(-PI..PI);
    run_chain_from(surface, cfg, n_steps, seed, start_angle)
}

/// [`run_chain`] with a fixed starting angle on the outer sphere about `i`.
pub fn run_chain_from(
    surface: &FuchsianSurface,
    cfg: &FlsConfig,
    n_steps: usize,
    seed: u64,
    start_angle: f64,
) -> Result<DiscretizationRun> {
    cfg.validate(surface)?;
    let mut aux = rng_from_seed(derive_seed(seed, "fls/accept"));
    let mut sampler = StepSampler::new(derive_seed(seed, "fls/path"), DEFAULT_MAX_DEPTH);
    let frame0 = Real2::from_element(
        &(MoebiusElement::rotation(start_angle) * MoebiusElement::vertical_translation(cfg.big_r)),
    );
    let mut tracker = WordTracker::new(surface, frame0, DEFAULT_FULL_REDUCE_EVERY, false)?;
    let u = radius_ratio(cfg.r, cfg.big_r);
    let mut run = DiscretizationRun {
        centres: Vec::with_capacity(n_steps),
        increments: Vec::with_capacity(n_steps),
        stop_times: Vec::with_capacity(n_steps),
        rejected_cycles: Vec::with_capacity(n_steps),
        exit_angles: Vec::with_capacity(n_steps),
        exit_radii: Vec::with_capacity(n_steps),
        start_angle,
        seed,
        config: *cfg,
    };
    let mut t = 0.0;
    let mut prev_centre = Word::identity();
    // Each cycle is short; this only guards against a stuck simulation.
    let t_limit_per_step = 1e4;
    for _ in 0..n_steps {
        let step_start = t;
        let mut rejected = 0u32;
        loop {
            let limit = step_start + t_limit_per_step;
            let entry = diffuse_until(&mut tracker, &mut sampler, &mut t, limit, cfg.dt, cfg.r, true)?;
            let exit = diffuse_until(&mut tracker, &mut sampler, &mut t, limit, cfg.dt, cfg.big_r, false)?;
            let density = harmonic_exit_density(u, exit.angle - entry.angle)?;
            if aux.random::<f64>() < cfg.p / density {
                let centre = tracker.word().clone();
                run.increments.push(prev_centre.inverse().concat(&centre));
                run.centres.push(centre.clone());
                run.stop_times.push(exit.time);
                run.rejected_cycles.push(rejected);
                run.exit_angles.push(exit.angle);
                run.exit_radii.push(exit.distance);
                prev_centre = centre;
                break;
            }
            rejected += 1;
            if rejected >= cfg.max_cycles {
                return Err(Error::Chain(format!("{rejected} cycles without a kept exit")));
            }
        }
    }
    Ok(run)
}

/// `T_n / n` with a batch-means standard error over waiting times.
pub fn estimate_tau(run: &DiscretizationRun) -> Result<(f64, f64)> {
    if run.len() < 100 {
        return Err(Error::Estimator(format!("need at least 100 steps, got {}", run.len())));
    }
    let tau = run.stop_times.last().copied().unwrap_or(0.0) / run.len() as f64;
    let w = run.waiting_times();
    Ok((tau, batch_means_stderr(&w, 20)))
}

/// Pool several independent runs: `T_n/n` averaged over runs, standard error
/// from the spread between runs.
pub fn estimate_tau_ensemble(runs: &[DiscretizationRun]) -> Result<(f64, f64)> {
    let per: Vec<f64> = runs
        .iter()
        .filter(|r| !r.is_empty())
        .map(|r| r.stop_times.last().copied().unwrap_or(0.0) / r.len() as f64)
        .collect();
    if per.len() < 2 {
        return Err(Error::Estimator("need at least two non-empty runs".into()));
    }
    Ok((crate::stats::mean(&per), crate::stats::stderr(&per)))
}

/// Normalised frequencies of the first increment over an ensemble.
pub fn empirical_mu(runs: &[DiscretizationRun]) -> BTreeMap<Word, f64> {
    let mut counts: BTreeMap<Word, f64> = BTreeMap::new();
    let mut n = 0.0;
    for r in runs {
        if let Some(g) = r.increments.first() {
            *counts.entry(g.clone()).or_insert(0.0) += 1.0;
            n += 1.0;
        }
    }
    for v in counts.values_mut() {
        *v /= n;
    }
    counts
}

/// Fraction of waiting times above each threshold, and the least-squares fit
/// of the log fraction against the threshold over thresholds whose fraction
/// stays above `min_fraction`.
pub fn waiting_time_tail(waits: &[f64], thresholds: &[f64], min_fraction: f64) -> Result<(Vec<(f64, f64)>, crate::stats::LinearFit)> {
    let n = waits.len() as f64;
    let tail: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&s| (s, waits.iter().filter(|&&w| w > s).count() as f64 / n))
        .filter(|&(_, f)| f >= min_fraction)
        .collect();
    if tail.len() < 3 {
        return Err(Error::Estimator("too few tail points for a fit".into()));
    }
    let xs: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = tail.iter().map(|p| p.1.ln()).collect();
    Ok((tail.clone(), crate::stats::linear_fit(&xs, &ys)))
}
