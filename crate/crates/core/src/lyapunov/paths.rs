//! Path ensembles (Brownian paths and geodesic rays) with their tracked words
//! at checkpoints. An ensemble is simulated once and evaluated under any
//! number of representations, which gives common random numbers across a
//! parameter family.

use std::f64::consts::PI;

use rand::Rng as _;
use rayon::prelude::*;

use super::{LyapunovEstimate, Method, Representation};
use crate::brownian::{drive, BrownianConfig, WordEvent, WordTracker, DEFAULT_FULL_REDUCE_EVERY};
use crate::error::{Error, Result};
use crate::lattice::{FuchsianSurface, Real2};
use crate::moebius::{MoebiusElement, ScaledMoebius};
use crate::seed::{derive_seed, rng_from_seed};
use crate::stats::{linear_fit, mean, stderr};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PathParams {
    pub t_max: f64,
    pub n_paths: usize,
    /// Time step (Brownian) or arc-length step (rays).
    pub dt: f64,
    pub checkpoint_every: f64,
    /// Checkpoints before this time are left out of the slope fit.
    pub fit_from: f64,
}

impl PathParams {
    pub fn brownian(t_max: f64, n_paths: usize, dt: f64) -> Self {
        PathParams { t_max, n_paths, dt, checkpoint_every: 0.5, fit_from: (t_max / 8.0).min(5.0) }
    }

    pub fn rays(t_max: f64, n_rays: usize) -> Self {
        PathParams { t_max, n_paths: n_rays, dt: 0.05, checkpoint_every: 0.5, fit_from: (t_max / 8.0).min(5.0) }
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::Config("need at least two paths".into()));
        }
        if !(self.t_max > 0.0 && self.checkpoint_every > 0.0 && self.checkpoint_every <= self.t_max) {
            return Err(Error::Config(format!("bad horizon {} / checkpoint spacing {}", self.t_max, self.checkpoint_every)));
        }
        if !(self.fit_from >= 0.0 && self.fit_from < self.t_max) {
            return Err(Error::Config(format!("fit start {} outside [0, {})", self.fit_from, self.t_max)));
        }
        Ok(())
    }
}

/// Word history of one path, sampled at checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointTrace {
    pub times: Vec<f64>,
    pub events: Vec<WordEvent>,
    /// `events[..offsets[j]]` builds the word at checkpoint `j`.
    pub offsets: Vec<usize>,
    /// `d(i, lifted point)` at each checkpoint.
    pub distances: Vec<f64>,
}

impl CheckpointTrace {
    /// `log ‖ρ(w_j)‖` at every checkpoint, replaying the events on a stack
    /// of prefix products.
    pub fn log_norms(&self, rep: &Representation) -> Vec<f64> {
        let mut stack = vec![ScaledMoebius::identity()];
        let mut out = Vec::with_capacity(self.offsets.len());
        let mut applied = 0;
        for &end in &self.offsets {
            for e in &self.events[applied..end] {
                match *e {
                    WordEvent::Push(l) => {
                        let top = *stack.last().expect("non-empty");
                        stack.push(top.mul_element(rep.letter(l)));
                    }
                    WordEvent::Pop => {
                        stack.pop();
                    }
                }
            }
            applied = end;
            out.push(stack.last().expect("non-empty").log_op_norm());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub method: Method,
    pub params: PathParams,
    pub seed: u64,
    pub paths: Vec<CheckpointTrace>,
}

struct Recorder<'a> {
    tracker: WordTracker<'a>,
    trace: CheckpointTrace,
    next: f64,
    every: f64,
}

impl<'a> Recorder<'a> {
    fn new(surface: &'a FuchsianSurface, frame0: Real2, every: f64) -> Result<Self> {
        let tracker = WordTracker::new(surface, frame0, DEFAULT_FULL_REDUCE_EVERY, true)?;
        let mut r = Recorder {
            tracker,
            trace: CheckpointTrace { times: Vec::new(), events: Vec::new(), offsets: Vec::new(), distances: Vec::new() },
            next: 0.0,
            every,
        };
        r.record(0.0);
        Ok(r)
    }

    fn record(&mut self, t: f64) {
        self.trace.times.push(t);
        self.trace.offsets.push(self.tracker.events().len());
        self.trace.distances.push(self.tracker.lifted_distance());
        self.next += self.every;
    }

    fn step(&mut self, t: f64, h: Real2) -> Result<()> {
        self.tracker.apply_step(h)?;
        // Small tolerance so that rounding in accumulated time does not
        // skip the final checkpoint.
        while t >= self.next - 1e-9 {
            self.record(t);
        }
        Ok(())
    }

    fn finish(mut self) -> CheckpointTrace {
        self.trace.events = self.tracker.events().to_vec();
        self.trace
    }
}

/// Brownian paths from `i` with their words at checkpoints.
pub fn brownian_ensemble(surface: &FuchsianSurface, params: &PathParams, seed: u64) -> Result<PathEnsemble> {
    params.validate()?;
    let cfg = BrownianConfig::with_dt(params.dt);
    let paths = (0..params.n_paths)
        .into_par_iter()
        .map(|k| {
            let mut rec = Recorder::new(surface, Real2::identity(), params.checkpoint_every)?;
            drive(params.t_max, &cfg, derive_seed(seed, &format!("brown/{k}")), |t, h| rec.step(t, h))?;
            Ok(rec.finish())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathEnsemble { method: Method::Brown, params: *params, seed, paths })
}

/// Unit-speed geodesic rays from `i` in uniformly random directions.
pub fn geodesic_ensemble(surface: &FuchsianSurface, params: &PathParams, seed: u64) -> Result<PathEnsemble> {
    params.validate()?;
    let paths = (0..params.n_paths)
        .into_par_iter()
        .map(|k| {
            let theta = rng_from_seed(derive_seed(seed, &format!("ray/{k}"))).random_range(0.0..2.0 * PI);
            ray_trace(surface, theta, params)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathEnsemble { method: Method::Geodesic, params: *params, seed, paths })
}

/// Word history along the geodesic ray from `i` at angle `theta`.
pub fn ray_trace(surface: &FuchsianSurface, theta: f64, params: &PathParams) -> Result<CheckpointTrace> {
    let frame0 = Real2::from_element(&MoebiusElement::rotation(theta));
    let mut rec = Recorder::new(surface, frame0, params.checkpoint_every)?;
    let n = (params.t_max / params.dt).round() as usize;
    let step = Real2::from_element(&MoebiusElement::vertical_translation(params.dt));
    for j in 1..=n {
        rec.step(j as f64 * params.dt, step)?;
    }
    Ok(rec.finish())
}

/// Per-path least-squares slope of `log ‖ρ(w_t)‖` against `t` over
/// checkpoints at or after `fit_from`, averaged over paths. The endpoint
/// estimate `log ‖ρ(w_T)‖ / T` is reported alongside.
pub fn estimate_from_ensemble(rep: &Representation, ens: &PathEnsemble) -> Result<LyapunovEstimate> {
    let per_path: Vec<(f64, f64)> = ens
        .paths
        .par_iter()
        .map(|p| {
            let ln = p.log_norms(rep);
            let (ts, ys): (Vec<f64>, Vec<f64>) = p
                .times
                .iter()
                .zip(&ln)
                .filter(|(&t, _)| t >= ens.params.fit_from - 1e-9)
                .map(|(&t, &y)| (t, y))
                .unzip();
            let slope = linear_fit(&ts, &ys).slope;
            let end = ln.last().copied().unwrap_or(0.0) / p.times.last().copied().unwrap_or(1.0);
            (slope, end)
        })
        .collect();
    let (slopes, ends): (Vec<f64>, Vec<f64>) = per_path.into_iter().unzip();
    if slopes.iter().chain(&ends).any(|v| !v.is_finite()) {
        return Err(Error::Estimator(format!("non-finite log norm under {}", rep.name())));
    }
    Ok(LyapunovEstimate::new(
        mean(&slopes),
        stderr(&slopes),
        ens.method,
        mean(&ends),
        stderr(&ends),
        slopes.len(),
        serde_json::json!({ "params": ens.params, "seed": ens.seed }),
    ))
}

pub fn chi_brown(surface: &FuchsianSurface, rep: &Representation, params: &PathParams, seed: u64) -> Result<LyapunovEstimate> {
    estimate_from_ensemble(rep, &brownian_ensemble(surface, params, seed)?)
}

pub fn chi_geodesic(surface: &FuchsianSurface, rep: &Representation, params: &PathParams, seed: u64) -> Result<LyapunovEstimate> {
    estimate_from_ensemble(rep, &geodesic_ensemble(surface, params, seed)?)
}
