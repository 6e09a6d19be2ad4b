//! Brownian motion on the hyperbolic plane with generator `Δ = y²(∂²ₓ + ∂²ᵧ)`
//! (linear drift 1), and tracking of the deck transformation of a lift.
//!
//! The state is a frame `G ∈ PSL(2,ℝ)` with current point `G·i`. A step
//! right-multiplies `G` by the upper-triangular frame of a local increment
//! taken in half-plane coordinates at `i`:
//! `log y' = √2·W₂ − τ`, `x' = √2·√y'·W₁`, with `(W₁, W₂)` Gaussian of variance
//! `τ`. An increment whose displacement exceeds the step cap is split by
//! Brownian-bridge refinement of `(W₁, W₂)` until every piece is below the cap.

use std::ops::ControlFlow;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lattice::{FuchsianSurface, Letter, Real2, Word};
use crate::moebius::{cosh_to_dist, HPoint};
use crate::seed::{rng_from_seed, Rng};

/// Largest hyperbolic displacement of a single recorded substep.
pub const DEFAULT_STEP_CAP: f64 = 0.1;
/// Default time step.
pub const DEFAULT_DT: f64 = 5e-3;
/// Bridge refinement depth beyond which a step is rejected.
pub const DEFAULT_MAX_DEPTH: u32 = 40;
/// Largest accepted path duration.
pub const DEFAULT_MAX_TIME: f64 = 10_000.0;
/// Steps between full re-reductions of the tracked word.
pub const DEFAULT_FULL_REDUCE_EVERY: usize = 1024;
/// Length of the word suffix checked by a full re-reduction.
pub const VERIFY_WINDOW: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BrownianConfig {
    pub dt: f64,
    pub step_cap: f64,
    pub max_depth: u32,
    pub max_time: f64,
    pub full_reduce_every: usize,
}

impl Default for BrownianConfig {
    fn default() -> Self {
        BrownianConfig {
            dt: DEFAULT_DT,
            step_cap: DEFAULT_STEP_CAP,
            max_depth: DEFAULT_MAX_DEPTH,
            max_time: DEFAULT_MAX_TIME,
            full_reduce_every: DEFAULT_FULL_REDUCE_EVERY,
        }
    }
}

impl BrownianConfig {
    pub fn with_dt(dt: f64) -> Self {
        BrownianConfig { dt, ..Self::default() }
    }

    fn validate(&self, t_max: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return Err(Error::Sampler(format!("time step {} outside (0, 1]", self.dt)));
        }
        if !(self.step_cap > 0.0) {
            return Err(Error::Sampler(format!("step cap {} must be positive", self.step_cap)));
        }
        if !(t_max >= 0.0 && t_max <= self.max_time) {
            return Err(Error::Sampler(format!("duration {t_max} outside [0, {}]", self.max_time)));
        }
        Ok(())
    }
}

/// Frame of the local increment `(W₁, W₂)` over time `tau`.
pub fn local_step(w1: f64, w2: f64, tau: f64) -> Real2 {
    let sy = ((2f64.sqrt() * w2 - tau) / 2.0).exp();
    Real2::new(sy, 2f64.sqrt() * w1, 0.0, 1.0 / sy)
}

/// Source of Brownian increments with bridge refinement.
pub struct StepSampler {
    rng: Rng,
    max_depth: u32,
}

impl StepSampler {
    pub fn new(seed: u64, max_depth: u32) -> Self {
        StepSampler { rng: rng_from_seed(seed), max_depth }
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Draw one increment over `dt` and feed its pieces, each displacing by
    /// at most `cap`, to `f(tau, h)`. `f` may stop the step early.
    pub fn step(&mut self, dt: f64, cap: f64, f: &mut impl FnMut(f64, Real2) -> ControlFlow<()>) -> Result<ControlFlow<()>> {
        self.step_with(dt, cap, &mut |tau, h| match f(tau, h) {
            ControlFlow::Continue(()) => Piece::Take,
            ControlFlow::Break(()) => Piece::Stop,
        })
    }

    /// Like [`step`](Self::step), but `f` may also ask for a piece to be
    /// split further by bridge refinement before it is used.
    pub fn step_with(&mut self, dt: f64, cap: f64, f: &mut impl FnMut(f64, Real2) -> Piece) -> Result<ControlFlow<()>> {
        let s = dt.sqrt();
        let w1 = s * self.normal();
        let w2 = s * self.normal();
        self.refine(w1, w2, dt, 0, cap.cosh(), f)
    }

    fn refine(
        &mut self,
        w1: f64,
        w2: f64,
        tau: f64,
        depth: u32,
        cosh_cap: f64,
        f: &mut impl FnMut(f64, Real2) -> Piece,
    ) -> Result<ControlFlow<()>> {
        let h = local_step(w1, w2, tau);
        if h.frob_sq() / 2.0 <= cosh_cap {
            match f(tau, h) {
                Piece::Take => return Ok(ControlFlow::Continue(())),
                Piece::Stop => return Ok(ControlFlow::Break(())),
                Piece::Split => {}
            }
        }
        if depth >= self.max_depth {
            return Err(Error::Sampler(format!("step refinement exceeded depth {}", self.max_depth)));
        }
        // Brownian bridge midpoint: N(W/2, τ/4) in each coordinate.
        let half = (tau / 4.0).sqrt();
        let m1 = w1 / 2.0 + half * self.normal();
        let m2 = w2 / 2.0 + half * self.normal();
        if self.refine(m1, m2, tau / 2.0, depth + 1, cosh_cap, f)?.is_break() {
            return Ok(ControlFlow::Break(()));
        }
        self.refine(w1 - m1, w2 - m2, tau / 2.0, depth + 1, cosh_cap, f)
    }
}

/// What to do with a proposed piece of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Piece {
    /// Use the piece and continue.
    Take,
    /// Use the piece and end the step.
    Stop,
    /// Do not use the piece; split it in two by bridge refinement.
    Split,
}

/// One change to a tracked word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordEvent {
    Push(Letter),
    Pop,
}

/// Compact history of a tracked word: the word at point `j` is obtained by
/// replaying `events[..offsets[j]]` from the empty word.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordTrace {
    pub events: Vec<WordEvent>,
    pub offsets: Vec<usize>,
}

impl WordTrace {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn word_at(&self, j: usize) -> Word {
        let mut w = Word::identity();
        for e in &self.events[..self.offsets[j]] {
            match *e {
                WordEvent::Push(l) => {
                    w.push(l);
                }
                WordEvent::Pop => {
                    w.pop();
                }
            }
        }
        w
    }

    /// Visit the word at every recorded point in order.
    pub fn for_each_word(&self, mut f: impl FnMut(usize, &Word)) {
        let mut w = Word::identity();
        let mut applied = 0;
        for (j, &end) in self.offsets.iter().enumerate() {
            for e in &self.events[applied..end] {
                match *e {
                    WordEvent::Push(l) => {
                        w.push(l);
                    }
                    WordEvent::Pop => {
                        w.pop();
                    }
                }
            }
            applied = end;
            f(j, &w);
        }
    }
}

/// Follows the Dirichlet tile containing a moving point.
///
/// Keeps a reduced frame `k` and a word `w` with lifted frame `ρ_can(w)·k`,
/// together with the prefix products `ρ_can(w₁⋯w_j)` so the lifted frame is
/// always re-evaluated from the letters.
#[derive(Debug, Clone)]
pub struct WordTracker<'a> {
    surface: &'a FuchsianSurface,
    frame: Real2,
    word: Word,
    prefix: Vec<Real2>,
    events: Vec<WordEvent>,
    record: bool,
    full_every: usize,
    since_full: usize,
}

impl<'a> WordTracker<'a> {
    /// Start at the base point `i` with frame `frame0` (any rotation about `i`
    /// or more generally any starting frame), reducing it first.
    pub fn new(surface: &'a FuchsianSurface, frame0: Real2, full_every: usize, record: bool) -> Result<Self> {
        let mut t = WordTracker {
            surface,
            frame: Real2::identity(),
            word: Word::identity(),
            prefix: vec![Real2::identity()],
            events: Vec::new(),
            record,
            full_every: full_every.max(1),
            since_full: 0,
        };
        t.frame = frame0;
        t.reduce()?;
        Ok(t)
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn frame(&self) -> Real2 {
        self.frame
    }

    pub fn events(&self) -> &[WordEvent] {
        &self.events
    }

    /// `ρ_can(w)`.
    pub fn lattice_element(&self) -> Real2 {
        *self.prefix.last().expect("prefix stack is never empty")
    }

    /// `ρ_can(w)·k`.
    pub fn lifted_frame(&self) -> Real2 {
        self.lattice_element() * self.frame
    }

    pub fn lifted_point(&self) -> HPoint {
        self.lifted_frame().apply_base()
    }

    /// `d(i, lifted point)`.
    pub fn lifted_distance(&self) -> f64 {
        self.lifted_frame().displacement()
    }

    /// `d(i, k·i)`: distance from the lifted point to the centre of its tile.
    pub fn distance_to_tile_centre(&self) -> f64 {
        self.frame.displacement()
    }

    fn push_letter(&mut self, l: Letter) {
        if self.word.push(l) {
            let top = self.lattice_element();
            self.prefix.push(top * self.surface.letter_matrix(l));
            if self.record {
                self.events.push(WordEvent::Push(l));
            }
        } else {
            self.prefix.pop();
            if self.record {
                self.events.push(WordEvent::Pop);
            }
        }
    }

    fn reduce(&mut self) -> Result<()> {
        let mut frame = self.frame;
        let mut letters = Vec::new();
        self.surface.reduce_frame_with(&mut frame, |l| letters.push(l))?;
        self.frame = frame.renormalized();
        for l in letters {
            self.push_letter(l);
        }
        Ok(())
    }

    /// Distance from the point moved by `h` to the centre of the tile it
    /// would land in, without moving.
    pub fn peek_distance(&self, h: Real2) -> Result<f64> {
        let mut f = self.frame * h;
        self.surface.reduce_frame_with(&mut f, |_| {})?;
        Ok(f.displacement())
    }

    /// Move by the local frame `h` (right multiplication) and re-reduce.
    pub fn apply_step(&mut self, h: Real2) -> Result<()> {
        self.frame = self.frame * h;
        self.reduce()?;
        self.since_full += 1;
        if self.since_full >= self.full_every {
            self.since_full = 0;
            self.verify()?;
        }
        Ok(())
    }

    /// Compare the incremental word with a reduction from scratch.
    ///
    /// Only the last [`VERIFY_WINDOW`] letters are re-reduced: their product
    /// stays small enough to be evaluated without cancellation, while the
    /// full lattice element of a long path is not.
    pub fn verify(&self) -> Result<()> {
        let letters = self.word.letters();
        let suffix = Word::from_letters(letters[letters.len().saturating_sub(VERIFY_WINDOW)..].iter().copied());
        let (u, p) = self.surface.full_reduce(self.surface.eval_real(&suffix), self.frame)?;
        if u == suffix {
            return Ok(());
        }
        // Different words are acceptable only for a point on a face, where
        // both tiles are equally close.
        let q_inc = self.frame.frob_sq();
        let q_full = (p * self.frame).frob_sq();
        if (q_inc - q_full).abs() <= 1e-9 * q_inc {
            Ok(())
        } else {
            Err(Error::Tracking(format!("incremental word ending {suffix} disagrees with full reduction {u}")))
        }
    }
}

/// A sampled trajectory with its lift and (after [`track_word`]) its
/// deck-transformation words.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPathSample {
    pub times: Vec<f64>,
    /// Lifted points in the upper half-plane.
    pub points: Vec<HPoint>,
    /// Local step frames; `steps[j]` moves point `j` to point `j + 1`.
    pub steps: Vec<Real2>,
    pub start_frame: Real2,
    pub word_trace: Option<WordTrace>,
    pub seed: u64,
    pub config: BrownianConfig,
}

impl BrownianPathSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Index of the recorded point nearest time `t`.
    pub fn index_near(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            0
        } else if k == self.times.len() || t - self.times[k - 1] <= self.times[k] - t {
            k - 1
        } else {
            k
        }
    }
}

/// Drive the sampler over `[0, t_max]`, calling `f(time, h)` for every
/// recorded substep.
pub fn drive(t_max: f64, cfg: &BrownianConfig, seed: u64, mut f: impl FnMut(f64, Real2) -> Result<()>) -> Result<()> {
    cfg.validate(t_max)?;
    let mut sampler = StepSampler::new(seed, cfg.max_depth);
    let mut t = 0.0;
    let n_steps = (t_max / cfg.dt).round() as usize;
    let mut err = None;
    for _ in 0..n_steps {
        let _ = sampler.step(cfg.dt, cfg.step_cap, &mut |tau, h| {
            t += tau;
            match f(t, h) {
                Ok(()) => ControlFlow::Continue(()),
                Err(e) => {
                    err = Some(e);
                    ControlFlow::Break(())
                }
            }
        })?;
        if let Some(e) = err.take() {
            return Err(e);
        }
    }
    Ok(())
}

/// Sample a path from `start` over `[0, t_max]` (reproducible from `seed`).
pub fn sample_path(start: HPoint, t_max: f64, dt: f64, seed: u64) -> Result<BrownianPathSample> {
    sample_path_with(start, t_max, &BrownianConfig::with_dt(dt), seed)
}

pub fn sample_path_with(start: HPoint, t_max: f64, cfg: &BrownianConfig, seed: u64) -> Result<BrownianPathSample> {
    let start = HPoint::new(start.z())?;
    let start_frame = Real2::from_point(start);
    let mut frame = start_frame;
    let mut path = BrownianPathSample {
        times: vec![0.0],
        points: vec![start],
        steps: Vec::new(),
        start_frame,
        word_trace: None,
        seed,
        config: *cfg,
    };
    drive(t_max, cfg, seed, |t, h| {
        frame = frame * h;
        path.times.push(t);
        path.points.push(frame.apply_base());
        path.steps.push(h);
        Ok(())
    })?;
    Ok(path)
}

/// Fill in the deck-transformation word at every recorded point.
pub fn track_word(surface: &FuchsianSurface, path: &BrownianPathSample) -> Result<BrownianPathSample> {
    let mut tracker = WordTracker::new(surface, path.start_frame, path.config.full_reduce_every, true)?;
    let mut offsets = Vec::with_capacity(path.len());
    offsets.push(tracker.events().len());
    for &h in &path.steps {
        tracker.apply_step(h)?;
        offsets.push(tracker.events().len());
    }
    let mut out = path.clone();
    out.word_trace = Some(WordTrace { events: tracker.events().to_vec(), offsets });
    Ok(out)
}

/// Deck element `γ` with `ω(t) ∈ γ·D`, at the recorded point nearest `t`.
pub fn closed_loop_element(surface: &FuchsianSurface, path: &BrownianPathSample, t: f64) -> Result<Word> {
    let j = path.index_near(t);
    match &path.word_trace {
        Some(trace) => Ok(trace.word_at(j)),
        None => Ok(track_word(surface, path)?.word_trace.expect("just tracked").word_at(j)),
    }
}

/// Sample and track at once, calling `on_step(time, tracker)` after every
/// substep. Produces exactly the words of [`sample_path`] followed by
/// [`track_word`] for the same seed.
pub fn simulate_tracked<'a>(
    surface: &'a FuchsianSurface,
    start_frame: Real2,
    t_max: f64,
    cfg: &BrownianConfig,
    seed: u64,
    mut on_step: impl FnMut(f64, &WordTracker<'a>) -> Result<()>,
) -> Result<WordTracker<'a>> {
    let mut tracker = WordTracker::new(surface, start_frame, cfg.full_reduce_every, false)?;
    drive(t_max, cfg, seed, |t, h| {
        tracker.apply_step(h)?;
        on_step(t, &tracker)
    })?;
    Ok(tracker)
}

/// Radial heat-kernel model at time `t` for the generator `Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatKernelModel {
    pub t: f64,
}

impl HeatKernelModel {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("heat kernel time {t} must be positive")));
        }
        Ok(HeatKernelModel { t })
    }

    /// The Gaussian-in-`(r − t)` exponent `−(r − t)²/(4t)`.
    pub fn gaussian_exponent(&self, r: f64) -> f64 {
        -(r - self.t).powi(2) / (4.0 * self.t)
    }

    /// Slowly varying prefactor of the two-sided radial density estimate.
    pub fn prefactor(&self, r: f64) -> f64 {
        let t = self.t;
        (1.0 / (1.0 + 1.0 / r)) / t / (1.0 + r + t) * (1.0 + r)
    }

    /// Logarithm of the envelope `prefactor · exp(−(r − t)²/(4t))`.
    pub fn log_envelope(&self, r: f64) -> f64 {
        self.prefactor(r).ln() + self.gaussian_exponent(r)
    }

    /// Exact radial density (per unit `r`) from the closed-form heat kernel
    /// on H², evaluated by quadrature.
    pub fn exact_radial_density(&self, r: f64) -> f64 {
        let t = self.t;
        // p_t(r) = √2·e^{−t/4}/(4πt)^{3/2} ∫_r^∞ s e^{−s²/4t} / √(cosh s − cosh r) ds,
        // with s = r + u² removing the endpoint singularity.
        let integrand = |u: f64| {
            if u == 0.0 {
                let s = r;
                // limit of 2u / √(cosh(r+u²) − cosh r) as u → 0
                return 2.0 * s * (-s * s / (4.0 * t)).exp() / r.sinh().sqrt();
            }
            let s = r + u * u;
            2.0 * u * s * (-s * s / (4.0 * t)).exp() / (s.cosh() - r.cosh()).sqrt()
        };
        let upper = (4.0 * t.sqrt() + 10.0).sqrt();
        let integral = simpson(integrand, 0.0, upper, 4000);
        let p = 2f64.sqrt() * (-t / 4.0).exp() / (4.0 * std::f64::consts::PI * t).powf(1.5) * integral;
        2.0 * std::f64::consts::PI * r.sinh() * p
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Binned radial density of distances, returned as `(bin centres, density)`
/// for bins holding at least `min_count` samples.
pub fn radial_histogram(distances: &[f64], lo: f64, hi: f64, bins: usize, min_count: usize) -> (Vec<f64>, Vec<f64>) {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &d in distances {
        if d >= lo && d < hi {
            counts[((d - lo) / width) as usize] += 1;
        }
    }
    let n = distances.len() as f64;
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= min_count)
        .map(|(k, &c)| (lo + (k as f64 + 0.5) * width, c as f64 / (n * width)))
        .unzip()
}

/// Regression of `log(density / prefactor)` on `−(r − t)²/(4t)`; the slope is
/// 1 when the sample follows the heat-kernel shape.
pub fn heat_kernel_slope(distances: &[f64], t: f64, bins: usize, min_count: usize) -> Result<crate::stats::LinearFit> {
    let model = HeatKernelModel::new(t)?;
    let sd = (2.0 * t).sqrt();
    let (lo, hi) = ((t - 2.5 * sd).max(0.5), t + 2.5 * sd);
    let (rs, dens) = radial_histogram(distances, lo, hi, bins, min_count);
    if rs.len() < 3 {
        return Err(Error::Estimator("too few populated bins for the heat-kernel fit".into()));
    }
    let xs: Vec<f64> = rs.iter().map(|&r| model.gaussian_exponent(r)).collect();
    let ys: Vec<f64> = rs.iter().zip(&dens).map(|(&r, &p)| (p / model.prefactor(r)).ln()).collect();
    Ok(crate::stats::linear_fit(&xs, &ys))
}

/// `d(i, G·i)` for a frame `G`.
pub fn frame_distance(g: &Real2) -> f64 {
    cosh_to_dist(g.frob_sq() / 2.0)
}

#[cfg(test)]
mod tests;
