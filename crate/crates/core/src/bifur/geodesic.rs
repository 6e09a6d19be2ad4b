use std::f64::consts::PI;

use rand::Rng as _;

use crate::brownian::{drive, BrownianConfig, WordTracker, DEFAULT_DT, DEFAULT_FULL_REDUCE_EVERY};
use crate::error::{Error, Result};
use crate::lattice::{enumerate_geodesics_with, FuchsianSurface, GeodesicClass, Real2, Word, GEODESIC_SEARCH_MARGIN};
use crate::moebius::{translation_length, MoebiusElement};
use crate::seed::{derive_seed, rng_from_seed};

/// Largest cutoff accepted by the length-based model.
pub const MAX_LENGTH_BASED_CUTOFF: f64 = 13.0;
/// Largest cutoff accepted by the path-based models.
pub const MAX_PATH_CUTOFF: f64 = 200.0;
/// Draws abandoned before giving up on a loxodromic closure.
pub const MAX_RESAMPLES: u32 = 1000;

const RAY_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeodesicModel {
    /// Close up a geodesic ray of length `t` from `i` in a uniform direction.
    Thurston,
    /// Close up a Brownian path of duration `t`.
    Brownian,
    /// Uniform over primitive closed geodesics of length at most `t`.
    LengthBased,
}

impl std::str::FromStr for GeodesicModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thurston" => Ok(GeodesicModel::Thurston),
            "brownian" => Ok(GeodesicModel::Brownian),
            "length_based" => Ok(GeodesicModel::LengthBased),
            _ => Err(Error::Parse(format!("unknown geodesic model {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GeodesicSample {
    /// Least rotation of the cyclically reduced word.
    pub word: Word,
    pub length: f64,
    pub model: GeodesicModel,
    pub t: f64,
    /// Closures rejected as identity or parabolic before this draw.
    pub resamples: u32,
}

/// Draws closed geodesics for one model and cutoff. The length-based model
/// enumerates its classes once on construction.
#[derive(Debug, Clone)]
pub struct GeodesicSampler<'a> {
    surface: &'a FuchsianSurface,
    model: GeodesicModel,
    t: f64,
    classes: Vec<GeodesicClass>,
}

impl<'a> GeodesicSampler<'a> {
    pub fn new(surface: &'a FuchsianSurface, model: GeodesicModel, t: f64) -> Result<Self> {
        let cap = if model == GeodesicModel::LengthBased { MAX_LENGTH_BASED_CUTOFF } else { MAX_PATH_CUTOFF };
        if !(t.is_finite() && t > 0.0 && t <= cap) {
            return Err(Error::Domain(format!("cutoff {t} outside (0, {cap}] for the {model:?} model")));
        }
        let classes = if model == GeodesicModel::LengthBased {
            let c = enumerate_geodesics_with(surface, t, true, GEODESIC_SEARCH_MARGIN, MAX_LENGTH_BASED_CUTOFF)?;
            if c.is_empty() {
                return Err(Error::Domain(format!("no closed geodesic of length at most {t}")));
            }
            c
        } else {
            Vec::new()
        };
        Ok(GeodesicSampler { surface, model, t, classes })
    }

    /// Restrict a length-based sampler to a smaller cutoff without
    /// enumerating again.
    pub fn with_cutoff(&self, t: f64) -> Result<Self> {
        if self.model != GeodesicModel::LengthBased || t > self.t {
            return GeodesicSampler::new(self.surface, self.model, t);
        }
        let classes: Vec<GeodesicClass> = self.classes.iter().filter(|c| c.length <= t).cloned().collect();
        if classes.is_empty() {
            return Err(Error::Domain(format!("no closed geodesic of length at most {t}")));
        }
        Ok(GeodesicSampler { surface: self.surface, model: self.model, t, classes })
    }

    pub fn classes(&self) -> &[GeodesicClass] {
        &self.classes
    }

    pub fn sample(&self, seed: u64) -> Result<GeodesicSample> {
        if self.model == GeodesicModel::LengthBased {
            let mut rng = rng_from_seed(seed);
            let c = &self.classes[rng.random_range(0..self.classes.len())];
            return Ok(GeodesicSample { word: c.cyclic_word.clone(), length: c.length, model: self.model, t: self.t, resamples: 0 });
        }
        for k in 0..=MAX_RESAMPLES {
            let s = if k == 0 { seed } else { derive_seed(seed, &format!("resample/{k}")) };
            let word = match self.model {
                GeodesicModel::Thurston => self.ray_word(s)?,
                _ => self.brownian_word(s)?,
            }
            .conjugacy_representative();
            if word.is_empty() {
                continue;
            }
            if let Ok(length) = translation_length(&self.surface.eval(&word)) {
                return Ok(GeodesicSample { word, length, model: self.model, t: self.t, resamples: k });
            }
        }
        Err(Error::Sampler(format!("no loxodromic closure after {MAX_RESAMPLES} resamples")))
    }

    fn ray_word(&self, seed: u64) -> Result<Word> {
        let theta = rng_from_seed(seed).random_range(0.0..2.0 * PI);
        let frame0 = Real2::from_element(&MoebiusElement::rotation(theta));
        let mut tracker = WordTracker::new(self.surface, frame0, DEFAULT_FULL_REDUCE_EVERY, false)?;
        let n = (self.t / RAY_STEP).ceil() as usize;
        let step = Real2::from_element(&MoebiusElement::vertical_translation(self.t / n as f64));
        for _ in 0..n {
            tracker.apply_step(step)?;
        }
        Ok(tracker.word().clone())
    }

    fn brownian_word(&self, seed: u64) -> Result<Word> {
        let cfg = BrownianConfig::with_dt(DEFAULT_DT);
        let mut tracker = WordTracker::new(self.surface, Real2::identity(), cfg.full_reduce_every, false)?;
        drive(self.t, &cfg, seed, |_, h| tracker.apply_step(h))?;
        Ok(tracker.word().clone())
    }
}

/// One closed geodesic drawn from `model` at cutoff `t`.
pub fn random_geodesic(surface: &FuchsianSurface, model: GeodesicModel, t: f64, seed: u64) -> Result<GeodesicSample> {
    GeodesicSampler::new(surface, model, t)?.sample(seed)
}
