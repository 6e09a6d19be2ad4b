//! Closed geodesics as conjugacy classes of loxodromic elements.

use std::collections::HashMap;

use super::{for_each_in_ball, FuchsianSurface, Word};
use crate::error::{Error, Result};
use crate::moebius::translation_length_unchecked;

/// Default cap on the length cutoff.
pub const DEFAULT_MAX_GEODESIC_LENGTH: f64 = 11.0;

/// Every class of length `ℓ` has a representative displacing `i` by at most
/// `ℓ + GEODESIC_SEARCH_MARGIN` (checked on the modular torus by comparing
/// enumerations with larger margins).
pub const GEODESIC_SEARCH_MARGIN: f64 = 4.0;

/// An oriented closed geodesic, represented by the least cyclic rotation of
/// a cyclically reduced word.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicClass {
    pub cyclic_word: Word,
    pub length: f64,
    pub primitive: bool,
}

/// All oriented closed geodesics of length at most `t`, sorted by length.
///
/// A geodesic and its reverse are listed separately (they are distinct
/// conjugacy classes in a free group).
pub fn enumerate_geodesics(surface: &FuchsianSurface, t: f64, primitive_only: bool) -> Result<Vec<GeodesicClass>> {
    enumerate_geodesics_with(surface, t, primitive_only, GEODESIC_SEARCH_MARGIN, DEFAULT_MAX_GEODESIC_LENGTH)
}

pub fn enumerate_geodesics_with(
    surface: &FuchsianSurface,
    t: f64,
    primitive_only: bool,
    margin: f64,
    cap: f64,
) -> Result<Vec<GeodesicClass>> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!("invalid geodesic length cutoff {t}")));
    }
    if t > cap {
        return Err(Error::Resource(format!("geodesic cutoff {t} exceeds cap {cap}")));
    }
    // |tr| must exceed 2cosh(0) with room for rounding to count as loxodromic.
    let max_trace = 2.0 * (t / 2.0).cosh() * (1.0 + 1e-12);
    let mut classes: HashMap<Word, f64> = HashMap::new();
    for_each_in_ball(surface, t + margin, |word, m, _| {
        let tr = m.trace().abs();
        if tr <= 2.0 + 1e-9 || tr > max_trace {
            return;
        }
        let len = translation_length_unchecked(tr.into());
        if len > t {
            return;
        }
        let rep = word.conjugacy_representative();
        classes.entry(rep).or_insert(len);
    });
    let mut out: Vec<GeodesicClass> = classes
        .into_iter()
        .map(|(w, length)| GeodesicClass { primitive: !w.is_proper_power(), cyclic_word: w, length })
        .filter(|c| !primitive_only || c.primitive)
        .collect();
    out.sort_by(|a, b| a.length.total_cmp(&b.length).then_with(|| a.cyclic_word.cmp(&b.cyclic_word)));
    Ok(out)
}
