//! Orbit balls `B_Γ(r) = {γ : d(i, γ·i) ≤ r}`.

use rand::Rng;

use super::{FuchsianSurface, Letter, Real2, Word};
use crate::error::{Error, Result};
use crate::moebius::MoebiusElement;

/// Default radius cap; the ball grows like `e^r`.
pub const DEFAULT_MAX_RADIUS: f64 = 14.0;

/// Orbit points closer than this are treated as numerically identical.
const DEDUP_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct BallElement {
    pub word: Word,
    pub element: MoebiusElement,
    /// `d(i, γ·i)`.
    pub distance: f64,
}

/// Depth-first walk over reduced words whose orbit points lie within `r` of `i`.
///
/// Every prefix of the reduced word of `γ ∈ B_Γ(r)` lies within
/// `r + max_generator_displacement` of `i`, so subtrees are pruned beyond that.
/// The callback sees `(word, ρ_can(word), d)` for every element of the ball in
/// depth-first order.
pub fn for_each_in_ball(surface: &FuchsianSurface, r: f64, mut f: impl FnMut(&Word, &Real2, f64)) {
    let cosh_r = r.cosh();
    let prune = (r + surface.max_generator_displacement() + 1e-9).cosh();
    let letters: Vec<(Letter, Real2)> = surface.all_letters().map(|l| (l, surface.letter_matrix(l))).collect();
    let mut word = Word::identity();
    // Stack of (matrix at this node, index of next letter to try).
    let mut stack: Vec<(Real2, usize)> = vec![(Real2::identity(), 0)];
    f(&word, &Real2::identity(), 0.0);
    while let Some(top) = stack.last_mut() {
        let (m, next) = *top;
        if next == letters.len() {
            stack.pop();
            word.pop();
            continue;
        }
        top.1 += 1;
        let (l, g) = letters[next];
        if word.letters().last() == Some(&l.inverse()) {
            continue;
        }
        let child = m * g;
        let c = child.frob_sq() / 2.0;
        if c > prune {
            continue;
        }
        word.push(l);
        if c <= cosh_r * (1.0 + 1e-15) {
            f(&word, &child, child.displacement());
        }
        stack.push((child, 0));
    }
}

/// A ball sorted by distance, supporting draws from any smaller radius.
#[derive(Debug, Clone)]
pub struct Ball {
    pub radius: f64,
    pub elements: Vec<BallElement>,
    /// Number of entries removed as numerical duplicates.
    pub duplicates_removed: usize,
}

impl Ball {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Number of elements with `d ≤ r`.
    pub fn count_within(&self, r: f64) -> usize {
        self.elements.partition_point(|e| e.distance <= r)
    }

    /// Uniform draw among elements with `d ≤ r` (`r` clamped to the ball radius).
    pub fn sample<R: Rng + ?Sized>(&self, r: f64, rng: &mut R) -> &BallElement {
        let n = self.count_within(r.min(self.radius)).max(1);
        &self.elements[rng.random_range(0..n)]
    }

    pub(crate) fn from_elements(radius: f64, mut elements: Vec<BallElement>) -> Self {
        elements.sort_by(|a, b| a.distance.total_cmp(&b.distance).then_with(|| a.word.cmp(&b.word)));
        let before = elements.len();
        let mut kept: Vec<BallElement> = Vec::with_capacity(before);
        for e in elements {
            let dup = kept.iter().rev().take_while(|k| e.distance - k.distance <= DEDUP_TOL).any(|k| {
                let (p, q) = (k.element.apply_base(), e.element.apply_base());
                crate::moebius::distance_h2(p, q).map(|d| d <= DEDUP_TOL).unwrap_or(false)
            });
            if !dup {
                kept.push(e);
            }
        }
        let duplicates_removed = before - kept.len();
        Ball { radius, elements: kept, duplicates_removed }
    }
}

/// Complete, sorted list of `B_Γ(r)`, refusing radii above `cap`.
pub fn enumerate_ball_with_cap(surface: &FuchsianSurface, r: f64, cap: f64) -> Result<Ball> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::Domain(format!("invalid ball radius {r}")));
    }
    if r > cap {
        return Err(Error::Resource(format!("ball radius {r} exceeds cap {cap}")));
    }
    let mut elements = Vec::new();
    for_each_in_ball(surface, r, |w, m, d| {
        elements.push(BallElement { word: w.clone(), element: m.to_element(), distance: d });
    });
    Ok(Ball::from_elements(r, elements))
}

/// Complete, sorted list of `B_Γ(r)` with the default radius cap.
pub fn enumerate_ball(surface: &FuchsianSurface, r: f64) -> Result<Ball> {
    enumerate_ball_with_cap(surface, r, DEFAULT_MAX_RADIUS)
}
