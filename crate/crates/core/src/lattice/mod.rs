//! Fuchsian lattices: the uniformizing group of a cusped surface, with
//! Dirichlet-domain reduction, orbit balls and closed-geodesic enumeration.

mod ball;
mod cache;
mod dirichlet;
mod geodesic;
mod real;
mod word;

use std::f64::consts::PI;

pub use ball::{enumerate_ball, enumerate_ball_with_cap, for_each_in_ball, Ball, BallElement, DEFAULT_MAX_RADIUS};
pub use cache::{ball_cached, load as load_ball, store as store_ball, BALL_CACHE_ENV};
pub use geodesic::{enumerate_geodesics, enumerate_geodesics_with, GeodesicClass, DEFAULT_MAX_GEODESIC_LENGTH, GEODESIC_SEARCH_MARGIN};
pub use real::Real2;
pub use word::{Letter, Word};

use crate::error::{Error, Result};
use crate::moebius::{classify, translation_length, Classification, HPoint, MoebiusElement, DEFAULT_TOL};
use crate::seed::{fnv1a64, rng_from_seed};
use dirichlet::{dirichlet_faces, DirichletDomain};

/// Iteration cap for greedy reduction; reaching it signals a numerical fault.
pub const REDUCTION_ITERATION_CAP: usize = 100_000;

/// A side pairing of the Dirichlet domain at `i`: applying `matrix` to a point
/// beyond the corresponding face moves it closer to `i`.
#[derive(Debug, Clone)]
pub struct SidePairing {
    pub word: Word,
    pub matrix: Real2,
    /// Word of the inverse pairing, which is always another side pairing.
    pub inverse_word: Word,
}

/// The uniformizing lattice of a finite-area surface with free fundamental group.
#[derive(Debug, Clone)]
pub struct FuchsianSurface {
    name: String,
    generators: Vec<MoebiusElement>,
    letters: Vec<Real2>,
    cusp_words: Vec<Word>,
    pairings: Vec<SidePairing>,
    area: f64,
    systole: f64,
    max_generator_displacement: f64,
    hash: u64,
}

impl FuchsianSurface {
    /// Build a surface from real generators of a free lattice.
    ///
    /// Fails when a generator is not real, is elliptic, when a cusp word is
    /// not parabolic, or when the Dirichlet domain does not have the area
    /// `2π·(rank − 1)` predicted for a free lattice.
    pub fn new(name: &str, generators: Vec<MoebiusElement>, cusp_words: Vec<Word>) -> Result<Self> {
        if generators.is_empty() || generators.len() > 12 {
            return Err(Error::InvalidElement(format!("unsupported number of generators: {}", generators.len())));
        }
        for (k, g) in generators.iter().enumerate() {
            if !g.is_real(DEFAULT_TOL) {
                return Err(Error::InvalidElement(format!("generator {k} is not real")));
            }
            if classify(g, DEFAULT_TOL) == Classification::Elliptic {
                return Err(Error::InvalidElement(format!("generator {k} is elliptic")));
            }
        }
        let letters: Vec<Real2> = generators
            .iter()
            .flat_map(|g| {
                let m = Real2::from_element(g);
                [m, m.inverse()]
            })
            .collect();
        let mut surface = FuchsianSurface {
            name: name.to_owned(),
            generators,
            letters,
            cusp_words,
            pairings: Vec::new(),
            area: 0.0,
            systole: 0.0,
            max_generator_displacement: 0.0,
            hash: 0,
        };
        for w in &surface.cusp_words {
            let t2 = surface.eval_real(w).trace().powi(2);
            if (t2 - 4.0).abs() > DEFAULT_TOL {
                return Err(Error::InvalidElement(format!("cusp word {w} has trace squared {t2}")));
            }
        }
        let DirichletDomain { pairings, area } = dirichlet_faces(&surface)?;
        let expected = 2.0 * PI * (surface.generators.len() as f64 - 1.0);
        if (area - expected).abs() > 1e-6 {
            return Err(Error::Domain(format!("Dirichlet domain area {area} differs from {expected}")));
        }
        surface.pairings = pairings;
        surface.area = area;
        surface.max_generator_displacement =
            surface.letters.iter().map(|m| m.displacement()).fold(0.0, f64::max);
        surface.systole = surface.shortest_translation_length();
        surface.hash = surface.compute_hash();
        Ok(surface)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn generators(&self) -> &[MoebiusElement] {
        &self.generators
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn cusp_words(&self) -> &[Word] {
        &self.cusp_words
    }

    pub fn base_point(&self) -> HPoint {
        HPoint::base()
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn systole(&self) -> f64 {
        self.systole
    }

    pub fn side_pairings(&self) -> &[SidePairing] {
        &self.pairings
    }

    /// Largest displacement `d(i, g·i)` over generators and their inverses.
    pub fn max_generator_displacement(&self) -> f64 {
        self.max_generator_displacement
    }

    /// Smallest displacement `d(i, γ·i)` over non-identity `γ`; the nearest
    /// orbit point always defines a face of the Dirichlet domain.
    pub fn min_orbit_displacement(&self) -> f64 {
        self.pairings.iter().map(|p| p.matrix.displacement()).fold(f64::INFINITY, f64::min)
    }

    /// Stable identifier of the generator matrices, used for cache keys.
    pub fn hash(&self) -> u64 {
        self.hash
    }

    /// Matrix of a single letter.
    pub fn letter_matrix(&self, l: Letter) -> Real2 {
        self.letters[l.index()]
    }

    pub fn all_letters(&self) -> impl Iterator<Item = Letter> {
        (0..2 * self.rank()).map(|k| Letter(k as u8))
    }

    /// `ρ_can(w)` as a real matrix.
    pub fn eval_real(&self, w: &Word) -> Real2 {
        w.letters().iter().fold(Real2::identity(), |acc, &l| acc * self.letters[l.index()])
    }

    /// `ρ_can(w)` as a Möbius element.
    pub fn eval(&self, w: &Word) -> MoebiusElement {
        self.eval_real(w).to_element()
    }

    fn compute_hash(&self) -> u64 {
        let mut bytes = self.name.as_bytes().to_vec();
        for g in &self.generators {
            for z in g.entries() {
                bytes.extend_from_slice(&z.re.to_le_bytes());
                bytes.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        fnv1a64(bytes)
    }

    fn shortest_translation_length(&self) -> f64 {
        let mut best = f64::INFINITY;
        for_each_in_ball(self, 2.0 * self.max_generator_displacement + 1e-9, |word, m, _| {
            if !word.is_empty() {
                let g = m.to_element();
                if let Ok(len) = translation_length(&g) {
                    best = best.min(len);
                }
            }
        });
        best
    }

    /// Greedy reduction of a point into the Dirichlet domain at `i`.
    ///
    /// Returns `(z0, w)` with `z = ρ_can(w)·z0`.
    pub fn reduce_point(&self, z: HPoint) -> Result<(HPoint, Word)> {
        let z = HPoint::new(z.z())?;
        let mut cur = z.z();
        let mut word = Word::identity();
        for _ in 0..REDUCTION_ITERATION_CAP {
            let q = cosh_to_base(cur);
            let mut best: Option<(usize, f64)> = None;
            for (k, p) in self.pairings.iter().enumerate() {
                let qc = cosh_to_base(p.matrix.apply(cur));
                if best.is_none_or(|(_, qb)| qc < qb) {
                    best = Some((k, qc));
                }
            }
            match best {
                Some((k, qb)) if qb < q * (1.0 - REDUCTION_REL_TOL) => {
                    cur = self.pairings[k].matrix.apply(cur);
                    for &l in self.pairings[k].inverse_word.letters() {
                        word.push(l);
                    }
                }
                _ => return Ok((HPoint::new(cur)?, word)),
            }
        }
        Err(Error::ReductionFailure { iterations: REDUCTION_ITERATION_CAP })
    }

    /// Reduce a frame `k` (an isometry with `k·i` the tracked point) in place.
    /// Each applied pairing `g` replaces `k` by `g·k` and right-multiplies the
    /// word by `g⁻¹`, so `ρ_can(word)·k` is unchanged.
    pub fn reduce_frame(&self, frame: &mut Real2, word: &mut Word) -> Result<usize> {
        self.reduce_frame_with(frame, |l| {
            word.push(l);
        })
    }

    /// Like [`reduce_frame`](Self::reduce_frame) but reports each letter
    /// appended to the word through a callback.
    pub fn reduce_frame_with(&self, frame: &mut Real2, mut on_letter: impl FnMut(Letter)) -> Result<usize> {
        for steps in 0..REDUCTION_ITERATION_CAP {
            let q = frame.frob_sq();
            let mut best: Option<(usize, f64, Real2)> = None;
            for (k, p) in self.pairings.iter().enumerate() {
                let cand = p.matrix * *frame;
                let qc = cand.frob_sq();
                if best.as_ref().is_none_or(|(_, qb, _)| qc < *qb) {
                    best = Some((k, qc, cand));
                }
            }
            match best {
                Some((k, qb, cand)) if qb < q * (1.0 - REDUCTION_REL_TOL) => {
                    *frame = cand;
                    for &l in self.pairings[k].inverse_word.letters() {
                        on_letter(l);
                    }
                }
                _ => return Ok(steps),
            }
        }
        Err(Error::ReductionFailure { iterations: REDUCTION_ITERATION_CAP })
    }

    /// Reduce the lifted frame `lattice · frame` from scratch.
    ///
    /// `lattice` must be (close to) an element of the lattice; products with
    /// side pairings are formed before multiplying by `frame`, so integer
    /// lattices are handled exactly. Returns the word `u` and the remaining
    /// lattice factor `P` with `ρ_can(u)·P·frame = lattice·frame`; `P·frame`
    /// is the reduced frame.
    pub fn full_reduce(&self, lattice: Real2, frame: Real2) -> Result<(Word, Real2)> {
        let mut p = lattice;
        let mut word = Word::identity();
        for _ in 0..REDUCTION_ITERATION_CAP {
            let q = (p * frame).frob_sq();
            let mut best: Option<(usize, f64, Real2)> = None;
            for (k, sp) in self.pairings.iter().enumerate() {
                let cand = sp.matrix * p;
                let qc = (cand * frame).frob_sq();
                if best.as_ref().is_none_or(|(_, qb, _)| qc < *qb) {
                    best = Some((k, qc, cand));
                }
            }
            match best {
                Some((k, qb, cand)) if qb < q * (1.0 - REDUCTION_REL_TOL) => {
                    p = cand;
                    for &l in self.pairings[k].inverse_word.letters() {
                        word.push(l);
                    }
                }
                _ => return Ok((word, p)),
            }
        }
        Err(Error::ReductionFailure { iterations: REDUCTION_ITERATION_CAP })
    }

    /// Uniform draw from `B_Γ(r)`, reproducible from `seed`.
    pub fn sample_ball_uniform(&self, r: f64, seed: u64) -> Result<Word> {
        let ball = ball_cached(self, r)?;
        let mut rng = rng_from_seed(seed);
        Ok(ball.sample(r, &mut rng).word.clone())
    }
}

/// Relative decrease of `cosh d` required to accept a reduction step.
const REDUCTION_REL_TOL: f64 = 1e-12;

fn cosh_to_base(z: crate::moebius::Complex) -> f64 {
    (z.norm_sqr() + 1.0) / (2.0 * z.im)
}

/// The modular once-punctured torus: the commutator subgroup of PSL(2,ℤ),
/// generated by `X = [[2,1],[1,1]]` and `Y = [[1,1],[1,2]]`.
pub fn modular_torus() -> FuchsianSurface {
    let x = MoebiusElement::from_real(2.0, 1.0, 1.0, 1.0).expect("unimodular");
    let y = MoebiusElement::from_real(1.0, 1.0, 1.0, 2.0).expect("unimodular");
    FuchsianSurface::new("modular-torus", vec![x, y], vec![Word::parse("XYxy").expect("valid word")])
        .expect("the modular torus is a valid surface")
}

#[cfg(test)]
mod tests;
