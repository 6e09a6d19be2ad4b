//! Representations of the free surface group into PSL(2,ℂ).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::{FuchsianSurface, Letter, Word};
use crate::moebius::{Classification, Complex, MoebiusElement, ScaledMoebius, DEFAULT_TOL};

/// Images of the free generators, with the cusp words that should map to
/// parabolics.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    name: String,
    images: Vec<MoebiusElement>,
    /// Images of generators and their inverses, indexed by letter.
    letters: Vec<MoebiusElement>,
    cusp_words: Vec<Word>,
    parabolic_ok: bool,
}

impl Representation {
    pub fn new(name: &str, images: Vec<MoebiusElement>, cusp_words: Vec<Word>) -> Result<Self> {
        if images.is_empty() || images.len() > 12 {
            return Err(Error::InvalidElement(format!("unsupported number of generators: {}", images.len())));
        }
        for w in &cusp_words {
            if let Some(l) = w.letters().iter().find(|l| l.generator() >= images.len()) {
                return Err(Error::InvalidElement(format!("cusp word {w} uses unknown generator {}", l.to_char())));
            }
        }
        let letters = images.iter().flat_map(|g| [*g, g.inverse()]).collect();
        let mut rep = Representation { name: name.to_owned(), images, letters, cusp_words, parabolic_ok: false };
        rep.parabolic_ok = rep.cusp_words.iter().all(|w| (rep.eval(w).trace_sq() - 4.0).norm() <= DEFAULT_TOL);
        Ok(rep)
    }

    /// The uniformizing representation `ρ_can` of a surface.
    pub fn canonical(surface: &FuchsianSurface) -> Self {
        Representation::new("canonical", surface.generators().to_vec(), surface.cusp_words().to_vec())
            .expect("surface generators form a valid representation")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rank(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[MoebiusElement] {
        &self.images
    }

    pub fn cusp_words(&self) -> &[Word] {
        &self.cusp_words
    }

    /// Every cusp word maps to a parabolic (or the identity) within 1e−9.
    pub fn parabolic_ok(&self) -> bool {
        self.parabolic_ok
    }

    pub fn require_parabolic(&self) -> Result<()> {
        if self.parabolic_ok {
            Ok(())
        } else {
            Err(Error::Classification { expected: "parabolic cusp images", found: format!("representation {}", self.name) })
        }
    }

    pub fn letter(&self, l: Letter) -> &MoebiusElement {
        &self.letters[l.index()]
    }

    /// `ρ(w)` as an overflow-safe scaled product.
    pub fn eval_scaled(&self, w: &Word) -> ScaledMoebius {
        w.letters().iter().fold(ScaledMoebius::identity(), |acc, &l| acc.mul_element(self.letter(l)))
    }

    /// `ρ(w)`. Short words are multiplied directly; long ones go through the
    /// scaled product to keep rounding under control.
    pub fn eval(&self, w: &Word) -> MoebiusElement {
        if w.len() <= 64 {
            w.letters().iter().fold(MoebiusElement::identity(), |acc, &l| acc * *self.letter(l))
        } else {
            self.eval_scaled(w).to_element().unwrap_or_else(|_| MoebiusElement::identity())
        }
    }

    /// `log ‖ρ(w)‖`.
    pub fn log_norm(&self, w: &Word) -> f64 {
        self.eval_scaled(w).log_op_norm()
    }

    /// `h ρ h⁻¹`.
    pub fn conjugated(&self, h: &MoebiusElement) -> Self {
        let images = self.images.iter().map(|g| g.conjugate_by(h)).collect();
        Representation::new(&format!("{}-conjugated", self.name), images, self.cusp_words.clone())
            .expect("conjugation preserves validity")
    }

    /// `ρ ∘ φ` for the automorphism `φ` sending each generator to its inverse.
    pub fn with_inverted_generators(&self) -> Self {
        let images = self.images.iter().map(|g| g.inverse()).collect();
        let cusp_words = self.cusp_words.iter().map(invert_letters).collect();
        Representation::new(&format!("{}-inverted", self.name), images, cusp_words).expect("valid")
    }

    /// Heuristic non-elementarity: two loxodromic images of words of length
    /// at most `max_len` without a common fixed point (`tr[g, h] ≠ 2`).
    pub fn is_non_elementary(&self, max_len: usize) -> bool {
        let mut loxodromic: Vec<MoebiusElement> = Vec::new();
        let mut frontier: Vec<(Word, MoebiusElement)> = vec![(Word::identity(), MoebiusElement::identity())];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for (w, g) in &frontier {
                for k in 0..2 * self.rank() {
                    let l = Letter(k as u8);
                    let mut w2 = w.clone();
                    if !w2.push(l) {
                        continue;
                    }
                    let g2 = *g * *self.letter(l);
                    if crate::moebius::classify(&g2, DEFAULT_TOL) == Classification::Loxodromic {
                        for h in &loxodromic {
                            let comm = g2 * *h * g2.inverse() * h.inverse();
                            if (comm.trace() - 2.0).norm() > 1e-6 {
                                return true;
                            }
                        }
                        if loxodromic.len() < 64 {
                            loxodromic.push(g2);
                        }
                    }
                    next.push((w2, g2));
                }
            }
            frontier = next;
        }
        false
    }

    /// Text form: one `G a b c d` line per generator (entries `re` or
    /// `re,im`) and one `cusp WORD` line per cusp word.
    pub fn to_text(&self) -> String {
        let mut out = format!("name {}\n", self.name);
        for (k, g) in self.images.iter().enumerate() {
            let _ = write!(out, "{}", Letter::new(k, false).to_char());
            for z in g.entries() {
                let _ = write!(out, " {},{}", z.re, z.im);
            }
            out.push('\n');
        }
        for w in &self.cusp_words {
            let _ = writeln!(out, "cusp {w}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut name = String::from("unnamed");
        let mut images: Vec<Option<MoebiusElement>> = Vec::new();
        let mut cusp_words = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| Error::Parse(format!("line {}: {msg}: {raw:?}", lineno + 1));
            match toks[0] {
                "name" => name = toks[1..].join(" "),
                "cusp" => {
                    if toks.len() != 2 {
                        return Err(bad("expected `cusp WORD`"));
                    }
                    cusp_words.push(Word::parse(toks[1])?);
                }
                g => {
                    let mut chars = g.chars();
                    let letter = match (chars.next().and_then(Letter::from_char), chars.next()) {
                        (Some(l), None) if !l.is_inverse() => l,
                        _ => return Err(bad("expected a generator name")),
                    };
                    if toks.len() != 5 {
                        return Err(bad("expected four matrix entries"));
                    }
                    let e = toks[1..].iter().map(|t| parse_complex(t)).collect::<Result<Vec<_>>>()?;
                    let m = MoebiusElement::new(e[0], e[1], e[2], e[3])?;
                    let k = letter.generator();
                    if images.len() <= k {
                        images.resize(k + 1, None);
                    }
                    if images[k].replace(m).is_some() {
                        return Err(bad("generator given twice"));
                    }
                }
            }
        }
        let images = images
            .into_iter()
            .enumerate()
            .map(|(k, g)| g.ok_or_else(|| Error::Parse(format!("missing generator {}", Letter::new(k, false).to_char()))))
            .collect::<Result<Vec<_>>>()?;
        Representation::new(&name, images, cusp_words)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn parse_complex(tok: &str) -> Result<Complex> {
    let bad = || Error::Parse(format!("bad matrix entry {tok:?}"));
    let (re, im) = match tok.split_once(',') {
        Some((a, b)) => (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?),
        None => (tok.parse().map_err(|_| bad())?, 0.0),
    };
    Ok(Complex::new(re, im))
}

fn invert_letters(w: &Word) -> Word {
    Word::from_letters(w.letters().iter().map(|l| l.inverse()))
}
