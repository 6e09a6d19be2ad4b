use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::Word;
use crate::lyapunov::Representation;
use crate::moebius::{Complex, MoebiusElement};

/// Closed rectangle `[re_min, re_max] × [im_min, im_max]` in ℂ.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let r = Rect { re_min, re_max, im_min, im_max };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.re_min, self.re_max, self.im_min, self.im_max].iter().all(|v| v.is_finite())
            && self.re_min < self.re_max
            && self.im_min < self.im_max;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("degenerate rectangle {self:?}")))
        }
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn contains(&self, z: Complex) -> bool {
        (self.re_min..=self.re_max).contains(&z.re) && (self.im_min..=self.im_max).contains(&z.im)
    }
}

type Evaluator = dyn Fn(Complex) -> Result<Vec<MoebiusElement>> + Send + Sync;

/// A holomorphic one-parameter family `λ ↦ ρ_λ` of representations of the
/// free group on `X`, `Y`.
#[derive(Clone)]
pub struct ParameterFamily {
    name: String,
    evaluator: Arc<Evaluator>,
    rect: Rect,
    constraints: Vec<Word>,
}

impl fmt::Debug for ParameterFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParameterFamily")
            .field("name", &self.name)
            .field("rect", &self.rect)
            .field("constraints", &self.constraints)
            .finish_non_exhaustive()
    }
}

impl ParameterFamily {
    pub fn new(
        name: &str,
        rect: Rect,
        constraints: Vec<Word>,
        evaluator: impl Fn(Complex) -> Result<Vec<MoebiusElement>> + Send + Sync + 'static,
    ) -> Result<Self> {
        rect.validate()?;
        Ok(ParameterFamily { name: name.to_owned(), evaluator: Arc::new(evaluator), rect, constraints })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn constraints(&self) -> &[Word] {
        &self.constraints
    }

    pub fn with_rect(mut self, rect: Rect) -> Result<Self> {
        rect.validate()?;
        self.rect = rect;
        Ok(self)
    }

    /// Generator images at `λ`.
    pub fn images(&self, lambda: Complex) -> Result<Vec<MoebiusElement>> {
        (self.evaluator)(lambda)
    }

    pub fn representation(&self, lambda: Complex) -> Result<Representation> {
        Representation::new(&format!("{}@{lambda}", self.name), self.images(lambda)?, self.constraints.clone())
    }

    /// `tr² ρ_λ(word)`.
    pub fn trace_sq(&self, lambda: Complex, word: &Word) -> Result<Complex> {
        let images = self.images(lambda)?;
        let m = word.letters().iter().fold(MoebiusElement::identity(), |acc, l| {
            let g = images[l.generator()];
            acc * if l.is_inverse() { g.inverse() } else { g }
        });
        Ok(m.trace_sq())
    }

    /// Largest `|tr² − 4|` over the constraint words at `λ`.
    pub fn constraint_defect(&self, lambda: Complex) -> Result<f64> {
        self.constraints
            .iter()
            .map(|w| self.trace_sq(lambda, w).map(|t| (t - 4.0).norm()))
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
    }
}

fn commutator() -> Vec<Word> {
    vec![Word::parse("XYxy").expect("valid word")]
}

/// The Maskit slice `ρ_μ(X) = [[−iμ, −i], [−i, 0]]`, `ρ_μ(Y) = [[1, 2], [0, 1]]`.
/// The commutator has trace −2 for every `μ`.
pub fn maskit_family() -> ParameterFamily {
    let rect = Rect { re_min: -1.0, re_max: 1.0, im_min: 1.0, im_max: 2.2 };
    ParameterFamily::new("maskit", rect, commutator(), |mu| {
        let i = Complex::new(0.0, 1.0);
        let x = MoebiusElement::new(-i * mu, -i, -i, Complex::new(0.0, 0.0))?;
        let y = MoebiusElement::from_real(1.0, 2.0, 0.0, 1.0)?;
        Ok(vec![x, y])
    })
    .expect("valid rectangle")
}

/// Trace coordinates `(tr X, tr Y, tr XY) = (x, λ, z)` on the Markov surface
/// `x² + λ² + z² = x·λ·z`, with
/// `z = (xλ + √(x²λ² − 4x² − 4λ²)) / 2` (principal root) and generators
/// `X = [[x, −1], [1, 0]]`, `Y = [[0, ζ], [−1/ζ, λ]]` where
/// `ζ = (z + √(z² − 4)) / 2`, so that `tr XY = ζ + 1/ζ = z`.
///
/// Branch cuts: `z` jumps where `x²λ² − 4x² − 4λ²` is a non-positive real,
/// which for `x = 3` is the real segment `|λ| ≤ 6/√5` and the imaginary
/// axis; `ζ` jumps where `z` is real in `[−2, 2]`. The default rectangle
/// `[2.9, 4.5] × [−0.8, 0.8]` avoids both and contains `λ = 3`, where the
/// representation is conjugate to the modular torus.
pub fn trace_triple_family(trace_x: f64) -> Result<ParameterFamily> {
    if !(trace_x.is_finite() && trace_x > 2.0) {
        return Err(Error::Config(format!("trace of X must exceed 2, got {trace_x}")));
    }
    let rect = Rect { re_min: 2.9, re_max: 4.5, im_min: -0.8, im_max: 0.8 };
    ParameterFamily::new("trace-triple", rect, commutator(), move |y| {
        let x = Complex::new(trace_x, 0.0);
        let z = (x * y + (x * x * y * y - 4.0 * x * x - 4.0 * y * y).sqrt()) / 2.0;
        let zeta = (z + (z * z - 4.0).sqrt()) / 2.0;
        if zeta.norm() < 1e-300 || !zeta.is_finite() {
            return Err(Error::Degenerate(format!("trace-triple family degenerates at {y}")));
        }
        let gx = MoebiusElement::new(x, Complex::new(-1.0, 0.0), Complex::new(1.0, 0.0), Complex::new(0.0, 0.0))?;
        let gy = MoebiusElement::new(Complex::new(0.0, 0.0), zeta, -1.0 / zeta, y)?;
        Ok(vec![gx, gy])
    })
}

/// A family that ignores its parameter.
pub fn constant_family(rep: &Representation, rect: Rect) -> Result<ParameterFamily> {
    let images = rep.images().to_vec();
    ParameterFamily::new(&format!("constant-{}", rep.name()), rect, rep.cusp_words().to_vec(), move |_| Ok(images.clone()))
}
