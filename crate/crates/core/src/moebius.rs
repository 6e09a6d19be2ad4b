//! Möbius transformations of the hyperbolic plane and the Riemann sphere.
//!
//! Elements of PSL(2,ℂ) are stored as determinant-one matrices with a
//! canonical sign. Every derived quantity (trace squared, norms,
//! classification, fixed points) is invariant under the sign ambiguity.
//!
//! The base point of the hyperbolic plane is `i` in the upper half-plane; it
//! is the point fixed by SO(2).

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Complex = Complex64;

/// Default absolute tolerance for geometric predicates.
pub const DEFAULT_TOL: f64 = 1e-9;

const I: Complex = Complex::new(0.0, 1.0);

/// A point of the upper half-plane model of H².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HPoint(Complex);

impl HPoint {
    pub fn new(z: Complex) -> Result<Self> {
        if !z.re.is_finite() || !z.im.is_finite() || z.im <= 0.0 {
            return Err(Error::InvalidPoint { re: z.re, im: z.im });
        }
        Ok(HPoint(z))
    }

    pub fn from_xy(x: f64, y: f64) -> Result<Self> {
        Self::new(Complex::new(x, y))
    }

    /// The point `i`.
    pub fn base() -> Self {
        HPoint(I)
    }

    pub fn z(self) -> Complex {
        self.0
    }

    pub fn x(self) -> f64 {
        self.0.re
    }

    pub fn y(self) -> f64 {
        self.0.im
    }

    /// Poincaré disk coordinate with `i` sent to the origin.
    pub fn to_disk(self) -> Complex {
        (self.0 - I) / (self.0 + I)
    }

    pub fn from_disk(w: Complex) -> Result<Self> {
        if w.norm_sqr() >= 1.0 {
            return Err(Error::InvalidPoint { re: w.re, im: w.im });
        }
        Self::new(I * (Complex::new(1.0, 0.0) + w) / (Complex::new(1.0, 0.0) - w))
    }

    /// Klein (projective) disk coordinate with `i` at the origin.
    /// Geodesics are straight chords in this model.
    pub fn to_klein(self) -> (f64, f64) {
        let w = self.to_disk();
        let s = 2.0 / (1.0 + w.norm_sqr());
        (s * w.re, s * w.im)
    }

    /// Point at hyperbolic distance `dist` from `i` in direction `angle`
    /// (angle measured in the disk model centred at `i`).
    pub fn from_polar(dist: f64, angle: f64) -> Self {
        let rho = (dist / 2.0).tanh();
        Self::from_disk(Complex::from_polar(rho, angle)).expect("radius below one")
    }

    /// Direction of this point seen from `i`, in `(-π, π]`.
    pub fn angle_from_base(self) -> f64 {
        self.to_disk().arg()
    }

    /// Monotone proxy for the distance to `i`: `cosh d(i, z)`.
    pub fn cosh_dist_to_base(self) -> f64 {
        (self.0.norm_sqr() + 1.0) / (2.0 * self.0.im)
    }
}

/// Hyperbolic distance in the upper half-plane (curvature −1).
pub fn distance_h2(z: HPoint, w: HPoint) -> Result<f64> {
    let z = HPoint::new(z.0)?;
    let w = HPoint::new(w.0)?;
    let half = (z.0 - w.0).norm() / (2.0 * (z.y() * w.y()).sqrt());
    Ok(2.0 * half.asinh())
}

/// An element of PSL(2,ℂ), stored as a determinant-one representative with a
/// canonical sign.
#[derive(Clone, Copy, PartialEq)]
pub struct MoebiusElement {
    a: Complex,
    b: Complex,
    c: Complex,
    d: Complex,
}

impl fmt::Debug for MoebiusElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// The conjugacy type of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Identity,
    Parabolic,
    Elliptic,
    Loxodromic,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Classification::Identity => "identity",
            Classification::Parabolic => "parabolic",
            Classification::Elliptic => "elliptic",
            Classification::Loxodromic => "loxodromic",
        };
        f.write_str(s)
    }
}

/// Operator norm and squared Frobenius norm of an element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub op_norm: f64,
    pub frob_norm_sq: f64,
}

/// Largest singular value of a 2×2 matrix from its Frobenius norm and determinant.
fn op_norm_from(frob_sq: f64, abs_det: f64) -> f64 {
    let disc = (frob_sq * frob_sq - 4.0 * abs_det * abs_det).max(0.0);
    ((frob_sq + disc.sqrt()) / 2.0).sqrt()
}

// Below this size the determinant is computed accurately enough to be worth
// renormalising.
const RENORMALIZE_FROB_LIMIT: f64 = 1e6;

impl MoebiusElement {
    /// Build an element from any invertible matrix; it is rescaled to
    /// determinant one and given the canonical sign.
    pub fn new(a: Complex, b: Complex, c: Complex, d: Complex) -> Result<Self> {
        if ![a, b, c, d].iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidElement("non-finite entry".into()));
        }
        let det = a * d - b * c;
        let scale = (a.norm_sqr() + b.norm_sqr() + c.norm_sqr() + d.norm_sqr()).max(f64::MIN_POSITIVE);
        if det.norm() <= 1e-14 * scale {
            return Err(Error::InvalidElement("singular matrix".into()));
        }
        if (det - 1.0).norm() <= 1e-15 {
            return Ok(Self::from_raw_unchecked(a, b, c, d).canonical());
        }
        let s = det.sqrt();
        Ok(Self::from_raw_unchecked(a / s, b / s, c / s, d / s).canonical())
    }

    pub fn from_real(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::new(a.into(), b.into(), c.into(), d.into())
    }

    pub(crate) fn from_raw_unchecked(a: Complex, b: Complex, c: Complex, d: Complex) -> Self {
        MoebiusElement { a, b, c, d }
    }

    pub fn identity() -> Self {
        Self::from_raw_unchecked(1.0.into(), 0.0.into(), 0.0.into(), 1.0.into())
    }

    /// The upper-triangular element sending `i` to `z` and fixing `∞`.
    pub fn from_point(z: HPoint) -> Self {
        let s = z.y().sqrt();
        Self::from_raw_unchecked(s.into(), (z.x() / s).into(), 0.0.into(), (1.0 / s).into())
    }

    /// Rotation about `i` by angle `theta` (counter-clockwise in the disk model).
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Self::from_raw_unchecked(c.into(), s.into(), (-s).into(), c.into()).canonical()
    }

    /// Hyperbolic translation of length `len` along the imaginary axis.
    pub fn vertical_translation(len: f64) -> Self {
        let e = (len / 2.0).exp();
        Self::from_raw_unchecked(e.into(), 0.0.into(), 0.0.into(), (1.0 / e).into())
    }

    pub fn diagonal(lambda: Complex) -> Result<Self> {
        Self::new(lambda, 0.0.into(), 0.0.into(), Complex::new(1.0, 0.0) / lambda)
    }

    pub fn entries(&self) -> [Complex; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn det(&self) -> Complex {
        self.a * self.d - self.b * self.c
    }

    pub(crate) fn canonical(self) -> Self {
        let lead = [self.a, self.b, self.c, self.d].into_iter().find(|z| z.norm() > 0.0);
        match lead {
            Some(z) if z.re < 0.0 || (z.re == 0.0 && z.im < 0.0) => self.negated(),
            _ => self,
        }
    }

    fn negated(self) -> Self {
        Self::from_raw_unchecked(-self.a, -self.b, -self.c, -self.d)
    }

    pub fn inverse(&self) -> Self {
        Self::from_raw_unchecked(self.d, -self.b, -self.c, self.a).canonical()
    }

    /// `h · self · h⁻¹`.
    pub fn conjugate_by(&self, h: &MoebiusElement) -> Self {
        *h * *self * h.inverse()
    }

    pub fn trace(&self) -> Complex {
        self.a + self.d
    }

    pub fn trace_sq(&self) -> Complex {
        let t = self.trace();
        t * t
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr() + self.c.norm_sqr() + self.d.norm_sqr()
    }

    pub fn op_norm(&self) -> f64 {
        op_norm_from(self.frob_norm_sq(), self.det().norm())
    }

    pub fn norms(&self) -> Norms {
        Norms { op_norm: self.op_norm(), frob_norm_sq: self.frob_norm_sq() }
    }

    pub fn is_real(&self, tol: f64) -> bool {
        [self.a, self.b, self.c, self.d].iter().all(|z| z.im.abs() <= tol)
    }

    /// Action on the Riemann sphere; `None` stands for `∞`.
    pub fn apply_complex(&self, z: Option<Complex>) -> Option<Complex> {
        match z {
            None => (self.c.norm() > 0.0).then(|| self.a / self.c),
            Some(z) => {
                let den = self.c * z + self.d;
                (den.norm() > 0.0).then(|| (self.a * z + self.b) / den)
            }
        }
    }

    /// Action on the upper half-plane. Only meaningful for real elements.
    pub fn apply(&self, z: HPoint) -> HPoint {
        let w = z.z();
        let den = self.c * w + self.d;
        let num = self.a * w + self.b;
        let im = w.im / den.norm_sqr();
        HPoint(Complex::new((num * den.conj()).re / den.norm_sqr(), im))
    }

    /// Image of the base point `i`.
    pub fn apply_base(&self) -> HPoint {
        self.apply(HPoint::base())
    }

    /// `d(i, g·i)` computed from the Frobenius norm, which stays accurate for
    /// large elements.
    pub fn displacement(&self) -> f64 {
        cosh_to_dist(self.frob_norm_sq() / 2.0)
    }

    /// Equality in PSL(2,ℂ) up to `tol` (entrywise, either sign).
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let plus = [self.a - other.a, self.b - other.b, self.c - other.c, self.d - other.d];
        let minus = [self.a + other.a, self.b + other.b, self.c + other.c, self.d + other.d];
        plus.iter().all(|z| z.norm() <= tol) || minus.iter().all(|z| z.norm() <= tol)
    }

    fn mul_entries(&self, rhs: &Self) -> [Complex; 4] {
        [
            self.a * rhs.a + self.b * rhs.c,
            self.a * rhs.b + self.b * rhs.d,
            self.c * rhs.a + self.d * rhs.c,
            self.c * rhs.b + self.d * rhs.d,
        ]
    }
}

/// `arccosh` that stays accurate for very large arguments.
pub(crate) fn cosh_to_dist(c: f64) -> f64 {
    if c <= 1.0 {
        0.0
    } else if c > 1e8 {
        (2.0 * c).ln()
    } else {
        c.acosh()
    }
}

impl Mul for MoebiusElement {
    type Output = MoebiusElement;

    fn mul(self, rhs: MoebiusElement) -> MoebiusElement {
        let [a, b, c, d] = self.mul_entries(&rhs);
        let mut out = MoebiusElement::from_raw_unchecked(a, b, c, d);
        if out.frob_norm_sq() < RENORMALIZE_FROB_LIMIT {
            let det = out.det();
            if (det - 1.0).norm() > 1e-15 {
                let s = det.sqrt();
                out = MoebiusElement::from_raw_unchecked(a / s, b / s, c / s, d / s);
            }
        }
        out.canonical()
    }
}

impl Mul for &MoebiusElement {
    type Output = MoebiusElement;

    fn mul(self, rhs: &MoebiusElement) -> MoebiusElement {
        *self * *rhs
    }
}

/// Classify `g` by its squared trace, following the rules:
/// identity (trivial action), parabolic (`tr² = 4`), elliptic
/// (`tr² ∈ [0,4)` real), loxodromic otherwise.
pub fn classify(g: &MoebiusElement, tol: f64) -> Classification {
    let t2 = g.trace_sq();
    let near_four = (t2 - 4.0).norm() < tol;
    let [a, b, c, d] = g.entries();
    if near_four && b.norm() < tol && c.norm() < tol && (a - d).norm() < tol {
        return Classification::Identity;
    }
    if near_four {
        return Classification::Parabolic;
    }
    if t2.im.abs() < tol && t2.re >= 0.0 && t2.re < 4.0 {
        return Classification::Elliptic;
    }
    Classification::Loxodromic
}

/// Translation length `ℓ` with `cosh(ℓ/2) = |tr|/2` for real traces, and the
/// real part of `2·arccosh(tr/2)` in general.
pub fn translation_length(g: &MoebiusElement) -> Result<f64> {
    let class = classify(g, DEFAULT_TOL);
    if class != Classification::Loxodromic {
        return Err(Error::Classification { expected: "loxodromic", found: class.to_string() });
    }
    Ok(translation_length_unchecked(g.trace()))
}

pub(crate) fn translation_length_unchecked(tr: Complex) -> f64 {
    if tr.im == 0.0 {
        let h = tr.re.abs() / 2.0;
        return 2.0 * if h > 1e8 { (2.0 * h).ln() } else { h.max(1.0).acosh() };
    }
    let half = tr / 2.0;
    (2.0 * half.acosh()).re.abs()
}

/// Chordal distance on P¹ between two points in homogeneous coordinates.
fn chordal(p: [Complex; 2], q: [Complex; 2]) -> f64 {
    let cross = (p[0] * q[1] - p[1] * q[0]).norm();
    let np = (p[0].norm_sqr() + p[1].norm_sqr()).sqrt();
    let nq = (q[0].norm_sqr() + q[1].norm_sqr()).sqrt();
    cross / (np * nq)
}

fn eigenvector(g: &MoebiusElement, lambda: Complex) -> [Complex; 2] {
    let [a, b, c, d] = g.entries();
    let v1 = [b, lambda - a];
    let v2 = [lambda - d, c];
    let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
    let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
    if n1 >= n2 {
        v1
    } else {
        v2
    }
}

/// Chordal distance between the two fixed points of `g` on P¹ (zero when
/// `g` is parabolic). The diameter of P¹ in this metric is 1.
pub fn fixed_point_gap(g: &MoebiusElement) -> Result<f64> {
    match classify(g, DEFAULT_TOL) {
        Classification::Identity => Err(Error::Degenerate("identity has no isolated fixed points".into())),
        Classification::Parabolic => Ok(0.0),
        _ => {
            let tr = g.trace();
            let disc = (tr * tr - 4.0).sqrt();
            let lp = (tr + disc) / 2.0;
            let lm = (tr - disc) / 2.0;
            Ok(chordal(eigenvector(g, lp), eigenvector(g, lm)))
        }
    }
}

/// A matrix `e^{log_scale} · raw` used to multiply long words without overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledMoebius {
    raw: [Complex; 4],
    log_scale: f64,
}

impl ScaledMoebius {
    pub fn identity() -> Self {
        Self::from_element(&MoebiusElement::identity())
    }

    pub fn from_element(g: &MoebiusElement) -> Self {
        ScaledMoebius { raw: g.entries(), log_scale: 0.0 }.rescaled()
    }

    fn rescaled(mut self) -> Self {
        let m = self.raw.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
        if m > 0.0 && !(1e-8..=1e8).contains(&m) {
            let e = m.log2().round() as i32;
            let f = 2f64.powi(-e);
            for z in &mut self.raw {
                *z *= f;
            }
            self.log_scale += f64::from(e) * std::f64::consts::LN_2;
        }
        self
    }

    pub fn mul_element(&self, g: &MoebiusElement) -> Self {
        let [a, b, c, d] = self.raw;
        let [e, f, h, k] = g.entries();
        ScaledMoebius {
            raw: [a * e + b * h, a * f + b * k, c * e + d * h, c * f + d * k],
            log_scale: self.log_scale,
        }
        .rescaled()
    }

    pub fn mul(&self, rhs: &ScaledMoebius) -> Self {
        let [a, b, c, d] = self.raw;
        let [e, f, h, k] = rhs.raw;
        ScaledMoebius {
            raw: [a * e + b * h, a * f + b * k, c * e + d * h, c * f + d * k],
            log_scale: self.log_scale + rhs.log_scale,
        }
        .rescaled()
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn raw(&self) -> [Complex; 4] {
        self.raw
    }

    /// `log ‖·‖` of the represented matrix (operator norm).
    pub fn log_op_norm(&self) -> f64 {
        let [a, b, c, d] = self.raw;
        let frob = a.norm_sqr() + b.norm_sqr() + c.norm_sqr() + d.norm_sqr();
        let det = (a * d - b * c).norm();
        self.log_scale + op_norm_from(frob, det).ln()
    }

    /// `log ‖·‖₂²` (squared Frobenius norm).
    pub fn log_frob_norm_sq(&self) -> f64 {
        let [a, b, c, d] = self.raw;
        2.0 * self.log_scale + (a.norm_sqr() + b.norm_sqr() + c.norm_sqr() + d.norm_sqr()).ln()
    }

    /// `log |tr²|`; `-∞` when the trace vanishes.
    pub fn log_abs_trace_sq(&self) -> f64 {
        2.0 * (self.log_scale + (self.raw[0] + self.raw[3]).norm().ln())
    }

    /// `log |tr² − t|`, falling back to `log |tr²|` once `t` is negligible.
    pub fn log_abs_trace_sq_minus(&self, t: Complex) -> f64 {
        let lt = self.log_abs_trace_sq();
        if lt > 80.0 {
            return lt;
        }
        let tr = (self.raw[0] + self.raw[3]) * self.log_scale.exp();
        (tr * tr - t).norm().ln()
    }

    /// The represented matrix as a (renormalised) element, when finite.
    pub fn to_element(&self) -> Result<MoebiusElement> {
        let f = self.log_scale.exp();
        let [a, b, c, d] = self.raw;
        MoebiusElement::new(a * f, b * f, c * f, d * f)
    }
}

/// Overflow-safe `log ‖g_1 ⋯ g_n‖` together with the scaled product.
pub fn scaled_log_norm_product(gs: &[MoebiusElement]) -> Result<(f64, ScaledMoebius)> {
    if gs.is_empty() {
        return Err(Error::Degenerate("empty product".into()));
    }
    let prod = gs.iter().fold(ScaledMoebius::identity(), |acc, g| acc.mul_element(g));
    Ok((prod.log_op_norm(), prod))
}

/// Normalise an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    theta.rem_euclid(2.0 * PI)
}
