use std::ops::Mul;

use crate::moebius::{cosh_to_dist, Complex, HPoint, MoebiusElement};

/// A real 2×2 matrix, used for fast arithmetic in PSL(2,ℝ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Real2 {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Real2 { a, b, c, d }
    }

    pub const fn identity() -> Self {
        Real2::new(1.0, 0.0, 0.0, 1.0)
    }

    /// Real part of the entries of `g`.
    pub fn from_element(g: &MoebiusElement) -> Self {
        let [a, b, c, d] = g.entries();
        Real2::new(a.re, b.re, c.re, d.re)
    }

    pub fn to_element(self) -> MoebiusElement {
        MoebiusElement::from_raw_unchecked(self.a.into(), self.b.into(), self.c.into(), self.d.into()).canonical()
    }

    /// Upper-triangular frame sending `i` to `z`.
    pub fn from_point(z: HPoint) -> Self {
        let s = z.y().sqrt();
        Real2::new(s, z.x() / s, 0.0, 1.0 / s)
    }

    /// Inverse, assuming determinant one.
    pub fn inverse(self) -> Self {
        Real2::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn det(self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(self) -> f64 {
        self.a + self.d
    }

    pub fn frob_sq(self) -> f64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    /// `d(i, g·i)`.
    pub fn displacement(self) -> f64 {
        cosh_to_dist(self.frob_sq() / 2.0)
    }

    pub fn apply(self, z: Complex) -> Complex {
        let den = Complex::new(self.c * z.re + self.d, self.c * z.im);
        let num = Complex::new(self.a * z.re + self.b, self.a * z.im);
        let n2 = den.norm_sqr();
        Complex::new((num * den.conj()).re / n2, z.im / n2)
    }

    /// `g·i`.
    pub fn apply_base(self) -> HPoint {
        let n2 = self.c * self.c + self.d * self.d;
        let x = (self.a * self.c + self.b * self.d) / n2;
        HPoint::new(Complex::new(x, 1.0 / n2)).expect("finite frame maps i into the upper half-plane")
    }

    /// Rescale to determinant one (positive determinant assumed).
    pub fn renormalized(self) -> Self {
        let s = self.det().sqrt();
        Real2::new(self.a / s, self.b / s, self.c / s, self.d / s)
    }
}

impl Mul for Real2 {
    type Output = Real2;

    #[inline]
    fn mul(self, r: Real2) -> Real2 {
        Real2::new(
            self.a * r.a + self.b * r.c,
            self.a * r.b + self.b * r.d,
            self.c * r.a + self.d * r.c,
            self.c * r.b + self.d * r.d,
        )
    }
}
