use std::f64::consts::PI;

use rayon::prelude::*;

use super::family::ParameterFamily;
use super::grid::GridSpec;
use crate::error::{Error, Result};
use crate::lattice::{FuchsianSurface, Word};
use crate::moebius::Complex;

/// Bisection depth per piece of a cell edge.
pub const MAX_WINDING_DEPTH: u32 = 48;
/// Shift applied to `t` when a sample lands on a zero.
pub const EXACT_HIT_SHIFT: f64 = 1e-9;

const BASE_SAMPLES: usize = 8;
const MAX_ARG_STEP: f64 = PI / 4.0;
const MAX_SHIFTS: u32 = 8;

enum EdgeError {
    Hit,
    Unresolved,
}

/// Argument change of `f` along the segment `a → b`. The segment starts as
/// eight pieces; a piece is bisected until its argument change is below π/4
/// and agrees with the sum over its two halves.
fn edge_arg(f: &(impl Fn(Complex) -> Option<Complex> + ?Sized), a: Complex, b: Complex) -> std::result::Result<f64, EdgeError> {
    let mut total = 0.0;
    let mut prev = f(a).ok_or(EdgeError::Hit)?;
    for k in 1..=BASE_SAMPLES {
        let (za, zb) = (a + (b - a) * ((k - 1) as f64 / BASE_SAMPLES as f64), a + (b - a) * (k as f64 / BASE_SAMPLES as f64));
        let fb = f(zb).ok_or(EdgeError::Hit)?;
        total += piece_arg(f, za, prev, zb, fb, 0)?;
        prev = fb;
    }
    Ok(total)
}

fn piece_arg(
    f: &(impl Fn(Complex) -> Option<Complex> + ?Sized),
    a: Complex,
    fa: Complex,
    b: Complex,
    fb: Complex,
    depth: u32,
) -> std::result::Result<f64, EdgeError> {
    let whole = (fb / fa).arg();
    let m = (a + b) / 2.0;
    let fm = f(m).ok_or(EdgeError::Hit)?;
    let (left, right) = ((fm / fa).arg(), (fb / fm).arg());
    if whole.abs() < MAX_ARG_STEP && (left + right - whole).abs() < 1e-9 {
        return Ok(whole);
    }
    if depth >= MAX_WINDING_DEPTH {
        return Err(EdgeError::Unresolved);
    }
    Ok(piece_arg(f, a, fa, m, fm, depth + 1)? + piece_arg(f, m, fm, b, fb, depth + 1)?)
}

/// Winding number of `f` around the closed polygon through `corners`
/// (counterclockwise gives the number of zeros inside).
pub fn winding_number(f: impl Fn(Complex) -> Complex + Sync, corners: &[Complex]) -> Result<i64> {
    if corners.len() < 3 {
        return Err(Error::Domain("a boundary needs at least three corners".into()));
    }
    let g = |z: Complex| {
        let v = f(z);
        (v.norm() > 0.0 && v.is_finite()).then_some(v)
    };
    let mut total = 0.0;
    for k in 0..corners.len() {
        let (a, b) = (corners[k], corners[(k + 1) % corners.len()]);
        total += edge_arg(&g, a, b).map_err(|e| match e {
            EdgeError::Hit => Error::Domain(format!("function vanishes on the boundary near {a}")),
            EdgeError::Unresolved => Error::Domain(format!("winding did not stabilise on the edge {a} → {b}")),
        })?;
    }
    round_winding(total).ok_or_else(|| Error::Domain(format!("total argument change {total} is not a multiple of 2π")))
}

fn round_winding(total: f64) -> Option<i64> {
    let w = total / (2.0 * PI);
    ((w - w.round()).abs() < 0.1).then_some(w.round() as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DivisorCell {
    pub i: usize,
    pub j: usize,
    pub multiplicity: i64,
}

/// Zeros of `tr² ρ_λ(word) − t` counted in the cell around each interior node.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DivisorReport {
    pub word: Word,
    /// The value of `t` actually used, after any shift off exact hits.
    pub t: Complex,
    pub normalizer: f64,
    /// Nonzero cells.
    pub cells: Vec<DivisorCell>,
    /// Cells whose winding could not be resolved; they carry no mass.
    pub ambiguous: Vec<(usize, usize)>,
    /// `multiplicity / (2·normalizer)` per node, row-major; zero off the interior.
    pub mass: Vec<f64>,
    pub total_zeros: i64,
    /// The function vanishes identically, so by convention the divisor is zero.
    pub whole_space: bool,
}

impl DivisorReport {
    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }
}

/// `d(i, ρ_can(word)·i)`, the default divisor normalizer.
pub fn displacement_normalizer(surface: &FuchsianSurface, word: &Word) -> f64 {
    surface.eval_real(word).displacement()
}

/// Count zeros of `f(λ) = tr² ρ_λ(word) − t` by the argument principle on
/// the cell around every interior node of the grid. Each cell edge is
/// sampled adaptively and shared by its two cells, so cell counts add up
/// to the count for the union. When a sample hits a zero, `t` is shifted
/// by [`EXACT_HIT_SHIFT`] and the count restarts.
pub fn divisor_zeros(family: &ParameterFamily, word: &Word, t: Complex, spec: &GridSpec, normalizer: f64) -> Result<DivisorReport> {
    spec.validate()?;
    if !(normalizer.is_finite() && normalizer > 0.0) {
        return Err(Error::Domain(format!("divisor normalizer must be positive, got {normalizer}")));
    }
    let nodes = spec.nodes();
    let at_nodes: Vec<Complex> = nodes.par_iter().map(|&l| family.trace_sq(l, word)).collect::<Result<_>>()?;
    let mut report = DivisorReport {
        word: word.clone(),
        t,
        normalizer,
        cells: Vec::new(),
        ambiguous: Vec::new(),
        mass: vec![0.0; spec.len()],
        total_zeros: 0,
        whole_space: false,
    };
    if at_nodes.iter().all(|v| (v - t).norm() <= 1e-9 * (1.0 + t.norm())) {
        report.whole_space = true;
        return Ok(report);
    }

    let (na, nb) = (spec.nx - 1, spec.ny - 1);
    let dual = |a: usize, b: usize| {
        let r = spec.rect;
        Complex::new(
            r.re_min + r.width() * ((a as f64 + 0.5) / na as f64),
            r.im_min + r.height() * ((b as f64 + 0.5) / nb as f64),
        )
    };
    // Horizontal edges (a, b) → (a + 1, b), then vertical (a, b) → (a, b + 1).
    let mut edges: Vec<(Complex, Complex)> = Vec::new();
    for b in 0..nb {
        for a in 0..na - 1 {
            edges.push((dual(a, b), dual(a + 1, b)));
        }
    }
    let n_horizontal = edges.len();
    for b in 0..nb - 1 {
        for a in 0..na {
            edges.push((dual(a, b), dual(a, b + 1)));
        }
    }
    let h_index = |a: usize, b: usize| b * (na - 1) + a;
    let v_index = |a: usize, b: usize| n_horizontal + b * na + a;

    for shift in 0..MAX_SHIFTS {
        let t_used = t + Complex::new(EXACT_HIT_SHIFT * f64::from(shift), 0.0);
        let f = |z: Complex| -> Option<Complex> {
            let tr2 = family.trace_sq(z, word).ok()?;
            let v = tr2 - t_used;
            (v.is_finite() && v.norm() > 1e-13 * (tr2.norm() + t_used.norm())).then_some(v)
        };
        let args: Vec<std::result::Result<f64, EdgeError>> = edges.par_iter().map(|&(a, b)| edge_arg(&f, a, b)).collect();
        if args.iter().any(|r| matches!(r, Err(EdgeError::Hit))) {
            continue;
        }
        let arg = |k: usize| args[k].as_ref().ok().copied();
        report.t = t_used;
        for j in 1..spec.ny - 1 {
            for i in 1..spec.nx - 1 {
                let (a, b) = (i - 1, j - 1);
                let sides = [arg(h_index(a, b)), arg(v_index(a + 1, b)), arg(h_index(a, b + 1)).map(|v| -v), arg(v_index(a, b)).map(|v| -v)];
                let winding = sides.iter().copied().sum::<Option<f64>>().and_then(round_winding);
                match winding {
                    Some(0) => {}
                    Some(m) => {
                        report.cells.push(DivisorCell { i, j, multiplicity: m });
                        report.mass[spec.index(i, j)] = m as f64 / (2.0 * normalizer);
                        report.total_zeros += m;
                    }
                    None => report.ambiguous.push((i, j)),
                }
            }
        }
        return Ok(report);
    }
    Err(Error::Domain(format!("zeros of tr² {word} − t sit on cell boundaries after {MAX_SHIFTS} shifts")))
}
