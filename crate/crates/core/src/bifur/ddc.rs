use std::f64::consts::PI;

use super::grid::{CurrentGrid, GridSpec};

/// Rounds of 3×3 averaging attempted before residual negatives are clipped.
pub const MAX_SMOOTHING_PASSES: usize = 25;

/// `(1/2π)·Δχ·cell area` at every interior node by the 5-point stencil.
///
/// With this normalization `log|λ − λ₀|` carries unit mass around `λ₀`.
/// Boundary nodes, holes and nodes next to a hole are `NaN`.
pub fn ddc_field(spec: &GridSpec, values: &[f64]) -> Vec<f64> {
    let (hx, hy) = (spec.hx(), spec.hy());
    let area = hx * hy;
    let mut out = vec![f64::NAN; spec.len()];
    for j in 1..spec.ny - 1 {
        for i in 1..spec.nx - 1 {
            let c = values[spec.index(i, j)];
            let (e, w) = (values[spec.index(i + 1, j)], values[spec.index(i - 1, j)]);
            let (n, s) = (values[spec.index(i, j + 1)], values[spec.index(i, j - 1)]);
            if [c, e, w, n, s].iter().all(|v| v.is_finite()) {
                let lap = (e + w - 2.0 * c) / (hx * hx) + (n + s - 2.0 * c) / (hy * hy);
                out[spec.index(i, j)] = lap * area / (2.0 * PI);
            }
        }
    }
    out
}

/// Fill the current of a grid in place and return it.
pub fn ddc_density(mut grid: CurrentGrid) -> CurrentGrid {
    grid.compute_ddc();
    grid
}

/// Sum of the finite entries.
pub fn total_mass(field: &[f64]) -> f64 {
    field.iter().filter(|v| v.is_finite()).sum()
}

/// Display version of a mass field: repeated 3×3 averaging over defined
/// cells until no value is negative, then clipping of what remains.
pub fn smooth_nonnegative(spec: &GridSpec, field: &[f64]) -> Vec<f64> {
    let mut cur = field.to_vec();
    let scale = cur.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    for _ in 0..MAX_SMOOTHING_PASSES {
        if cur.iter().all(|v| !v.is_finite() || *v >= -tol) {
            break;
        }
        let mut next = cur.clone();
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                if !cur[spec.index(i, j)].is_finite() {
                    continue;
                }
                let (mut sum, mut count) = (0.0, 0usize);
                for jj in j.saturating_sub(1)..=(j + 1).min(spec.ny - 1) {
                    for ii in i.saturating_sub(1)..=(i + 1).min(spec.nx - 1) {
                        let v = cur[spec.index(ii, jj)];
                        if v.is_finite() {
                            sum += v;
                            count += 1;
                        }
                    }
                }
                next[spec.index(i, j)] = sum / count as f64;
            }
        }
        cur = next;
    }
    cur.iter().map(|&v| if v.is_finite() { v.max(0.0) } else { v }).collect()
}
