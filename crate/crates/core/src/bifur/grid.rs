use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::ddc::{ddc_field, smooth_nonnegative};
use super::family::{ParameterFamily, Rect};
use crate::error::{Error, Result};
use crate::lattice::FuchsianSurface;
use crate::lyapunov::{brownian_ensemble, draw_lattice, estimate_from_ensemble, estimate_lattice, PathParams, Schedule};
use crate::moebius::Complex;
use crate::seed::derive_seed;

/// Node cap per axis for the lattice-trace estimator.
pub const MAX_LATTICE_NODES: usize = 101;
/// Node cap per axis for the Brownian estimator.
pub const MAX_BROWN_NODES: usize = 41;

/// `nx × ny` nodes spanning a rectangle, corners included.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(rect: Rect, nx: usize, ny: usize) -> Result<Self> {
        let g = GridSpec { rect, nx, ny };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        self.rect.validate()?;
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::Config(format!("grid {}×{} needs at least 3 nodes per axis", self.nx, self.ny)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hx(&self) -> f64 {
        self.rect.width() / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        self.rect.height() / (self.ny - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Node `(i, j)`. Coordinates are computed from the ratio `i / (nx − 1)`
    /// so that refined grids reproduce shared nodes bit for bit.
    pub fn node(&self, i: usize, j: usize) -> Complex {
        let fx = i as f64 / (self.nx - 1) as f64;
        let fy = j as f64 / (self.ny - 1) as f64;
        Complex::new(self.rect.re_min + self.rect.width() * fx, self.rect.im_min + self.rect.height() * fy)
    }

    pub fn nodes(&self) -> Vec<Complex> {
        (0..self.ny).flat_map(|j| (0..self.nx).map(move |i| (i, j))).map(|(i, j)| self.node(i, j)).collect()
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i + 1 < self.nx && j + 1 < self.ny
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridEstimator {
    Brown { params: PathParams },
    LatticeTrace { schedule: Schedule, n_draws: usize },
}

impl GridEstimator {
    pub fn node_cap(&self) -> usize {
        match self {
            GridEstimator::Brown { .. } => MAX_BROWN_NODES,
            GridEstimator::LatticeTrace { .. } => MAX_LATTICE_NODES,
        }
    }
}

/// Lyapunov values on a grid together with the discrete current.
///
/// Fields are row-major over nodes (`index = j·nx + i`); `NaN` marks a hole.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CurrentGrid {
    pub spec: GridSpec,
    pub chi: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Mass per node cell; `NaN` on the boundary and next to holes.
    pub ddc: Vec<f64>,
    pub ddc_smoothed: Vec<f64>,
    pub metadata: serde_json::Value,
}

impl CurrentGrid {
    pub fn from_values(spec: GridSpec, chi: Vec<f64>, metadata: serde_json::Value) -> Result<Self> {
        spec.validate()?;
        if chi.len() != spec.len() {
            return Err(Error::Config(format!("{} values for a grid of {} nodes", chi.len(), spec.len())));
        }
        let n = spec.len();
        Ok(CurrentGrid { spec, chi, stderr: vec![f64::NAN; n], ddc: vec![f64::NAN; n], ddc_smoothed: vec![f64::NAN; n], metadata })
    }

    pub fn chi_at(&self, i: usize, j: usize) -> f64 {
        self.chi[self.spec.index(i, j)]
    }

    pub fn holes(&self) -> usize {
        self.chi.iter().filter(|v| !v.is_finite()).count()
    }

    /// Fill `ddc` and `ddc_smoothed` from `chi`.
    pub fn compute_ddc(&mut self) {
        self.ddc = ddc_field(&self.spec, &self.chi);
        self.ddc_smoothed = smooth_nonnegative(&self.spec, &self.ddc);
    }

    /// Text form: a header with the rectangle, size and metadata, then one
    /// block per field of `ny` rows of `nx` values.
    pub fn to_text(&self) -> String {
        let r = &self.spec.rect;
        let mut s = String::from("# bifcurrent grid\n");
        let _ = writeln!(s, "rect {:.16e} {:.16e} {:.16e} {:.16e}", r.re_min, r.re_max, r.im_min, r.im_max);
        let _ = writeln!(s, "size {} {}", self.spec.nx, self.spec.ny);
        let _ = writeln!(s, "meta {}", self.metadata);
        for (name, field) in [("chi", &self.chi), ("stderr", &self.stderr), ("ddc", &self.ddc), ("ddc_smoothed", &self.ddc_smoothed)] {
            let _ = writeln!(s, "field {name}");
            for row in field.chunks(self.spec.nx) {
                let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
                let _ = writeln!(s, "{}", line.join(" "));
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Parse(format!("grid file: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let mut next = |key: &str| -> Result<String> {
            let l = lines.next().ok_or_else(|| bad(&format!("missing {key} line")))?;
            l.strip_prefix(key).map(|v| v.trim().to_owned()).ok_or_else(|| bad(&format!("expected {key}, found {l:?}")))
        };
        let nums = |s: &str| -> Result<Vec<f64>> {
            s.split_whitespace().map(|t| t.parse::<f64>().map_err(|_| bad(&format!("bad number {t:?}")))).collect()
        };
        let rect = match nums(&next("rect")?)?[..] {
            [a, b, c, d] => Rect::new(a, b, c, d)?,
            _ => return Err(bad("rect needs four numbers")),
        };
        let size: Vec<usize> = next("size")?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(&format!("bad size {t:?}"))))
            .collect::<Result<_>>()?;
        let [nx, ny] = size[..] else { return Err(bad("size needs two integers")) };
        let spec = GridSpec::new(rect, nx, ny)?;
        let metadata = serde_json::from_str(&next("meta")?).map_err(|e| bad(&e.to_string()))?;
        let mut fields = Vec::new();
        for name in ["chi", "stderr", "ddc", "ddc_smoothed"] {
            if next("field")? != name {
                return Err(bad(&format!("expected field {name}")));
            }
            let mut values = Vec::with_capacity(spec.len());
            for _ in 0..ny {
                let row = nums(&next("")?)?;
                if row.len() != nx {
                    return Err(bad(&format!("row of {} values in field {name}", row.len())));
                }
                values.extend(row);
            }
            fields.push(values);
        }
        let [chi, stderr, ddc, ddc_smoothed]: [Vec<f64>; 4] = fields.try_into().expect("four fields");
        Ok(CurrentGrid { spec, chi, stderr, ddc, ddc_smoothed, metadata })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Lyapunov exponent of `ρ_λ` at every node, with the current filled in.
///
/// One path ensemble (or one set of lattice draws) derived from
/// `master_seed` serves every node, so only the representation varies
/// across the grid. Nodes where the estimator fails become holes.
pub fn lyapunov_grid(
    surface: &FuchsianSurface,
    family: &ParameterFamily,
    spec: &GridSpec,
    estimator: &GridEstimator,
    master_seed: u64,
) -> Result<CurrentGrid> {
    spec.validate()?;
    let cap = estimator.node_cap();
    if spec.nx > cap || spec.ny > cap {
        return Err(Error::Resource(format!("grid {}×{} exceeds the {cap}×{cap} cap for this estimator", spec.nx, spec.ny)));
    }
    let nodes = spec.nodes();
    let results: Vec<(f64, f64)> = match estimator {
        GridEstimator::Brown { params } => {
            let ens = brownian_ensemble(surface, params, derive_seed(master_seed, "grid/brown"))?;
            nodes
                .par_iter()
                .map(|&l| family.representation(l).and_then(|rep| estimate_from_ensemble(&rep, &ens)))
                .map(|r| r.map_or((f64::NAN, f64::NAN), |e| (e.value, e.stderr)))
                .collect()
        }
        GridEstimator::LatticeTrace { schedule, n_draws } => {
            let draws = draw_lattice(surface, schedule, *n_draws, derive_seed(master_seed, "grid/lattice"))?;
            nodes
                .par_iter()
                .map(|&l| family.representation(l).and_then(|rep| estimate_lattice(&rep, &draws, true, 1.0)))
                .map(|r| r.map_or((f64::NAN, f64::NAN), |e| (e.value, e.stderr)))
                .collect()
        }
    };
    let (chi, stderr): (Vec<f64>, Vec<f64>) = results.into_iter().unzip();
    let metadata = serde_json::json!({
        "family": family.name(),
        "estimator": estimator,
        "master_seed": master_seed,
    });
    let mut grid = CurrentGrid::from_values(*spec, chi, metadata)?;
    grid.stderr = stderr;
    grid.compute_ddc();
    Ok(grid)
}
