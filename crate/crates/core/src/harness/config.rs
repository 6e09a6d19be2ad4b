use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bifur::{
    constant_family, maskit_family, trace_triple_family, EquidistConfig, GeodesicModel, GridEstimator, GridSpec,
    ParameterFamily, Rect, MAX_DISCRETENESS_DEPTH,
};
use crate::error::{Error, Result};
use crate::fls::FlsConfig;
use crate::lattice::{modular_torus, FuchsianSurface, Word, DEFAULT_MAX_GEODESIC_LENGTH, DEFAULT_MAX_RADIUS};
use crate::lyapunov::{Method, PathParams, Representation, Schedule};
use crate::moebius::Complex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Lyapunov,
    Discretize,
    Grid,
    Divisor,
    Equidist,
    Census,
    Enumerate,
    Brownian,
}

impl Pipeline {
    pub const ALL: [Pipeline; 8] = [
        Pipeline::Lyapunov,
        Pipeline::Discretize,
        Pipeline::Grid,
        Pipeline::Divisor,
        Pipeline::Equidist,
        Pipeline::Census,
        Pipeline::Enumerate,
        Pipeline::Brownian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Lyapunov => "lyapunov",
            Pipeline::Discretize => "discretize",
            Pipeline::Grid => "grid",
            Pipeline::Divisor => "divisor",
            Pipeline::Equidist => "equidist",
            Pipeline::Census => "census",
            Pipeline::Enumerate => "enumerate",
            Pipeline::Brownian => "brownian",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown pipeline {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// The uniformizing representation, constant in the parameter.
    Canonical,
    Maskit,
    TraceTriple,
    /// A representation file, constant in the parameter.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilySection {
    pub kind: FamilyKind,
    /// Parameter picking one representation for single-representation pipelines.
    pub parameter: Option<Complex>,
    pub rect: Option<Rect>,
    /// Trace of `X` for the trace-triple family.
    pub trace_x: f64,
    pub path: Option<PathBuf>,
}

impl Default for FamilySection {
    fn default() -> Self {
        FamilySection { kind: FamilyKind::Canonical, parameter: None, rect: None, trace_x: 3.0, path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub methods: Vec<Method>,
    /// Horizon, path count and time step for Brownian paths.
    pub t_max: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub n_rays: usize,
    /// Lattice draws for the lattice estimators.
    pub n_draws: usize,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        EstimatorSection { methods: vec![Method::Brown], t_max: 40.0, n_paths: 400, dt: 5e-3, n_rays: 400, n_draws: 4000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlsSection {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub p: f64,
    pub max_cycles: u32,
    pub dt: f64,
    pub chains: usize,
    pub steps: usize,
}

impl Default for FlsSection {
    fn default() -> Self {
        let c = FlsConfig::default();
        FlsSection { r: c.r, big_r: c.big_r, p: c.p, max_cycles: c.max_cycles, dt: c.dt, chains: 40, steps: 400 }
    }
}

impl FlsSection {
    pub fn config(&self) -> FlsConfig {
        FlsConfig { r: self.r, big_r: self.big_r, p: self.p, max_cycles: self.max_cycles, dt: self.dt }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub base: f64,
    pub scale: f64,
    pub exponent: f64,
    pub cap: f64,
    /// Smallest growth exponent accepted as admissible.
    pub min_exponent: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        let s = Schedule::default();
        ScheduleSection { base: s.base, scale: s.scale, exponent: s.exponent, cap: s.cap, min_exponent: 0.5 }
    }
}

impl ScheduleSection {
    pub fn schedule(&self) -> Schedule {
        Schedule { base: self.base, scale: self.scale, exponent: self.exponent, cap: self.cap }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridEstimatorKind {
    Brown,
    LatticeTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    pub estimator: GridEstimatorKind,
    /// Word depth for the discreteness heuristic map; `None` skips it.
    pub discreteness_depth: Option<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { nx: 41, ny: 41, estimator: GridEstimatorKind::LatticeTrace, discreteness_depth: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DivisorSection {
    pub word: String,
    pub t: Complex,
    /// Defaults to the displacement of the word under the uniformization.
    pub normalizer: Option<f64>,
}

impl Default for DivisorSection {
    fn default() -> Self {
        DivisorSection { word: "Xy".into(), t: Complex::new(4.0, 0.0), normalizer: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquidistSection {
    pub model: GeodesicModel,
    pub radii: Vec<f64>,
    pub t: Complex,
    pub bin: usize,
    pub beta_radius: Option<f64>,
}

impl Default for EquidistSection {
    fn default() -> Self {
        EquidistSection {
            model: GeodesicModel::LengthBased,
            radii: vec![8.0, 10.0, 12.0],
            t: Complex::new(4.0, 0.0),
            bin: 4,
            beta_radius: Some(8.0),
        }
    }
}

impl EquidistSection {
    pub fn config(&self) -> EquidistConfig {
        EquidistConfig { model: self.model, radii: self.radii.clone(), t: self.t, bin: self.bin, beta_radius: self.beta_radius }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CensusSection {
    pub radii: Vec<f64>,
    pub epsilon: f64,
    /// Reference exponent; when absent it is estimated from lattice traces.
    pub chi_ref: Option<f64>,
}

impl Default for CensusSection {
    fn default() -> Self {
        CensusSection { radii: vec![6.0, 8.0, 10.0], epsilon: 0.2, chi_ref: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnumerateSection {
    pub radius: f64,
    /// Also list closed geodesics up to this length.
    pub geodesic_t: Option<f64>,
}

impl Default for EnumerateSection {
    fn default() -> Self {
        EnumerateSection { radius: 8.0, geodesic_t: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrownianSection {
    pub t_max: f64,
    pub n_paths: usize,
    pub dt: f64,
    /// Histogram bins for the heat-kernel fit.
    pub bins: usize,
    pub min_count: usize,
}

impl Default for BrownianSection {
    fn default() -> Self {
        BrownianSection { t_max: 40.0, n_paths: 200, dt: 5e-3, bins: 30, min_count: 10 }
    }
}

/// One experiment. Every field has a default; [`ExperimentConfig::resolve`]
/// fills the remaining gaps so that the snapshot in the manifest states
/// every value the run used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Option<Pipeline>,
    pub surface: String,
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    pub workers: Option<usize>,
    pub family: FamilySection,
    pub estimator: EstimatorSection,
    pub fls: FlsSection,
    pub schedule: ScheduleSection,
    pub grid: GridSection,
    pub divisor: DivisorSection,
    pub equidist: EquidistSection,
    pub census: CensusSection,
    pub enumerate: EnumerateSection,
    pub brownian: BrownianSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pipeline: None,
            surface: "modular_torus".into(),
            master_seed: 0,
            output_dir: None,
            workers: None,
            family: FamilySection::default(),
            estimator: EstimatorSection::default(),
            fls: FlsSection::default(),
            schedule: ScheduleSection::default(),
            grid: GridSection::default(),
            divisor: DivisorSection::default(),
            equidist: EquidistSection::default(),
            census: CensusSection::default(),
            enumerate: EnumerateSection::default(),
            brownian: BrownianSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parse TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
        } else {
            toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
        }
    }

    /// Read a config file. A relative representation path is taken relative
    /// to the config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        if let Some(p) = &cfg.family.path {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.family.path = Some(base.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn surface(&self) -> Result<FuchsianSurface> {
        match self.surface.as_str() {
            "modular_torus" => Ok(modular_torus()),
            s => Err(Error::Config(format!("unknown surface {s:?}"))),
        }
    }

    fn base_family(&self, surface: &FuchsianSurface) -> Result<ParameterFamily> {
        let fallback = Rect { re_min: -1.0, re_max: 1.0, im_min: -1.0, im_max: 1.0 };
        match self.family.kind {
            FamilyKind::Canonical => constant_family(&Representation::canonical(surface), fallback),
            FamilyKind::Maskit => Ok(maskit_family()),
            FamilyKind::TraceTriple => trace_triple_family(self.family.trace_x),
            FamilyKind::File => {
                let path = self.family.path.as_deref().ok_or_else(|| Error::Config("family kind `file` needs a path".into()))?;
                constant_family(&Representation::from_file(path)?, fallback)
            }
        }
    }

    pub fn family(&self, surface: &FuchsianSurface) -> Result<ParameterFamily> {
        let fam = self.base_family(surface)?;
        match self.family.rect {
            Some(r) => fam.with_rect(r),
            None => Ok(fam),
        }
    }

    /// The single representation used by the lyapunov and census pipelines.
    pub fn representation(&self, surface: &FuchsianSurface) -> Result<Representation> {
        match (self.family.kind, self.family.parameter) {
            (FamilyKind::Canonical, _) => Ok(Representation::canonical(surface)),
            (FamilyKind::File, _) => {
                let path = self.family.path.as_deref().ok_or_else(|| Error::Config("family kind `file` needs a path".into()))?;
                Representation::from_file(path)
            }
            (_, Some(l)) => self.family(surface)?.representation(l),
            (_, None) => Err(Error::Config("this family needs `parameter` to pick a representation".into())),
        }
    }

    pub fn grid_spec(&self, surface: &FuchsianSurface) -> Result<GridSpec> {
        GridSpec::new(self.family(surface)?.rect(), self.grid.nx, self.grid.ny)
    }

    pub fn grid_estimator(&self) -> GridEstimator {
        match self.grid.estimator {
            GridEstimatorKind::Brown => GridEstimator::Brown { params: self.path_params() },
            GridEstimatorKind::LatticeTrace => {
                GridEstimator::LatticeTrace { schedule: self.schedule.schedule(), n_draws: self.estimator.n_draws }
            }
        }
    }

    pub fn path_params(&self) -> PathParams {
        PathParams::brownian(self.estimator.t_max, self.estimator.n_paths, self.estimator.dt)
    }

    pub fn ray_params(&self) -> PathParams {
        PathParams::rays(self.estimator.t_max, self.estimator.n_rays)
    }

    /// Fill every implicit value and check all invariants.
    pub fn resolve(mut self) -> Result<Self> {
        let pipeline = self.pipeline.ok_or_else(|| Error::Config("no pipeline selected".into()))?;
        let surface = self.surface()?;
        if self.family.rect.is_none() {
            self.family.rect = Some(self.base_family(&surface)?.rect());
        }
        if self.divisor.normalizer.is_none() {
            let word = Word::parse(&self.divisor.word)?;
            self.divisor.normalizer = Some(crate::bifur::displacement_normalizer(&surface, &word));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        self.schedule.schedule().validate(self.schedule.min_exponent)?;
        if !(self.schedule.min_exponent > 0.0) {
            return Err(Error::Config("the admissibility exponent must be positive".into()));
        }
        self.validate_for(pipeline, &surface)?;
        Ok(self)
    }

    fn validate_for(&self, pipeline: Pipeline, surface: &FuchsianSurface) -> Result<()> {
        let est = &self.estimator;
        match pipeline {
            Pipeline::Lyapunov => {
                if est.methods.is_empty() {
                    return Err(Error::Config("no estimator methods listed".into()));
                }
                if est.methods.contains(&Method::Mu) {
                    self.fls.config().validate(surface)?;
                    positive("fls.chains", self.fls.chains)?;
                    positive("fls.steps", self.fls.steps)?;
                }
                self.representation(surface)?;
            }
            Pipeline::Discretize => {
                self.fls.config().validate(surface)?;
                positive("fls.chains", self.fls.chains)?;
                positive("fls.steps", self.fls.steps)?;
            }
            Pipeline::Grid | Pipeline::Equidist => {
                let spec = self.grid_spec(surface)?;
                let cap = self.grid_estimator().node_cap();
                if spec.nx > cap || spec.ny > cap {
                    return Err(Error::Resource(format!("grid {}×{} exceeds the {cap}×{cap} cap", spec.nx, spec.ny)));
                }
                if let Some(d) = self.grid.discreteness_depth {
                    if d == 0 || d > MAX_DISCRETENESS_DEPTH {
                        return Err(Error::Config(format!("discreteness depth {d} outside 1..={MAX_DISCRETENESS_DEPTH}")));
                    }
                }
                if pipeline == Pipeline::Equidist {
                    self.equidist.config().validate()?;
                }
            }
            Pipeline::Divisor => {
                self.grid_spec(surface)?;
            }
            Pipeline::Census => {
                if self.census.radii.is_empty() || self.census.radii.iter().any(|r| !(*r > 0.0 && *r <= DEFAULT_MAX_RADIUS)) {
                    return Err(Error::Config(format!("census radii must lie in (0, {DEFAULT_MAX_RADIUS}]")));
                }
                if !(self.census.epsilon > 0.0) {
                    return Err(Error::Config("census epsilon must be positive".into()));
                }
                self.representation(surface)?;
            }
            Pipeline::Enumerate => {
                let r = self.enumerate.radius;
                if !(r > 0.0 && r <= DEFAULT_MAX_RADIUS) {
                    return Err(Error::Resource(format!("radius {r} outside (0, {DEFAULT_MAX_RADIUS}]")));
                }
                if let Some(t) = self.enumerate.geodesic_t {
                    if !(t > 0.0 && t <= DEFAULT_MAX_GEODESIC_LENGTH) {
                        return Err(Error::Resource(format!("geodesic length {t} too large")));
                    }
                }
            }
            Pipeline::Brownian => {
                positive("brownian.n_paths", self.brownian.n_paths)?;
                if !(self.brownian.t_max > 0.0 && self.brownian.dt > 0.0) {
                    return Err(Error::Config("brownian horizon and step must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::Config(format!("{name} must be positive")))
    } else {
        Ok(())
    }
}
