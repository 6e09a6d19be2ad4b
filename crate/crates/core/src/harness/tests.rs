use super::*;
use crate::bifur::{CurrentGrid, Rect};
use crate::lyapunov::Method;
use crate::moebius::Complex;
use proptest::prelude::*;

fn base(pipeline: Pipeline, dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        pipeline: Some(pipeline),
        master_seed: 11,
        output_dir: Some(dir.to_path_buf()),
        ..ExperimentConfig::default()
    }
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn toml_and_json_configs_parse() {
    let text = r#"
pipeline = "grid"
master_seed = 7

[family]
kind = "maskit"
parameter = [0.0, 2.0]

[grid]
nx = 21
ny = 11
estimator = "brown"

[estimator]
methods = ["brown", "lattice_trace"]
t_max = 10.0

[fls]
r = 0.1
R = 0.4
p = 0.3

[schedule]
exponent = 0.8
"#;
    let cfg = ExperimentConfig::parse(text).unwrap();
    assert_eq!(cfg.pipeline, Some(Pipeline::Grid));
    assert_eq!(cfg.family.kind, FamilyKind::Maskit);
    assert_eq!(cfg.family.parameter, Some(Complex::new(0.0, 2.0)));
    assert_eq!((cfg.grid.nx, cfg.grid.ny, cfg.grid.estimator), (21, 11, GridEstimatorKind::Brown));
    assert_eq!(cfg.estimator.methods, vec![Method::Brown, Method::LatticeTrace]);
    assert_eq!(cfg.fls.big_r, 0.4);
    assert_eq!(cfg.schedule.exponent, 0.8);
    assert_eq!(cfg.estimator.n_paths, EstimatorSection::default().n_paths);

    let json = serde_json::to_string(&cfg).unwrap();
    assert_eq!(ExperimentConfig::parse(&json).unwrap(), cfg);
    assert_eq!(ExperimentConfig::parse(&cfg.to_toml().unwrap()).unwrap(), cfg);

    assert!(matches!(ExperimentConfig::parse("colour = 3"), Err(Error::Parse(_))));
    assert!(matches!(ExperimentConfig::parse("[grid]\nnodes = 3"), Err(Error::Parse(_))));
}

#[test]
fn resolve_fills_every_implicit_value() {
    let dir = Path::new("unused");
    let mut cfg = base(Pipeline::Divisor, dir);
    cfg.family.kind = FamilyKind::Maskit;
    let r = cfg.clone().resolve().unwrap();
    assert_eq!(r.family.rect, Some(Rect { re_min: -1.0, re_max: 1.0, im_min: 1.0, im_max: 2.2 }));
    let n = r.divisor.normalizer.unwrap();
    assert!(n > 0.0);
    // Resolving twice changes nothing.
    assert_eq!(r.clone().resolve().unwrap(), r);

    let mut none = cfg.clone();
    none.pipeline = None;
    assert!(matches!(none.resolve(), Err(Error::Config(_))));
    let mut surface = cfg.clone();
    surface.surface = "genus_two".into();
    assert!(surface.resolve().is_err());
}

#[test]
fn admissibility_and_caps_are_checked() {
    let dir = Path::new("unused");
    let mut cfg = base(Pipeline::Grid, dir);
    cfg.schedule.exponent = 0.3;
    assert!(matches!(cfg.clone().resolve(), Err(Error::Config(_))));
    cfg.schedule.min_exponent = 0.2;
    assert!(cfg.clone().resolve().is_ok());
    cfg.schedule.min_exponent = 0.0;
    cfg.schedule.exponent = 0.0;
    assert!(cfg.clone().resolve().is_err());

    let mut big = base(Pipeline::Grid, dir);
    big.grid.nx = 102;
    assert!(matches!(big.clone().resolve(), Err(Error::Resource(_))));
    big.grid.nx = 101;
    assert!(big.clone().resolve().is_ok());
    big.grid.estimator = GridEstimatorKind::Brown;
    assert!(matches!(big.resolve(), Err(Error::Resource(_))));

    let mut census = base(Pipeline::Census, dir);
    census.census.radii = vec![6.0, 20.0];
    assert!(census.resolve().is_err());

    let mut fls = base(Pipeline::Discretize, dir);
    fls.fls.big_r = 1.5;
    assert!(fls.resolve().is_err());

    let mut rep = base(Pipeline::Lyapunov, dir);
    rep.family.kind = FamilyKind::Maskit;
    assert!(matches!(rep.clone().resolve(), Err(Error::Config(_))));
    rep.family.parameter = Some(Complex::new(0.0, 2.0));
    assert!(rep.resolve().is_ok());
}

#[test]
fn lyapunov_pipeline_writes_estimates_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base(Pipeline::Lyapunov, tmp.path());
    cfg.estimator.methods = vec![Method::Brown, Method::LatticeNorm];
    cfg.estimator.t_max = 10.0;
    cfg.estimator.n_paths = 40;
    cfg.estimator.n_draws = 500;
    let m = run_experiment(&cfg).unwrap();
    assert!(m.succeeded(), "{:?}", m.error);
    assert_eq!(m.version, version_tag());
    assert!(m.task_seeds.contains_key("lyapunov/brown") && m.task_seeds.contains_key("lyapunov/lattice_norm"));
    let csv = read(tmp.path(), "lyapunov.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("brown,") && lines[2].starts_with("lattice_norm,"));
    let value: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((value - 0.5).abs() < 0.15, "{value}");
    for (name, digest) in &m.outputs {
        assert_eq!(&sha256_hex(read(tmp.path(), name).as_bytes()), digest);
    }

    let other = tempfile::tempdir().unwrap();
    let report = rerun(&tmp.path().join(MANIFEST_FILE), Some(other.path().to_path_buf())).unwrap();
    assert!(report.identical(), "{:?}", report.mismatches);
    assert_eq!(report.rerun.task_seeds, m.task_seeds);
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let digests = |workers: usize| {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = base(Pipeline::Grid, tmp.path());
        cfg.family.kind = FamilyKind::Maskit;
        cfg.grid.nx = 9;
        cfg.grid.ny = 7;
        cfg.estimator.n_draws = 300;
        cfg.workers = Some(workers);
        let m = run_experiment(&cfg).unwrap();
        assert!(m.succeeded(), "{:?}", m.error);
        assert_eq!(m.workers, workers);
        m.outputs
    };
    assert_eq!(digests(1), digests(3));
}

#[test]
fn module_errors_land_in_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base(Pipeline::Lyapunov, tmp.path());
    cfg.estimator.methods = vec![Method::Mu];
    cfg.fls.chains = 1;
    cfg.fls.steps = 10;
    let m = run_experiment(&cfg).unwrap();
    let err = m.error.as_ref().expect("one chain cannot give a standard error");
    assert_eq!(err.kind, "estimator");
    assert!(m.outputs.is_empty());
    let on_disk = RunManifest::read(&tmp.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(on_disk.error, m.error);

    let mut bad = base(Pipeline::Census, tmp.path());
    bad.census.epsilon = -1.0;
    assert_eq!(run_experiment(&bad).unwrap().error.unwrap().kind, "config");

    let mut nowhere = base(Pipeline::Census, tmp.path());
    nowhere.output_dir = None;
    assert!(run_experiment(&nowhere).is_err());
}

#[test]
fn census_pipeline_rows_decrease() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base(Pipeline::Census, tmp.path());
    cfg.census.chi_ref = Some(0.5);
    let m = run_experiment(&cfg).unwrap();
    assert!(m.succeeded(), "{:?}", m.error);
    let csv = read(tmp.path(), "census.csv");
    let fractions: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(fractions.len(), 3);
    assert!(fractions[0] > fractions[1] && fractions[1] > fractions[2], "{fractions:?}");
}

#[test]
fn census_reference_is_estimated_when_absent() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base(Pipeline::Census, tmp.path());
    cfg.census.radii = vec![6.0];
    cfg.estimator.n_draws = 400;
    let m = run_experiment(&cfg).unwrap();
    assert!(m.succeeded(), "{:?}", m.error);
    assert!(m.task_seeds.contains_key("census/chi_ref"));
    let summary: serde_json::Value = serde_json::from_str(&read(tmp.path(), "census.json")).unwrap();
    assert!((summary["chi_ref"].as_f64().unwrap() - 0.5).abs() < 0.1);
}

#[test]
fn enumerate_pipeline_lists_the_ball() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base(Pipeline::Enumerate, tmp.path());
    cfg.enumerate.radius = 5.0;
    cfg.enumerate.geodesic_t = Some(4.0);
    let m = run_experiment(&cfg).unwrap();
    assert!(m.succeeded(), "{:?}", m.error);
    let ball = crate::lattice::enumerate_ball(&crate::lattice::modular_torus(), 5.0).unwrap();
    let csv = read(tmp.path(), "ball.csv");
    assert_eq!(csv.lines().count(), ball.len() + 1);
    let first = csv.lines().nth(1).unwrap();
    assert!(first.starts_with("e,0.0000000000000000e0,"), "{first}");
    let geo = read(tmp.path(), "geodesics.csv");
    assert!(geo.lines().skip(1).all(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() <= 4.0));
    assert!(geo.lines().count() > 6);
}

#[test]
fn divisor_and_grid_pipelines() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base(Pipeline::Divisor, tmp.path());
    cfg.family.kind = FamilyKind::Maskit;
    cfg.grid.nx = 21;
    cfg.grid.ny = 21;
    cfg.divisor.word = "X".into();
    let m = run_experiment(&cfg).unwrap();
    assert!(m.succeeded(), "{:?}", m.error);
    let csv = read(tmp.path(), "divisor.csv");
    assert_eq!(csv.lines().next(), Some("cell_i,cell_j,multiplicity"));
    // tr² X = −μ² equals 4 at μ = ±2i; only 2i lies in the default rectangle.
    let summary: serde_json::Value = serde_json::from_str(&read(tmp.path(), "divisor.json")).unwrap();
    assert_eq!(summary["total_zeros"], 1);
    assert_eq!(csv.lines().count(), 2);

    let mut g = base(Pipeline::Grid, tmp.path());
    g.family.kind = FamilyKind::Maskit;
    g.grid.nx = 7;
    g.grid.ny = 5;
    g.grid.discreteness_depth = Some(2);
    g.estimator.n_draws = 200;
    let m = run_experiment(&g).unwrap();
    assert!(m.succeeded(), "{:?}", m.error);
    let grid = CurrentGrid::read(&tmp.path().join("grid.txt")).unwrap();
    assert_eq!((grid.spec.nx, grid.spec.ny), (7, 5));
    assert_eq!(grid.holes(), 0);
    assert_eq!(read(tmp.path(), "discreteness.csv").lines().count(), 36);
}

#[test]
fn brownian_and_discretize_pipelines() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = base(Pipeline::Brownian, tmp.path());
    cfg.brownian.t_max = 5.0;
    cfg.brownian.n_paths = 30;
    let m = run_experiment(&cfg).unwrap();
    assert!(m.succeeded(), "{:?}", m.error);
    assert_eq!(read(tmp.path(), "brownian.csv").lines().count(), 31);
    let summary: serde_json::Value = serde_json::from_str(&read(tmp.path(), "brownian.json")).unwrap();
    assert!(summary["drift"].as_f64().unwrap() > 0.5);

    let mut d = base(Pipeline::Discretize, tmp.path());
    d.fls.chains = 3;
    d.fls.steps = 120;
    let m = run_experiment(&d).unwrap();
    assert!(m.succeeded(), "{:?}", m.error);
    assert_eq!(read(tmp.path(), "discretize.csv").lines().count(), 3 * 120 + 1);
    let summary: serde_json::Value = serde_json::from_str(&read(tmp.path(), "discretize.json")).unwrap();
    assert!(summary["tau"].as_f64().unwrap() > 0.0);
}

#[test]
fn pipeline_names_round_trip() {
    for p in Pipeline::ALL {
        assert_eq!(p.name().parse::<Pipeline>().unwrap(), p);
    }
    assert!("plot".parse::<Pipeline>().is_err());
}

proptest! {
    #[test]
    fn float_format_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        let s = fmt_float(x);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
