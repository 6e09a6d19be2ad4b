use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde_json::json;

use super::config::{ExperimentConfig, Pipeline};
use crate::bifur::{discreteness_heuristic, divisor_zeros, equidist_experiment, lyapunov_grid, CurrentGrid};
use crate::brownian::{heat_kernel_slope, simulate_tracked, BrownianConfig};
use crate::error::{Error, Result};
use crate::fls::{empirical_mu, estimate_tau_ensemble, run_chain, DiscretizationRun};
use crate::lattice::{enumerate_ball, enumerate_geodesics, FuchsianSurface, Real2, Word};
use crate::lyapunov::{chi_brown, chi_geodesic, chi_lattice, chi_mu, deviation_census, LyapunovEstimate, Method, Representation};
use crate::moebius::translation_length;
use crate::seed::derive_seed;
use crate::stats::mean;

/// A named output file held in memory until the run finishes.
pub(crate) struct Artifact {
    pub name: String,
    pub contents: String,
}

pub(crate) struct Context {
    pub master: u64,
    pub seeds: BTreeMap<String, u64>,
    pub artifacts: Vec<Artifact>,
}

impl Context {
    pub fn new(master: u64) -> Self {
        Context { master, seeds: BTreeMap::new(), artifacts: Vec::new() }
    }

    fn seed(&mut self, path: &str) -> u64 {
        let s = derive_seed(self.master, path);
        self.seeds.insert(path.to_owned(), s);
        s
    }

    fn emit(&mut self, name: &str, contents: String) {
        self.artifacts.push(Artifact { name: name.to_owned(), contents });
    }

    fn emit_json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
        self.emit(name, text + "\n");
        Ok(())
    }
}

/// Floats in CSV output: 17 significant digits, enough to round-trip.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn run_pipeline(cfg: &ExperimentConfig, pipeline: Pipeline, ctx: &mut Context) -> Result<()> {
    let surface = cfg.surface()?;
    match pipeline {
        Pipeline::Lyapunov => lyapunov(cfg, &surface, ctx),
        Pipeline::Discretize => discretize(cfg, &surface, ctx),
        Pipeline::Grid => grid(cfg, &surface, ctx).map(|_| ()),
        Pipeline::Divisor => divisor(cfg, &surface, ctx),
        Pipeline::Equidist => equidist(cfg, &surface, ctx),
        Pipeline::Census => census(cfg, &surface, ctx),
        Pipeline::Enumerate => enumerate(cfg, &surface, ctx),
        Pipeline::Brownian => brownian(cfg, &surface, ctx),
    }
}

fn chains(cfg: &ExperimentConfig, surface: &FuchsianSurface, seed: u64) -> Result<Vec<DiscretizationRun>> {
    let fls = cfg.fls.config();
    (0..cfg.fls.chains)
        .into_par_iter()
        .map(|k| run_chain(surface, &fls, cfg.fls.steps, derive_seed(seed, &format!("chain/{k}"))))
        .collect()
}

fn lyapunov(cfg: &ExperimentConfig, surface: &FuchsianSurface, ctx: &mut Context) -> Result<()> {
    let rep = cfg.representation(surface)?;
    let mut rows: Vec<(LyapunovEstimate, u64)> = Vec::new();
    for &method in &cfg.estimator.methods {
        let seed = ctx.seed(&format!("lyapunov/{method}"));
        let est = match method {
            Method::Brown => chi_brown(surface, &rep, &cfg.path_params(), seed)?,
            Method::Geodesic => chi_geodesic(surface, &rep, &cfg.ray_params(), seed)?,
            Method::LatticeNorm | Method::LatticeTrace => {
                chi_lattice(surface, &rep, &cfg.schedule.schedule(), cfg.estimator.n_draws, seed, method == Method::LatticeTrace)?
            }
            Method::Mu => {
                let runs = chains(cfg, surface, seed)?;
                let (tau, tau_err) = estimate_tau_ensemble(&runs)?;
                let per_step = chi_mu(&rep, &runs, None)?;
                let value = per_step.value / tau;
                let err = ((per_step.stderr / tau).powi(2) + (per_step.value * tau_err / (tau * tau)).powi(2)).sqrt();
                LyapunovEstimate::new(
                    value,
                    err,
                    Method::Mu,
                    per_step.value,
                    per_step.stderr,
                    per_step.samples,
                    json!({ "tau": tau, "tau_stderr": tau_err, "chains": runs.len(), "steps": cfg.fls.steps }),
                )
            }
        };
        rows.push((est, seed));
    }
    let mut csv = String::from("method,value,stderr,endpoint,endpoint_stderr,samples,seed\n");
    for (e, seed) in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{seed}",
            e.method,
            fmt_float(e.value),
            fmt_float(e.stderr),
            fmt_float(e.endpoint),
            fmt_float(e.endpoint_stderr),
            e.samples
        );
    }
    ctx.emit("lyapunov.csv", csv);
    let params: Vec<serde_json::Value> =
        rows.iter().map(|(e, _)| json!({ "method": e.method, "params": e.params })).collect();
    ctx.emit_json("lyapunov.json", &json!({ "representation": rep.name(), "estimates": params }))
}

fn discretize(cfg: &ExperimentConfig, surface: &FuchsianSurface, ctx: &mut Context) -> Result<()> {
    let seed = ctx.seed("discretize");
    let runs = chains(cfg, surface, seed)?;
    let mut csv = String::from("chain,k,stop_time,word,distance\n");
    for (c, run) in runs.iter().enumerate() {
        for (k, (w, t)) in run.centres.iter().zip(&run.stop_times).enumerate() {
            let d = surface.eval_real(w).displacement();
            let _ = writeln!(csv, "{c},{},{},{w},{}", k + 1, fmt_float(*t), fmt_float(d));
        }
    }
    ctx.emit("discretize.csv", csv);
    let (tau, tau_err) = estimate_tau_ensemble(&runs)?;
    let accept = mean(&runs.iter().map(DiscretizationRun::acceptance_rate).collect::<Vec<_>>());
    let mu: BTreeMap<String, f64> = empirical_mu(&runs).into_iter().map(|(w, f)| (w.to_string(), f)).collect();
    ctx.emit_json(
        "discretize.json",
        &json!({ "tau": tau, "tau_stderr": tau_err, "acceptance_rate": accept, "first_increment_law": mu }),
    )
}

fn grid(cfg: &ExperimentConfig, surface: &FuchsianSurface, ctx: &mut Context) -> Result<CurrentGrid> {
    let family = cfg.family(surface)?;
    let spec = cfg.grid_spec(surface)?;
    let est = cfg.grid_estimator();
    ctx.seed(match est {
        crate::bifur::GridEstimator::Brown { .. } => "grid/brown",
        crate::bifur::GridEstimator::LatticeTrace { .. } => "grid/lattice",
    });
    let g = lyapunov_grid(surface, &family, &spec, &est, ctx.master)?;
    ctx.emit("grid.txt", g.to_text());
    if let Some(depth) = cfg.grid.discreteness_depth {
        let values: Vec<Result<f64>> = spec
            .nodes()
            .par_iter()
            .map(|&l| family.representation(l).and_then(|rep| discreteness_heuristic(&rep, depth)))
            .collect();
        let mut csv = String::from("i,j,re,im,jorgensen\n");
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let l = spec.node(i, j);
                let v = values[spec.index(i, j)].as_ref().map_or(f64::NAN, |v| *v);
                let _ = writeln!(csv, "{i},{j},{},{},{}", fmt_float(l.re), fmt_float(l.im), fmt_float(v));
            }
        }
        ctx.emit("discreteness.csv", csv);
    }
    Ok(g)
}

fn divisor(cfg: &ExperimentConfig, surface: &FuchsianSurface, ctx: &mut Context) -> Result<()> {
    let family = cfg.family(surface)?;
    let spec = cfg.grid_spec(surface)?;
    let word = Word::parse(&cfg.divisor.word)?;
    let normalizer = cfg.divisor.normalizer.ok_or_else(|| Error::Config("divisor normalizer unresolved".into()))?;
    let report = divisor_zeros(&family, &word, cfg.divisor.t, &spec, normalizer)?;
    let mut csv = String::from("cell_i,cell_j,multiplicity\n");
    for c in &report.cells {
        let _ = writeln!(csv, "{},{},{}", c.i, c.j, c.multiplicity);
    }
    ctx.emit("divisor.csv", csv);
    ctx.emit_json(
        "divisor.json",
        &json!({
            "word": word.to_string(),
            "t": [report.t.re, report.t.im],
            "normalizer": report.normalizer,
            "total_zeros": report.total_zeros,
            "total_mass": report.total_mass(),
            "ambiguous": report.ambiguous,
            "whole_space": report.whole_space,
        }),
    )
}

fn equidist(cfg: &ExperimentConfig, surface: &FuchsianSurface, ctx: &mut Context) -> Result<()> {
    let g = grid(cfg, surface, ctx)?;
    let family = cfg.family(surface)?;
    let eq = cfg.equidist.config();
    for n in 0..eq.radii.len() {
        ctx.seed(&format!("equidist/{n}"));
    }
    let report = equidist_experiment(surface, &family, &g, &eq, ctx.master)?;
    let mut csv = String::from(
        "n,radius,word,length,resamples,l1_distance,mass_distance,divisor_mass,potential_mass,ambiguous_cells,whole_space,max_excess\n",
    );
    for s in &report.steps {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.n,
            fmt_float(s.radius),
            s.word,
            fmt_float(s.length),
            s.resamples,
            fmt_float(s.l1_distance),
            fmt_float(s.mass_distance),
            fmt_float(s.divisor_mass),
            fmt_float(s.potential_mass),
            s.ambiguous_cells,
            s.whole_space,
            fmt_float(s.max_excess)
        );
    }
    ctx.emit("equidist.csv", csv);
    Ok(())
}

fn census(cfg: &ExperimentConfig, surface: &FuchsianSurface, ctx: &mut Context) -> Result<()> {
    let rep = cfg.representation(surface)?;
    let (chi_ref, source) = match cfg.census.chi_ref {
        Some(c) => (c, "config".to_owned()),
        None => {
            let seed = ctx.seed("census/chi_ref");
            let est = chi_lattice(surface, &rep, &cfg.schedule.schedule(), cfg.estimator.n_draws, seed, true)?;
            (est.value, format!("lattice_trace/{}", cfg.estimator.n_draws))
        }
    };
    let report = deviation_census(surface, &rep, &cfg.census.radii, cfg.census.epsilon, chi_ref)?;
    let mut csv = String::from("radius,total,bad,bad_fraction\n");
    for r in &report.rows {
        let _ = writeln!(csv, "{},{},{},{}", fmt_float(r.radius), r.total, r.bad, fmt_float(r.bad_fraction));
    }
    ctx.emit("census.csv", csv);
    ctx.emit_json(
        "census.json",
        &json!({ "epsilon": report.epsilon, "chi_ref": chi_ref, "chi_ref_source": source, "fit": report.fit }),
    )
}

fn enumerate(cfg: &ExperimentConfig, surface: &FuchsianSurface, ctx: &mut Context) -> Result<()> {
    let ball = enumerate_ball(surface, cfg.enumerate.radius)?;
    let mut csv = String::from("word,d,trace_sq,length\n");
    for e in &ball.elements {
        let length = translation_length(&e.element).map(fmt_float).unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{length}", e.word, fmt_float(e.distance), fmt_float(e.element.trace_sq().re));
    }
    ctx.emit("ball.csv", csv);
    if let Some(t) = cfg.enumerate.geodesic_t {
        let classes = enumerate_geodesics(surface, t, false)?;
        let mut csv = String::from("word,length,primitive\n");
        for c in &classes {
            let _ = writeln!(csv, "{},{},{}", c.cyclic_word, fmt_float(c.length), c.primitive);
        }
        ctx.emit("geodesics.csv", csv);
    }
    Ok(())
}

fn brownian(cfg: &ExperimentConfig, surface: &FuchsianSurface, ctx: &mut Context) -> Result<()> {
    let b = &cfg.brownian;
    let seed = ctx.seed("brownian");
    let bcfg = BrownianConfig::with_dt(b.dt);
    let can = Representation::canonical(surface);
    let rows: Vec<(f64, usize, f64)> = (0..b.n_paths)
        .into_par_iter()
        .map(|k| {
            let tr = simulate_tracked(surface, Real2::identity(), b.t_max, &bcfg, derive_seed(seed, &format!("path/{k}")), |_, _| Ok(()))?;
            Ok((tr.lifted_distance(), tr.word().len(), can.log_norm(tr.word())))
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from("path,t,distance,word_length,log_norm\n");
    for (k, (d, len, ln)) in rows.iter().enumerate() {
        let _ = writeln!(csv, "{k},{},{},{len},{}", fmt_float(b.t_max), fmt_float(*d), fmt_float(*ln));
    }
    ctx.emit("brownian.csv", csv);
    let distances: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let slope = heat_kernel_slope(&distances, b.t_max, b.bins, b.min_count).ok();
    ctx.emit_json(
        "brownian.json",
        &json!({ "t": b.t_max, "paths": b.n_paths, "drift": mean(&distances) / b.t_max, "heat_kernel_fit": slope }),
    )
}
