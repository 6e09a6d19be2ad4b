use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use bifcurrent_core::harness::{rerun, run_experiment, ExperimentConfig, FamilyKind, Pipeline, RunManifest, MANIFEST_FILE};
use bifcurrent_core::lyapunov::Method;
use clap::{Args, Parser, Subcommand};

/// Lyapunov exponents and bifurcation currents for representations of the
/// modular torus group.
#[derive(Parser, Debug)]
#[command(name = "bifcurrent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment config (TOML, or JSON starting with `{`).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results are the same for any count.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the orbit ball, and optionally closed geodesics.
    Enumerate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        radius: Option<f64>,
        /// Also list closed geodesics up to this length.
        #[arg(long)]
        geodesics: Option<f64>,
    },
    /// Sample Brownian paths on the surface.
    Brownian {
        #[command(flatten)]
        common: Common,
        #[arg(long = "t")]
        t_max: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Run the discretisation chain.
    Discretize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Estimate the Lyapunov exponent of one representation.
    Lyapunov {
        #[command(flatten)]
        common: Common,
        /// brown, geodesic, mu, lattice (norm) or lattice_trace; repeatable.
        #[arg(long = "method")]
        methods: Vec<Method>,
        /// Representation file.
        #[arg(long)]
        rep: Option<PathBuf>,
    },
    /// Count lattice points whose trace exponent deviates from a reference.
    Census {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        radius_ladder: Option<Vec<f64>>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        chi_ref: Option<f64>,
    },
    /// Lyapunov grid and discrete current over a parameter rectangle.
    Grid {
        #[command(flatten)]
        common: Common,
    },
    /// Zeros of a trace function over the parameter grid.
    Divisor {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        word: Option<String>,
    },
    /// Equidistribution of random geodesic divisors towards the current.
    Equidist {
        #[command(flatten)]
        common: Common,
    },
    /// Run the pipeline named in the config.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Re-run a manifest and compare output digests.
    Rerun {
        /// Manifest file, or a run directory containing one.
        #[arg(long, short, alias = "config")]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common, pipeline: Option<Pipeline>) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = pipeline {
        if let Some(q) = cfg.pipeline.filter(|q| *q != p) {
            eprintln!("note: config names pipeline `{q}`, running `{p}`");
        }
        cfg.pipeline = Some(p);
    }
    if let Some(s) = common.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = Some(o.clone());
    }
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    if cfg.output_dir.is_none() {
        bail!("no output directory: pass --out or set output_dir in the config");
    }
    Ok(cfg)
}

fn report(manifest: &RunManifest) -> ExitCode {
    let dir = manifest.config.output_dir.as_deref().map(|d| d.display().to_string()).unwrap_or_default();
    match &manifest.error {
        None => {
            for (name, digest) in &manifest.outputs {
                println!("{dir}/{name}  sha256 {digest}");
            }
            println!("{dir}/{MANIFEST_FILE}  ({:.2} s, {} workers)", manifest.wall_clock_seconds, manifest.workers);
            ExitCode::SUCCESS
        }
        Some(e) => {
            eprintln!("error [{}]: {}", e.kind, e.message);
            eprintln!("manifest written to {dir}/{MANIFEST_FILE}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let cfg = match cli.command {
        Command::Rerun { manifest, out } => {
            let path = if manifest.is_dir() { manifest.join(MANIFEST_FILE) } else { manifest };
            let r = rerun(&path, out)?;
            if r.identical() {
                println!("identical: {} outputs match", r.original.outputs.len());
                return Ok(ExitCode::SUCCESS);
            }
            for m in &r.mismatches {
                eprintln!("digest mismatch: {m}");
            }
            if let Some(e) = &r.rerun.error {
                eprintln!("rerun error [{}]: {}", e.kind, e.message);
            }
            return Ok(ExitCode::from(1));
        }
        Command::Run { common } => {
            let cfg = load(&common, None)?;
            if cfg.pipeline.is_none() {
                bail!("the config does not name a pipeline");
            }
            cfg
        }
        Command::Enumerate { common, radius, geodesics } => {
            let mut cfg = load(&common, Some(Pipeline::Enumerate))?;
            if let Some(r) = radius {
                cfg.enumerate.radius = r;
            }
            if geodesics.is_some() {
                cfg.enumerate.geodesic_t = geodesics;
            }
            cfg
        }
        Command::Brownian { common, t_max, paths, dt } => {
            let mut cfg = load(&common, Some(Pipeline::Brownian))?;
            if let Some(t) = t_max {
                cfg.brownian.t_max = t;
            }
            if let Some(n) = paths {
                cfg.brownian.n_paths = n;
            }
            if let Some(d) = dt {
                cfg.brownian.dt = d;
            }
            cfg
        }
        Command::Discretize { common, steps, chains } => {
            let mut cfg = load(&common, Some(Pipeline::Discretize))?;
            if let Some(s) = steps {
                cfg.fls.steps = s;
            }
            if let Some(c) = chains {
                cfg.fls.chains = c;
            }
            cfg
        }
        Command::Lyapunov { common, methods, rep } => {
            let mut cfg = load(&common, Some(Pipeline::Lyapunov))?;
            if !methods.is_empty() {
                cfg.estimator.methods = methods;
            }
            if let Some(p) = rep {
                cfg.family.kind = FamilyKind::File;
                cfg.family.path = Some(p);
            }
            cfg
        }
        Command::Census { common, radius_ladder, epsilon, chi_ref } => {
            let mut cfg = load(&common, Some(Pipeline::Census))?;
            if let Some(r) = radius_ladder {
                cfg.census.radii = r;
            }
            if let Some(e) = epsilon {
                cfg.census.epsilon = e;
            }
            if chi_ref.is_some() {
                cfg.census.chi_ref = chi_ref;
            }
            cfg
        }
        Command::Grid { common } => load(&common, Some(Pipeline::Grid))?,
        Command::Divisor { common, word } => {
            let mut cfg = load(&common, Some(Pipeline::Divisor))?;
            if let Some(w) = word {
                cfg.divisor.word = w;
                cfg.divisor.normalizer = None;
            }
            cfg
        }
        Command::Equidist { common } => load(&common, Some(Pipeline::Equidist))?,
    };
    Ok(report(&run_experiment(&cfg)?))
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
