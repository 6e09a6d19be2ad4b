//! Lyapunov exponents of a representation along Brownian paths, geodesic
//! rays, the discretised random walk and random lattice points, with the
//! deviation census over orbit balls.

mod lattice;
mod paths;
mod rep;

pub use lattice::{
    chi_lattice, deviation_census, draw_lattice, estimate_lattice, fit_comparison_exponent, lattice_statistic,
    CensusReport, CensusRow, LatticeDraws, Schedule,
};
pub use paths::{
    brownian_ensemble, chi_brown, chi_geodesic, estimate_from_ensemble, geodesic_ensemble, ray_trace, CheckpointTrace,
    PathEnsemble, PathParams,
};
pub use rep::Representation;

use crate::error::{Error, Result};
use crate::fls::DiscretizationRun;
use crate::stats::{mean, stderr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Brown,
    Geodesic,
    Mu,
    LatticeNorm,
    LatticeTrace,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Brown => "brown",
            Method::Geodesic => "geodesic",
            Method::Mu => "mu",
            Method::LatticeNorm => "lattice_norm",
            Method::LatticeTrace => "lattice_trace",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brown" => Ok(Method::Brown),
            "geodesic" => Ok(Method::Geodesic),
            "mu" => Ok(Method::Mu),
            "lattice_norm" | "lattice" => Ok(Method::LatticeNorm),
            "lattice_trace" => Ok(Method::LatticeTrace),
            _ => Err(Error::Parse(format!("unknown estimator {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LyapunovEstimate {
    /// Preferred estimate, clamped at 0.
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
    /// Secondary estimate (endpoint or tail average) and its error.
    pub endpoint: f64,
    pub endpoint_stderr: f64,
    pub samples: usize,
    pub params: serde_json::Value,
}

impl LyapunovEstimate {
    pub(crate) fn new(
        value: f64,
        stderr: f64,
        method: Method,
        endpoint: f64,
        endpoint_stderr: f64,
        samples: usize,
        params: serde_json::Value,
    ) -> Self {
        LyapunovEstimate {
            value: value.max(0.0),
            stderr: stderr.max(f64::MIN_POSITIVE),
            method,
            endpoint,
            endpoint_stderr,
            samples,
            params,
        }
    }

    /// `|a − b|` in units of the joint standard error.
    pub fn z_score(&self, other: &LyapunovEstimate) -> f64 {
        (self.value - other.value).abs() / (self.stderr.powi(2) + other.stderr.powi(2)).sqrt()
    }
}

/// `(1/n)·log ‖ρ(g₁⋯g_n)‖` averaged over chains, using the first `n` kept
/// exits of each (all of them when `n` is `None`).
pub fn chi_mu(rep: &Representation, runs: &[DiscretizationRun], n: Option<usize>) -> Result<LyapunovEstimate> {
    let per: Vec<f64> = runs
        .iter()
        .map(|r| {
            let k = n.unwrap_or(r.len());
            if k == 0 || k > r.len() {
                return Err(Error::Estimator(format!("chain has {} steps, need {k}", r.len())));
            }
            Ok(rep.log_norm(&r.centres[k - 1]) / k as f64)
        })
        .collect::<Result<_>>()?;
    if per.len() < 2 {
        return Err(Error::Estimator("need at least two chains".into()));
    }
    let (m, s) = (mean(&per), stderr(&per));
    Ok(LyapunovEstimate::new(m, s, Method::Mu, m, s, per.len(), serde_json::json!({ "chains": runs.len(), "n": n })))
}
