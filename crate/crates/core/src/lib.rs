//! Brownian Lyapunov exponents, lattice discretisation and bifurcation
//! currents for representations of a punctured-torus surface group.

pub mod bifur;
pub mod brownian;
pub mod error;
pub mod fls;
pub mod harness;
pub mod lattice;
pub mod lyapunov;
pub mod moebius;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use lattice::{modular_torus, FuchsianSurface, GeodesicClass, Word};
pub use moebius::{
    classify, distance_h2, fixed_point_gap, scaled_log_norm_product, translation_length, Classification,
    Complex, HPoint, MoebiusElement, Norms, ScaledMoebius,
};
