//! Parameter space: holomorphic families of representations, the Lyapunov
//! grid, the discrete bifurcation current, divisors of trace functions,
//! random closed geodesics and the equidistribution experiment.

mod ddc;
mod discrete;
mod divisor;
mod equidist;
mod family;
mod geodesic;
mod grid;

pub use ddc::{ddc_density, ddc_field, smooth_nonnegative, total_mass, MAX_SMOOTHING_PASSES};
pub use discrete::{discreteness_heuristic, MAX_DISCRETENESS_DEPTH};
pub use divisor::{
    displacement_normalizer, divisor_zeros, winding_number, DivisorCell, DivisorReport, EXACT_HIT_SHIFT,
    MAX_WINDING_DEPTH,
};
pub use equidist::{
    equidist_experiment, lelong_comparison, log_potential, EquidistConfig, EquidistReport, EquidistStep, LelongComparison,
    POTENTIAL_FLOOR,
};
pub use family::{constant_family, maskit_family, trace_triple_family, ParameterFamily, Rect};
pub use geodesic::{random_geodesic, GeodesicModel, GeodesicSample, GeodesicSampler, MAX_LENGTH_BASED_CUTOFF, MAX_RESAMPLES};
pub use grid::{lyapunov_grid, CurrentGrid, GridEstimator, GridSpec};

#[cfg(test)]
mod tests;
