//! Empirical distribution functions, Kolmogorov-Smirnov distances,
//! occupancy measures, Gaussian tail bounds for ranked positions, and the
//! domain-of-attraction experiment.

mod bounds;
mod doa;
mod ecdf;
mod occupancy;

pub use bounds::{analytic_bounds, normal_tail, BoundPair, BoundQuery};
pub use doa::{doa_experiment, DoaParams, DoaReport, DoaRow};
pub use ecdf::{ks_coefficient, ks_critical, ks_to_cdf, ks_to_exponential, ks_two_sample, ks_two_sample_critical, Ecdf};
pub use occupancy::{occupancy, OccupancyAccumulator, OccupancyEstimate, DEFAULT_MIN_SPACING};
