//! Monte Carlo toolkit for the Atlas model and general rank-based diffusions.
//!
//! The crate simulates a finite system of ranked Brownian particles through
//! its gap process, with collision local times produced explicitly by a
//! discrete Skorokhod reflection. On top of the engine it provides
//! synchronous couplings, the excursion machinery used to track the L¹
//! contraction of coupled gap processes, and occupancy-measure statistics
//! for domain-of-attraction experiments.
//!
//! Module map:
//!
//! * [`model`]: model specifications, product-exponential stationary laws,
//!   initial conditions and finite-d condition diagnostics.
//! * [`noise`]: seeded per-rank Gaussian increment streams.
//! * [`reflect`]: the reflection matrix and the one-step Skorokhod solver.
//! * [`engine`]: ranked (gap-level) and unranked (simulate-and-sort) engines.
//! * [`coupling`]: synchronous couplings and the L¹/local-time identity.
//! * [`excursion`]: hitting-time chains, excursion detection, tail statistics.
//! * [`stats`]: ECDFs, Kolmogorov-Smirnov distances, occupancy measures,
//!   analytic tail bounds and the domain-of-attraction experiment.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod engine;
mod error;
pub mod excursion;
pub mod model;
pub mod noise;
pub mod reflect;
pub mod stats;

pub use error::{Error, Result};
pub use model::{GapVector, InitialCondition, ModelSpec, ProductExponential};
pub use noise::NoiseStream;
pub use reflect::SkorokhodSolver;
