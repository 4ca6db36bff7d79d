//! Model specifications, stationary laws, initial conditions and the
//! finite-d diagnostics for the domain-of-attraction conditions.

mod conditions;
mod initial;
mod measures;
mod spec;

pub use conditions::{check_conditions, domination_factor, Condition, ConditionDiagnostic, NamedSeries, ThetaGrowth};
pub use initial::{generate_initial, InitialCondition, LambdaSeq, ThetaDist};
pub use measures::{sample_pi_a, sample_pi_a_finite, sample_pi_finite, ProductExponential};
pub use spec::{GapVector, ModelSpec};
