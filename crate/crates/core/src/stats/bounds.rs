use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// `Φ̄(x) = P(N(0,1) > x) = ½ erfc(x/√2)`.
pub fn normal_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Inputs of the Gaussian tail bounds for the ranked positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub k: usize,
    pub l: usize,
    pub d: usize,
    pub t: f64,
    pub gamma: f64,
    /// Initial ranked positions `Y_0(0), …, Y_m(0)`.
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundPair {
    /// Bound on `P(sup_{[0,t]} Y_(k) ≥ Γ)`.
    pub sup: f64,
    /// Bound on `P(inf_{[0,t]} inf_{i≥d} Y_i ≤ Γ)`, truncated at `m`.
    pub inf: f64,
    pub sup_clamped: bool,
    pub inf_clamped: bool,
}

impl BoundQuery {
    fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::invalid(format!("t must be positive, got {}", self.t)));
        }
        if self.l == 0 || self.d == 0 {
            return Err(Error::invalid("l and d must be at least 1"));
        }
        let n = self.positions.len();
        if self.k >= n || self.l > n || self.d >= n {
            return Err(Error::OutOfRange(format!(
                "k={}, l={}, d={} need positions up to index {}, have {}",
                self.k,
                self.l,
                self.d,
                self.k.max(self.l - 1).max(self.d),
                n
            )));
        }
        if self.gamma.is_nan() || self.positions.iter().any(|y| !y.is_finite()) {
            return Err(Error::invalid("gamma and positions must be finite"));
        }
        Ok(())
    }

    pub fn sup_bound_raw(&self) -> f64 {
        let (l, t) = (self.l as f64, self.t);
        let yk = self.positions[self.k];
        let head: f64 = self.positions[..self.l].iter().sum();
        let first = 2.0 * normal_tail((l * (self.gamma - yk) / 3.0 - t - head) / (l * t).sqrt());
        let second = 4.0 * (self.k as f64 + 1.0) * normal_tail((self.gamma - yk) / (3.0 * t.sqrt()));
        first + second
    }

    pub fn inf_bound_raw(&self) -> f64 {
        let st = self.t.sqrt();
        2.0 * self.positions[self.d..].iter().map(|y| normal_tail((y - self.gamma) / st)).sum::<f64>()
    }
}

/// Both tail bounds, clamped to 1 with a flag when vacuous.
pub fn analytic_bounds(query: &BoundQuery) -> Result<BoundPair> {
    query.validate()?;
    let (sup, inf) = (query.sup_bound_raw(), query.inf_bound_raw());
    Ok(BoundPair { sup: sup.min(1.0), inf: inf.min(1.0), sup_clamped: sup > 1.0, inf_clamped: inf > 1.0 })
}
