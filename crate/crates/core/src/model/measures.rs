//! Product-exponential gap laws: the stationary family `π_a` of the infinite
//! Atlas model and the finite-d laws `π^(d)` and `π^{a,(d)}`.

use crate::error::{Error, Result};
use crate::model::GapVector;
use crate::noise::NoiseStream;

/// Law `⊗_i Exp(rate_i)` on the first `m` gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductExponential {
    rates: Vec<f64>,
}

impl ProductExponential {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::invalid("a gap law needs at least one coordinate"));
        }
        if let Some((i, r)) = rates.iter().enumerate().find(|(_, r)| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::invalid(format!("rate of gap {} is {r}; rates must be positive", i + 1)));
        }
        Ok(ProductExponential { rates })
    }

    /// `π_a` truncated to `m` gaps: gap `i` has rate `2 + i·a`.
    pub fn pi_a(a: f64, m: usize) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::invalid(format!("π_a needs a ≥ 0, got {a}")));
        }
        if m == 0 {
            return Err(Error::invalid("π_a needs m ≥ 1"));
        }
        Self::new((1..=m).map(|i| 2.0 + i as f64 * a).collect())
    }

    /// Stationary gap law of the `d+1`-particle Atlas model: rate `2(1 − i/(d+1))`.
    pub fn pi_finite(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("π^(d) needs d ≥ 1"));
        }
        let n = (d + 1) as f64;
        Self::new((1..=d).map(|i| 2.0 * (1.0 - i as f64 / n)).collect())
    }

    /// Stationary gap law of the alternative `d+1`-particle model:
    /// rate `(2 + ia)(1 − i/(d+1))`.
    pub fn pi_a_finite(a: f64, d: usize) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid(format!("π^(a,d) needs a > 0, got {a}")));
        }
        if d == 0 {
            return Err(Error::invalid("π^(a,d) needs d ≥ 1"));
        }
        let n = (d + 1) as f64;
        Self::new((1..=d).map(|i| (2.0 + i as f64 * a) * (1.0 - i as f64 / n)).collect())
    }

    pub fn dim(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn means(&self) -> Vec<f64> {
        self.rates.iter().map(|r| 1.0 / r).collect()
    }

    /// CDF of gap `i` (1-based) at `x`.
    pub fn cdf(&self, i: usize, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-self.rates[i - 1] * x).exp_m1()
        }
    }

    /// One draw, coordinates in order, each by inverse CDF on the auxiliary
    /// stream. Prefix-consistent: the first `k` coordinates of an `m`-draw
    /// equal a `k`-draw from the same stream state when rates agree.
    pub fn sample(&self, noise: &mut NoiseStream) -> GapVector {
        let gaps = self.rates.iter().map(|&r| noise.exponential(r)).collect();
        GapVector::new(gaps).expect("exponential draws are non-negative")
    }
}

pub fn sample_pi_a(a: f64, m: usize, noise: &mut NoiseStream) -> Result<GapVector> {
    Ok(ProductExponential::pi_a(a, m)?.sample(noise))
}

pub fn sample_pi_finite(d: usize, noise: &mut NoiseStream) -> Result<GapVector> {
    Ok(ProductExponential::pi_finite(d)?.sample(noise))
}

pub fn sample_pi_a_finite(a: f64, d: usize, noise: &mut NoiseStream) -> Result<GapVector> {
    Ok(ProductExponential::pi_a_finite(a, d)?.sample(noise))
}
