//! Initial gap configurations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GapVector, ProductExponential};
use crate::noise::NoiseStream;

fn default_beta() -> f64 {
    0.9
}

/// Deterministic positive sequence `λ_1, λ_2, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum LambdaSeq {
    Constant { value: f64 },
    /// `scale · i^exponent`
    Power { scale: f64, exponent: f64 },
    /// `scale · i / log log i`, with the denominator floored at 1
    /// (i.e. `log log max(i, e^e)`).
    IteratedLog { scale: f64 },
    /// Explicit values; index `i` reads `values[i-1]`.
    Values { values: Vec<f64> },
}

impl LambdaSeq {
    /// Value at the 1-based index `i`.
    pub fn value(&self, i: usize) -> Result<f64> {
        let x = i as f64;
        Ok(match self {
            LambdaSeq::Constant { value } => *value,
            LambdaSeq::Power { scale, exponent } => scale * x.powf(*exponent),
            LambdaSeq::IteratedLog { scale } => {
                let floor = std::f64::consts::E.exp();
                scale * x / x.max(floor).ln().ln()
            }
            LambdaSeq::Values { values } => *values.get(i - 1).ok_or_else(|| {
                Error::invalid(format!("lambda sequence has {} values, index {i} requested", values.len()))
            })?,
        })
    }
}

/// Law of the iid multipliers `Θ_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum ThetaDist {
    Exponential { rate: f64 },
    Uniform { low: f64, high: f64 },
    Constant { value: f64 },
}

impl ThetaDist {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            ThetaDist::Exponential { rate } => *rate > 0.0 && rate.is_finite(),
            ThetaDist::Uniform { low, high } => *low >= 0.0 && high >= low && high.is_finite(),
            ThetaDist::Constant { value } => *value >= 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid multiplier law {self:?}")))
        }
    }

    fn draw(&self, noise: &mut NoiseStream) -> f64 {
        match self {
            ThetaDist::Exponential { rate } => noise.exponential(*rate),
            ThetaDist::Uniform { low, high } => low + (high - low) * (1.0 - noise.uniform()),
            ThetaDist::Constant { value } => *value,
        }
    }
}

/// Recipe for an initial gap vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `π_a`: gap `i` is `Exp(2 + ia)`.
    StationaryPiA { a: f64 },
    /// `π^(m)`, the stationary law of the `m+1`-particle Atlas model.
    FinitePiD,
    /// `π^{a,(m)}`, the stationary law of the alternative `m+1`-particle model.
    FinitePiAD { a: f64 },
    /// iid `Exp(rate)` gaps.
    DominatingExp { rate: f64 },
    /// `U_i = λ_i Θ_i` with iid `Θ_i`.
    ScaledIid { lambda: LambdaSeq, theta: ThetaDist },
    /// Gap `i` is `Exp(2 + ia + λ_i)`.
    PerturbedExp {
        a: f64,
        lambda: LambdaSeq,
        #[serde(default = "default_beta")]
        beta: f64,
    },
    /// `U_i = i^{-2/3}`, except `U_{n³} = n`.
    AdversarialBlocks,
    /// Fixed gaps; must provide at least `m` entries.
    Explicit { gaps: Vec<f64> },
    /// Coordinatewise minimum of two draws taken in order from the same stream.
    PointwiseMin {
        first: Box<InitialCondition>,
        second: Box<InitialCondition>,
    },
}

fn adversarial_block_value(i: usize) -> f64 {
    let n = (i as f64).cbrt().round() as usize;
    if n * n * n == i {
        n as f64
    } else {
        (i as f64).powf(-2.0 / 3.0)
    }
}

impl InitialCondition {
    /// True when the generated vector does not depend on the stream.
    pub fn is_deterministic(&self) -> bool {
        match self {
            InitialCondition::AdversarialBlocks | InitialCondition::Explicit { .. } => true,
            InitialCondition::ScaledIid { theta: ThetaDist::Constant { .. }, .. } => true,
            InitialCondition::PointwiseMin { first, second } => first.is_deterministic() && second.is_deterministic(),
            _ => false,
        }
    }

    /// Checks every parameter that does not depend on a draw.
    pub fn validate(&self, m: usize) -> Result<()> {
        if m == 0 {
            return Err(Error::invalid("initial condition needs m ≥ 1"));
        }
        match self {
            InitialCondition::StationaryPiA { a } => ProductExponential::pi_a(*a, m).map(|_| ()),
            InitialCondition::FinitePiD => ProductExponential::pi_finite(m).map(|_| ()),
            InitialCondition::FinitePiAD { a } => ProductExponential::pi_a_finite(*a, m).map(|_| ()),
            InitialCondition::DominatingExp { rate } => {
                if *rate > 0.0 && rate.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("dominating_exp needs rate > 0, got {rate}")))
                }
            }
            InitialCondition::ScaledIid { lambda, theta } => {
                theta.validate()?;
                for i in 1..=m {
                    let l = lambda.value(i)?;
                    if !(l > 0.0 && l.is_finite()) {
                        return Err(Error::invalid(format!("scaled_iid needs λ_{i} > 0, got {l}")));
                    }
                }
                Ok(())
            }
            InitialCondition::PerturbedExp { .. } => self.perturbed_rates(m).map(|_| ()),
            InitialCondition::AdversarialBlocks => Ok(()),
            InitialCondition::Explicit { gaps } => {
                if gaps.len() < m {
                    return Err(Error::DimensionMismatch { expected: m, actual: gaps.len() });
                }
                GapVector::new(gaps[..m].to_vec()).map(|_| ())
            }
            InitialCondition::PointwiseMin { first, second } => {
                first.validate(m)?;
                second.validate(m)
            }
        }
    }

    fn perturbed_rates(&self, m: usize) -> Result<Vec<f64>> {
        let InitialCondition::PerturbedExp { a, lambda, beta } = self else {
            unreachable!("perturbed_rates called on {self:?}");
        };
        if !(*a >= 0.0 && a.is_finite()) {
            return Err(Error::invalid(format!("perturbed_exp needs a ≥ 0, got {a}")));
        }
        if !(*beta < 1.0) {
            return Err(Error::invalid(format!("perturbed_exp needs β < 1, got {beta}")));
        }
        (1..=m)
            .map(|i| {
                let base = 2.0 + i as f64 * a;
                let rate = base + lambda.value(i)?;
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::invalid(format!("perturbed_exp rate of gap {i} is {rate}")));
                }
                if rate < (1.0 - beta) * base {
                    return Err(Error::invalid(format!(
                        "perturbed_exp gap {i}: rate {rate} is below (1−β)(2+ia) = {}",
                        (1.0 - beta) * base
                    )));
                }
                Ok(rate)
            })
            .collect()
    }
}

/// Draws (or builds) an `m`-gap initial vector.
pub fn generate_initial(ic: &InitialCondition, m: usize, noise: &mut NoiseStream) -> Result<GapVector> {
    ic.validate(m)?;
    match ic {
        InitialCondition::StationaryPiA { a } => Ok(ProductExponential::pi_a(*a, m)?.sample(noise)),
        InitialCondition::FinitePiD => Ok(ProductExponential::pi_finite(m)?.sample(noise)),
        InitialCondition::FinitePiAD { a } => Ok(ProductExponential::pi_a_finite(*a, m)?.sample(noise)),
        InitialCondition::DominatingExp { rate } => Ok(ProductExponential::new(vec![*rate; m])?.sample(noise)),
        InitialCondition::ScaledIid { lambda, theta } => {
            let gaps = (1..=m)
                .map(|i| Ok(lambda.value(i)? * theta.draw(noise)))
                .collect::<Result<Vec<_>>>()?;
            GapVector::new(gaps)
        }
        InitialCondition::PerturbedExp { .. } => Ok(ProductExponential::new(ic.perturbed_rates(m)?)?.sample(noise)),
        InitialCondition::AdversarialBlocks => GapVector::new((1..=m).map(adversarial_block_value).collect()),
        InitialCondition::Explicit { gaps } => GapVector::new(gaps[..m].to_vec()),
        InitialCondition::PointwiseMin { first, second } => {
            let a = generate_initial(first, m, noise)?;
            let b = generate_initial(second, m, noise)?;
            a.min(&b)
        }
    }
}
