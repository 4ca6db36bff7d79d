//! Finite-d normalised sums behind the domain-of-attraction conditions.
//!
//! The conditions themselves are liminf/limsup statements, so nothing here
//! renders a verdict: each series is evaluated exactly at the requested `d`
//! and handed back for inspection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalising sequence `θ(d)` for the growth conditions (d1)–(d3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ThetaGrowth {
    Log,
    Constant { value: f64 },
    Power { exponent: f64 },
}

impl ThetaGrowth {
    pub fn at(&self, d: usize) -> f64 {
        let x = d as f64;
        match self {
            ThetaGrowth::Log => x.ln(),
            ThetaGrowth::Constant { value } => *value,
            ThetaGrowth::Power { exponent } => x.powf(*exponent),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Condition {
    /// `(√d log d)⁻¹ Σ_{i≤d} U_i ∧ V_i` against a `π` reference.
    Star,
    /// `(log log d / log d) Σ_{i≤d} |V_{a,i} − U_i|` and `U_d / (d V_{a,d})`
    /// against a `π_a` reference.
    StarA,
    /// The three growth sums with exponent `beta` and normaliser `theta`.
    Djo { beta: f64, theta: ThetaGrowth },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedSeries {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionDiagnostic {
    pub d_grid: Vec<usize>,
    pub series: Vec<NamedSeries>,
}

impl ConditionDiagnostic {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|s| s.name == name).map(|s| s.values.as_slice())
    }
}

/// Evaluates the requested normalised sums of `u` (and the coupled
/// `reference`) at every `d` in `d_grid`.
pub fn check_conditions(u: &[f64], reference: &[f64], d_grid: &[usize], which: &[Condition]) -> Result<ConditionDiagnostic> {
    let needs_reference = which.iter().any(|c| !matches!(c, Condition::Djo { .. }));
    let limit = if needs_reference { u.len().min(reference.len()) } else { u.len() };
    let mut prev = 0;
    for &d in d_grid {
        if d < 3 {
            return Err(Error::invalid(format!("d = {d}: diagnostics need d ≥ 3")));
        }
        if d > limit {
            return Err(Error::OutOfRange(format!("d = {d} exceeds the vector length {limit}")));
        }
        if d <= prev {
            return Err(Error::invalid("d_grid must be strictly increasing"));
        }
        prev = d;
    }
    let max_d = d_grid.last().copied().unwrap_or(0);

    // Prefix sums indexed by d (entry 0 is the empty sum).
    let prefix = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut out = Vec::with_capacity(max_d + 1);
        let mut acc = 0.0;
        out.push(acc);
        for i in 0..max_d {
            acc += f(i);
            out.push(acc);
        }
        out
    };

    let mut series = Vec::new();
    for cond in which {
        match *cond {
            Condition::Star => {
                let s = prefix(&|i| u[i].min(reference[i]));
                let values = d_grid
                    .iter()
                    .map(|&d| {
                        let x = d as f64;
                        s[d] / (x.sqrt() * x.ln())
                    })
                    .collect();
                series.push(NamedSeries { name: "star".into(), values });
            }
            Condition::StarA => {
                let s = prefix(&|i| (reference[i] - u[i]).abs());
                let l1 = d_grid
                    .iter()
                    .map(|&d| {
                        let x = d as f64;
                        x.ln().ln() / x.ln() * s[d]
                    })
                    .collect();
                let ratio = d_grid
                    .iter()
                    .map(|&d| u[d - 1] / (d as f64 * reference[d - 1]))
                    .collect();
                series.push(NamedSeries { name: "stara_l1".into(), values: l1 });
                series.push(NamedSeries { name: "stara_ratio".into(), values: ratio });
            }
            Condition::Djo { beta, theta } => {
                if !(1.0..2.0).contains(&beta) {
                    return Err(Error::invalid(format!("growth conditions need β ∈ [1, 2), got {beta}")));
                }
                let s = prefix(&|i| u[i]);
                let logs = prefix(&|i| (-u[i].ln()).max(0.0));
                let (mut d1, mut d2, mut d3) = (Vec::new(), Vec::new(), Vec::new());
                for &d in d_grid {
                    let x = d as f64;
                    let th = theta.at(d);
                    d1.push(s[d] / (x.powf(beta) * th));
                    d2.push(logs[d] / (x.powf(beta) * th));
                    d3.push(s[d] / (x.powf(beta * beta / (1.0 + beta)) * th));
                }
                series.push(NamedSeries { name: "d1".into(), values: d1 });
                series.push(NamedSeries { name: "d2".into(), values: d2 });
                series.push(NamedSeries { name: "d3".into(), values: d3 });
            }
        }
    }
    Ok(ConditionDiagnostic { d_grid: d_grid.to_vec(), series })
}

/// Smallest `D` with `u ≤ D·v` coordinatewise (`∞` if some `v_i = 0 < u_i`).
pub fn domination_factor(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), actual: v.len() });
    }
    Ok(u.iter()
        .zip(v)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| if *b > 0.0 { a / b } else { f64::INFINITY })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_vectors_have_zero_l1_series() {
        let u: Vec<f64> = (1..=200).map(|i| 1.0 / i as f64).collect();
        let diag = check_conditions(&u, &u, &[3, 10, 100, 200], &[Condition::StarA]).unwrap();
        assert!(diag.series("stara_l1").unwrap().iter().all(|&x| x == 0.0));
        let ratio = diag.series("stara_ratio").unwrap();
        assert_eq!(ratio[2], 1.0 / 100.0);
    }

    #[test]
    fn constant_half_star_value() {
        let u = vec![0.5; 100];
        let diag = check_conditions(&u, &u, &[100], &[Condition::Star]).unwrap();
        // 50 / (10 · ln 100)
        let expected = 1.085_736_204_758_129_6;
        let got = diag.series("star").unwrap()[0];
        assert!((got - expected).abs() < 1e-12 * expected, "{got}");
    }

    #[test]
    fn grid_errors() {
        let u = vec![1.0; 10];
        assert!(check_conditions(&u, &u, &[11], &[Condition::Star]).is_err());
        assert!(check_conditions(&u, &u, &[2], &[Condition::Star]).is_err());
        assert!(check_conditions(&u, &u, &[5, 4], &[Condition::Star]).is_err());
        let short = vec![1.0; 5];
        assert!(check_conditions(&u, &short, &[8], &[Condition::Star]).is_err());
    }

    #[test]
    fn djo_series_shapes() {
        let u = vec![1.0; 64];
        let diag = check_conditions(
            &u,
            &[],
            &[4, 16, 64],
            &[Condition::Djo { beta: 1.0, theta: ThetaGrowth::Log }],
        )
        .unwrap();
        let d1 = diag.series("d1").unwrap();
        assert!((d1[2] - 64.0 / (64.0 * 64f64.ln())).abs() < 1e-15);
        assert!(diag.series("d2").unwrap().iter().all(|&x| x == 0.0));
        assert_eq!(diag.series("d3").unwrap().len(), 3);
        assert!(check_conditions(&u, &[], &[4], &[Condition::Djo { beta: 2.0, theta: ThetaGrowth::Log }]).is_err());
    }

    #[test]
    fn domination() {
        assert_eq!(domination_factor(&[1.0, 2.0, 0.0], &[1.0, 0.5, 0.0]).unwrap(), 4.0);
        assert_eq!(domination_factor(&[1.0], &[0.0]).unwrap(), f64::INFINITY);
    }
}
