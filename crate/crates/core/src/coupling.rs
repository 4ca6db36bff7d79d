//! Synchronous coupling of two ranked systems.
//!
//! Both copies advance in lockstep and read the same increment buffer, so the
//! rank-`i` Brownian motion is literally shared. Differences are always
//! `upper − lower`: `ΔZ = Z^upper − Z^lower` and `ΔL = L^upper − L^lower`.
//!
//! For two copies of the same model the drift and noise contributions cancel
//! in `Σ_i ΔZ_i`, and summing `R·ΔL` telescopes, which gives the exact
//! identity `Σ ΔZ(t) = Σ ΔZ(0) + ½ΔL_1(t) + ½ΔL_m(t)` checked by
//! [`verify_l1_identity`].

use std::io::Write;

use serde::Serialize;

use crate::engine::{format_float, RankedSystem, RunParams};
use crate::error::{Error, Result};
use crate::model::{GapVector, ModelSpec};
use crate::noise::NoiseStream;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledRecord {
    pub times: Vec<f64>,
    pub gaps_lower: Vec<Vec<f64>>,
    pub gaps_upper: Vec<Vec<f64>>,
    /// `Σ_j ΔZ_j(t)` per sample time.
    pub sum_dz: Vec<f64>,
    /// `ΔL_1(t)` per sample time.
    pub dl_first: Vec<f64>,
    /// `ΔL_m(t)` per sample time.
    pub dl_last: Vec<f64>,
    /// `max_i (Z^lower_i − Z^upper_i)₊` per sample time.
    pub violation: Vec<f64>,
    /// Largest `(Z^lower − Z^upper)₊` over every step, not only sample times.
    pub monotone_violation: f64,
    /// Largest one-step increase of any `ΔL_i`; nonpositive for ordered copies
    /// in continuous time.
    pub max_dl_increase: f64,
    /// `ΔL` vector at the end of the run.
    pub final_dl: Vec<f64>,
    /// Sum over steps of both copies' solver residuals.
    pub accumulated_residual: f64,
    pub steps: u64,
}

impl CoupledRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn num_gaps(&self) -> usize {
        self.final_dl.len()
    }

    /// Path of `ΔZ_j(t)` for gap `j` (1-based).
    pub fn delta_gap(&self, j: usize) -> Vec<f64> {
        self.gaps_upper.iter().zip(&self.gaps_lower).map(|(u, l)| u[j - 1] - l[j - 1]).collect()
    }

    /// Largest violation over sample times only.
    pub fn sampled_violation(&self) -> f64 {
        self.violation.iter().copied().fold(0.0, f64::max)
    }

    /// CSV `time,sum_dz,dl1,dlm,violation`, optionally followed by
    /// `lower_1..lower_m,upper_1..upper_m`.
    pub fn write_csv<W: Write>(&self, mut w: W, full_gaps: bool) -> Result<()> {
        let m = self.num_gaps();
        let mut header = String::from("time,sum_dz,dl1,dlm,violation");
        if full_gaps {
            for i in 1..=m {
                header.push_str(&format!(",lower_{i}"));
            }
            for i in 1..=m {
                header.push_str(&format!(",upper_{i}"));
            }
        }
        writeln!(w, "{header}")?;
        for n in 0..self.len() {
            let mut fields = vec![
                format_float(self.times[n]),
                format_float(self.sum_dz[n]),
                format_float(self.dl_first[n]),
                format_float(self.dl_last[n]),
                format_float(self.violation[n]),
            ];
            if full_gaps {
                fields.extend(self.gaps_lower[n].iter().chain(&self.gaps_upper[n]).map(|&x| format_float(x)));
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

fn violation_of(lower: &[f64], upper: &[f64]) -> f64 {
    lower.iter().zip(upper).map(|(l, u)| (l - u).max(0.0)).fold(0.0, f64::max)
}

/// Couples two (possibly different) models with the same number of particles.
pub fn couple_models(
    spec_lower: &ModelSpec,
    spec_upper: &ModelSpec,
    init_lower: &GapVector,
    init_upper: &GapVector,
    params: &RunParams,
    noise: &mut NoiseStream,
) -> Result<CoupledRecord> {
    if spec_lower.num_particles() != spec_upper.num_particles() {
        return Err(Error::DimensionMismatch { expected: spec_lower.num_particles(), actual: spec_upper.num_particles() });
    }
    let total = params.num_steps()?;
    let mut lower = RankedSystem::new(spec_lower, init_lower, params.dt, params.solver)?;
    let mut upper = RankedSystem::new(spec_upper, init_upper, params.dt, params.solver)?;
    let m = spec_lower.num_gaps();

    let capacity = (total / params.sample_every) as usize + 2;
    let mut rec = CoupledRecord {
        times: Vec::with_capacity(capacity),
        gaps_lower: Vec::with_capacity(capacity),
        gaps_upper: Vec::with_capacity(capacity),
        sum_dz: Vec::with_capacity(capacity),
        dl_first: Vec::with_capacity(capacity),
        dl_last: Vec::with_capacity(capacity),
        violation: Vec::with_capacity(capacity),
        monotone_violation: 0.0,
        max_dl_increase: f64::NEG_INFINITY,
        final_dl: vec![0.0; m],
        accumulated_residual: 0.0,
        steps: total,
    };

    let record = |rec: &mut CoupledRecord, lower: &RankedSystem, upper: &RankedSystem| {
        let (l, u) = (lower.state(), upper.state());
        rec.times.push(l.time);
        rec.sum_dz.push(u.gaps.iter().sum::<f64>() - l.gaps.iter().sum::<f64>());
        rec.dl_first.push(u.cum_local_times[0] - l.cum_local_times[0]);
        rec.dl_last.push(u.cum_local_times[m - 1] - l.cum_local_times[m - 1]);
        rec.violation.push(violation_of(&l.gaps, &u.gaps));
        rec.gaps_lower.push(l.gaps.clone());
        rec.gaps_upper.push(u.gaps.clone());
    };

    rec.monotone_violation = violation_of(&lower.state().gaps, &upper.state().gaps);
    record(&mut rec, &lower, &upper);
    let mut increments = vec![0.0; spec_lower.num_particles()];
    for step in 1..=total {
        noise.fill_increments(params.dt, &mut increments);
        lower.step(&increments)?;
        upper.step(&increments)?;
        rec.accumulated_residual += lower.last_residual() + upper.last_residual();
        let (dl_l, dl_u) = (lower.last_local_time_increments(), upper.last_local_time_increments());
        for (a, b) in dl_u.iter().zip(dl_l) {
            rec.max_dl_increase = rec.max_dl_increase.max(a - b);
        }
        rec.monotone_violation = rec.monotone_violation.max(violation_of(&lower.state().gaps, &upper.state().gaps));
        if params.is_sample_step(step, total) {
            record(&mut rec, &lower, &upper);
        }
    }
    if total == 0 {
        rec.max_dl_increase = 0.0;
    }
    for i in 0..m {
        rec.final_dl[i] = upper.state().cum_local_times[i] - lower.state().cum_local_times[i];
    }
    Ok(rec)
}

/// Synchronous coupling of two copies of one model.
pub fn couple(
    spec: &ModelSpec,
    init_lower: &GapVector,
    init_upper: &GapVector,
    params: &RunParams,
    noise: &mut NoiseStream,
) -> Result<CoupledRecord> {
    couple_models(spec, spec, init_lower, init_upper, params, noise)
}

/// Outcome of [`verify_l1_identity`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1IdentityCheck {
    pub max_defect: f64,
    /// `½|ΔL_m(t)|` per sample time.
    pub boundary: Vec<f64>,
}

/// Largest defect of `Σ ΔZ(t) − Σ ΔZ(0) − ½ΔL_1(t) − ½ΔL_m(t)` over the
/// sample times. Only meaningful when both copies run the same model.
pub fn verify_l1_identity(record: &CoupledRecord) -> L1IdentityCheck {
    let Some(&start) = record.sum_dz.first() else {
        return L1IdentityCheck { max_defect: 0.0, boundary: Vec::new() };
    };
    let mut max_defect = 0.0f64;
    let mut boundary = Vec::with_capacity(record.len());
    for n in 0..record.len() {
        let defect = record.sum_dz[n] - start - 0.5 * record.dl_first[n] - 0.5 * record.dl_last[n];
        max_defect = max_defect.max(defect.abs());
        boundary.push(0.5 * record.dl_last[n].abs());
    }
    L1IdentityCheck { max_defect, boundary }
}

/// Couples the model with bottom drift 1 (lower) against the same model with
/// bottom drift `gamma ≤ 1` (upper), from the same initial gaps.
pub fn drift_domination_run(
    spec: &ModelSpec,
    init: &GapVector,
    gamma: f64,
    params: &RunParams,
    noise: &mut NoiseStream,
) -> Result<CoupledRecord> {
    if !(gamma <= 1.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("drift domination needs gamma <= 1, got {gamma}")));
    }
    couple_models(&spec.with_bottom_drift(1.0), &spec.with_bottom_drift(gamma), init, init, params, noise)
}
