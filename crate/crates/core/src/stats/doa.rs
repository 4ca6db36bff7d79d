use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{format_float, simulate_observe, RunParams};
use crate::error::{Error, Result};
use crate::model::{generate_initial, InitialCondition, ModelSpec};
use crate::noise::NoiseStream;
use crate::reflect::SkorokhodSolver;
use crate::stats::ecdf::{ks_to_exponential, Ecdf};
use crate::stats::occupancy::{OccupancyAccumulator, DEFAULT_MIN_SPACING};

/// Discretisation settings of a domain-of-attraction run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoaParams {
    pub dt: f64,
    pub min_spacing: f64,
    #[serde(default)]
    pub solver: SkorokhodSolver,
}

impl DoaParams {
    pub fn new(dt: f64) -> Self {
        DoaParams { dt, min_spacing: DEFAULT_MIN_SPACING, solver: SkorokhodSolver::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoaRow {
    pub horizon: f64,
    pub coordinate: usize,
    pub ks_mean: f64,
    pub ks_se: f64,
    /// KS distance of the ECDF pooled over all members.
    pub ks_pooled: f64,
    pub member_ks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoaReport {
    pub a_target: f64,
    pub k: usize,
    pub t_grid: Vec<f64>,
    pub ensemble_size: usize,
    /// Horizon-major: all coordinates of `t_grid[0]` first.
    pub rows: Vec<DoaRow>,
    /// Per coordinate: `ks_mean` strictly decreasing along `t_grid`.
    pub trend: Vec<bool>,
    /// Per coordinate: `ks_pooled` strictly decreasing along `t_grid`.
    pub trend_pooled: Vec<bool>,
}

impl DoaReport {
    pub fn row(&self, h: usize, coordinate: usize) -> &DoaRow {
        &self.rows[h * self.k + coordinate - 1]
    }

    /// `ks_mean` of one coordinate along `t_grid`.
    pub fn series(&self, coordinate: usize) -> Vec<f64> {
        (0..self.t_grid.len()).map(|h| self.row(h, coordinate).ks_mean).collect()
    }

    pub fn pooled_series(&self, coordinate: usize) -> Vec<f64> {
        (0..self.t_grid.len()).map(|h| self.row(h, coordinate).ks_pooled).collect()
    }

    /// CSV `horizon,coordinate,ks_mean,ks_se,trend`; `trend` is the
    /// coordinate's verdict.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "horizon,coordinate,ks_mean,ks_se,trend")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                format_float(r.horizon),
                r.coordinate,
                format_float(r.ks_mean),
                format_float(r.ks_se),
                self.trend[r.coordinate - 1]
            )?;
        }
        Ok(())
    }
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `ensemble_size` independent trajectories (member `j` uses
/// `noise.split(j)` for both its initial draw and its increments) up to
/// `max(t_grid)` and compares the occupancy marginals of gaps `1..=k` with
/// `Exp(2 + i·a_target)`.
///
/// Members run on the current rayon pool and are merged in member order.
#[allow(clippy::too_many_arguments)]
pub fn doa_experiment(
    spec: &ModelSpec,
    init: &InitialCondition,
    a_target: f64,
    k: usize,
    t_grid: &[f64],
    ensemble_size: usize,
    params: &DoaParams,
    noise: &NoiseStream,
) -> Result<DoaReport> {
    if !(a_target >= 0.0 && a_target.is_finite()) {
        return Err(Error::invalid(format!("a_target must be non-negative, got {a_target}")));
    }
    if ensemble_size == 0 {
        return Err(Error::invalid("ensemble_size must be positive"));
    }
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::invalid("t_grid must hold positive horizons"));
    }
    let m = spec.num_gaps();
    if k == 0 || k > m {
        return Err(Error::OutOfRange(format!("k = {k} outside 1..={m}")));
    }
    init.validate(m)?;
    let horizon = t_grid.iter().copied().fold(0.0, f64::max);
    let sample_every = ((params.min_spacing / params.dt).round() as u64).max(1);
    let run = RunParams { dt: params.dt, horizon, sample_every, solver: params.solver };

    let members: Vec<OccupancyAccumulator> = (0..ensemble_size as u64)
        .into_par_iter()
        .map(|j| {
            let mut stream = noise.split(j);
            let gaps = generate_initial(init, m, &mut stream)?;
            let mut acc = OccupancyAccumulator::new(k, params.min_spacing)?;
            let mut push_err = None;
            simulate_observe(spec, &gaps, &run, &mut stream, |s| {
                if let Err(e) = acc.push(s.time, &s.gaps) {
                    push_err.get_or_insert(e);
                }
            })?;
            match push_err {
                Some(e) => Err(e),
                None => Ok(acc),
            }
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(t_grid.len() * k);
    for &h in t_grid {
        for i in 1..=k {
            let rate = 2.0 + i as f64 * a_target;
            let member_ks = members
                .iter()
                .map(|acc| ks_to_exponential(&Ecdf::new(acc.values(i, h).to_vec())?, rate))
                .collect::<Result<Vec<_>>>()?;
            let pooled: Vec<f64> = members.iter().flat_map(|acc| acc.values(i, h).iter().copied()).collect();
            let ks_pooled = ks_to_exponential(&Ecdf::new(pooled)?, rate)?;
            let (ks_mean, ks_se) = mean_se(&member_ks);
            rows.push(DoaRow { horizon: h, coordinate: i, ks_mean, ks_se, ks_pooled, member_ks });
        }
    }
    let mut report = DoaReport {
        a_target,
        k,
        t_grid: t_grid.to_vec(),
        ensemble_size,
        rows,
        trend: Vec::new(),
        trend_pooled: Vec::new(),
    };
    report.trend = (1..=k).map(|i| strictly_decreasing(&report.series(i))).collect();
    report.trend_pooled = (1..=k).map(|i| strictly_decreasing(&report.pooled_series(i))).collect();
    Ok(report)
}
