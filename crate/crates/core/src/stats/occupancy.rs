use crate::error::{Error, Result};
use crate::stats::ecdf::{ks_to_exponential, Ecdf};

/// Minimum time between two retained samples.
pub const DEFAULT_MIN_SPACING: f64 = 0.1;

/// Streaming collector of time-thinned gap samples.
///
/// Samples are offered in time order; one is retained when it lies at least
/// `min_spacing` after the previously retained one. Only the first `k` gaps
/// are kept.
#[derive(Debug, Clone)]
pub struct OccupancyAccumulator {
    k: usize,
    min_spacing: f64,
    times: Vec<f64>,
    columns: Vec<Vec<f64>>,
    offered: usize,
}

impl OccupancyAccumulator {
    pub fn new(k: usize, min_spacing: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        if !(min_spacing >= 0.0 && min_spacing.is_finite()) {
            return Err(Error::invalid(format!("min_spacing must be non-negative, got {min_spacing}")));
        }
        Ok(OccupancyAccumulator { k, min_spacing, times: Vec::new(), columns: vec![Vec::new(); k], offered: 0 })
    }

    pub fn push(&mut self, time: f64, gaps: &[f64]) -> Result<()> {
        if gaps.len() < self.k {
            return Err(Error::DimensionMismatch { expected: self.k, actual: gaps.len() });
        }
        self.offered += 1;
        if let Some(&last) = self.times.last() {
            if time < last {
                return Err(Error::invalid("samples must arrive in time order"));
            }
            // Grid times carry roundoff; allow a sliver below the spacing.
            if time - last < self.min_spacing * (1.0 - 1e-9) {
                return Ok(());
            }
        }
        self.times.push(time);
        for (col, &g) in self.columns.iter_mut().zip(gaps) {
            col.push(g);
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.times.len()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    fn prefix(&self, horizon: f64) -> usize {
        self.times.partition_point(|&t| t <= horizon * (1.0 + 1e-12))
    }

    /// Retained values of gap `i` (1-based) at times `≤ horizon`.
    pub fn values(&self, i: usize, horizon: f64) -> &[f64] {
        &self.columns[i - 1][..self.prefix(horizon)]
    }

    pub fn finish(&self, t_grid: &[f64]) -> Result<OccupancyEstimate> {
        let Some(end) = self.last_time() else {
            return Err(Error::EmptySample);
        };
        if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("t_grid must be strictly increasing"));
        }
        if let Some(&t) = t_grid.iter().find(|&&t| t > end * (1.0 + 1e-12) + self.min_spacing) {
            return Err(Error::OutOfRange(format!("horizon {t} is beyond the trajectory end {end}")));
        }
        let ecdfs = t_grid
            .iter()
            .map(|&h| (1..=self.k).map(|i| Ecdf::new(self.values(i, h).to_vec())).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(OccupancyEstimate {
            k: self.k,
            t_grid: t_grid.to_vec(),
            min_spacing: self.min_spacing,
            thinning: self.offered as f64 / self.retained() as f64,
            ecdfs,
        })
    }
}

/// Per-horizon, per-coordinate ECDFs of the time-averaged occupancy measure.
#[derive(Debug, Clone)]
pub struct OccupancyEstimate {
    pub k: usize,
    pub t_grid: Vec<f64>,
    pub min_spacing: f64,
    /// Offered samples per retained sample.
    pub thinning: f64,
    ecdfs: Vec<Vec<Ecdf>>,
}

impl OccupancyEstimate {
    /// ECDF of gap `i` (1-based) at the `h`-th horizon.
    pub fn ecdf(&self, h: usize, i: usize) -> &Ecdf {
        &self.ecdfs[h][i - 1]
    }

    /// KS distances to `Exp(2 + i·a)`, indexed `[horizon][coordinate]`.
    pub fn ks_to_pi_a(&self, a: f64) -> Result<Vec<Vec<f64>>> {
        self.ecdfs
            .iter()
            .map(|row| row.iter().enumerate().map(|(i, e)| ks_to_exponential(e, 2.0 + (i + 1) as f64 * a)).collect())
            .collect()
    }
}

/// Occupancy ECDFs from sampled `(time, gaps)` pairs in time order.
pub fn occupancy(times: &[f64], gaps: &[Vec<f64>], k: usize, t_grid: &[f64], min_spacing: f64) -> Result<OccupancyEstimate> {
    if times.len() != gaps.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), actual: gaps.len() });
    }
    let mut acc = OccupancyAccumulator::new(k, min_spacing)?;
    for (t, g) in times.iter().zip(gaps) {
        acc.push(*t, g)?;
    }
    acc.finish(t_grid)
}
