//! Excursion bookkeeping on sampled difference paths.
//!
//! Everything here works on the sample grid: a coordinate "hits zero" at the
//! first sample with `ΔZ ≤ zero_threshold`, and crossings between samples are
//! not reconstructed.
//!
//! For a monitored coordinate `k` and level `ε`:
//!
//! * `T^k_0(s) = s` and `T^k_j(s)` is the first time `≥ T^k_{j−1}(s)` at
//!   which `ΔZ_{k−j+1}` hits zero; `𝒯_k(s) = T^k_k(s)`.
//! * `σ_1` is the first time `ΔZ_k ≥ ε`; `σ_{2j+2}` is the first zero of
//!   `ΔZ_k` at or after `𝒯_k(σ_{2j+1})`; `σ_{2j+3}` is the next time
//!   `ΔZ_k ≥ ε`.
//! * `N_T` counts the opening times `σ_{2j+1} ≤ T`.

use std::io::Write;

use serde::Serialize;

use crate::coupling::CoupledRecord;
use crate::error::{Error, Result};
use crate::reflect::SkorokhodSolver;

/// Default zero threshold: ten times the default solver tolerance.
pub fn default_zero_threshold() -> f64 {
    10.0 * SkorokhodSolver::default().tolerance
}

/// Sampled path of `ΔZ`, one row per sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaPath {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    sums: Vec<f64>,
}

impl DeltaPath {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), actual: values.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("sample times must be strictly increasing"));
        }
        if let Some(first) = values.first() {
            let width = first.len();
            if let Some(bad) = values.iter().find(|v| v.len() != width) {
                return Err(Error::DimensionMismatch { expected: width, actual: bad.len() });
            }
        }
        let sums = values.iter().map(|v| v.iter().sum()).collect();
        Ok(DeltaPath { times, values, sums })
    }

    /// `ΔZ = Z^upper − Z^lower` from a coupled record.
    pub fn from_record(record: &CoupledRecord) -> Self {
        let values = record
            .gaps_upper
            .iter()
            .zip(&record.gaps_lower)
            .map(|(u, l)| u.iter().zip(l).map(|(a, b)| a - b).collect())
            .collect();
        DeltaPath { times: record.times.clone(), values, sums: record.sum_dz.clone() }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn num_coordinates(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// `ΔZ_j` at sample `n`, `j` 1-based.
    pub fn value(&self, n: usize, j: usize) -> f64 {
        self.values[n][j - 1]
    }

    /// `Σ_j ΔZ_j` at sample `n`.
    pub fn sum(&self, n: usize) -> f64 {
        self.sums[n]
    }

    fn first_index_at_or_after(&self, s: f64) -> Option<usize> {
        let n = self.times.partition_point(|&t| t < s);
        (n < self.times.len()).then_some(n)
    }

    fn first_zero(&self, from: usize, j: usize, zero_threshold: f64) -> Option<usize> {
        (from..self.len()).find(|&n| self.value(n, j) <= zero_threshold)
    }

    fn first_above(&self, from: usize, j: usize, level: f64) -> Option<usize> {
        (from..self.len()).find(|&n| self.value(n, j) >= level)
    }

    /// Sample indices of `T^k_1..T^k_k` starting from sample `start`; `None`
    /// from the first coordinate that never hits zero.
    fn chain_indices(&self, k: usize, start: usize, zero_threshold: f64) -> Vec<Option<usize>> {
        let mut out = Vec::with_capacity(k);
        let mut cursor = Some(start);
        for j in 1..=k {
            cursor = cursor.and_then(|c| self.first_zero(c, k - j + 1, zero_threshold));
            out.push(cursor);
        }
        out
    }

    fn time_or_inf(&self, n: Option<usize>) -> f64 {
        n.map_or(f64::INFINITY, |n| self.times[n])
    }
}

fn check_k(path: &DeltaPath, k: usize) -> Result<()> {
    if k == 0 || k > path.num_coordinates() {
        return Err(Error::OutOfRange(format!("k = {k} outside 1..={}", path.num_coordinates())));
    }
    Ok(())
}

/// `T^k_1(s), …, T^k_k(s)`; `+∞` where not attained within the record.
pub fn t_chain(path: &DeltaPath, k: usize, s: f64, zero_threshold: f64) -> Result<Vec<f64>> {
    check_k(path, k)?;
    let start = path
        .first_index_at_or_after(s)
        .ok_or_else(|| Error::OutOfRange(format!("start time {s} is beyond the record")))?;
    Ok(path.chain_indices(k, start, zero_threshold).into_iter().map(|n| path.time_or_inf(n)).collect())
}

/// One excursion opened at `σ_{2j+1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Excursion {
    pub sigma_open: f64,
    /// `None` when the excursion is still open at the end of the record.
    pub sigma_close: Option<f64>,
    pub chain: Vec<f64>,
    /// `Σ ΔZ(σ_close) − Σ ΔZ(σ_open)` for completed excursions.
    pub decrement: Option<f64>,
}

impl Excursion {
    pub fn length(&self) -> Option<f64> {
        self.sigma_close.map(|c| c - self.sigma_open)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionRecord {
    pub k: usize,
    pub epsilon: f64,
    pub horizon: f64,
    /// End of the underlying record.
    pub record_end: f64,
    /// `σ_1, σ_2, …` as found within the record.
    pub sigma_times: Vec<f64>,
    pub excursions: Vec<Excursion>,
    pub n_t: usize,
}

impl ExcursionRecord {
    pub fn t_chains(&self) -> impl Iterator<Item = &[f64]> {
        self.excursions.iter().map(|e| e.chain.as_slice())
    }

    /// Decrements of the completed excursions.
    pub fn decrements(&self) -> Vec<f64> {
        self.excursions.iter().filter_map(|e| e.decrement).collect()
    }

    pub fn completed(&self) -> impl Iterator<Item = &Excursion> {
        self.excursions.iter().filter(|e| e.sigma_close.is_some())
    }

    /// One JSON object per excursion:
    /// `{k, eps, sigma_open, sigma_close, decrement, chain}`. Unattained
    /// times are written as `null`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.excursions {
            let chain: Vec<Option<f64>> = e.chain.iter().map(|&t| t.is_finite().then_some(t)).collect();
            let obj = serde_json::json!({
                "k": self.k,
                "eps": self.epsilon,
                "sigma_open": e.sigma_open,
                "sigma_close": e.sigma_close,
                "decrement": e.decrement,
                "chain": chain,
            });
            writeln!(w, "{obj}")?;
        }
        Ok(())
    }
}

/// Alternating excursion times of coordinate `k` above level `epsilon`.
pub fn detect_excursions(path: &DeltaPath, k: usize, epsilon: f64, horizon: f64, zero_threshold: f64) -> Result<ExcursionRecord> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut rec = ExcursionRecord {
        k,
        epsilon,
        horizon,
        record_end: path.times.last().copied().unwrap_or(0.0),
        sigma_times: Vec::new(),
        excursions: Vec::new(),
        n_t: 0,
    };
    if path.is_empty() {
        return Ok(rec);
    }
    check_k(path, k)?;

    let mut cursor = 0;
    while let Some(open) = path.first_above(cursor, k, epsilon) {
        let chain = path.chain_indices(k, open, zero_threshold);
        let close = chain[k - 1].and_then(|c| path.first_zero(c, k, zero_threshold));
        rec.sigma_times.push(path.times[open]);
        rec.excursions.push(Excursion {
            sigma_open: path.times[open],
            sigma_close: close.map(|c| path.times[c]),
            chain: chain.iter().map(|&n| path.time_or_inf(n)).collect(),
            decrement: close.map(|c| path.sum(c) - path.sum(open)),
        });
        match close {
            Some(c) => {
                rec.sigma_times.push(path.times[c]);
                cursor = c;
            }
            None => break,
        }
    }
    rec.n_t = rec.excursions.iter().filter(|e| e.sigma_open <= horizon).count();
    Ok(rec)
}

/// `48 D² k (k+1)² ln T`.
pub fn long_excursion_threshold(d: f64, k: usize, horizon: f64) -> f64 {
    let k = k as f64;
    48.0 * d * d * k * (k + 1.0) * (k + 1.0) * horizon.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub threshold: f64,
    pub runs: usize,
    pub completed: usize,
    pub long_completed: usize,
    /// Completed excursions longer than the threshold, over completed ones.
    pub fraction: f64,
    /// Runs with an excursion opened before `T` that is (or, if still open
    /// at the end of the record, has been running) longer than the threshold.
    pub runs_with_long: usize,
    pub run_frequency: f64,
    pub run_frequency_se: f64,
    pub longest: f64,
    pub max_n_t: usize,
    /// Empirical `P(N_T > n) + 5 k n T⁻²` at `n = max_n_t`.
    pub bound: f64,
}

pub fn excursion_tail_stats(records: &[ExcursionRecord], d: f64, k: usize, horizon: f64) -> TailReport {
    let threshold = long_excursion_threshold(d, k, horizon);
    let mut completed = 0;
    let mut long_completed = 0;
    let mut runs_with_long = 0;
    let mut longest = 0.0f64;
    for rec in records {
        let mut any_long = false;
        for e in rec.excursions.iter().filter(|e| e.sigma_open <= horizon) {
            let len = e.length().unwrap_or(rec.record_end - e.sigma_open);
            if e.sigma_close.is_some() {
                completed += 1;
                if len > threshold {
                    long_completed += 1;
                }
            }
            longest = longest.max(len);
            any_long |= len > threshold;
        }
        runs_with_long += usize::from(any_long);
    }
    let max_n_t = records.iter().map(|r| r.n_t).max().unwrap_or(0);
    let runs = records.len();
    let exceed = records.iter().filter(|r| r.n_t > max_n_t).count();
    let p_exceed = if runs == 0 { 0.0 } else { exceed as f64 / runs as f64 };
    let bound = p_exceed + 5.0 * k as f64 * max_n_t as f64 / (horizon * horizon);
    let run_frequency = if runs == 0 { 0.0 } else { runs_with_long as f64 / runs as f64 };
    let run_frequency_se = if runs == 0 { 0.0 } else { (run_frequency * (1.0 - run_frequency) / runs as f64).sqrt() };
    TailReport {
        threshold,
        runs,
        completed,
        long_completed,
        fraction: if completed == 0 { 0.0 } else { long_completed as f64 / completed as f64 },
        runs_with_long,
        run_frequency,
        run_frequency_se,
        longest,
        max_n_t,
        bound,
    }
}
