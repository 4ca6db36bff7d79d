//! Time stepping of finite ranked diffusions.
//!
//! [`RankedSystem`] is the main engine: it advances the gap vector by a
//! projected Euler step and resolves collisions with the Skorokhod solver,
//! so collision local times come out as first-class quantities. Rank `i`
//! receives drift `a_i`, diffusion `b_i` and the increment from rank `i`'s
//! noise stream. [`simulate_unranked`] is an independent route through named
//! particles that are re-sorted every step; it yields no local times and is
//! only used to cross-check laws.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GapVector, ModelSpec};
use crate::noise::NoiseStream;
use crate::reflect::{SkorokhodSolver, SolverScratch};

/// One time slice of the ranked system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapState {
    pub time: f64,
    pub gaps: Vec<f64>,
    pub cum_local_times: Vec<f64>,
    pub bottom_position: f64,
}

impl GapState {
    /// State at time 0 with the bottom particle at 0 and no local time.
    pub fn initial(gaps: &GapVector) -> Self {
        GapState {
            time: 0.0,
            gaps: gaps.as_slice().to_vec(),
            cum_local_times: vec![0.0; gaps.len()],
            bottom_position: 0.0,
        }
    }

    /// Ranked positions `Y_(0) ≤ … ≤ Y_(m)`.
    pub fn positions(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.gaps.len() + 1);
        let mut acc = self.bottom_position;
        out.push(acc);
        for g in &self.gaps {
            acc += g;
            out.push(acc);
        }
        out
    }

    /// Position of the rank-`k` particle.
    pub fn ranked_position(&self, k: usize) -> f64 {
        self.bottom_position + self.gaps[..k].iter().sum::<f64>()
    }
}

/// Step size, horizon, sampling stride and solver settings of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub dt: f64,
    pub horizon: f64,
    pub sample_every: u64,
    #[serde(default)]
    pub solver: SkorokhodSolver,
}

impl RunParams {
    pub fn new(dt: f64, horizon: f64, sample_every: u64) -> Self {
        RunParams { dt, horizon, sample_every, solver: SkorokhodSolver::default() }
    }

    /// Number of steps `round(horizon / dt)`.
    pub fn num_steps(&self) -> Result<u64> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be non-negative, got {}", self.horizon)));
        }
        if self.sample_every == 0 {
            return Err(Error::invalid("sample_every must be positive"));
        }
        let n = (self.horizon / self.dt).round();
        if n > (u64::MAX / 2) as f64 {
            return Err(Error::invalid("horizon/dt overflows the step counter"));
        }
        Ok(n as u64)
    }

    /// Whether `step` (of `total`) is recorded.
    pub fn is_sample_step(&self, step: u64, total: u64) -> bool {
        step.is_multiple_of(self.sample_every) || step == total
    }
}

/// Mutable ranked system with preallocated buffers.
#[derive(Debug, Clone)]
pub struct RankedSystem {
    spec: ModelSpec,
    solver: SkorokhodSolver,
    dt: f64,
    step: u64,
    state: GapState,
    drift_increments: Vec<f64>,
    tentative: Vec<f64>,
    local_time_increments: Vec<f64>,
    scratch: SolverScratch,
    last_iterations: usize,
    last_residual: f64,
}

impl RankedSystem {
    pub fn new(spec: &ModelSpec, init: &GapVector, dt: f64, solver: SkorokhodSolver) -> Result<Self> {
        if init.len() != spec.num_gaps() {
            return Err(Error::DimensionMismatch { expected: spec.num_gaps(), actual: init.len() });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        let a = spec.rank_drifts();
        let drift_increments = a.windows(2).map(|w| (w[1] - w[0]) * dt).collect();
        let m = spec.num_gaps();
        Ok(RankedSystem {
            spec: spec.clone(),
            solver,
            dt,
            step: 0,
            state: GapState::initial(init),
            drift_increments,
            tentative: vec![0.0; m],
            local_time_increments: vec![0.0; m],
            scratch: SolverScratch::default(),
            last_iterations: 0,
            last_residual: 0.0,
        })
    }

    pub fn state(&self) -> &GapState {
        &self.state
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `ΔL` of the most recent step.
    pub fn last_local_time_increments(&self) -> &[f64] {
        &self.local_time_increments
    }

    pub fn last_residual(&self) -> f64 {
        self.last_residual
    }

    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }

    /// Advances one step with per-rank increments `ξ_0..ξ_m` (already scaled
    /// by `√dt`).
    pub fn step(&mut self, increments: &[f64]) -> Result<()> {
        let m = self.state.gaps.len();
        if increments.len() != m + 1 {
            return Err(Error::DimensionMismatch { expected: m + 1, actual: increments.len() });
        }
        let b = self.spec.rank_diffusions();
        for i in 0..m {
            self.tentative[i] =
                self.state.gaps[i] + self.drift_increments[i] + (b[i + 1] * increments[i + 1] - b[i] * increments[i]);
        }
        let (iterations, residual) = self
            .solver
            .solve_into(&self.tentative, &mut self.state.gaps, &mut self.local_time_increments, &mut self.scratch)
            .map_err(|e| Error::StepFailed { step: self.step + 1, source: Box::new(e) })?;
        self.last_iterations = iterations;
        self.last_residual = residual;
        for (l, d) in self.state.cum_local_times.iter_mut().zip(&self.local_time_increments) {
            *l += d;
        }
        self.state.bottom_position +=
            self.spec.bottom_drift() * self.dt + b[0] * increments[0] - 0.5 * self.local_time_increments[0];
        self.step += 1;
        self.state.time = self.step as f64 * self.dt;
        Ok(())
    }
}

/// Pure single step: returns the successor of `state`.
pub fn step_ranked(
    state: &GapState,
    spec: &ModelSpec,
    dt: f64,
    increments: &[f64],
    solver: SkorokhodSolver,
) -> Result<GapState> {
    let gaps = GapVector::new(state.gaps.clone())?;
    let mut sys = RankedSystem::new(spec, &gaps, dt, solver)?;
    sys.state.cum_local_times.clone_from(&state.cum_local_times);
    sys.state.bottom_position = state.bottom_position;
    sys.step(increments)?;
    let mut out = sys.state;
    out.time = state.time + dt;
    Ok(out)
}

/// Runs the ranked engine, calling `observe` at every sample step
/// (step 0, multiples of `sample_every`, and the final step).
pub fn simulate_observe<F>(spec: &ModelSpec, init: &GapVector, params: &RunParams, noise: &mut NoiseStream, mut observe: F) -> Result<GapState>
where
    F: FnMut(&GapState),
{
    let total = params.num_steps()?;
    let mut sys = RankedSystem::new(spec, init, params.dt, params.solver)?;
    let mut increments = vec![0.0; spec.num_particles()];
    observe(sys.state());
    for step in 1..=total {
        noise.fill_increments(params.dt, &mut increments);
        sys.step(&increments)?;
        if params.is_sample_step(step, total) {
            observe(sys.state());
        }
    }
    Ok(sys.state)
}

/// Sampled ranked trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub snapshots: Vec<GapState>,
}

impl Trajectory {
    pub fn final_state(&self) -> &GapState {
        self.snapshots.last().expect("a trajectory always holds its initial state")
    }

    /// Cumulative local time per gap at the end of the run.
    pub fn total_local_times(&self) -> &[f64] {
        &self.final_state().cum_local_times
    }

    /// Time average of each gap over the snapshots with `time ≥ burn_in`.
    pub fn gap_means(&self, burn_in: f64) -> Vec<f64> {
        let m = self.snapshots[0].gaps.len();
        let mut sums = vec![0.0; m];
        let mut n = 0usize;
        for s in self.snapshots.iter().filter(|s| s.time >= burn_in) {
            for (acc, g) in sums.iter_mut().zip(&s.gaps) {
                *acc += g;
            }
            n += 1;
        }
        sums.iter().map(|s| s / n as f64).collect()
    }

    /// CSV with header `time,gap_1..gap_m,L_1..L_m,bottom`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let m = self.snapshots[0].gaps.len();
        let mut header = vec!["time".to_string()];
        header.extend((1..=m).map(|i| format!("gap_{i}")));
        header.extend((1..=m).map(|i| format!("L_{i}")));
        header.push("bottom".into());
        writeln!(w, "{}", header.join(","))?;
        for s in &self.snapshots {
            let mut row = String::with_capacity(24 * (2 * m + 2));
            push_float(&mut row, s.time);
            for x in s.gaps.iter().chain(&s.cum_local_times) {
                row.push(',');
                push_float(&mut row, *x);
            }
            row.push(',');
            push_float(&mut row, s.bottom_position);
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// Floats in exports carry 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_float(buf: &mut String, x: f64) {
    use std::fmt::Write as _;
    let _ = write!(buf, "{x:.16e}");
}

pub fn simulate(spec: &ModelSpec, init: &GapVector, params: &RunParams, noise: &mut NoiseStream) -> Result<Trajectory> {
    let mut snapshots = Vec::new();
    simulate_observe(spec, init, params, noise, |s| snapshots.push(s.clone()))?;
    Ok(Trajectory { snapshots })
}

/// Sorted snapshot of the unranked engine.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedSnapshot {
    pub time: f64,
    /// Sorted positions `Y_(0) ≤ … ≤ Y_(m)`.
    pub positions: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Positions by particle name.
    pub named: Vec<f64>,
}

/// Named particles `Y_0..Y_m`, each driven by its own noise stream; the
/// particle currently at rank `j` (ties to the lowest index) moves with
/// drift `a_j` and diffusion `b_j`. Calls `observe` with the ranked
/// configuration at every sample step.
pub fn simulate_unranked_observe<F>(
    spec: &ModelSpec,
    init_positions: &[f64],
    params: &RunParams,
    noise: &mut NoiseStream,
    mut observe: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&RankedSnapshot),
{
    let n = spec.num_particles();
    if init_positions.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: init_positions.len() });
    }
    if init_positions.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("initial positions must be finite"));
    }
    let total = params.num_steps()?;
    let a = spec.rank_drifts();
    let b = spec.rank_diffusions();
    let mut y = init_positions.to_vec();
    let mut order: Vec<usize> = (0..n).collect();
    let by_rank = |y: &[f64], order: &mut Vec<usize>| {
        // Insertion sort: the order changes little between steps.
        for i in 1..order.len() {
            let mut j = i;
            while j > 0 {
                let (p, q) = (order[j - 1], order[j]);
                if y[p] > y[q] || (y[p] == y[q] && p > q) {
                    order.swap(j - 1, j);
                    j -= 1;
                } else {
                    break;
                }
            }
        }
    };
    let snapshot = |time: f64, y: &[f64], order: &[usize]| {
        let positions: Vec<f64> = order.iter().map(|&p| y[p]).collect();
        let gaps = positions.windows(2).map(|w| w[1] - w[0]).collect();
        RankedSnapshot { time, positions, gaps, named: y.to_vec() }
    };

    by_rank(&y, &mut order);
    observe(&snapshot(0.0, &y, &order));
    let mut xi = vec![0.0; n];
    for step in 1..=total {
        noise.fill_increments(params.dt, &mut xi);
        for (rank, &p) in order.iter().enumerate() {
            y[p] += a[rank] * params.dt + b[rank] * xi[p];
        }
        by_rank(&y, &mut order);
        if params.is_sample_step(step, total) {
            observe(&snapshot(step as f64 * params.dt, &y, &order));
        }
    }
    Ok(y)
}

pub fn simulate_unranked(spec: &ModelSpec, init_positions: &[f64], params: &RunParams, noise: &mut NoiseStream) -> Result<Vec<RankedSnapshot>> {
    let mut out = Vec::new();
    simulate_unranked_observe(spec, init_positions, params, noise, |s| out.push(s.clone()))?;
    Ok(out)
}
