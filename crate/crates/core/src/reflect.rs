//! Reflection structure of the gap process.
//!
//! Collisions push gaps along the columns of the tridiagonal matrix `R` with
//! unit diagonal and `−½` off-diagonals: local time at gap `i` opens gap `i`
//! by one unit and closes each neighbour by one half. One time step of the
//! ranked engine reduces to the complementarity problem
//!
//! ```text
//! new = tent + R·ΔL ≥ 0,   ΔL ≥ 0,   new_i · ΔL_i = 0
//! ```
//!
//! `R` is a symmetric M-matrix, so the problem has a unique solution which is
//! also the least fixed point of `ΔL_i ← max(0, −tent_i + ½ΔL_{i−1} + ½ΔL_{i+1})`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `m×m` reflection matrix, row-major.
pub fn reflection_matrix(m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| match i.abs_diff(j) {
                    0 => 1.0,
                    1 => -0.5,
                    _ => 0.0,
                })
                .collect()
        })
        .collect()
}

/// Closed-form inverse: `(R⁻¹)_{ij} = 2 (i∧j) (1 − (i∨j)/(m+1))`, 1-based.
pub fn reflection_matrix_inverse(m: usize) -> Vec<Vec<f64>> {
    let n = (m + 1) as f64;
    (1..=m)
        .map(|i| {
            (1..=m)
                .map(|j| 2.0 * i.min(j) as f64 * (1.0 - i.max(j) as f64 / n))
                .collect()
        })
        .collect()
}

/// `R·x` without forming `R`.
pub fn apply_reflection(x: &[f64]) -> Vec<f64> {
    let m = x.len();
    (0..m)
        .map(|i| {
            let left = if i > 0 { x[i - 1] } else { 0.0 };
            let right = if i + 1 < m { x[i + 1] } else { 0.0 };
            x[i] - 0.5 * left - 0.5 * right
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionSolveResult {
    pub new_gaps: Vec<f64>,
    pub local_time_increments: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// One-step Skorokhod problem solver.
///
/// Most steps only have a few isolated negative tentative gaps, so the solver
/// first guesses that exactly those coordinates are active and verifies the
/// guess on their neighbours. Otherwise it runs projected Gauss-Seidel sweeps of the fixed-point map starting from
/// `ΔL = 0`. The iterates increase monotonically towards the solution and
/// their support grows towards the active set, so after every sweep the
/// solver tries to finish exactly: it solves `R_AA ΔL_A = −tent_A` on the
/// current support `A` (tridiagonal blocks, Thomas algorithm) and accepts the
/// candidate if it satisfies the complementarity conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkorokhodSolver {
    pub tolerance: f64,
    /// `None` means `10·m + 100`.
    pub max_iterations: Option<usize>,
}

impl Default for SkorokhodSolver {
    fn default() -> Self {
        SkorokhodSolver { tolerance: 1e-12, max_iterations: None }
    }
}

/// Reusable buffers for [`SkorokhodSolver::solve_into`].
#[derive(Debug, Clone, Default)]
pub struct SolverScratch {
    iterate: Vec<f64>,
    candidate: Vec<f64>,
    c_prime: Vec<f64>,
    runs: Vec<(usize, usize)>,
}

impl SkorokhodSolver {
    pub fn new(tolerance: f64, max_iterations: Option<usize>) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::invalid(format!("solver tolerance must be positive, got {tolerance}")));
        }
        if max_iterations == Some(0) {
            return Err(Error::invalid("max_iterations must be positive"));
        }
        Ok(SkorokhodSolver { tolerance, max_iterations })
    }

    pub fn iteration_limit(&self, m: usize) -> usize {
        self.max_iterations.unwrap_or(10 * m + 100)
    }

    pub fn solve(&self, tentative: &[f64]) -> Result<ReflectionSolveResult> {
        let m = tentative.len();
        let mut gaps = vec![0.0; m];
        let mut dl = vec![0.0; m];
        let mut scratch = SolverScratch::default();
        let (iterations, residual) = self.solve_into(tentative, &mut gaps, &mut dl, &mut scratch)?;
        Ok(ReflectionSolveResult {
            new_gaps: gaps,
            local_time_increments: dl,
            iterations,
            residual,
        })
    }

    /// Allocation-free form of [`solve`](Self::solve). Writes the reflected
    /// gaps and `ΔL` into the output slices and returns `(iterations, residual)`.
    pub fn solve_into(
        &self,
        tentative: &[f64],
        gaps: &mut [f64],
        dl: &mut [f64],
        scratch: &mut SolverScratch,
    ) -> Result<(usize, f64)> {
        let m = tentative.len();
        if gaps.len() != m || dl.len() != m {
            return Err(Error::DimensionMismatch { expected: m, actual: gaps.len().min(dl.len()) });
        }
        if tentative.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("tentative gaps must be finite"));
        }
        if tentative.iter().all(|&x| x >= 0.0) {
            gaps.copy_from_slice(tentative);
            dl.fill(0.0);
            return Ok((0, 0.0));
        }
        if let Some(residual) = self.solve_local(tentative, gaps, dl, scratch) {
            return Ok((1, residual));
        }

        scratch.iterate.clear();
        scratch.iterate.resize(m, 0.0);
        scratch.candidate.resize(m, 0.0);
        scratch.c_prime.resize(m, 0.0);

        let limit = self.iteration_limit(m);
        let mut last_change = f64::INFINITY;
        for iteration in 1..=limit {
            let x = &mut scratch.iterate;
            let mut change = 0.0f64;
            for i in 0..m {
                let left = if i > 0 { x[i - 1] } else { 0.0 };
                let right = if i + 1 < m { x[i + 1] } else { 0.0 };
                let next = (-tentative[i] + 0.5 * (left + right)).max(0.0);
                change = change.max((next - x[i]).abs());
                x[i] = next;
            }
            last_change = change;

            if self.polish(tentative, scratch) {
                dl.copy_from_slice(&scratch.candidate);
                let residual = finish(tentative, dl, gaps, self.tolerance);
                if residual <= self.tolerance {
                    return Ok((iteration, residual));
                }
            }
        }
        Err(Error::SolverDiverged { iterations: limit, residual: last_change })
    }

    /// Guesses that the active set is exactly `{i : tent_i < 0}`, which is
    /// the common case for small steps. Only those coordinates and their
    /// neighbours are touched. Returns `None` when a neighbour is pushed
    /// below zero, in which case the caller falls back to the sweeps.
    fn solve_local(&self, tentative: &[f64], gaps: &mut [f64], dl: &mut [f64], scratch: &mut SolverScratch) -> Option<f64> {
        let m = tentative.len();
        let tol = self.tolerance;
        scratch.c_prime.resize(m, 0.0);
        dl.fill(0.0);
        let mut runs = std::mem::take(&mut scratch.runs);
        runs.clear();
        let mut i = 0;
        while i < m {
            if tentative[i] >= 0.0 {
                i += 1;
                continue;
            }
            let start = i;
            while i < m && tentative[i] < 0.0 {
                i += 1;
            }
            let c_prime = &mut scratch.c_prime;
            c_prime[start] = -0.5;
            dl[start] = -tentative[start];
            for j in start + 1..i {
                let denom = 1.0 + 0.5 * c_prime[j - 1];
                c_prime[j] = -0.5 / denom;
                dl[j] = (-tentative[j] + 0.5 * dl[j - 1]) / denom;
            }
            for j in (start..i - 1).rev() {
                dl[j] -= c_prime[j] * dl[j + 1];
            }
            runs.push((start, i));
        }
        // Neighbours of a run hold tentative ≥ 0 and lose half of the adjacent
        // local time from each side.
        let pushed = |j: usize, dl: &[f64]| {
            let left = if j > 0 { dl[j - 1] } else { 0.0 };
            let right = if j + 1 < m { dl[j + 1] } else { 0.0 };
            tentative[j] - 0.5 * (left + right)
        };
        for &(start, end) in &runs {
            if (start > 0 && pushed(start - 1, dl) < -tol) || (end < m && pushed(end, dl) < -tol) {
                dl.fill(0.0);
                scratch.runs = runs;
                return None;
            }
        }
        gaps.copy_from_slice(tentative);
        let mut residual = 0.0f64;
        for &(start, end) in &runs {
            for j in start..end {
                let raw = pushed(j, dl) + dl[j];
                residual = residual.max(raw.abs());
                gaps[j] = 0.0;
            }
            for j in [start.wrapping_sub(1), end] {
                if j < m {
                    let raw = pushed(j, dl);
                    residual = residual.max((-raw).max(0.0));
                    gaps[j] = raw.max(0.0);
                }
            }
        }
        scratch.runs = runs;
        Some(residual)
    }

    /// Exact solve on the support of the current iterate. Returns whether the
    /// candidate in `scratch.candidate` satisfies the complementarity
    /// conditions to tolerance.
    fn polish(&self, tentative: &[f64], scratch: &mut SolverScratch) -> bool {
        let m = tentative.len();
        let SolverScratch { iterate, candidate, c_prime, .. } = scratch;
        candidate.fill(0.0);
        let mut i = 0;
        while i < m {
            if iterate[i] <= 0.0 {
                i += 1;
                continue;
            }
            let start = i;
            while i < m && iterate[i] > 0.0 {
                i += 1;
            }
            // Block [start, i): tridiagonal with diagonal 1 and off-diagonals −½.
            let mut denom = 1.0;
            c_prime[start] = -0.5 / denom;
            candidate[start] = -tentative[start] / denom;
            for j in start + 1..i {
                denom = 1.0 + 0.5 * c_prime[j - 1];
                c_prime[j] = -0.5 / denom;
                candidate[j] = (-tentative[j] + 0.5 * candidate[j - 1]) / denom;
            }
            for j in (start..i - 1).rev() {
                candidate[j] -= c_prime[j] * candidate[j + 1];
            }
        }
        let tol = self.tolerance;
        for j in 0..m {
            if candidate[j] < -tol {
                return false;
            }
            if iterate[j] <= 0.0 {
                let left = if j > 0 { candidate[j - 1] } else { 0.0 };
                let right = if j + 1 < m { candidate[j + 1] } else { 0.0 };
                if tentative[j] - 0.5 * (left + right) < -tol {
                    return false;
                }
            }
        }
        for c in candidate.iter_mut() {
            *c = c.max(0.0);
        }
        true
    }
}

/// Assembles reflected gaps from `ΔL`. Coordinates that carry local time are
/// set to exactly zero; the rest are `tent + R·ΔL`, with roundoff below zero
/// clipped. Returns the worst violation of the defining relations.
fn finish(tentative: &[f64], dl: &[f64], gaps: &mut [f64], tol: f64) -> f64 {
    let m = tentative.len();
    let mut residual = 0.0f64;
    for i in 0..m {
        let left = if i > 0 { dl[i - 1] } else { 0.0 };
        let right = if i + 1 < m { dl[i + 1] } else { 0.0 };
        let raw = tentative[i] + dl[i] - 0.5 * (left + right);
        let value = if dl[i] > 0.0 { 0.0 } else { raw.max(0.0) };
        if raw < -tol {
            residual = residual.max(-raw);
        }
        residual = residual.max((value - raw).abs());
        residual = residual.max(value * dl[i]);
        gaps[i] = value;
    }
    residual
}
