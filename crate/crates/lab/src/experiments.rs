//! Experiment runners.
//!
//! Each runner takes a resolved config and a root noise stream, computes a
//! serialisable report and, through [`write_outputs`], lays out its files.
//! Ensemble member `j` always uses `noise.split(j)`, both for its initial
//! draw (auxiliary stream) and for its increments, and members are merged in
//! index order, so results do not depend on the number of workers.
//!
//! Coupled initial conditions are drawn from two clones of the member's
//! auxiliary stream. Every sampler works by inverse CDF on the same uniforms,
//! so a law that stochastically dominates the other yields coordinatewise
//! ordered vectors.

use atlas_core::coupling::{couple, drift_domination_run, verify_l1_identity, CoupledRecord};
use atlas_core::engine::{format_float, simulate_observe, simulate_unranked_observe, GapState, RunParams, Trajectory};
use atlas_core::excursion::{detect_excursions, excursion_tail_stats, DeltaPath, ExcursionRecord, TailReport};
use atlas_core::model::{domination_factor, generate_initial};
use atlas_core::stats::{analytic_bounds, doa_experiment, BoundQuery, DoaParams, DoaReport};
use atlas_core::{GapVector, InitialCondition, ModelSpec, NoiseStream, ProductExponential};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BoundPoint, ExperimentConfig, ExperimentKind, Preset};
use crate::error::LabError;
use crate::output::RunDir;

type LabResult<T> = Result<T, LabError>;

fn init_of(cfg: &ExperimentConfig) -> &InitialCondition {
    cfg.init.as_ref().expect("resolved configs carry an initial condition")
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

fn relative_errors(values: &[f64], targets: &[f64]) -> Vec<f64> {
    values.iter().zip(targets).map(|(v, t)| (v - t) / t).collect()
}

// ---------------------------------------------------------------- stationarity

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    pub num_particles: usize,
    pub rank_drifts: Vec<f64>,
    pub burn_in: f64,
    pub ensemble_size: usize,
    /// Time-averaged gap means per member.
    pub member_means: Vec<Vec<f64>>,
    pub gap_means: Vec<f64>,
    pub gap_se: Vec<f64>,
    /// Closed-form targets of the preset: `π^(d)` for the Atlas model with
    /// unit bottom drift, `π^{a,(d)}` for the alternative model.
    pub targets: Option<Vec<f64>>,
    pub relative_error: Option<Vec<f64>>,
    /// Means of the exact product-form stationary law of the simulated drifts.
    pub product_form_targets: Option<Vec<f64>>,
    pub product_form_relative_error: Option<Vec<f64>>,
    pub total_local_times: Vec<Vec<f64>>,
    #[serde(skip)]
    pub first_trajectory: Option<Trajectory>,
}

fn preset_targets(cfg: &ExperimentConfig, m: usize) -> LabResult<Option<Vec<f64>>> {
    Ok(match cfg.model.preset {
        Preset::Atlas if cfg.model.gamma == Some(1.0) => Some(ProductExponential::pi_finite(m)?.means()),
        Preset::Alternative => Some(ProductExponential::pi_a_finite(cfg.model.a.unwrap_or(1.0), m)?.means()),
        _ => None,
    })
}

pub fn stationarity(cfg: &ExperimentConfig, noise: &NoiseStream) -> LabResult<StationarityReport> {
    let spec = cfg.spec()?;
    let m = spec.num_gaps();
    let params = cfg.run_params();
    let burn_in = cfg.analysis.burn_in.unwrap_or(0.0);
    let keep_path = cfg.analysis.write_paths.unwrap_or(false);
    let init = init_of(cfg);

    let members: Vec<(Vec<f64>, Vec<f64>, Option<Trajectory>)> = (0..cfg.ensemble_size() as u64)
        .into_par_iter()
        .map(|j| {
            let mut stream = noise.split(j);
            let gaps = generate_initial(init, m, &mut stream)?;
            let mut sums = vec![0.0; m];
            let mut count = 0u64;
            let mut snapshots = Vec::new();
            let last = simulate_observe(&spec, &gaps, &params, &mut stream, |s: &GapState| {
                if s.time >= burn_in {
                    for (acc, g) in sums.iter_mut().zip(&s.gaps) {
                        *acc += g;
                    }
                    count += 1;
                }
                if keep_path && j == 0 {
                    snapshots.push(s.clone());
                }
            })?;
            let means = sums.iter().map(|s| s / count.max(1) as f64).collect();
            let path = (keep_path && j == 0).then_some(Trajectory { snapshots });
            Ok::<_, LabError>((means, last.cum_local_times, path))
        })
        .collect::<LabResult<_>>()?;

    let mut member_means = Vec::with_capacity(members.len());
    let mut total_local_times = Vec::with_capacity(members.len());
    let mut first_trajectory = None;
    for (means, lt, path) in members {
        member_means.push(means);
        total_local_times.push(lt);
        if path.is_some() {
            first_trajectory = path;
        }
    }
    let (gap_means, gap_se): (Vec<f64>, Vec<f64>) = (0..m)
        .map(|i| mean_se(&member_means.iter().map(|v| v[i]).collect::<Vec<_>>()))
        .unzip();
    let targets = preset_targets(cfg, m)?;
    let product_form_targets = spec.product_form_rates().map(|r| r.iter().map(|x| 1.0 / x).collect::<Vec<_>>());
    Ok(StationarityReport {
        num_particles: spec.num_particles(),
        rank_drifts: spec.rank_drifts().to_vec(),
        burn_in,
        ensemble_size: cfg.ensemble_size(),
        relative_error: targets.as_ref().map(|t| relative_errors(&gap_means, t)),
        product_form_relative_error: product_form_targets.as_ref().map(|t| relative_errors(&gap_means, t)),
        member_means,
        gap_means,
        gap_se,
        targets,
        product_form_targets,
        total_local_times,
        first_trajectory,
    })
}

impl StationarityReport {
    /// True when every gap mean is within `tol` (relative) of its closed-form
    /// target.
    pub fn within(&self, tol: f64) -> Option<bool> {
        self.relative_error.as_ref().map(|e| e.iter().all(|x| x.abs() <= tol))
    }

    fn write(&self, dir: &RunDir) -> LabResult<()> {
        let mut text = String::from("member,gap,mean\n");
        for (j, means) in self.member_means.iter().enumerate() {
            for (i, x) in means.iter().enumerate() {
                text.push_str(&format!("{j},{},{}\n", i + 1, format_float(*x)));
            }
        }
        dir.write_string("gap_means.csv", &text)?;
        if let Some(t) = &self.first_trajectory {
            t.write_csv(dir.writer("trajectory.csv")?)?;
        }
        Ok(())
    }
}

// -------------------------------------------------------------------- coupling

fn coupled_inits(cfg: &ExperimentConfig, m: usize, stream: &NoiseStream) -> LabResult<(GapVector, GapVector)> {
    let lower = generate_initial(init_of(cfg), m, &mut stream.clone())?;
    let upper = match &cfg.init_upper {
        Some(ic) => generate_initial(ic, m, &mut stream.clone())?,
        None => lower.clone(),
    };
    Ok((lower, upper))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingMember {
    /// `min_i (upper_i − lower_i)` at time 0; negative when unordered.
    pub initial_order_margin: f64,
    pub monotone_violation: f64,
    pub max_dl_increase: f64,
    /// `None` for drift-domination runs, where the identity does not apply.
    pub identity_defect: Option<f64>,
    pub initial_sum_dz: f64,
    pub final_sum_dz: f64,
    pub final_dl: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingReport {
    pub gamma_dom: Option<f64>,
    pub members: Vec<CouplingMember>,
    pub max_monotone_violation: f64,
    pub max_dl_increase: f64,
    pub max_identity_defect: Option<f64>,
    #[serde(skip)]
    pub records: Vec<CoupledRecord>,
}

fn run_coupled(cfg: &ExperimentConfig, noise: &NoiseStream) -> LabResult<Vec<(CoupledRecord, f64)>> {
    let spec = cfg.spec()?;
    let m = spec.num_gaps();
    let params = cfg.run_params();
    let gamma_dom = cfg.analysis.gamma_dom;
    (0..cfg.ensemble_size() as u64)
        .into_par_iter()
        .map(|j| {
            let mut stream = noise.split(j);
            let (lower, upper) = coupled_inits(cfg, m, &stream)?;
            let (rec, margin) = match gamma_dom {
                Some(g) => (drift_domination_run(&spec, &lower, g, &params, &mut stream)?, 0.0),
                None => {
                    let margin = upper.as_slice().iter().zip(lower.as_slice()).map(|(u, l)| u - l).fold(f64::INFINITY, f64::min);
                    (couple(&spec, &lower, &upper, &params, &mut stream)?, margin)
                }
            };
            Ok((rec, margin))
        })
        .collect()
}

pub fn coupling(cfg: &ExperimentConfig, noise: &NoiseStream) -> LabResult<CouplingReport> {
    let gamma_dom = cfg.analysis.gamma_dom;
    let runs = run_coupled(cfg, noise)?;
    let mut members = Vec::with_capacity(runs.len());
    let mut records = Vec::with_capacity(runs.len());
    for (rec, margin) in runs {
        members.push(CouplingMember {
            initial_order_margin: margin,
            monotone_violation: rec.monotone_violation,
            max_dl_increase: rec.max_dl_increase,
            identity_defect: gamma_dom.is_none().then(|| verify_l1_identity(&rec).max_defect),
            initial_sum_dz: rec.sum_dz.first().copied().unwrap_or(0.0),
            final_sum_dz: rec.sum_dz.last().copied().unwrap_or(0.0),
            final_dl: rec.final_dl.clone(),
        });
        records.push(rec);
    }
    let max_of = |f: fn(&CouplingMember) -> f64| members.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    Ok(CouplingReport {
        gamma_dom,
        max_monotone_violation: max_of(|c| c.monotone_violation),
        max_dl_increase: max_of(|c| c.max_dl_increase),
        max_identity_defect: gamma_dom.is_none().then(|| max_of(|c| c.identity_defect.unwrap_or(0.0))),
        members,
        records,
    })
}

impl CouplingReport {
    fn write(&self, dir: &RunDir, full_gaps: bool) -> LabResult<()> {
        for (j, rec) in self.records.iter().enumerate() {
            rec.write_csv(dir.writer(&format!("coupling_{j:03}.csv"))?, full_gaps)?;
        }
        Ok(())
    }
}

// ------------------------------------------------------------------ excursions

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionReport {
    pub k: usize,
    pub epsilon: f64,
    pub domination: f64,
    /// Largest domination factor actually observed between the two initial
    /// vectors, per member.
    pub observed_domination: Vec<f64>,
    /// `ε / 2^k`.
    pub decrement_target: f64,
    pub completed: usize,
    /// Completed excursions whose decrement is at least `ε/2^k − 1e-3`.
    pub decrement_hits: usize,
    pub decrement_fraction: f64,
    pub min_decrement: Option<f64>,
    pub tail: TailReport,
    #[serde(skip)]
    pub records: Vec<ExcursionRecord>,
}

pub fn excursions(cfg: &ExperimentConfig, noise: &NoiseStream) -> LabResult<ExcursionReport> {
    let spec = cfg.spec()?;
    let m = spec.num_gaps();
    let k = cfg.monitored_k();
    let epsilon = cfg.analysis.epsilon.unwrap_or(0.1);
    let d = cfg.analysis.domination.unwrap_or(1.0);
    let thr = cfg.analysis.zero_threshold.unwrap_or(atlas_core::excursion::default_zero_threshold());
    let horizon = cfg.model.horizon;
    let params = cfg.run_params();

    let runs: Vec<(ExcursionRecord, f64)> = (0..cfg.ensemble_size() as u64)
        .into_par_iter()
        .map(|j| {
            let mut stream = noise.split(j);
            let (lower, upper) = coupled_inits(cfg, m, &stream)?;
            let observed = domination_factor(upper.as_slice(), lower.as_slice()).unwrap_or(f64::INFINITY);
            let rec = couple(&spec, &lower, &upper, &params, &mut stream)?;
            let path = DeltaPath::from_record(&rec);
            Ok((detect_excursions(&path, k, epsilon, horizon, thr)?, observed))
        })
        .collect::<LabResult<_>>()?;
    let (records, observed_domination): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    Ok(summarise_excursions(records, observed_domination, k, epsilon, d, horizon))
}

/// Decrement and tail statistics of a set of excursion records.
pub fn summarise_excursions(
    records: Vec<ExcursionRecord>,
    observed_domination: Vec<f64>,
    k: usize,
    epsilon: f64,
    domination: f64,
    horizon: f64,
) -> ExcursionReport {
    let decrement_target = epsilon / 2f64.powi(k as i32);
    let decrements: Vec<f64> = records.iter().flat_map(|r| r.decrements()).collect();
    // A completed excursion lowers Σ ΔZ, so its decrement is the drop.
    let hits = decrements.iter().filter(|&&x| -x >= decrement_target - 1e-3).count();
    let completed = decrements.len();
    ExcursionReport {
        k,
        epsilon,
        domination,
        observed_domination,
        decrement_target,
        completed,
        decrement_hits: hits,
        decrement_fraction: if completed == 0 { 1.0 } else { hits as f64 / completed as f64 },
        min_decrement: decrements.iter().map(|x| -x).reduce(f64::min),
        tail: excursion_tail_stats(&records, domination, k, horizon),
        records,
    }
}

impl ExcursionReport {
    fn write(&self, dir: &RunDir) -> LabResult<()> {
        for (j, rec) in self.records.iter().enumerate() {
            rec.write_jsonl(dir.writer(&format!("excursions_{j:03}.jsonl"))?)?;
        }
        Ok(())
    }
}

// ------------------------------------------------------------------------- doa

pub fn doa(cfg: &ExperimentConfig, noise: &NoiseStream) -> LabResult<DoaReport> {
    let spec = cfg.spec()?;
    let p = cfg.run_params();
    let params = DoaParams {
        dt: p.dt,
        min_spacing: cfg.analysis.min_spacing.unwrap_or(atlas_core::stats::DEFAULT_MIN_SPACING),
        solver: p.solver,
    };
    let grid = cfg.analysis.t_grid.clone().unwrap_or_else(|| vec![cfg.model.horizon]);
    Ok(doa_experiment(
        &spec,
        init_of(cfg),
        cfg.analysis.a_target.unwrap_or(0.0),
        cfg.monitored_k(),
        &grid,
        cfg.ensemble_size(),
        &params,
        noise,
    )?)
}

// ---------------------------------------------------------------------- bounds

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub point: BoundPoint,
    pub trajectories: usize,
    /// Mean over trajectories of the (clamped) conditional bounds.
    pub bound_sup: f64,
    pub bound_inf: f64,
    pub empirical: f64,
    pub se: f64,
    pub empirical_inf: f64,
    pub se_inf: f64,
}

impl BoundRow {
    /// Empirical frequencies at most `bound + z·SE` for both events.
    pub fn holds(&self, z: f64) -> bool {
        self.empirical <= self.bound_sup + z * self.se && self.empirical_inf <= self.bound_inf + z * self.se_inf
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub rows: Vec<BoundRow>,
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Monte Carlo check of the Gaussian tail bounds at one point. Each
/// trajectory draws its initial gaps, runs the unranked engine up to `t` and
/// records both events: `sup Y_(k) ≥ Γ` on the sorted configuration and
/// `inf_{i ≥ d} Y_i ≤ Γ` on the named particles started at ranks `≥ d`.
pub fn bound_point(
    spec: &ModelSpec,
    init: &InitialCondition,
    point: BoundPoint,
    trajectories: usize,
    dt: f64,
    noise: &NoiseStream,
) -> LabResult<BoundRow> {
    let m = spec.num_gaps();
    let params = RunParams::new(dt, point.t, 1);
    let outcomes: Vec<(bool, bool, f64, f64)> = (0..trajectories as u64)
        .into_par_iter()
        .map(|j| {
            let mut stream = noise.split(j);
            let positions = generate_initial(init, m, &mut stream)?.prefix_positions();
            let q = BoundQuery { k: point.k, l: point.l, d: point.d, t: point.t, gamma: point.gamma, positions };
            let pair = analytic_bounds(&q)?;
            let (mut sup_hit, mut inf_hit) = (false, false);
            simulate_unranked_observe(spec, &q.positions, &params, &mut stream, |s| {
                sup_hit |= s.positions[point.k] >= point.gamma;
                inf_hit |= s.named[point.d..].iter().any(|&y| y <= point.gamma);
            })?;
            Ok((sup_hit, inf_hit, pair.sup, pair.inf))
        })
        .collect::<LabResult<_>>()?;
    let n = outcomes.len();
    let freq = |f: fn(&(bool, bool, f64, f64)) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / n as f64;
    let empirical = freq(|o| o.0);
    let empirical_inf = freq(|o| o.1);
    Ok(BoundRow {
        point,
        trajectories: n,
        bound_sup: outcomes.iter().map(|o| o.2).sum::<f64>() / n as f64,
        bound_inf: outcomes.iter().map(|o| o.3).sum::<f64>() / n as f64,
        empirical,
        se: binomial_se(empirical, n),
        empirical_inf,
        se_inf: binomial_se(empirical_inf, n),
    })
}

pub fn bounds(cfg: &ExperimentConfig, noise: &NoiseStream) -> LabResult<BoundsReport> {
    let spec = cfg.spec()?;
    let dt = cfg.run_params().dt;
    let points = cfg.analysis.bound_points.clone().unwrap_or_default();
    let rows = points
        .iter()
        .enumerate()
        .map(|(p, &point)| bound_point(&spec, init_of(cfg), point, cfg.ensemble_size(), dt, &noise.split(p as u64)))
        .collect::<LabResult<_>>()?;
    Ok(BoundsReport { rows })
}

impl BoundsReport {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,l,d,t,gamma_level,bound_sup,bound_inf,empirical,se,empirical_inf,se_inf")?;
        for r in &self.rows {
            let p = r.point;
            let floats = [p.t, p.gamma, r.bound_sup, r.bound_inf, r.empirical, r.se, r.empirical_inf, r.se_inf];
            let floats: Vec<String> = floats.iter().map(|&x| format_float(x)).collect();
            writeln!(w, "{},{},{},{}", p.k, p.l, p.d, floats.join(","))?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------- runner

/// Report of any experiment kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Report {
    Stationarity(StationarityReport),
    Coupling(CouplingReport),
    Excursions(ExcursionReport),
    Doa(DoaReport),
    Bounds(BoundsReport),
}

/// Runs the experiment of a resolved config.
pub fn run(cfg: &ExperimentConfig, noise: &NoiseStream) -> LabResult<Report> {
    Ok(match cfg.kind {
        ExperimentKind::Stationarity | ExperimentKind::AltModel => Report::Stationarity(stationarity(cfg, noise)?),
        ExperimentKind::Coupling => Report::Coupling(coupling(cfg, noise)?),
        ExperimentKind::Excursions => Report::Excursions(excursions(cfg, noise)?),
        ExperimentKind::Doa => Report::Doa(doa(cfg, noise)?),
        ExperimentKind::Bounds => Report::Bounds(bounds(cfg, noise)?),
    })
}

/// Writes the per-kind tables of a report.
pub fn write_outputs(cfg: &ExperimentConfig, report: &Report, dir: &RunDir) -> LabResult<()> {
    match report {
        Report::Stationarity(r) => r.write(dir),
        Report::Coupling(r) => r.write(dir, cfg.analysis.write_paths.unwrap_or(false)),
        Report::Excursions(r) => r.write(dir),
        Report::Doa(r) => Ok(r.write_csv(dir.writer("doa.csv")?)?),
        Report::Bounds(r) => Ok(r.write_csv(dir.writer("bounds.csv")?)?),
    }
}
