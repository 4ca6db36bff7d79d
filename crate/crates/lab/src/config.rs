//! Experiment configuration.
//!
//! Configs are TOML files with a handful of typed sections. Every optional
//! field has a default, and [`ExperimentConfig::resolve`] fills them in so the
//! snapshot written next to the results is complete and can be re-run as is.
//!
//! ```toml
//! kind = "stationarity"   # stationarity | coupling | excursions | doa | bounds | alt-model
//! seed = 7
//!
//! [model]
//! preset = "atlas"        # atlas | alternative | custom
//! m = 3                   # number of gaps, i.e. m + 1 particles
//! gamma = 1.0             # bottom drift of the atlas preset
//! dt = 1e-3
//! horizon = 2000.0
//! sample_every = 10
//!
//! [init]
//! kind = "finite_pi_d"
//!
//! [analysis]
//! burn_in = 200.0
//! ensemble_size = 4
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use atlas_core::engine::RunParams;
use atlas_core::{InitialCondition, ModelSpec, SkorokhodSolver};
use serde::{Deserialize, Serialize};

use crate::error::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Stationarity,
    Coupling,
    Excursions,
    Doa,
    Bounds,
    AltModel,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Stationarity => "stationarity",
            ExperimentKind::Coupling => "coupling",
            ExperimentKind::Excursions => "excursions",
            ExperimentKind::Doa => "doa",
            ExperimentKind::Bounds => "bounds",
            ExperimentKind::AltModel => "alt-model",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Atlas,
    Alternative,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub preset: Preset,
    /// Number of gaps.
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drifts: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
}

/// One point of a bound sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundPoint {
    pub k: usize,
    pub l: usize,
    pub d: usize,
    pub t: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    /// Bottom drift of the dominated copy in a coupling run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_dom: Option<f64>,
    /// Domination factor `D` of the upper initial law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domination: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doubling_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub write_paths: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_points: Option<Vec<BoundPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitialCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_upper: Option<InitialCondition>,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

/// Default truncation: `m ≥ max(4k, 10√horizon)`.
pub fn suggested_truncation(monitored_k: usize, horizon: f64) -> usize {
    (4 * monitored_k).max((10.0 * horizon.max(0.0).sqrt()).ceil() as usize)
}

fn config_error(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

fn positive(name: &str, x: f64) -> Result<(), LabError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(config_error(format!("{name} must be positive and finite, got {x}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| config_error(format!("cannot parse config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialise")
    }

    /// Fills in every default and validates the result. The returned config
    /// has no `None` fields that the experiment reads.
    pub fn resolve(&self) -> Result<Self, LabError> {
        let mut c = self.clone();
        let kind = c.kind;
        let md = &mut c.model;
        if kind == ExperimentKind::AltModel {
            md.preset = Preset::Alternative;
        }
        match md.preset {
            Preset::Atlas => {
                md.gamma.get_or_insert(1.0);
                if md.a.is_some() || md.drifts.is_some() || md.diffusions.is_some() {
                    return Err(config_error("the atlas preset takes only `gamma`"));
                }
            }
            Preset::Alternative => {
                md.a.get_or_insert(1.0);
                if md.gamma.is_some() || md.drifts.is_some() || md.diffusions.is_some() {
                    return Err(config_error("the alternative preset takes only `a`"));
                }
            }
            Preset::Custom => {
                let n = md.m + 1;
                if md.drifts.as_ref().map(Vec::len) != Some(n) {
                    return Err(config_error(format!("custom preset needs `drifts` with m + 1 = {n} entries")));
                }
                md.diffusions.get_or_insert_with(|| vec![1.0; n]);
                if md.gamma.is_some() || md.a.is_some() {
                    return Err(config_error("the custom preset takes `drifts` and `diffusions` only"));
                }
            }
        }
        let default_dt = match kind {
            ExperimentKind::Coupling | ExperimentKind::Excursions => 1e-4,
            _ => 1e-3,
        };
        md.dt.get_or_insert(default_dt);
        md.sample_every.get_or_insert(1);
        md.solver_tolerance.get_or_insert(SkorokhodSolver::default().tolerance);

        let spec = c.spec()?;
        let m = spec.num_gaps();
        if c.init.is_none() {
            c.init = Some(match c.model.preset {
                Preset::Alternative => InitialCondition::FinitePiAD { a: c.model.a.unwrap_or(1.0) },
                _ if matches!(kind, ExperimentKind::Stationarity) => InitialCondition::FinitePiD,
                _ => InitialCondition::StationaryPiA { a: 0.0 },
            });
        }

        let an = &mut c.analysis;
        an.k.get_or_insert(m.min(3));
        an.ensemble_size.get_or_insert(1);
        an.min_spacing.get_or_insert(atlas_core::stats::DEFAULT_MIN_SPACING);
        an.doubling_threshold.get_or_insert(1e-3);
        an.write_paths.get_or_insert(false);
        an.zero_threshold.get_or_insert(atlas_core::excursion::default_zero_threshold());
        match kind {
            ExperimentKind::Stationarity | ExperimentKind::AltModel => {
                an.burn_in.get_or_insert(0.0);
            }
            ExperimentKind::Coupling => {}
            ExperimentKind::Excursions => {
                an.epsilon.get_or_insert(0.1);
                an.domination.get_or_insert(1.0);
            }
            ExperimentKind::Doa => {
                an.a_target.get_or_insert(0.0);
                an.t_grid.get_or_insert_with(|| vec![c.model.horizon]);
            }
            ExperimentKind::Bounds => {
                if an.bound_points.as_ref().is_none_or(Vec::is_empty) {
                    return Err(config_error("bounds experiments need at least one [[analysis.bound_points]] entry"));
                }
            }
        }
        if matches!(kind, ExperimentKind::Coupling | ExperimentKind::Excursions) && c.init_upper.is_none() {
            return Err(config_error(format!("{kind} experiments need an [init_upper] section")));
        }
        c.validate()?;
        Ok(c)
    }

    /// Model of the run.
    pub fn spec(&self) -> Result<ModelSpec, LabError> {
        let md = &self.model;
        let spec = match md.preset {
            Preset::Atlas => ModelSpec::atlas(md.m + 1, md.gamma.unwrap_or(1.0)),
            Preset::Alternative => ModelSpec::alternative(md.m, md.a.unwrap_or(1.0)),
            Preset::Custom => ModelSpec::new(
                md.drifts.clone().unwrap_or_default(),
                md.diffusions.clone().unwrap_or_else(|| vec![1.0; md.m + 1]),
            ),
        };
        spec.map_err(|e| config_error(format!("model: {e}")))
    }

    pub fn run_params(&self) -> RunParams {
        RunParams {
            dt: self.model.dt.unwrap_or(1e-3),
            horizon: self.model.horizon,
            sample_every: self.model.sample_every.unwrap_or(1),
            solver: SkorokhodSolver {
                tolerance: self.model.solver_tolerance.unwrap_or(1e-12),
                max_iterations: self.model.max_iterations,
            },
        }
    }

    pub fn monitored_k(&self) -> usize {
        self.analysis.k.unwrap_or(1)
    }

    pub fn ensemble_size(&self) -> usize {
        self.analysis.ensemble_size.unwrap_or(1)
    }

    fn validate(&self) -> Result<(), LabError> {
        let spec = self.spec()?;
        let m = spec.num_gaps();
        let p = self.run_params();
        p.num_steps().map_err(|e| config_error(format!("model: {e}")))?;
        SkorokhodSolver::new(p.solver.tolerance, p.solver.max_iterations)
            .map_err(|e| config_error(format!("model: {e}")))?;
        for (name, ic) in [("init", &self.init), ("init_upper", &self.init_upper)] {
            if let Some(ic) = ic {
                ic.validate(m).map_err(|e| config_error(format!("{name}: {e}")))?;
            }
        }
        let an = &self.analysis;
        let k = self.monitored_k();
        if k == 0 || k > m {
            return Err(config_error(format!("analysis.k = {k} must lie in 1..={m}")));
        }
        if self.ensemble_size() == 0 {
            return Err(config_error("analysis.ensemble_size must be positive"));
        }
        if let Some(e) = an.epsilon {
            positive("analysis.epsilon", e)?;
        }
        if let Some(d) = an.domination {
            positive("analysis.domination", d)?;
        }
        if let Some(z) = an.zero_threshold {
            if !(z >= 0.0 && z.is_finite()) {
                return Err(config_error("analysis.zero_threshold must be non-negative"));
            }
        }
        if let Some(s) = an.min_spacing {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(config_error("analysis.min_spacing must be non-negative"));
            }
        }
        if let Some(th) = an.doubling_threshold {
            positive("analysis.doubling_threshold", th)?;
        }
        if let Some(b) = an.burn_in {
            if !(b >= 0.0 && b < self.model.horizon) {
                return Err(config_error(format!("analysis.burn_in = {b} must lie in [0, horizon)")));
            }
        }
        if let Some(g) = an.gamma_dom {
            if !(g <= 1.0 && g.is_finite()) {
                return Err(config_error(format!("analysis.gamma_dom = {g} must be finite and at most 1")));
            }
        }
        if let Some(a) = an.a_target {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(config_error(format!("analysis.a_target = {a} must be non-negative")));
            }
        }
        if let Some(grid) = &an.t_grid {
            if grid.is_empty() || grid.iter().any(|&t| !(t > 0.0 && t <= self.model.horizon * (1.0 + 1e-12))) {
                return Err(config_error("analysis.t_grid entries must lie in (0, horizon]"));
            }
            if grid.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(config_error("analysis.t_grid must be strictly increasing"));
            }
        }
        if let Some(points) = &an.bound_points {
            for (n, bp) in points.iter().enumerate() {
                positive(&format!("bound_points[{n}].t"), bp.t)?;
                if bp.t > self.model.horizon * (1.0 + 1e-12) {
                    return Err(config_error(format!("bound_points[{n}].t exceeds the horizon")));
                }
                if bp.l == 0 || bp.d == 0 || bp.k > m || bp.l > m + 1 || bp.d > m || !bp.gamma.is_finite() {
                    return Err(config_error(format!("bound_points[{n}] has an index outside the model")));
                }
            }
        }
        Ok(())
    }
}
