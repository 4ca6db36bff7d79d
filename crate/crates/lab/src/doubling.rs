//! Truncation fidelity.
//!
//! The run at truncation `m` is repeated at `2m` with the same noise stream.
//! Rank `i` draws from its own generator, so ranks `0..=m` see identical
//! Brownian increments in both runs and any difference in the monitored gaps
//! comes from the extra particles. The initial vectors are drawn from two
//! clones of one auxiliary stream, which makes them prefix-consistent when
//! the two laws agree on the first `m` coordinates.

use atlas_core::engine::{format_float, simulate_observe};
use atlas_core::model::generate_initial;
use atlas_core::{ModelSpec, NoiseStream};
use serde::Serialize;

use crate::config::{suggested_truncation, ExperimentConfig, Preset};
use crate::error::LabError;
use crate::output::RunDir;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingReport {
    pub m: usize,
    pub doubled: usize,
    pub k: usize,
    pub threshold: f64,
    /// Per monitored gap, `max_t |Z^{(m)}_j(t) − Z^{(2m)}_j(t)|`.
    pub max_discrepancy: Vec<f64>,
    /// Mean of the monitored gaps of the `2m` run over the sample times.
    pub reference_scale: f64,
    pub relative: f64,
    pub flagged: bool,
    pub suggested_truncation: usize,
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(skip)]
    pub series: Vec<Vec<f64>>,
}

fn doubled_spec(cfg: &ExperimentConfig, spec: &ModelSpec) -> Result<ModelSpec, LabError> {
    let m2 = 2 * spec.num_gaps();
    let out = match cfg.model.preset {
        Preset::Atlas => ModelSpec::atlas(m2 + 1, spec.bottom_drift()),
        Preset::Alternative => ModelSpec::alternative(m2, cfg.model.a.unwrap_or(1.0)),
        Preset::Custom => return Err(LabError::Config("doubling-check needs the atlas or alternative preset".into())),
    };
    out.map_err(|e| LabError::Config(format!("doubled model: {e}")))
}

/// Runs the check for a resolved config; `noise` drives both runs.
pub fn doubling_check(cfg: &ExperimentConfig, noise: &NoiseStream) -> Result<DoublingReport, LabError> {
    let spec = cfg.spec()?;
    let big = doubled_spec(cfg, &spec)?;
    let (m, m2) = (spec.num_gaps(), big.num_gaps());
    let k = cfg.monitored_k();
    let params = cfg.run_params();
    let init = cfg.init.as_ref().expect("resolved configs carry an initial condition");
    let threshold = cfg.analysis.doubling_threshold.unwrap_or(1e-3);

    let base_init = generate_initial(init, m, &mut noise.clone())?;
    let big_init = generate_initial(init, m2, &mut noise.clone())?;
    let record = |spec: &ModelSpec, gaps| -> Result<(Vec<f64>, Vec<Vec<f64>>), LabError> {
        let (mut times, mut rows) = (Vec::new(), Vec::new());
        simulate_observe(spec, gaps, &params, &mut noise.clone(), |s| {
            times.push(s.time);
            rows.push(s.gaps[..k].to_vec());
        })?;
        Ok((times, rows))
    };
    let (times, small_rows) = record(&spec, &base_init)?;
    let (_, big_rows) = record(&big, &big_init)?;

    let mut max_discrepancy = vec![0.0f64; k];
    let mut series = Vec::with_capacity(times.len());
    let mut scale = 0.0;
    for (a, b) in small_rows.iter().zip(&big_rows) {
        let row: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
        for (acc, d) in max_discrepancy.iter_mut().zip(&row) {
            *acc = acc.max(*d);
        }
        scale += b.iter().sum::<f64>();
        series.push(row);
    }
    let reference_scale = scale / (k * big_rows.len()) as f64;
    let worst = max_discrepancy.iter().copied().fold(0.0, f64::max);
    let relative = if worst == 0.0 { 0.0 } else { worst / reference_scale };
    Ok(DoublingReport {
        m,
        doubled: m2,
        k,
        threshold,
        max_discrepancy,
        reference_scale,
        relative,
        flagged: !(relative <= threshold),
        suggested_truncation: suggested_truncation(k, cfg.model.horizon),
        times,
        series,
    })
}

impl DoublingReport {
    /// CSV `time,disc_1..disc_k`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = String::from("time");
        for j in 1..=self.k {
            header.push_str(&format!(",disc_{j}"));
        }
        writeln!(w, "{header}")?;
        for (t, row) in self.times.iter().zip(&self.series) {
            let mut line = format_float(*t);
            for d in row {
                line.push(',');
                line.push_str(&format_float(*d));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub(crate) fn write(&self, dir: &RunDir) -> Result<(), LabError> {
        Ok(self.write_csv(dir.writer("doubling.csv")?)?)
    }
}
