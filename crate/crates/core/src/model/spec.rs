use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rank drifts and diffusions of one finite ranked diffusion.
///
/// `rank_drifts[0]` is the drift of the bottom particle (the `γ` of the
/// drift-γ Atlas variant); the Atlas preset is `(γ, 0, …, 0)` with unit
/// diffusions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    rank_drifts: Vec<f64>,
    rank_diffusions: Vec<f64>,
}

impl ModelSpec {
    pub fn new(rank_drifts: Vec<f64>, rank_diffusions: Vec<f64>) -> Result<Self> {
        if rank_drifts.len() < 2 {
            return Err(Error::invalid(format!(
                "a ranked system needs at least 2 particles, got {}",
                rank_drifts.len()
            )));
        }
        if rank_diffusions.len() != rank_drifts.len() {
            return Err(Error::DimensionMismatch {
                expected: rank_drifts.len(),
                actual: rank_diffusions.len(),
            });
        }
        if rank_drifts.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("rank drifts must be finite"));
        }
        if rank_diffusions.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::invalid("rank diffusions must be strictly positive"));
        }
        Ok(ModelSpec { rank_drifts, rank_diffusions })
    }

    /// Finite Atlas model with `num_particles` particles and bottom drift `gamma`.
    pub fn atlas(num_particles: usize, gamma: f64) -> Result<Self> {
        let mut drifts = vec![0.0; num_particles];
        if let Some(first) = drifts.first_mut() {
            *first = gamma;
        }
        ModelSpec::new(drifts, vec![1.0; num_particles])
    }

    /// The alternative `d+1`-particle rank-based diffusion: rank 0 drifts at
    /// `1 − a/(d+1)`, rank `j ≥ 1` at `−ja/(d+1)`, unit diffusions.
    ///
    /// Its centre of mass drifts at roughly `−a/2`, like the bottom of the
    /// infinite Atlas model started from `π_a`. The exact stationary gap law
    /// of these drifts is given by [`product_form_rates`](Self::product_form_rates);
    /// it is close to, but not equal to, `⊗ Exp((2+ia)(1−i/(d+1)))`, which
    /// would need a bottom drift of exactly 1.
    pub fn alternative(d: usize, a: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("alternative model needs d ≥ 1"));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid(format!("alternative model needs a > 0, got {a}")));
        }
        let n = (d + 1) as f64;
        let drifts = (0..=d)
            .map(|j| if j == 0 { 1.0 - a / n } else { -(j as f64) * a / n })
            .collect();
        ModelSpec::new(drifts, vec![1.0; d + 1])
    }

    /// Same model with the bottom-rank drift replaced by `gamma`.
    pub fn with_bottom_drift(&self, gamma: f64) -> Self {
        let mut out = self.clone();
        out.rank_drifts[0] = gamma;
        out
    }

    pub fn num_particles(&self) -> usize {
        self.rank_drifts.len()
    }

    pub fn num_gaps(&self) -> usize {
        self.rank_drifts.len() - 1
    }

    pub fn rank_drifts(&self) -> &[f64] {
        &self.rank_drifts
    }

    pub fn rank_diffusions(&self) -> &[f64] {
        &self.rank_diffusions
    }

    pub fn bottom_drift(&self) -> f64 {
        self.rank_drifts[0]
    }

    /// Drift of the centre of mass, `(1/(m+1)) Σ a_j`.
    pub fn center_of_mass_drift(&self) -> f64 {
        self.rank_drifts.iter().sum::<f64>() / self.num_particles() as f64
    }

    /// Rates of the product-exponential stationary gap law.
    ///
    /// With a common diffusion `b` the gap process is a semimartingale
    /// reflected Brownian motion in skew-symmetric form, so its stationary
    /// law is `⊗ Exp(λ_i)` with `R λ = −g / b²` and `g_i = a_i − a_{i−1}`.
    /// Returns `None` when the diffusions differ or some `λ_i ≤ 0` (no
    /// stationary law).
    pub fn product_form_rates(&self) -> Option<Vec<f64>> {
        let b = self.rank_diffusions[0];
        if self.rank_diffusions.iter().any(|&x| x != b) {
            return None;
        }
        let m = self.num_gaps();
        let rhs: Vec<f64> = self.rank_drifts.windows(2).map(|w| -(w[1] - w[0]) / (b * b)).collect();
        // Thomas algorithm for the tridiagonal (−½, 1, −½) system.
        let mut c = vec![0.0; m];
        let mut x = vec![0.0; m];
        c[0] = -0.5;
        x[0] = rhs[0];
        for i in 1..m {
            let denom = 1.0 + 0.5 * c[i - 1];
            c[i] = -0.5 / denom;
            x[i] = (rhs[i] + 0.5 * x[i - 1]) / denom;
        }
        for i in (0..m - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x.iter().all(|&l| l > 0.0).then_some(x)
    }

    /// True when the rank diffusions are all one and only rank 0 drifts.
    pub fn is_atlas_like(&self) -> bool {
        self.rank_drifts[1..].iter().all(|&a| a == 0.0) && self.rank_diffusions.iter().all(|&b| b == 1.0)
    }
}

/// Non-negative gap vector `(Z_1, …, Z_m)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapVector(Vec<f64>);

impl GapVector {
    pub fn new(gaps: Vec<f64>) -> Result<Self> {
        if let Some((i, g)) = gaps.iter().enumerate().find(|(_, g)| !(**g >= 0.0 && g.is_finite())) {
            return Err(Error::invalid(format!("gap {} is {g}; gaps must be finite and non-negative", i + 1)));
        }
        Ok(GapVector(gaps))
    }

    pub fn zeros(m: usize) -> Self {
        GapVector(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// First `m` coordinates.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m > self.0.len() {
            return Err(Error::DimensionMismatch { expected: m, actual: self.0.len() });
        }
        Ok(GapVector(self.0[..m].to_vec()))
    }

    /// Coordinatewise minimum.
    pub fn min(&self, other: &GapVector) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), actual: other.len() });
        }
        Ok(GapVector(self.0.iter().zip(&other.0).map(|(a, b)| a.min(*b)).collect()))
    }

    /// Ranked positions `(0, g₁, g₁+g₂, …)` with the bottom particle at 0.
    pub fn prefix_positions(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.0.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for g in &self.0 {
            acc += g;
            out.push(acc);
        }
        out
    }

    /// Writes `index,gap` rows (1-based index) with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,gap")?;
        for (i, g) in self.0.iter().enumerate() {
            writeln!(w, "{},{:.16e}", i + 1, g)?;
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for GapVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atlas_preset() {
        let s = ModelSpec::atlas(4, 1.0).unwrap();
        assert_eq!(s.rank_drifts(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.rank_diffusions(), &[1.0; 4]);
        assert_eq!(s.num_gaps(), 3);
        assert!(s.is_atlas_like());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ModelSpec::atlas(1, 1.0).is_err());
        assert!(ModelSpec::new(vec![1.0, 0.0], vec![1.0, 0.0]).is_err());
        assert!(ModelSpec::new(vec![1.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn product_form_rates_of_presets() {
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        let atlas = ModelSpec::atlas(4, 1.0).unwrap().product_form_rates().unwrap();
        assert!(close(&atlas, &[1.5, 1.0, 0.5]));
        let alt = ModelSpec::alternative(3, 1.0).unwrap();
        assert!(close(&alt.product_form_rates().unwrap(), &[1.875, 1.75, 1.125]));
        // Bottom drift 1 instead of 1 − a/(d+1) gives (2+ia)(1−i/(d+1)).
        assert!(close(&alt.with_bottom_drift(1.0).product_form_rates().unwrap(), &[2.25, 2.0, 1.25]));
        assert!(ModelSpec::atlas(4, -1.0).unwrap().product_form_rates().is_none());
        assert!(ModelSpec::new(vec![1.0, 0.0], vec![1.0, 2.0]).unwrap().product_form_rates().is_none());
    }

    #[test]
    fn alternative_drifts() {
        let s = ModelSpec::alternative(3, 1.0).unwrap();
        assert_eq!(s.rank_drifts(), &[0.75, -0.25, -0.5, -0.75]);
        assert!((s.center_of_mass_drift() - (-0.1875)).abs() < 1e-15);
        assert!(ModelSpec::alternative(3, 0.0).is_err());
        assert!(ModelSpec::alternative(0, 1.0).is_err());
    }

    #[test]
    fn alternative_drift_sum_closed_form() {
        for d in 1..40 {
            for &a in &[0.1, 1.0, 2.5] {
                let s = ModelSpec::alternative(d, a).unwrap();
                let sum: f64 = s.rank_drifts().iter().sum();
                let df = d as f64;
                let expected = 1.0 - a / (df + 1.0) - a * df / 2.0;
                assert!((sum - expected).abs() < 1e-12 * (1.0 + expected.abs()));
            }
        }
        // Centre-of-mass drift tends to −a/2.
        let s = ModelSpec::alternative(100_000, 1.0).unwrap();
        assert!((s.center_of_mass_drift() + 0.5).abs() < 1e-4);
    }

    #[test]
    fn alternative_small_a_approaches_atlas() {
        let s = ModelSpec::alternative(5, 1e-12).unwrap();
        let atlas = ModelSpec::atlas(6, 1.0).unwrap();
        for (x, y) in s.rank_drifts().iter().zip(atlas.rank_drifts()) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn prefix_positions_examples() {
        let g = GapVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g.prefix_positions(), vec![0.0, 1.0, 3.0, 6.0]);
        assert_eq!(GapVector::zeros(3).prefix_positions(), vec![0.0; 4]);
        assert_eq!(GapVector::new(vec![0.5]).unwrap().prefix_positions(), vec![0.0, 0.5]);
    }

    #[test]
    fn gap_vector_rejects_negative() {
        assert!(GapVector::new(vec![0.1, -0.1]).is_err());
        assert!(GapVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn csv_export() {
        let g = GapVector::new(vec![0.1, 0.2]).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "index,gap");
        assert_eq!(lines.len(), 3);
        let v: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 0.2);
    }
}
