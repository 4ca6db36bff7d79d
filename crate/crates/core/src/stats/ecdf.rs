use crate::error::{Error, Result};

/// Empirical distribution function of a finite sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::invalid("ECDF samples must not be NaN"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Ecdf { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// `F(x) = #{samples ≤ x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Distinct jump points with the ECDF value just before and at each.
    pub fn jumps(&self) -> Vec<(f64, f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.sorted.len() {
            let v = self.sorted[i];
            let mut j = i;
            while j < self.sorted.len() && self.sorted[j] == v {
                j += 1;
            }
            out.push((v, i as f64 / n, j as f64 / n));
            i = j;
        }
        out
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }
}

/// Sup distance between the ECDF and a continuous CDF, checked on both sides
/// of every jump.
pub fn ks_to_cdf<F: Fn(f64) -> f64>(ecdf: &Ecdf, cdf: F) -> Result<f64> {
    if ecdf.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut d = 0.0f64;
    for (x, left, right) in ecdf.jumps() {
        let f = cdf(x);
        d = d.max((f - left).abs()).max((f - right).abs());
    }
    Ok(d)
}

/// Kolmogorov-Smirnov distance to `Exp(rate)`.
pub fn ks_to_exponential(ecdf: &Ecdf, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::invalid(format!("rate must be positive, got {rate}")));
    }
    ks_to_cdf(ecdf, |x| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() })
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &Ecdf, b: &Ecdf) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (xa, xb) = (a.sorted(), b.sorted());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < xa.len() || j < xb.len() {
        let v = match (xa.get(i), xb.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        while i < xa.len() && xa[i] == v {
            i += 1;
        }
        while j < xb.len() && xb[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic Kolmogorov coefficient `c(α) = √(−½ ln(α/2))`.
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt()
}

/// One-sample critical value `c(α)/√n`.
pub fn ks_critical(alpha: f64, n: usize) -> f64 {
    ks_coefficient(alpha) / (n as f64).sqrt()
}

/// Two-sample critical value `c(α)·√((n+m)/(n·m))`.
pub fn ks_two_sample_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_coefficient(alpha) * ((n + m) / (n * m)).sqrt()
}
