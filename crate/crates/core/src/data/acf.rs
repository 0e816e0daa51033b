use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Sample autocorrelation `r(0..=max_lag)` with the approximate 5%
/// significance limit `1.96 / sqrt(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Autocorrelation {
    pub values: Vec<f64>,
    pub limit: f64,
}

impl Autocorrelation {
    pub fn at(&self, lag: usize) -> f64 {
        self.values[lag]
    }

    /// Writes `lag,acf,limit` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "lag,acf,limit")?;
        for (lag, r) in self.values.iter().enumerate() {
            writeln!(out, "{lag},{r},{}", self.limit)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Biased estimator:
/// `r(k) = Σ_{t<n-k} (x_t - x̄)(x_{t+k} - x̄) / Σ_t (x_t - x̄)²`.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Autocorrelation> {
    let n = series.len();
    if max_lag < 1 || max_lag >= n {
        return Err(Error::Parameter(format!(
            "max_lag must satisfy 1 <= max_lag < n (max_lag {max_lag}, n {n})"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let denom: f64 = centered.iter().map(|d| d * d).sum();
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::DegenerateSeries(
            "series has zero variance".into(),
        ));
    }
    let values = (0..=max_lag)
        .map(|k| {
            centered[..n - k]
                .iter()
                .zip(&centered[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / denom
        })
        .collect();
    Ok(Autocorrelation {
        values,
        limit: 1.96 / (n as f64).sqrt(),
    })
}
