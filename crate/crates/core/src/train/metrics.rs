use serde::{Deserialize, Serialize};

use crate::data::{WindowSet, PERIOD};
use crate::error::{config_err, Result};
use crate::pipeline::Pipeline;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub horizon_days: usize,
    pub mse: f64,
    pub mae: f64,
}

/// Peak-series errors of one trained pipeline on a test split. Each horizon
/// scores the first `horizon_days` forecast days.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub windows: usize,
    pub horizons: Vec<HorizonMetrics>,
    pub avg: Metrics,
}

impl EvalReport {
    pub fn horizon(&self, days: usize) -> Option<&HorizonMetrics> {
        self.horizons.iter().find(|h| h.horizon_days == days)
    }
}

pub(crate) fn average(horizons: &[HorizonMetrics]) -> Metrics {
    let n = horizons.len() as f64;
    Metrics {
        mse: horizons.iter().map(|h| h.mse).sum::<f64>() / n,
        mae: horizons.iter().map(|h| h.mae).sum::<f64>() / n,
    }
}

pub fn validate_horizons(horizons: &[usize], forecast_days: usize) -> Result<()> {
    if horizons.is_empty() {
        return Err(config_err!("at least one horizon is required"));
    }
    if let Some(&h) = horizons.iter().find(|&&h| h == 0 || h > forecast_days) {
        return Err(config_err!(
            "horizon {h} days outside 1..={forecast_days} (the pipeline forecasts {forecast_days} days)"
        ));
    }
    Ok(())
}

/// MSE and MAE of predicted peaks over all test windows, days and channels,
/// per horizon, with their mean across horizons.
pub fn evaluate(pipeline: &Pipeline, test: &WindowSet, horizons: &[usize]) -> Result<EvalReport> {
    let days = pipeline.config().horizon / PERIOD;
    validate_horizons(horizons, days)?;
    if test.is_empty() {
        return Err(config_err!("test split holds no complete window"));
    }
    let c = test.channels();
    // Per-day sums so every prefix is a running total.
    let mut sq = vec![0.0; days];
    let mut abs = vec![0.0; days];
    for s in test.iter() {
        let pred = pipeline.predict(&s)?;
        for d in 0..days {
            for (p, t) in pred.peaks.row(d).iter().zip(s.y_peak.row(d)) {
                sq[d] += (p - t) * (p - t);
                abs[d] += (p - t).abs();
            }
        }
    }
    let horizons: Vec<HorizonMetrics> = horizons
        .iter()
        .map(|&h| {
            let n = (test.len() * h * c) as f64;
            HorizonMetrics {
                horizon_days: h,
                mse: sq[..h].iter().sum::<f64>() / n,
                mae: abs[..h].iter().sum::<f64>() / n,
            }
        })
        .collect();
    Ok(EvalReport {
        windows: test.len(),
        avg: average(&horizons),
        horizons,
    })
}
