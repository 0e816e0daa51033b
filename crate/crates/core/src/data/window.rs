use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::frame::TimeSeriesFrame;
use super::PERIOD;
use crate::error::{config_err, shape_err, Error, Result};
use crate::tensor::Matrix;

/// Floor applied to dataset-level standard deviations.
pub const DATASET_STD_FLOOR: f64 = 1e-8;

/// Daily maxima per channel: row `i` is the max of rows `[iT, (i+1)T)`.
pub fn extract_peak(y: &Matrix) -> Result<Matrix> {
    let (rows, cols) = y.shape();
    if rows % PERIOD != 0 {
        return Err(shape_err!(
            "peak extraction needs a multiple of {PERIOD} rows, got {rows}"
        ));
    }
    let days = rows / PERIOD;
    let mut out = Matrix::zeros(days, cols);
    for day in 0..days {
        let dst = out.row_mut(day);
        dst.copy_from_slice(y.row(day * PERIOD));
        for r in day * PERIOD + 1..(day + 1) * PERIOD {
            dst.iter_mut().zip(y.row(r)).for_each(|(d, &v)| {
                if v > *d {
                    *d = v
                }
            });
        }
    }
    Ok(out)
}

/// One supervised instance cut from a frame.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    /// History, `N × c`.
    pub x: Matrix,
    /// Future, `M × c`.
    pub y: Matrix,
    /// Daily maxima of `y`, `(M/T) × c`.
    pub y_peak: Matrix,
    /// Hour of day of the first row of `x`.
    pub start_phase: usize,
    pub origin_index: usize,
}

impl WindowSample {
    pub fn input_len(&self) -> usize {
        self.x.rows()
    }

    pub fn horizon(&self) -> usize {
        self.y.rows()
    }

    /// Hour of day of the first forecast row.
    pub fn forecast_phase(&self) -> usize {
        (self.start_phase + self.x.rows()) % PERIOD
    }
}

/// Lazily materialized windows over a shared frame. Origins are
/// `0, stride, 2·stride, …` while `origin + N + M <= len`.
#[derive(Clone, Debug)]
pub struct WindowSet {
    frame: Arc<TimeSeriesFrame>,
    input_len: usize,
    horizon: usize,
    origins: Vec<usize>,
}

impl WindowSet {
    pub fn new(
        frame: Arc<TimeSeriesFrame>,
        input_len: usize,
        horizon: usize,
        stride: usize,
    ) -> Result<Self> {
        if input_len == 0 || input_len % PERIOD != 0 {
            return Err(config_err!(
                "input length {input_len} must be a positive multiple of {PERIOD}"
            ));
        }
        if horizon == 0 || horizon % PERIOD != 0 {
            return Err(config_err!(
                "horizon {horizon} must be a positive multiple of {PERIOD}"
            ));
        }
        if stride == 0 {
            return Err(config_err!("window stride must be >= 1"));
        }
        let span = input_len + horizon;
        if span > frame.len() {
            return Err(config_err!(
                "window span {span} exceeds series length {}",
                frame.len()
            ));
        }
        let origins = (0..=frame.len() - span).step_by(stride).collect();
        Ok(WindowSet {
            frame,
            input_len,
            horizon,
            origins,
        })
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn channels(&self) -> usize {
        self.frame.channels()
    }

    pub fn frame(&self) -> &TimeSeriesFrame {
        &self.frame
    }

    pub fn get(&self, i: usize) -> WindowSample {
        let origin = self.origins[i];
        let values = self.frame.values();
        let x = values.slice_rows(origin, origin + self.input_len);
        let y = values.slice_rows(origin + self.input_len, origin + self.input_len + self.horizon);
        let y_peak = extract_peak(&y).expect("horizon validated as a multiple of the period");
        WindowSample {
            x,
            y,
            y_peak,
            start_phase: self.frame.phase_of(origin),
            origin_index: origin,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = WindowSample> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

/// All windows of `frame` at the given stride.
pub fn make_windows(
    frame: &TimeSeriesFrame,
    input_len: usize,
    horizon: usize,
    stride: usize,
) -> Result<Vec<WindowSample>> {
    let set = WindowSet::new(Arc::new(frame.clone()), input_len, horizon, stride)?;
    Ok(set.iter().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(config_err!("split fractions must be positive: {parts:?}"));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(config_err!("split fractions sum to {sum}, not 1"));
        }
        Ok(())
    }
}

/// Contiguous chronological split. Train and validation lengths are
/// `floor(len · fraction)`; the remainder goes to test. Each part must hold
/// at least `min_len` rows.
pub fn split(
    frame: &TimeSeriesFrame,
    ratios: SplitRatios,
    min_len: usize,
) -> Result<(TimeSeriesFrame, TimeSeriesFrame, TimeSeriesFrame)> {
    ratios.validate()?;
    let len = frame.len();
    let n_train = (len as f64 * ratios.train + 1e-9).floor() as usize;
    let n_val = (len as f64 * ratios.val + 1e-9).floor() as usize;
    let n_test = len - n_train - n_val;
    for (name, n) in [("train", n_train), ("val", n_val), ("test", n_test)] {
        if n < min_len.max(1) {
            return Err(config_err!(
                "{name} split has {n} rows; at least {} needed for one window",
                min_len.max(1)
            ));
        }
    }
    Ok((
        frame.slice(0, n_train),
        frame.slice(n_train, n_train + n_val),
        frame.slice(n_train + n_val, len),
    ))
}

/// Per-channel mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    pub fn fit(values: &Matrix) -> Result<Self> {
        let (n, c) = values.shape();
        if n == 0 {
            return Err(Error::Configuration("cannot standardize an empty split".into()));
        }
        let mut mean = vec![0.0; c];
        for r in 0..n {
            mean.iter_mut().zip(values.row(r)).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; c];
        for r in 0..n {
            for (j, v) in values.row(r).iter().enumerate() {
                var[j] += (v - mean[j]) * (v - mean[j]);
            }
        }
        let std = var
            .iter()
            .map(|v| (v / n as f64).sqrt().max(DATASET_STD_FLOOR))
            .collect();
        Ok(ChannelStats { mean, std })
    }

    pub fn apply(&self, values: &Matrix) -> Matrix {
        Matrix::from_fn(values.rows(), values.cols(), |r, j| {
            (values.get(r, j) - self.mean[j]) / self.std[j]
        })
    }

    pub fn invert(&self, values: &Matrix) -> Matrix {
        Matrix::from_fn(values.rows(), values.cols(), |r, j| {
            values.get(r, j) * self.std[j] + self.mean[j]
        })
    }
}

/// Z-scores every frame with statistics fitted on `train` only.
pub fn standardize(
    train: &TimeSeriesFrame,
    others: &[&TimeSeriesFrame],
) -> Result<(TimeSeriesFrame, Vec<TimeSeriesFrame>, ChannelStats)> {
    let stats = ChannelStats::fit(train.values())?;
    let train_z = train.with_values(stats.apply(train.values()));
    let others_z = others
        .iter()
        .map(|f| f.with_values(stats.apply(f.values())))
        .collect();
    Ok((train_z, others_z, stats))
}
