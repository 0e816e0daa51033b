//! Seeded daily-periodic series with trend, noise, and peak-hour jitter.

use chrono::{NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::frame::TimeSeriesFrame;
use super::PERIOD;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Hours.
    pub length: usize,
    pub channels: usize,
    pub daily_amplitude: f64,
    /// Added per hour.
    pub trend_slope: f64,
    pub noise_std: f64,
    /// Std of the extra perturbation applied at each day's peak hour.
    pub peak_jitter_std: f64,
    /// Std of the hourly innovations of a per-channel AR(1) level.
    pub level_walk_std: f64,
    /// AR(1) coefficient of the level; 1 gives a random walk.
    pub level_persistence: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            length: 24 * 365,
            channels: 3,
            daily_amplitude: 1.0,
            trend_slope: 0.0,
            noise_std: 0.5,
            peak_jitter_std: 0.5,
            level_walk_std: 0.0,
            level_persistence: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length < 2 * PERIOD {
            return Err(Error::Parameter(format!(
                "synthetic length {} is shorter than two days",
                self.length
            )));
        }
        if self.channels == 0 {
            return Err(Error::Parameter("synthetic series needs a channel".into()));
        }
        for (name, v) in [
            ("daily_amplitude", self.daily_amplitude),
            ("trend_slope", self.trend_slope),
        ] {
            if !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be finite")));
            }
        }
        for (name, v) in [
            ("noise_std", self.noise_std),
            ("peak_jitter_std", self.peak_jitter_std),
            ("level_walk_std", self.level_walk_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.level_persistence) {
            return Err(Error::Parameter(format!(
                "level_persistence must lie in [0, 1], got {}",
                self.level_persistence
            )));
        }
        Ok(())
    }
}

/// Timestamp of row 0 of every synthetic frame (midnight, so row `t` has
/// hour of day `t mod 24`).
pub fn synthetic_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2016, 7, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date")
}

/// Channel `j`, hour `t`:
/// `A·sin(2π((t + φ_j) mod 24)/24) + slope·t + N(0, noise²)`, plus
/// `N(0, jitter²)` at the hour where the sinusoid peaks each day, plus an
/// an optional AR(1) level `l_t = ρ·l_{t-1} + N(0, walk²)`. Phase
/// offsets `φ_j` are whole hours drawn from the seed.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<TimeSeriesFrame> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let c = spec.channels;
    let phases: Vec<usize> = (0..c).map(|_| rng.random_range(0..PERIOD)).collect();
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::Parameter(e.to_string()))?;
    let jitter =
        Normal::new(0.0, spec.peak_jitter_std).map_err(|e| Error::Parameter(e.to_string()))?;

    let mut values = Matrix::zeros(spec.length, c);
    for t in 0..spec.length {
        for (j, &phi) in phases.iter().enumerate() {
            let cyc = ((t + phi) % PERIOD) as f64 / PERIOD as f64;
            let v = spec.daily_amplitude * (2.0 * std::f64::consts::PI * cyc).sin()
                + spec.trend_slope * t as f64
                + noise.sample(&mut rng);
            values.set(t, j, v);
        }
    }
    // sin peaks where (t + φ) mod 24 == 6.
    let days = spec.length.div_ceil(PERIOD);
    for day in 0..days {
        for (j, &phi) in phases.iter().enumerate() {
            let hour = (PERIOD + 6 - phi % PERIOD) % PERIOD;
            let t = day * PERIOD + hour;
            let delta = jitter.sample(&mut rng);
            if t < spec.length {
                let v = values.get(t, j);
                values.set(t, j, v + delta);
            }
        }
    }

    if spec.level_walk_std > 0.0 {
        let step = Normal::new(0.0, spec.level_walk_std)
            .map_err(|e| Error::Parameter(e.to_string()))?;
        let mut level = vec![0.0; c];
        for t in 0..spec.length {
            for (j, l) in level.iter_mut().enumerate() {
                *l = spec.level_persistence * *l + step.sample(&mut rng);
                let v = values.get(t, j);
                values.set(t, j, v + *l);
            }
        }
    }

    let names = channel_names(c);
    TimeSeriesFrame::from_start(synthetic_start(), values, names)
}

/// `ch0, ch1, …` with the last channel named `OT` (the ETT target column).
fn channel_names(c: usize) -> Vec<String> {
    (0..c)
        .map(|j| {
            if j + 1 == c {
                "OT".to_string()
            } else {
                format!("ch{j}")
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_series_is_periodic() {
        let spec = SyntheticSpec {
            length: 24 * 6,
            noise_std: 0.0,
            peak_jitter_std: 0.0,
            trend_slope: 0.0,
            ..SyntheticSpec::default()
        };
        let f = gen_synthetic(&spec).unwrap();
        let v = f.values();
        for t in 24..v.rows() {
            for j in 0..v.cols() {
                assert_eq!(v.get(t, j), v.get(t - 24, j));
            }
        }
    }

    #[test]
    fn same_seed_same_frame() {
        let spec = SyntheticSpec {
            length: 24 * 10,
            ..SyntheticSpec::default()
        };
        assert_eq!(gen_synthetic(&spec).unwrap(), gen_synthetic(&spec).unwrap());
        let other = SyntheticSpec { seed: 1, ..spec.clone() };
        assert_ne!(gen_synthetic(&spec).unwrap(), gen_synthetic(&other).unwrap());
    }

    #[test]
    fn jitter_lands_on_sinusoid_peak() {
        let base = SyntheticSpec {
            length: 24 * 4,
            channels: 2,
            noise_std: 0.0,
            peak_jitter_std: 0.0,
            ..SyntheticSpec::default()
        };
        let jittered = SyntheticSpec {
            peak_jitter_std: 1.0,
            ..base.clone()
        };
        let a = gen_synthetic(&base).unwrap();
        let b = gen_synthetic(&jittered).unwrap();
        for j in 0..2 {
            let clean = a.channel(j);
            let noisy = b.channel(j);
            for day in 0..4 {
                let block = &clean[day * 24..(day + 1) * 24];
                let peak = block
                    .iter()
                    .enumerate()
                    .max_by(|x, y| x.1.total_cmp(y.1))
                    .unwrap()
                    .0;
                for h in 0..24 {
                    let differs = clean[day * 24 + h] != noisy[day * 24 + h];
                    assert_eq!(differs, h == peak, "day {day} hour {h}");
                }
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let short = SyntheticSpec {
            length: 47,
            ..SyntheticSpec::default()
        };
        assert!(matches!(gen_synthetic(&short), Err(Error::Parameter(_))));
        let negative = SyntheticSpec {
            noise_std: -0.1,
            ..SyntheticSpec::default()
        };
        assert!(matches!(gen_synthetic(&negative), Err(Error::Parameter(_))));
    }
}
