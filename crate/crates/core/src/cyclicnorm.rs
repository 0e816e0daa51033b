//! Cyclic normalization: per-phase (hour-of-day) standardization of an input
//! window, a trainable shift of the phase statistics, and denormalization
//! of the forecast with the shifted statistics.
//!
//! Phase `i` collects the rows whose hour of day is `i`. Statistics are kept
//! indexed by absolute hour of day, so a window starting at 05:00 and one
//! starting at midnight share the same row layout.

use serde::{Deserialize, Serialize};

use crate::data::PERIOD;
use crate::error::{shape_err, Error, Result};
use crate::grad::{Graph, NodeId, Param};
use crate::tensor::Matrix;

/// Floor for per-phase standard deviations, before and after shifting.
pub const EPSILON: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseStats {
    /// `24 × c`; row `i` is the mean of phase `i`.
    pub means: Matrix,
    /// `24 × c`; every entry `>= EPSILON`.
    pub stds: Matrix,
    /// Hour of day of the window's first row.
    pub anchor_phase: usize,
    /// Rows in the window the statistics came from.
    pub window_len: usize,
}

impl PhaseStats {
    /// Hour of day of the row right after the source window.
    pub fn forecast_phase(&self) -> usize {
        (self.anchor_phase + self.window_len) % PERIOD
    }
}

fn check_anchor(anchor_phase: usize) -> Result<()> {
    if anchor_phase >= PERIOD {
        return Err(Error::Alignment(format!(
            "anchor phase {anchor_phase} is not an hour of day"
        )));
    }
    Ok(())
}

/// Population mean and standard deviation of each phase sub-sequence.
pub fn compute_phase_stats(x: &Matrix, anchor_phase: usize) -> Result<PhaseStats> {
    let (n, c) = x.shape();
    if n == 0 || n % PERIOD != 0 {
        return Err(shape_err!(
            "cyclic statistics need a multiple of {PERIOD} rows, got {n}"
        ));
    }
    check_anchor(anchor_phase)?;
    let cycles = (n / PERIOD) as f64;
    let mut means = Matrix::zeros(PERIOD, c);
    for r in 0..n {
        let phase = (anchor_phase + r) % PERIOD;
        means
            .row_mut(phase)
            .iter_mut()
            .zip(x.row(r))
            .for_each(|(m, v)| *m += v);
    }
    means.data_mut().iter_mut().for_each(|m| *m /= cycles);
    let mut vars = Matrix::zeros(PERIOD, c);
    for r in 0..n {
        let phase = (anchor_phase + r) % PERIOD;
        for (j, v) in x.row(r).iter().enumerate() {
            let d = v - means.get(phase, j);
            let cur = vars.get(phase, j);
            vars.set(phase, j, cur + d * d);
        }
    }
    let stds = vars.map(|v| (v / cycles).sqrt().max(EPSILON));
    Ok(PhaseStats {
        means,
        stds,
        anchor_phase,
        window_len: n,
    })
}

/// `(x - μ_phase) / σ_phase` row by row.
pub fn normalize(x: &Matrix, stats: &PhaseStats, anchor_phase: usize) -> Result<Matrix> {
    if stats.anchor_phase != anchor_phase {
        return Err(Error::Alignment(format!(
            "statistics anchored at hour {} applied to a window starting at hour {anchor_phase}",
            stats.anchor_phase
        )));
    }
    if x.cols() != stats.means.cols() {
        return Err(shape_err!(
            "{} channels normalized with statistics for {}",
            x.cols(),
            stats.means.cols()
        ));
    }
    Ok(Matrix::from_fn(x.rows(), x.cols(), |r, j| {
        let phase = (anchor_phase + r) % PERIOD;
        (x.get(r, j) - stats.means.get(phase, j)) / stats.stds.get(phase, j)
    }))
}

/// One-hot `rows × 24` matrix selecting the phase of each row, starting at
/// `first_phase`. Multiplying it with a `24 × c` statistic tiles that
/// statistic over the rows.
pub fn phase_selector(rows: usize, first_phase: usize) -> Matrix {
    Matrix::from_fn(rows, PERIOD, |r, p| {
        if (first_phase + r) % PERIOD == p {
            1.0
        } else {
            0.0
        }
    })
}

/// `ŷ' ⊙ tile(σ') + tile(μ')` on the graph. `means` and `stds` are `24 × c`
/// nodes; rows of `y_norm` start at hour `forecast_phase`.
pub fn denormalize_node(
    g: &mut Graph,
    y_norm: NodeId,
    means: NodeId,
    stds: NodeId,
    forecast_phase: usize,
) -> Result<NodeId> {
    let rows = g.value(y_norm).rows();
    let selector = g.constant(phase_selector(rows, forecast_phase));
    let sigma = g.matmul(selector, stds)?;
    let mu = g.matmul(selector, means)?;
    let scaled = g.elementwise_mul(y_norm, sigma)?;
    g.add(scaled, mu)
}

/// Value-level denormalization. `forecast_anchor_phase` must continue the
/// hour cycle of the window the statistics came from.
pub fn denormalize(y_norm: &Matrix, stats: &PhaseStats, forecast_anchor_phase: usize) -> Result<Matrix> {
    if forecast_anchor_phase != stats.forecast_phase() {
        return Err(Error::Alignment(format!(
            "forecast starts at hour {forecast_anchor_phase}, expected {}",
            stats.forecast_phase()
        )));
    }
    let mut g = Graph::new();
    let y = g.constant(y_norm.clone());
    let m = g.constant(stats.means.clone());
    let s = g.constant(stats.stds.clone());
    let out = denormalize_node(&mut g, y, m, s, forecast_anchor_phase)?;
    Ok(g.value(out).clone())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftVariant {
    #[default]
    Identity,
    /// Per-phase, per-channel scale and bias.
    Affine,
    /// Channel-shared `24 × 24` mixing matrix plus per-phase bias.
    Linear,
}

impl std::str::FromStr for ShiftVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(ShiftVariant::Identity),
            "affine" => Ok(ShiftVariant::Affine),
            "linear" => Ok(ShiftVariant::Linear),
            other => Err(Error::Configuration(format!(
                "unknown shift variant `{other}` (identity, affine, linear)"
            ))),
        }
    }
}

/// Trainable map `(M, Σ) → (M', Σ')`. Initialized to the identity map.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftParams {
    variant: ShiftVariant,
    channels: usize,
    shift_means: bool,
    shift_stds: bool,
    params: Vec<Param>,
}

impl ShiftParams {
    pub fn new(variant: ShiftVariant, channels: usize) -> Self {
        Self::with_targets(variant, channels, true, true)
    }

    /// `shift_means` / `shift_stds` choose which statistic the map acts on;
    /// the other passes through unchanged.
    pub fn with_targets(
        variant: ShiftVariant,
        channels: usize,
        shift_means: bool,
        shift_stds: bool,
    ) -> Self {
        let mut params = Vec::new();
        for (enabled, stat) in [(shift_means, "mean"), (shift_stds, "std")] {
            if !enabled {
                continue;
            }
            match variant {
                ShiftVariant::Identity => {}
                ShiftVariant::Affine => {
                    params.push(Param::new(
                        format!("shift.{stat}_scale"),
                        Matrix::filled(PERIOD, channels, 1.0),
                    ));
                    params.push(Param::new(
                        format!("shift.{stat}_bias"),
                        Matrix::zeros(PERIOD, channels),
                    ));
                }
                ShiftVariant::Linear => {
                    params.push(Param::new(format!("shift.{stat}_mix"), Matrix::identity(PERIOD)));
                    params.push(Param::new(
                        format!("shift.{stat}_bias"),
                        Matrix::zeros(PERIOD, channels),
                    ));
                }
            }
        }
        ShiftParams {
            variant,
            channels,
            shift_means,
            shift_stds,
            params,
        }
    }

    pub fn variant(&self) -> ShiftVariant {
        self.variant
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    /// Applies the shift on the graph. `param_ids` are nodes for
    /// [`params`](Self::params), in order.
    pub fn apply(
        &self,
        g: &mut Graph,
        param_ids: &[NodeId],
        means: NodeId,
        stds: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        if param_ids.len() != self.params.len() {
            return Err(shape_err!(
                "{} shift parameter nodes for {} parameters",
                param_ids.len(),
                self.params.len()
            ));
        }
        for stat in [means, stds] {
            if g.value(stat).shape() != (PERIOD, self.channels) {
                let (r, c) = g.value(stat).shape();
                return Err(shape_err!(
                    "phase statistics {r}x{c}, shift expects {PERIOD}x{}",
                    self.channels
                ));
            }
        }
        if self.variant == ShiftVariant::Identity {
            return Ok((means, stds));
        }
        let mut ids = param_ids.iter().copied();
        let mut next_pair = || (ids.next().unwrap(), ids.next().unwrap());
        let mut shifted_means = means;
        let mut shifted_stds = stds;
        if self.shift_means {
            let (a, b) = next_pair();
            shifted_means = self.map(g, means, a, b)?;
        }
        if self.shift_stds {
            let (a, b) = next_pair();
            let raw = self.map(g, stds, a, b)?;
            shifted_stds = g.clamp_min(raw, EPSILON);
        }
        Ok((shifted_means, shifted_stds))
    }

    fn map(&self, g: &mut Graph, stat: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        match self.variant {
            ShiftVariant::Identity => Ok(stat),
            ShiftVariant::Affine => {
                let scaled = g.elementwise_mul(weight, stat)?;
                g.add(scaled, bias)
            }
            ShiftVariant::Linear => g.affine(stat, weight, bias),
        }
    }
}

/// Value-level shift of `stats`.
pub fn shift_stats(stats: &PhaseStats, params: &ShiftParams) -> Result<PhaseStats> {
    let mut g = Graph::new();
    let ids: Vec<NodeId> = params.params().iter().map(|p| g.param(p.value.clone())).collect();
    let m = g.constant(stats.means.clone());
    let s = g.constant(stats.stds.clone());
    let (m2, s2) = params.apply(&mut g, &ids, m, s)?;
    Ok(PhaseStats {
        means: g.value(m2).clone(),
        stds: g.value(s2).clone(),
        anchor_phase: stats.anchor_phase,
        window_len: stats.window_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_window(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-3.0..3.0))
    }

    #[test]
    fn two_day_phase_stats() {
        let mut x = Matrix::zeros(48, 1);
        x.set(7, 0, 1.0);
        x.set(31, 0, 3.0);
        let s = compute_phase_stats(&x, 0).unwrap();
        assert_eq!(s.means.get(7, 0), 2.0);
        assert_eq!(s.stds.get(7, 0), 1.0);
    }

    #[test]
    fn constant_phases_hit_the_floor() {
        let x = Matrix::from_fn(72, 2, |r, c| (r % 24) as f64 + c as f64);
        let s = compute_phase_stats(&x, 3).unwrap();
        assert!(s.stds.data().iter().all(|&v| v == EPSILON));
        let z = normalize(&x, &s, 3).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn anchor_relabels_rows() {
        let x = random_window(96, 2, 4);
        let a = compute_phase_stats(&x, 0).unwrap();
        let b = compute_phase_stats(&x, 5).unwrap();
        for phase in 0..24 {
            let shifted = (phase + 5) % 24;
            assert_eq!(a.means.row(phase), b.means.row(shifted));
            assert_eq!(a.stds.row(phase), b.stds.row(shifted));
        }
    }

    #[test]
    fn stats_ignore_full_day_roll() {
        let x = random_window(96, 3, 9);
        let rolled = Matrix::from_fn(96, 3, |r, c| x.get((r + 24) % 96, c));
        let a = compute_phase_stats(&x, 2).unwrap();
        let b = compute_phase_stats(&rolled, 2).unwrap();
        assert!(a.means.max_abs_diff(&b.means) < 1e-12);
        assert!(a.stds.max_abs_diff(&b.stds) < 1e-12);
    }

    #[test]
    fn rows_must_be_whole_days() {
        assert!(matches!(
            compute_phase_stats(&Matrix::zeros(30, 1), 0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn normalize_checks_anchor() {
        let x = random_window(48, 1, 1);
        let s = compute_phase_stats(&x, 0).unwrap();
        assert!(matches!(normalize(&x, &s, 1), Err(Error::Alignment(_))));
    }

    #[test]
    fn zero_forecast_denormalizes_to_means() {
        let x = random_window(48, 2, 2);
        let s = compute_phase_stats(&x, 6).unwrap();
        let y = denormalize(&Matrix::zeros(24, 2), &s, 6).unwrap();
        for r in 0..24 {
            for j in 0..2 {
                assert_eq!(y.get(r, j), s.means.get((6 + r) % 24, j));
            }
        }
    }

    #[test]
    fn denormalize_checks_phase_continuation() {
        let x = random_window(48, 1, 3);
        let s = compute_phase_stats(&x, 6).unwrap();
        assert!(matches!(
            denormalize(&Matrix::zeros(24, 1), &s, 7),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn known_future_round_trips() {
        let full = random_window(96, 2, 5);
        let x = full.slice_rows(0, 72);
        let y = full.slice_rows(72, 96);
        let s = compute_phase_stats(&x, 10).unwrap();
        let fp = s.forecast_phase();
        let y_norm = Matrix::from_fn(24, 2, |r, j| {
            let p = (fp + r) % 24;
            (y.get(r, j) - s.means.get(p, j)) / s.stds.get(p, j)
        });
        let back = denormalize(&y_norm, &s, fp).unwrap();
        assert!(back.max_abs_diff(&y) < 1e-10);
    }

    #[test]
    fn neutral_shifts_are_identity() {
        let x = random_window(48, 3, 6);
        let s = compute_phase_stats(&x, 0).unwrap();
        for variant in [ShiftVariant::Identity, ShiftVariant::Affine, ShiftVariant::Linear] {
            let shifted = shift_stats(&s, &ShiftParams::new(variant, 3)).unwrap();
            assert_eq!(shifted, s, "{variant:?}");
        }
        assert!(ShiftParams::new(ShiftVariant::Identity, 3).params().is_empty());
    }

    #[test]
    fn doubled_std_scale_doubles_residuals() {
        let x = random_window(48, 2, 7);
        let s = compute_phase_stats(&x, 0).unwrap();
        let mut shift = ShiftParams::new(ShiftVariant::Affine, 2);
        let idx = shift
            .params()
            .iter()
            .position(|p| p.name == "shift.std_scale")
            .unwrap();
        shift.params_mut()[idx].value = Matrix::filled(24, 2, 2.0);
        let shifted = shift_stats(&s, &shift).unwrap();
        let y_norm = random_window(24, 2, 8);
        let base = denormalize(&y_norm, &s, 0).unwrap();
        let doubled = denormalize(&y_norm, &shifted, 0).unwrap();
        for r in 0..24 {
            for j in 0..2 {
                let mu = s.means.get(r, j);
                let (d, b) = (doubled.get(r, j) - mu, base.get(r, j) - mu);
                assert!((d - 2.0 * b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn shifted_stds_are_clamped() {
        let x = random_window(48, 1, 11);
        let s = compute_phase_stats(&x, 0).unwrap();
        let mut shift = ShiftParams::new(ShiftVariant::Linear, 1);
        shift.params_mut()[2].value = Matrix::filled(24, 24, -1.0);
        let shifted = shift_stats(&s, &shift).unwrap();
        assert!(shifted.stds.data().iter().all(|&v| v >= EPSILON));
    }

    #[test]
    fn targets_select_statistics() {
        let shift = ShiftParams::with_targets(ShiftVariant::Affine, 2, false, true);
        let names: Vec<&str> = shift.params().iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["shift.std_scale", "shift.std_bias"]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let x = random_window(48, 2, 12);
        let s = compute_phase_stats(&x, 0).unwrap();
        assert!(matches!(
            shift_stats(&s, &ShiftParams::new(ShiftVariant::Affine, 3)),
            Err(Error::Shape(_))
        ));
    }
}
