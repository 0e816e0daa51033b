//! The four peak-forecasting paradigms and the max-pool peak decoder.
//!
//! | paradigm   | input            | forecaster output | peaks                      | loss            |
//! |------------|------------------|-------------------|----------------------------|-----------------|
//! | `pfp`      | history peaks    | `M/T` rows        | direct                     | peak MSE        |
//! | `sfp`      | full history     | `M/T` rows        | direct                     | peak MSE        |
//! | `sfs`      | full history     | `M` rows          | post-hoc daily max         | sequence MSE    |
//! | `seq2peak` | full history     | `M` rows          | max-pool decoder (trained) | hybrid          |
//!
//! `sfs` and `seq2peak` optionally wrap the forecaster in cyclic
//! normalization. All losses are measured on the dataset scale, after
//! denormalization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cyclicnorm::{
    compute_phase_stats, denormalize_node, normalize, ShiftParams, ShiftVariant,
};
use crate::data::{extract_peak, WindowSample, PERIOD};
use crate::error::{config_err, shape_err, Error, Result};
use crate::grad::{finite_diff_check, GradCheckReport, Graph, NodeId, Param};
use crate::models::{build_forecaster, Forecaster, ModelArgs, ModelKind};
use crate::tensor::Matrix;

pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Paradigm {
    Pfp,
    Sfp,
    Sfs,
    Seq2Peak,
}

impl Paradigm {
    pub const ALL: [Paradigm; 4] = [Paradigm::Pfp, Paradigm::Sfp, Paradigm::Sfs, Paradigm::Seq2Peak];

    pub fn as_str(self) -> &'static str {
        match self {
            Paradigm::Pfp => "pfp",
            Paradigm::Sfp => "sfp",
            Paradigm::Sfs => "sfs",
            Paradigm::Seq2Peak => "seq2peak",
        }
    }
}

impl std::fmt::Display for Paradigm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Paradigm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Paradigm::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| config_err!("unknown paradigm `{s}` (pfp, sfp, sfs, seq2peak)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CyclicNormConfig {
    pub enabled: bool,
    pub shift: ShiftVariant,
    pub shift_means: bool,
    pub shift_stds: bool,
}

impl Default for CyclicNormConfig {
    fn default() -> Self {
        CyclicNormConfig {
            enabled: true,
            shift: ShiftVariant::Identity,
            shift_means: true,
            shift_stds: true,
        }
    }
}

impl CyclicNormConfig {
    pub fn disabled() -> Self {
        CyclicNormConfig {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn with_shift(shift: ShiftVariant) -> Self {
        CyclicNormConfig {
            shift,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub paradigm: Paradigm,
    /// History length `N` in hours.
    pub input_len: usize,
    /// Forecast length `M` in hours.
    pub horizon: usize,
    pub channels: usize,
    pub model: ModelKind,
    pub model_args: ModelArgs,
    pub cyclicnorm: CyclicNormConfig,
    /// Only meaningful for `seq2peak`; defaults to [`DEFAULT_ALPHA`] there.
    pub alpha: Option<f64>,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("input length", self.input_len), ("horizon", self.horizon)] {
            if v == 0 || v % PERIOD != 0 {
                return Err(config_err!("{name} {v} must be a positive multiple of {PERIOD}"));
            }
        }
        if self.channels == 0 {
            return Err(config_err!("pipeline needs at least one channel"));
        }
        match self.paradigm {
            Paradigm::Seq2Peak => {
                if let Some(a) = self.alpha {
                    if !(0.0..=1.0).contains(&a) {
                        return Err(config_err!("alpha {a} outside [0, 1]"));
                    }
                }
            }
            other => {
                if self.alpha.is_some() {
                    return Err(config_err!("alpha only applies to seq2peak, not {other}"));
                }
            }
        }
        if matches!(self.paradigm, Paradigm::Pfp | Paradigm::Sfp) && self.cyclicnorm.enabled {
            return Err(config_err!(
                "cyclic normalization is only available for sfs and seq2peak, not {}",
                self.paradigm
            ));
        }
        Ok(())
    }

    /// Forecaster `(input rows, output rows)` for this paradigm.
    pub fn forecaster_dims(&self) -> (usize, usize) {
        match self.paradigm {
            Paradigm::Pfp => (self.input_len / PERIOD, self.horizon / PERIOD),
            Paradigm::Sfp => (self.input_len, self.horizon / PERIOD),
            Paradigm::Sfs | Paradigm::Seq2Peak => (self.input_len, self.horizon),
        }
    }
}

/// `α·l_seq + (1-α)·l_peak` on the graph.
pub fn hybrid_loss_node(
    g: &mut Graph,
    y_hat: NodeId,
    y: NodeId,
    peak_hat: NodeId,
    y_peak: NodeId,
    alpha: f64,
) -> Result<NodeId> {
    check_alpha(alpha)?;
    let seq = g.mse(y_hat, y)?;
    let peak = g.mse(peak_hat, y_peak)?;
    g.scale_add(seq, alpha, peak, 1.0 - alpha)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(())
}

/// Value-level hybrid loss.
pub fn hybrid_loss(
    y_hat: &Matrix,
    y: &Matrix,
    peak_hat: &Matrix,
    y_peak: &Matrix,
    alpha: f64,
) -> Result<f64> {
    let mut g = Graph::new();
    let nodes = [y_hat, y, peak_hat, y_peak].map(|m| g.constant(m.clone()));
    let l = hybrid_loss_node(&mut g, nodes[0], nodes[1], nodes[2], nodes[3], alpha)?;
    Ok(g.scalar(l))
}

/// Differentiable daily-max decoder: stride-24, kernel-24 max-pool over time.
pub fn peak_decode_node(g: &mut Graph, y_hat: NodeId) -> Result<NodeId> {
    g.maxpool_time(y_hat, PERIOD)
}

/// Value-level peak decoding.
pub fn peak_decode(y_hat: &Matrix) -> Result<Matrix> {
    let mut g = Graph::new();
    let y = g.constant(y_hat.clone());
    let p = peak_decode_node(&mut g, y)?;
    Ok(g.value(p).clone())
}

/// Nodes produced by one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    /// Full-resolution forecast on the dataset scale (`sfs`, `seq2peak`).
    pub sequence: Option<NodeId>,
    pub peaks: Matrix,
    pub loss: NodeId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub sequence: Option<Matrix>,
    /// `(M/T) × c` on the dataset scale.
    pub peaks: Matrix,
}

#[derive(Clone, Debug)]
pub struct Pipeline {
    config: PipelineConfig,
    alpha: f64,
    forecaster: Box<dyn Forecaster>,
    shift: Option<ShiftParams>,
}

/// Validates `config` and seeds the forecaster.
pub fn build_pipeline(config: &PipelineConfig, seed: u64) -> Result<Pipeline> {
    config.validate()?;
    let (n, m) = config.forecaster_dims();
    let forecaster = build_forecaster(config.model, &config.model_args, n, m, config.channels, seed)?;
    let shift = config.cyclicnorm.enabled.then(|| {
        ShiftParams::with_targets(
            config.cyclicnorm.shift,
            config.channels,
            config.cyclicnorm.shift_means,
            config.cyclicnorm.shift_stds,
        )
    });
    let alpha = match config.paradigm {
        Paradigm::Seq2Peak => config.alpha.unwrap_or(DEFAULT_ALPHA),
        _ => 1.0,
    };
    Ok(Pipeline {
        config: config.clone(),
        alpha,
        forecaster,
        shift,
    })
}

impl Pipeline {
    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn paradigm(&self) -> Paradigm {
        self.config.paradigm
    }

    /// Effective hybrid weight (1 for paradigms without a peak term).
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn forecaster(&self) -> &dyn Forecaster {
        self.forecaster.as_ref()
    }

    pub fn shift(&self) -> Option<&ShiftParams> {
        self.shift.as_ref()
    }

    /// Forecaster parameters followed by shift parameters.
    pub fn params(&self) -> Vec<&Param> {
        let mut out: Vec<&Param> = self.forecaster.params().iter().collect();
        if let Some(shift) = &self.shift {
            out.extend(shift.params());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = self.forecaster.params_mut().iter_mut().collect();
        if let Some(shift) = &mut self.shift {
            out.extend(shift.params_mut().iter_mut());
        }
        out
    }

    pub fn param_values(&self) -> Vec<Matrix> {
        self.params().into_iter().map(|p| p.value.clone()).collect()
    }

    pub fn set_param_values(&mut self, values: &[Matrix]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != values.len() {
            return Err(shape_err!(
                "{} values for {} parameters",
                values.len(),
                params.len()
            ));
        }
        for (p, v) in params.iter_mut().zip(values) {
            if p.value.shape() != v.shape() {
                return Err(shape_err!("parameter `{}` shape mismatch", p.name));
            }
            p.value = v.clone();
        }
        Ok(())
    }

    fn check_sample(&self, sample: &WindowSample) -> Result<()> {
        let c = self.config.channels;
        if sample.x.shape() != (self.config.input_len, c)
            || sample.y.shape() != (self.config.horizon, c)
        {
            return Err(shape_err!(
                "sample {}x{} -> {}x{} does not match pipeline {}x{c} -> {}x{c}",
                sample.x.rows(),
                sample.x.cols(),
                sample.y.rows(),
                sample.y.cols(),
                self.config.input_len,
                self.config.horizon
            ));
        }
        Ok(())
    }

    /// Builds the full computation for `sample` on `g`. `param_ids` are
    /// nodes for [`params`](Self::params), in order.
    pub fn forward(&self, g: &mut Graph, param_ids: &[NodeId], sample: &WindowSample) -> Result<ForwardPass> {
        self.check_sample(sample)?;
        let n_model = self.forecaster.params().len();
        let (model_ids, shift_ids) = param_ids.split_at(n_model);
        match self.config.paradigm {
            Paradigm::Pfp | Paradigm::Sfp => {
                let input = if self.config.paradigm == Paradigm::Pfp {
                    extract_peak(&sample.x)?
                } else {
                    sample.x.clone()
                };
                let x = g.constant(input);
                let peak_hat = self.forecaster.forward(g, model_ids, x)?;
                let y_peak = g.constant(sample.y_peak.clone());
                let loss = g.mse(peak_hat, y_peak)?;
                Ok(ForwardPass {
                    sequence: None,
                    peaks: g.value(peak_hat).clone(),
                    loss,
                })
            }
            Paradigm::Sfs | Paradigm::Seq2Peak => {
                let y_hat = self.sequence_forecast(g, model_ids, shift_ids, sample)?;
                let y = g.constant(sample.y.clone());
                if self.config.paradigm == Paradigm::Sfs {
                    let loss = g.mse(y_hat, y)?;
                    let peaks = extract_peak(g.value(y_hat))?;
                    return Ok(ForwardPass {
                        sequence: Some(y_hat),
                        peaks,
                        loss,
                    });
                }
                let peak_hat = peak_decode_node(g, y_hat)?;
                let y_peak = g.constant(sample.y_peak.clone());
                let loss = hybrid_loss_node(g, y_hat, y, peak_hat, y_peak, self.alpha)?;
                Ok(ForwardPass {
                    sequence: Some(y_hat),
                    peaks: g.value(peak_hat).clone(),
                    loss,
                })
            }
        }
    }

    /// Forecaster output on the dataset scale, through cyclic normalization
    /// when enabled.
    fn sequence_forecast(
        &self,
        g: &mut Graph,
        model_ids: &[NodeId],
        shift_ids: &[NodeId],
        sample: &WindowSample,
    ) -> Result<NodeId> {
        let Some(shift) = &self.shift else {
            let x = g.constant(sample.x.clone());
            return self.forecaster.forward(g, model_ids, x);
        };
        let stats = compute_phase_stats(&sample.x, sample.start_phase)?;
        let x_norm = normalize(&sample.x, &stats, sample.start_phase)?;
        let x = g.constant(x_norm);
        let y_norm = self.forecaster.forward(g, model_ids, x)?;
        let means = g.constant(stats.means.clone());
        let stds = g.constant(stats.stds.clone());
        let (means, stds) = shift.apply(g, shift_ids, means, stds)?;
        denormalize_node(g, y_norm, means, stds, stats.forecast_phase())
    }

    fn bind(&self, g: &mut Graph) -> Vec<NodeId> {
        self.params().into_iter().map(|p| g.param(p.value.clone())).collect()
    }

    /// Training loss and its gradient for every parameter, in
    /// [`params`](Self::params) order.
    pub fn loss_and_grads(&self, sample: &WindowSample) -> Result<(f64, Vec<Matrix>)> {
        let mut g = Graph::new();
        let ids = self.bind(&mut g);
        let pass = self.forward(&mut g, &ids, sample)?;
        let grads = g.backward(pass.loss)?;
        let out = ids
            .iter()
            .map(|&id| grads.get_or_zeros(id, g.value(id).shape()))
            .collect();
        Ok((g.scalar(pass.loss), out))
    }

    /// Per-sample losses and the gradient of their mean, from a single graph
    /// so the parameters are bound once per batch.
    pub fn batch_loss_and_grads(&self, samples: &[WindowSample]) -> Result<(Vec<f64>, Vec<Matrix>)> {
        if samples.is_empty() {
            return Err(shape_err!("empty batch"));
        }
        let mut g = Graph::new();
        let ids = self.bind(&mut g);
        let mut losses = Vec::with_capacity(samples.len());
        let mut total: Option<NodeId> = None;
        for s in samples {
            let loss = self.forward(&mut g, &ids, s)?.loss;
            losses.push(g.scalar(loss));
            total = Some(match total {
                None => loss,
                Some(t) => g.scale_add(t, 1.0, loss, 1.0)?,
            });
        }
        let total = total.expect("non-empty batch");
        let mean = g.scale_add(total, 1.0 / samples.len() as f64, total, 0.0)?;
        let grads = g.backward(mean)?;
        let out = ids
            .iter()
            .map(|&id| grads.get_or_zeros(id, g.value(id).shape()))
            .collect();
        Ok((losses, out))
    }

    pub fn loss(&self, sample: &WindowSample) -> Result<f64> {
        let mut g = Graph::new();
        let ids = self.bind(&mut g);
        let pass = self.forward(&mut g, &ids, sample)?;
        Ok(g.scalar(pass.loss))
    }

    pub fn predict(&self, sample: &WindowSample) -> Result<Prediction> {
        let mut g = Graph::new();
        let ids = self.bind(&mut g);
        let pass = self.forward(&mut g, &ids, sample)?;
        Ok(Prediction {
            sequence: pass.sequence.map(|id| g.value(id).clone()),
            peaks: pass.peaks,
        })
    }
}

/// Central-difference check of the full training loss on one seeded random
/// window. Shift parameters are perturbed away from their neutral start so
/// every term carries gradient.
pub fn gradient_check(config: &PipelineConfig, seed: u64, h: f64, tol: f64) -> Result<GradCheckReport> {
    let mut pipeline = build_pipeline(config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n_model = pipeline.forecaster().params().len();
    for p in pipeline.params_mut().into_iter().skip(n_model) {
        p.value.data_mut().iter_mut().for_each(|v| *v += rng.random_range(-0.2..0.2));
    }
    let (n, m, c) = (config.input_len, config.horizon, config.channels);
    let start_phase = rng.random_range(0..PERIOD);
    let wave = |t: usize| (2.0 * std::f64::consts::PI * ((t + start_phase) % PERIOD) as f64 / PERIOD as f64).sin();
    let x = Matrix::from_fn(n, c, |t, _| wave(t) + rng.random_range(-1.0..1.0));
    let y = Matrix::from_fn(m, c, |t, _| wave(n + t) + rng.random_range(-1.0..1.0));
    let sample = WindowSample {
        y_peak: extract_peak(&y)?,
        x,
        y,
        start_phase,
        origin_index: 0,
    };
    let params: Vec<Param> = pipeline.params().into_iter().cloned().collect();
    let build = |g: &mut Graph, ids: &[NodeId]| Ok(pipeline.forward(g, ids, &sample)?.loss);
    finite_diff_check(build, &params, h, tol)
}
