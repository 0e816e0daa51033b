//! Forecasters: normalized history `N × c` → normalized forecast `M × c`.
//!
//! Weights are shared across channels by default (each channel is an
//! independent column pushed through the same map). With `per_channel` set,
//! every channel gets its own copy of the parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::PERIOD;
use crate::error::{config_err, shape_err, Error, Result};
use crate::grad::{Graph, NodeId, Param};
use crate::tensor::Matrix;

pub trait Forecaster: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;

    /// Rows consumed (`N`).
    fn input_len(&self) -> usize;

    /// Rows produced (`M`).
    fn output_len(&self) -> usize;

    fn channels(&self) -> usize;

    /// Trainable tensors, always in the same order.
    fn params(&self) -> &[Param];

    fn params_mut(&mut self) -> &mut [Param];

    /// Builds the forecast on `g`. `params` holds one node per entry of
    /// [`params`](Self::params); `x` is an `N × c` node.
    fn forward(&self, g: &mut Graph, params: &[NodeId], x: NodeId) -> Result<NodeId>;

    fn box_clone(&self) -> Box<dyn Forecaster>;
}

impl Clone for Box<dyn Forecaster> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Persistence,
    Linear,
    #[serde(rename = "dlinear")]
    DLinear,
    Mlp,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Persistence => "persistence",
            ModelKind::Linear => "linear",
            ModelKind::DLinear => "dlinear",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "persistence" => Ok(ModelKind::Persistence),
            "linear" => Ok(ModelKind::Linear),
            "dlinear" => Ok(ModelKind::DLinear),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(config_err!(
                "unknown model `{other}` (persistence, linear, dlinear, mlp)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelArgs {
    /// MLP hidden width.
    pub hidden: usize,
    /// DLinear moving-average kernel (odd).
    pub kernel: usize,
    pub per_channel: bool,
}

impl Default for ModelArgs {
    fn default() -> Self {
        ModelArgs {
            hidden: 32,
            kernel: 25,
            per_channel: false,
        }
    }
}

/// Constructs and seeds a forecaster.
pub fn build_forecaster(
    kind: ModelKind,
    args: &ModelArgs,
    input_len: usize,
    output_len: usize,
    channels: usize,
    seed: u64,
) -> Result<Box<dyn Forecaster>> {
    if input_len == 0 || output_len == 0 || channels == 0 {
        return Err(config_err!(
            "forecaster dimensions must be positive (N {input_len}, M {output_len}, c {channels})"
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match kind {
        ModelKind::Persistence => Box::new(PersistenceForecaster::new(input_len, output_len, channels)?),
        ModelKind::Linear => Box::new(LinearForecaster::new(
            input_len,
            output_len,
            channels,
            args.per_channel,
            &mut rng,
        )),
        ModelKind::DLinear => Box::new(DLinearForecaster::new(
            input_len,
            output_len,
            channels,
            args.kernel,
            args.per_channel,
            &mut rng,
        )?),
        ModelKind::Mlp => Box::new(MlpForecaster::new(
            input_len,
            output_len,
            channels,
            args.hidden,
            args.per_channel,
            &mut rng,
        )?),
    })
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
fn uniform(rows: usize, cols: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
}

/// Parameter groups: one group when weights are shared, else one per channel.
fn param_groups(per_channel: bool, channels: usize) -> Vec<String> {
    if per_channel {
        (0..channels).map(|j| format!(".ch{j}")).collect()
    } else {
        vec![String::new()]
    }
}

/// Applies `head` to each channel column with its own parameter slice and
/// reassembles the `rows × c` result, or applies it once to all columns
/// when weights are shared.
fn apply_heads(
    g: &mut Graph,
    x: NodeId,
    params: &[NodeId],
    per_group: usize,
    per_channel: bool,
    head: impl Fn(&mut Graph, NodeId, &[NodeId]) -> Result<NodeId>,
) -> Result<NodeId> {
    if !per_channel {
        return head(g, x, params);
    }
    let c = g.value(x).cols();
    let mut out: Option<NodeId> = None;
    for j in 0..c {
        let pick = g.constant(Matrix::from_fn(c, 1, |r, _| if r == j { 1.0 } else { 0.0 }));
        let place = g.constant(Matrix::from_fn(1, c, |_, k| if k == j { 1.0 } else { 0.0 }));
        let column = g.matmul(x, pick)?;
        let y = head(g, column, &params[j * per_group..(j + 1) * per_group])?;
        let spread = g.matmul(y, place)?;
        out = Some(match out {
            None => spread,
            Some(acc) => g.add(acc, spread)?,
        });
    }
    Ok(out.expect("at least one channel"))
}

fn check_input(g: &Graph, x: NodeId, rows: usize, cols: usize) -> Result<()> {
    if g.value(x).shape() != (rows, cols) {
        let (r, c) = g.value(x).shape();
        return Err(shape_err!("forecaster expects {rows}x{cols} input, got {r}x{c}"));
    }
    Ok(())
}

/// Repeats the last 24 input rows across the horizon.
#[derive(Clone, Debug)]
pub struct PersistenceForecaster {
    input_len: usize,
    output_len: usize,
    channels: usize,
}

impl PersistenceForecaster {
    pub fn new(input_len: usize, output_len: usize, channels: usize) -> Result<Self> {
        if input_len < PERIOD {
            return Err(config_err!(
                "persistence needs at least {PERIOD} input rows, got {input_len}"
            ));
        }
        Ok(PersistenceForecaster {
            input_len,
            output_len,
            channels,
        })
    }
}

impl Forecaster for PersistenceForecaster {
    fn name(&self) -> &'static str {
        "persistence"
    }

    fn input_len(&self) -> usize {
        self.input_len
    }

    fn output_len(&self) -> usize {
        self.output_len
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn params(&self) -> &[Param] {
        &[]
    }

    fn params_mut(&mut self) -> &mut [Param] {
        &mut []
    }

    fn forward(&self, g: &mut Graph, _params: &[NodeId], x: NodeId) -> Result<NodeId> {
        check_input(g, x, self.input_len, self.channels)?;
        let last_day = self.input_len - PERIOD;
        let select = g.constant(Matrix::from_fn(self.output_len, self.input_len, |r, k| {
            if k == last_day + r % PERIOD {
                1.0
            } else {
                0.0
            }
        }));
        g.matmul(select, x)
    }

    fn box_clone(&self) -> Box<dyn Forecaster> {
        Box::new(self.clone())
    }
}

/// `Ŷ' = W·X' + b`, `W: M × N`, `b: M`.
#[derive(Clone, Debug)]
pub struct LinearForecaster {
    input_len: usize,
    output_len: usize,
    channels: usize,
    per_channel: bool,
    params: Vec<Param>,
}

impl LinearForecaster {
    pub fn new(
        input_len: usize,
        output_len: usize,
        channels: usize,
        per_channel: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut params = Vec::new();
        for suffix in param_groups(per_channel, channels) {
            params.push(Param::new(
                format!("linear.weight{suffix}"),
                uniform(output_len, input_len, input_len, rng),
            ));
            params.push(Param::new(
                format!("linear.bias{suffix}"),
                uniform(output_len, 1, input_len, rng),
            ));
        }
        LinearForecaster {
            input_len,
            output_len,
            channels,
            per_channel,
            params,
        }
    }
}

impl Forecaster for LinearForecaster {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn input_len(&self) -> usize {
        self.input_len
    }

    fn output_len(&self) -> usize {
        self.output_len
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn params(&self) -> &[Param] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    fn forward(&self, g: &mut Graph, params: &[NodeId], x: NodeId) -> Result<NodeId> {
        check_input(g, x, self.input_len, self.channels)?;
        apply_heads(g, x, params, 2, self.per_channel, |g, x, p| g.affine(x, p[0], p[1]))
    }

    fn box_clone(&self) -> Box<dyn Forecaster> {
        Box::new(self.clone())
    }
}

/// Trend/seasonal decomposition with a linear map per component:
/// `trend = MA_k(X')`, `seasonal = X' - trend`,
/// `Ŷ' = W_t·trend + W_s·seasonal + b`.
#[derive(Clone, Debug)]
pub struct DLinearForecaster {
    input_len: usize,
    output_len: usize,
    channels: usize,
    kernel: usize,
    per_channel: bool,
    params: Vec<Param>,
}

impl DLinearForecaster {
    pub fn new(
        input_len: usize,
        output_len: usize,
        channels: usize,
        kernel: usize,
        per_channel: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if kernel % 2 == 0 {
            return Err(config_err!("moving-average kernel must be odd, got {kernel}"));
        }
        if input_len < kernel {
            return Err(config_err!(
                "dlinear input length {input_len} is shorter than kernel {kernel}"
            ));
        }
        let mut params = Vec::new();
        for suffix in param_groups(per_channel, channels) {
            params.push(Param::new(
                format!("dlinear.trend_weight{suffix}"),
                uniform(output_len, input_len, input_len, rng),
            ));
            params.push(Param::new(
                format!("dlinear.seasonal_weight{suffix}"),
                uniform(output_len, input_len, input_len, rng),
            ));
            params.push(Param::new(
                format!("dlinear.bias{suffix}"),
                uniform(output_len, 1, input_len, rng),
            ));
        }
        Ok(DLinearForecaster {
            input_len,
            output_len,
            channels,
            kernel,
            per_channel,
            params,
        })
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }
}

impl Forecaster for DLinearForecaster {
    fn name(&self) -> &'static str {
        "dlinear"
    }

    fn input_len(&self) -> usize {
        self.input_len
    }

    fn output_len(&self) -> usize {
        self.output_len
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn params(&self) -> &[Param] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    fn forward(&self, g: &mut Graph, params: &[NodeId], x: NodeId) -> Result<NodeId> {
        check_input(g, x, self.input_len, self.channels)?;
        let trend = g.moving_average(x, self.kernel)?;
        let seasonal = g.scale_add(x, 1.0, trend, -1.0)?;
        if !self.per_channel {
            let t = g.affine(trend, params[0], params[2])?;
            let s = g.matmul(params[1], seasonal)?;
            return g.add(t, s);
        }
        let c = self.channels;
        let mut out: Option<NodeId> = None;
        for j in 0..c {
            let pick = g.constant(Matrix::from_fn(c, 1, |r, _| if r == j { 1.0 } else { 0.0 }));
            let place = g.constant(Matrix::from_fn(1, c, |_, k| if k == j { 1.0 } else { 0.0 }));
            let p = &params[j * 3..(j + 1) * 3];
            let tj = g.matmul(trend, pick)?;
            let sj = g.matmul(seasonal, pick)?;
            let t = g.affine(tj, p[0], p[2])?;
            let s = g.matmul(p[1], sj)?;
            let y = g.add(t, s)?;
            let spread = g.matmul(y, place)?;
            out = Some(match out {
                None => spread,
                Some(acc) => g.add(acc, spread)?,
            });
        }
        Ok(out.expect("at least one channel"))
    }

    fn box_clone(&self) -> Box<dyn Forecaster> {
        Box::new(self.clone())
    }
}

/// `Ŷ' = W₂·tanh(W₁·X' + b₁) + b₂` per channel column.
#[derive(Clone, Debug)]
pub struct MlpForecaster {
    input_len: usize,
    output_len: usize,
    channels: usize,
    hidden: usize,
    per_channel: bool,
    params: Vec<Param>,
}

impl MlpForecaster {
    pub fn new(
        input_len: usize,
        output_len: usize,
        channels: usize,
        hidden: usize,
        per_channel: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if hidden < 1 {
            return Err(config_err!("mlp hidden width must be >= 1"));
        }
        let mut params = Vec::new();
        for suffix in param_groups(per_channel, channels) {
            params.push(Param::new(
                format!("mlp.hidden_weight{suffix}"),
                uniform(hidden, input_len, input_len, rng),
            ));
            params.push(Param::new(
                format!("mlp.hidden_bias{suffix}"),
                uniform(hidden, 1, input_len, rng),
            ));
            params.push(Param::new(
                format!("mlp.output_weight{suffix}"),
                uniform(output_len, hidden, hidden, rng),
            ));
            params.push(Param::new(
                format!("mlp.output_bias{suffix}"),
                uniform(output_len, 1, hidden, rng),
            ));
        }
        Ok(MlpForecaster {
            input_len,
            output_len,
            channels,
            hidden,
            per_channel,
            params,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }
}

impl Forecaster for MlpForecaster {
    fn name(&self) -> &'static str {
        "mlp"
    }

    fn input_len(&self) -> usize {
        self.input_len
    }

    fn output_len(&self) -> usize {
        self.output_len
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn params(&self) -> &[Param] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    fn forward(&self, g: &mut Graph, params: &[NodeId], x: NodeId) -> Result<NodeId> {
        check_input(g, x, self.input_len, self.channels)?;
        apply_heads(g, x, params, 4, self.per_channel, |g, x, p| {
            let pre = g.affine(x, p[0], p[1])?;
            let h = g.tanh(pre);
            g.affine(h, p[2], p[3])
        })
    }

    fn box_clone(&self) -> Box<dyn Forecaster> {
        Box::new(self.clone())
    }
}

/// Runs `model` on a constant input and returns the forecast values.
pub fn predict(model: &dyn Forecaster, x: &Matrix) -> Result<Matrix> {
    let mut g = Graph::new();
    let ids: Vec<NodeId> = model.params().iter().map(|p| g.param(p.value.clone())).collect();
    let xn = g.constant(x.clone());
    let y = model.forward(&mut g, &ids, xn)?;
    Ok(g.value(y).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::finite_diff_check;

    fn random_input(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-2.0..2.0))
    }

    fn all_kinds() -> [ModelKind; 4] {
        [
            ModelKind::Persistence,
            ModelKind::Linear,
            ModelKind::DLinear,
            ModelKind::Mlp,
        ]
    }

    #[test]
    fn output_shapes() {
        for kind in all_kinds() {
            for per_channel in [false, true] {
                let args = ModelArgs {
                    hidden: 5,
                    per_channel,
                    ..ModelArgs::default()
                };
                let m = build_forecaster(kind, &args, 48, 72, 3, 0).unwrap();
                let y = predict(m.as_ref(), &random_input(48, 3, 1)).unwrap();
                assert_eq!(y.shape(), (72, 3), "{kind:?}");
            }
        }
    }

    #[test]
    fn persistence_repeats_last_day() {
        let x = random_input(48, 2, 3);
        let m = PersistenceForecaster::new(48, 48, 2).unwrap();
        let y = predict(&m, &x).unwrap();
        for r in 0..48 {
            assert_eq!(y.row(r), x.row(24 + r % 24));
        }
        assert!(m.params().is_empty());
        assert!(PersistenceForecaster::new(23, 24, 1).is_err());
    }

    #[test]
    fn linear_zero_map_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = LinearForecaster::new(24, 24, 2, false, &mut rng);
        m.params_mut()[0].value = Matrix::zeros(24, 24);
        m.params_mut()[1].value = Matrix::zeros(24, 1);
        let x = random_input(24, 2, 5);
        assert!(predict(&m, &x).unwrap().data().iter().all(|&v| v == 0.0));
        m.params_mut()[0].value = Matrix::identity(24);
        assert_eq!(predict(&m, &x).unwrap(), x);
    }

    #[test]
    fn dlinear_on_constant_input_uses_trend_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = DLinearForecaster::new(48, 24, 1, 25, false, &mut rng).unwrap();
        let x = Matrix::filled(48, 1, 1.5);
        let y = predict(&m, &x).unwrap();
        let w_t = &m.params()[0].value;
        let b = &m.params()[2].value;
        for r in 0..24 {
            let expected: f64 = w_t.row(r).iter().map(|w| w * 1.5).sum::<f64>() + b.get(r, 0);
            assert!((y.get(r, 0) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn dlinear_components_sum_to_input() {
        let x = random_input(48, 2, 4);
        let mut g = Graph::new();
        let xn = g.constant(x.clone());
        let trend = g.moving_average(xn, 25).unwrap();
        let seasonal = g.scale_add(xn, 1.0, trend, -1.0).unwrap();
        let back = g.add(trend, seasonal).unwrap();
        assert!(g.value(back).max_abs_diff(&x) < 1e-14);
    }

    #[test]
    fn dlinear_rejects_short_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(DLinearForecaster::new(24, 24, 1, 25, false, &mut rng).is_err());
        assert!(DLinearForecaster::new(48, 24, 1, 24, false, &mut rng).is_err());
    }

    #[test]
    fn dead_mlp_outputs_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = MlpForecaster::new(24, 24, 2, 4, false, &mut rng).unwrap();
        for p in m.params_mut().iter_mut().take(3) {
            p.value = Matrix::zeros(p.value.rows(), p.value.cols());
        }
        let b2 = m.params()[3].value.clone();
        let y = predict(&m, &random_input(24, 2, 8)).unwrap();
        for r in 0..24 {
            assert_eq!(y.row(r), &[b2.get(r, 0), b2.get(r, 0)]);
        }
        assert!(MlpForecaster::new(24, 24, 2, 0, false, &mut rng).is_err());
    }

    #[test]
    fn initialization_is_seeded() {
        let args = ModelArgs::default();
        let a = build_forecaster(ModelKind::Mlp, &args, 48, 24, 2, 9).unwrap();
        let b = build_forecaster(ModelKind::Mlp, &args, 48, 24, 2, 9).unwrap();
        let c = build_forecaster(ModelKind::Mlp, &args, 48, 24, 2, 10).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
        let bound = 1.0 / 48f64.sqrt();
        assert!(a.params()[0].value.data().iter().all(|v| v.abs() < bound));
    }

    #[test]
    fn params_order_is_stable() {
        let args = ModelArgs {
            per_channel: true,
            ..ModelArgs::default()
        };
        let m = build_forecaster(ModelKind::DLinear, &args, 48, 24, 2, 0).unwrap();
        let names: Vec<&str> = m.params().iter().map(|p| p.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "dlinear.trend_weight.ch0",
                "dlinear.seasonal_weight.ch0",
                "dlinear.bias.ch0",
                "dlinear.trend_weight.ch1",
                "dlinear.seasonal_weight.ch1",
                "dlinear.bias.ch1",
            ]
        );
    }

    #[test]
    fn gradients_match_finite_differences() {
        let target = random_input(24, 2, 77);
        let x = random_input(48, 2, 78);
        for kind in [ModelKind::Linear, ModelKind::DLinear, ModelKind::Mlp] {
            for per_channel in [false, true] {
                let args = ModelArgs {
                    hidden: 3,
                    per_channel,
                    ..ModelArgs::default()
                };
                let m = build_forecaster(kind, &args, 48, 24, 2, 3).unwrap();
                let build = |g: &mut Graph, ids: &[NodeId]| {
                    let xn = g.constant(x.clone());
                    let y = m.forward(g, ids, xn)?;
                    let t = g.constant(target.clone());
                    g.mse(y, t)
                };
                let report = finite_diff_check(build, m.params(), 1e-5, 1e-4).unwrap();
                assert!(report.passed(), "{kind:?} per_channel={per_channel}: {:?}", report.failures.first());
            }
        }
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let m = build_forecaster(ModelKind::Linear, &ModelArgs::default(), 48, 24, 2, 0).unwrap();
        assert!(matches!(predict(m.as_ref(), &Matrix::zeros(24, 2)), Err(Error::Shape(_))));
    }
}
