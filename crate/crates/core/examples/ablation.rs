//! Baseline SFS, then the decoder and cyclic normalization added alone and
//! together.

use seq2peak::data::{gen_synthetic, SplitRatios, SyntheticSpec};
use seq2peak::models::{ModelArgs, ModelKind};
use seq2peak::pipeline::{CyclicNormConfig, Paradigm, PipelineConfig};
use seq2peak::train::{prepare_dataset, run_ablation, SuiteConfig, TrainConfig, WindowStrides};

fn main() -> seq2peak::Result<()> {
    let frame = gen_synthetic(&SyntheticSpec {
        length: 24 * 240,
        channels: 2,
        trend_slope: 0.002,
        ..SyntheticSpec::default()
    })?;
    let (n, m) = (24 * 14, 24 * 3);
    let data = prepare_dataset("synthetic", &frame, SplitRatios::default(), n, m, WindowStrides { train: 5, eval: 5 })?;
    let suite = SuiteConfig {
        base: PipelineConfig {
            paradigm: Paradigm::Seq2Peak,
            input_len: n,
            horizon: m,
            channels: 2,
            model: ModelKind::DLinear,
            model_args: ModelArgs::default(),
            cyclicnorm: CyclicNormConfig::default(),
            alpha: Some(0.5),
        },
        train: TrainConfig {
            max_epochs: 30,
            patience: 5,
            ..TrainConfig::default()
        },
        seeds: vec![0, 1],
        horizons: vec![3],
    };
    let report = run_ablation(&data, &suite)?;
    print!("{}", report.to_markdown());
    for row in &report.rows {
        println!("{:<12} per-seed peak mse {:?}", row.label, row.seed_mse());
    }
    Ok(())
}
