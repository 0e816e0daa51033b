//! Peak error as a function of the hybrid-loss weight.

use seq2peak::data::{gen_synthetic, SplitRatios, SyntheticSpec};
use seq2peak::models::{ModelArgs, ModelKind};
use seq2peak::pipeline::{CyclicNormConfig, Paradigm, PipelineConfig};
use seq2peak::train::{prepare_dataset, run_alpha_sweep, SuiteConfig, TrainConfig, WindowStrides};

fn main() -> seq2peak::Result<()> {
    let frame = gen_synthetic(&SyntheticSpec {
        length: 24 * 240,
        channels: 2,
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
            model: ModelKind::Linear,
            model_args: ModelArgs::default(),
            cyclicnorm: CyclicNormConfig::default(),
            alpha: None,
        },
        train: TrainConfig {
            max_epochs: 30,
            patience: 5,
            ..TrainConfig::default()
        },
        seeds: vec![0, 1],
        horizons: vec![3],
    };
    let sweep = run_alpha_sweep(&data, &suite, &[0.0, 0.25, 0.5, 0.75, 1.0])?;
    let out = std::env::temp_dir().join("seq2peak-sweep.csv");
    sweep.write_csv(&out)?;
    for p in &sweep.curve {
        println!("alpha {:<4} peak mse {:.4} mae {:.4}", p.alpha, p.mse, p.mae);
    }
    println!("curve written to {}", out.display());
    Ok(())
}
