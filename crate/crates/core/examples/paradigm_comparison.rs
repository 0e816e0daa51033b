//! PFP, SFP, SFS and Seq2Peak trained on the same data and seeds, with
//! per-window peak traces written for plotting.

use seq2peak::data::{gen_synthetic, SplitRatios, SyntheticSpec};
use seq2peak::models::{ModelArgs, ModelKind};
use seq2peak::pipeline::{CyclicNormConfig, Paradigm, PipelineConfig};
use seq2peak::train::{prepare_dataset, run_paradigm_comparison, SuiteConfig, TrainConfig, WindowStrides};

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
            alpha: Some(0.5),
        },
        train: TrainConfig {
            max_epochs: 30,
            patience: 5,
            ..TrainConfig::default()
        },
        seeds: vec![0, 1],
        horizons: vec![1, 3],
    };
    let out = std::env::temp_dir().join("seq2peak-compare");
    std::fs::create_dir_all(&out)?;
    let cmp = run_paradigm_comparison(&data, &suite, &Paradigm::ALL, Some(&out))?;
    print!("{}", cmp.report.to_markdown());
    for t in &cmp.traces {
        println!("trace: {}", t.display());
    }
    Ok(())
}
