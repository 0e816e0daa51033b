//! Train one Seq2Peak pipeline on a synthetic series, save and reload the
//! checkpoint, and score it on the test split.

use seq2peak::data::{gen_synthetic, SplitRatios, SyntheticSpec};
use seq2peak::models::{ModelArgs, ModelKind};
use seq2peak::pipeline::{build_pipeline, CyclicNormConfig, Paradigm, PipelineConfig};
use seq2peak::train::{checkpoint, evaluate, prepare_dataset, train, TrainConfig, WindowStrides};

fn main() -> seq2peak::Result<()> {
    let frame = gen_synthetic(&SyntheticSpec {
        length: 24 * 200,
        channels: 2,
        ..SyntheticSpec::default()
    })?;
    let data = prepare_dataset(
        "synthetic",
        &frame,
        SplitRatios::default(),
        24 * 14,
        24 * 3,
        WindowStrides { train: 5, eval: 5 },
    )?;
    let config = PipelineConfig {
        paradigm: Paradigm::Seq2Peak,
        input_len: 24 * 14,
        horizon: 24 * 3,
        channels: 2,
        model: ModelKind::DLinear,
        model_args: ModelArgs::default(),
        cyclicnorm: CyclicNormConfig::default(),
        alpha: Some(0.5),
    };
    let mut pipeline = build_pipeline(&config, 0)?;
    let history = train(
        &mut pipeline,
        &data.train,
        &data.val,
        &TrainConfig {
            max_epochs: 30,
            patience: 5,
            ..TrainConfig::default()
        },
    )?;
    for e in &history.epochs {
        println!("epoch {:>2}: train {:.4}  val peak mse {:.4}", e.epoch, e.train_loss, e.val_peak_mse);
    }
    println!("restored epoch {}", history.best_epoch);

    let path = std::env::temp_dir().join("seq2peak-example.s2pk");
    checkpoint::save(&pipeline, &path)?;
    let mut reloaded = build_pipeline(&config, 99)?;
    checkpoint::load(&mut reloaded, &path)?;
    let report = evaluate(&reloaded, &data.test, &[1, 2, 3])?;
    for h in &report.horizons {
        println!("{} day(s): mse {:.4} mae {:.4}", h.horizon_days, h.mse, h.mae);
    }
    println!("avg: mse {:.4} mae {:.4}", report.avg.mse, report.avg.mae);
    std::fs::remove_file(path)?;
    Ok(())
}
