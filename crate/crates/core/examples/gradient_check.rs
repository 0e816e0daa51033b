//! Central-difference check of the analytic gradients through the whole
//! pipeline: cyclic normalization with an affine shift, each forecaster,
//! the max-pool decoder and the hybrid loss.

use seq2peak::cyclicnorm::ShiftVariant;
use seq2peak::models::{ModelArgs, ModelKind};
use seq2peak::pipeline::{gradient_check, CyclicNormConfig, Paradigm, PipelineConfig};

fn main() -> seq2peak::Result<()> {
    for model in [ModelKind::Linear, ModelKind::DLinear, ModelKind::Mlp] {
        for alpha in [0.0, 0.5, 1.0] {
            let config = PipelineConfig {
                paradigm: Paradigm::Seq2Peak,
                input_len: 48,
                horizon: 48,
                channels: 2,
                model,
                model_args: ModelArgs {
                    hidden: 8,
                    kernel: 5,
                    per_channel: false,
                },
                cyclicnorm: CyclicNormConfig::with_shift(ShiftVariant::Affine),
                alpha: Some(alpha),
            };
            let report = gradient_check(&config, 0, 1e-5, 1e-4)?;
            println!(
                "{model:<7} alpha {alpha:.1}: {} coordinates, max rel error {:.1e}, {} excluded, {}",
                report.checked,
                report.max_rel_error,
                report.excluded.len(),
                if report.passed() { "ok" } else { "FAILED" }
            );
        }
    }
    Ok(())
}
