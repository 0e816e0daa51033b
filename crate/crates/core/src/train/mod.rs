//! Training loop, evaluation, checkpoints and experiment suites.

pub mod checkpoint;
pub mod experiments;
mod metrics;
mod optim;
mod trainer;

pub use experiments::{
    ablation_rows, paradigm_config, prepare_dataset, run_ablation, run_alpha_sweep, run_cell,
    run_paradigm_comparison, write_trace, AlphaSweep, Comparison, Dataset, ReportSet, Row, RowSpec,
    SeedMean, SeedResult, SuiteConfig, SweepPoint, WindowStrides, ABLATION_LABELS,
};
pub use metrics::{evaluate, validate_horizons, EvalReport, HorizonMetrics, Metrics};
pub use optim::{Optimizer, OptimizerKind};
pub use trainer::{peak_mse, train, EpochRecord, History, TrainConfig};
