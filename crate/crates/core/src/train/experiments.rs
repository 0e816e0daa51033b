//! Multi-seed experiment suites: paradigm comparison, module ablation and
//! the alpha sweep. Every (row, seed) cell trains independently and cells
//! run on the current rayon pool; results are gathered in a fixed order, so
//! output does not depend on scheduling.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{average, evaluate, validate_horizons, EvalReport, HorizonMetrics, Metrics};
use super::trainer::{train, TrainConfig};
use crate::data::{split, standardize, ChannelStats, SplitRatios, TimeSeriesFrame, WindowSet, PERIOD};
use crate::error::{config_err, Error, Result};
use crate::pipeline::{build_pipeline, CyclicNormConfig, Paradigm, Pipeline, PipelineConfig, DEFAULT_ALPHA};

/// Standardized train/val/test windows of one dataset.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub train: WindowSet,
    pub val: WindowSet,
    pub test: WindowSet,
    /// Train-split statistics; inverts standardized values to raw units.
    pub stats: ChannelStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowStrides {
    pub train: usize,
    pub eval: usize,
}

impl Default for WindowStrides {
    fn default() -> Self {
        WindowStrides { train: 1, eval: 1 }
    }
}

/// Splits chronologically, standardizes with train statistics and cuts
/// `(input_len, horizon)` windows from each split.
pub fn prepare_dataset(
    name: &str,
    frame: &TimeSeriesFrame,
    ratios: SplitRatios,
    input_len: usize,
    horizon: usize,
    strides: WindowStrides,
) -> Result<Dataset> {
    let (train, val, test) = split(frame, ratios, input_len + horizon)?;
    let (train, rest, stats) = standardize(&train, &[&val, &test])?;
    let [val, test]: [TimeSeriesFrame; 2] = rest.try_into().expect("two frames in, two out");
    let windows = |f: TimeSeriesFrame, stride| WindowSet::new(Arc::new(f), input_len, horizon, stride);
    Ok(Dataset {
        name: name.to_string(),
        train: windows(train, strides.train)?,
        val: windows(val, strides.eval)?,
        test: windows(test, strides.eval)?,
        stats,
    })
}

/// Shared settings for a suite. The paradigm, alpha and cyclic-norm fields
/// of `base` are overridden per row where the suite defines them.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub base: PipelineConfig,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    /// Days, each no longer than the forecast.
    pub horizons: Vec<usize>,
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_err!("at least one seed is required"));
        }
        self.train.validate()?;
        validate_horizons(&self.horizons, self.base.horizon / PERIOD)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowSpec {
    pub label: String,
    pub pipeline: PipelineConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedMean {
    pub horizons: Vec<HorizonMetrics>,
    pub avg: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub label: String,
    pub paradigm: Paradigm,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub cyclicnorm: bool,
    pub seeds: Vec<SeedResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<SeedMean>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Row {
    /// Mean over seeds of the average-across-horizons peak MSE.
    pub fn mean_mse(&self) -> Option<f64> {
        self.mean.as_ref().map(|m| m.avg.mse)
    }

    /// Per-seed average-across-horizons peak MSE, in seed order.
    pub fn seed_mse(&self) -> Vec<f64> {
        self.seeds.iter().map(|s| s.report.avg.mse).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSet {
    pub suite: String,
    pub dataset: String,
    pub input_len: usize,
    pub horizon: usize,
    pub model: String,
    pub rows: Vec<Row>,
}

impl ReportSet {
    pub fn row(&self, label: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Seed-mean table with one line per horizon plus `Avg`, two columns
    /// (MSE, MAE) per row.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "## {} on {} (model {}, input {} h, forecast {} h)\n",
            self.suite, self.dataset, self.model, self.input_len, self.horizon
        );
        s.push_str("| dataset | horizon |");
        for r in &self.rows {
            let _ = write!(s, " {} MSE | {} MAE |", r.label, r.label);
        }
        s.push_str("\n|---|---|");
        s.push_str(&"---|---|".repeat(self.rows.len()));
        s.push('\n');
        let horizons: Vec<usize> = self
            .rows
            .iter()
            .find_map(|r| r.mean.as_ref())
            .map(|m| m.horizons.iter().map(|h| h.horizon_days).collect())
            .unwrap_or_default();
        let cell = |m: Option<Metrics>| match m {
            Some(m) => format!(" {:.4} | {:.4} |", m.mse, m.mae),
            None => " n/a | n/a |".to_string(),
        };
        for (k, h) in horizons.iter().enumerate() {
            let _ = write!(s, "| {} | {h}d |", self.dataset);
            for r in &self.rows {
                let m = r.mean.as_ref().map(|m| Metrics {
                    mse: m.horizons[k].mse,
                    mae: m.horizons[k].mae,
                });
                s.push_str(&cell(m));
            }
            s.push('\n');
        }
        let _ = write!(s, "| {} | Avg |", self.dataset);
        for r in &self.rows {
            s.push_str(&cell(r.mean.as_ref().map(|m| m.avg)));
        }
        s.push('\n');
        for r in self.rows.iter().filter(|r| r.error.is_some()) {
            let _ = writeln!(s, "\n{}: {}", r.label, r.error.as_deref().unwrap_or_default());
        }
        s
    }

    /// Writes `<stem>.json` and `<stem>.md` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::write(dir.join(format!("{stem}.json")), self.to_json()?)?;
        std::fs::write(dir.join(format!("{stem}.md")), self.to_markdown())?;
        Ok(())
    }
}

/// Trains one pipeline with `seed` (initialization and shuffling) and scores
/// it on the test split.
pub fn run_cell(
    data: &Dataset,
    config: &PipelineConfig,
    train_config: &TrainConfig,
    seed: u64,
    horizons: &[usize],
) -> Result<(Pipeline, SeedResult)> {
    let mut pipeline = build_pipeline(config, seed)?;
    let tc = TrainConfig {
        seed,
        ..train_config.clone()
    };
    let history = train(&mut pipeline, &data.train, &data.val, &tc)?;
    let report = evaluate(&pipeline, &data.test, horizons)?;
    Ok((
        pipeline,
        SeedResult {
            seed,
            best_epoch: history.best_epoch,
            epochs_run: history.epochs.len(),
            report,
        },
    ))
}

fn seed_mean(seeds: &[SeedResult]) -> SeedMean {
    let n = seeds.len() as f64;
    let horizons: Vec<HorizonMetrics> = seeds[0]
        .report
        .horizons
        .iter()
        .enumerate()
        .map(|(k, h)| HorizonMetrics {
            horizon_days: h.horizon_days,
            mse: seeds.iter().map(|s| s.report.horizons[k].mse).sum::<f64>() / n,
            mae: seeds.iter().map(|s| s.report.horizons[k].mae).sum::<f64>() / n,
        })
        .collect();
    SeedMean {
        avg: average(&horizons),
        horizons,
    }
}

struct RowOutcome {
    row: Row,
    /// Trained pipeline for the first seed, when it succeeded.
    first: Option<Pipeline>,
    err: Option<Error>,
}

/// Runs every (row, seed) cell. A failing cell marks its row with the
/// first error in seed order; other rows are unaffected.
fn run_rows(suite: &str, data: &Dataset, config: &SuiteConfig, rows: &[RowSpec]) -> Result<Vec<RowOutcome>> {
    config.validate()?;
    for r in rows {
        r.pipeline.validate()?;
    }
    let cells: Vec<(usize, u64)> = (0..rows.len())
        .flat_map(|r| config.seeds.iter().map(move |&s| (r, s)))
        .collect();
    let results: Vec<Result<(Pipeline, SeedResult)>> = cells
        .par_iter()
        .map(|&(r, seed)| {
            let out = run_cell(data, &rows[r].pipeline, &config.train, seed, &config.horizons);
            match &out {
                Ok((_, s)) => info!(
                    "{suite}: {} seed {seed}: peak mse {:.5} (best epoch {})",
                    rows[r].label, s.report.avg.mse, s.best_epoch
                ),
                Err(e) => warn!("{suite}: {} seed {seed} failed: {e}", rows[r].label),
            }
            out
        })
        .collect();
    let mut results = results.into_iter();
    let mut out = Vec::with_capacity(rows.len());
    for spec in rows {
        let p = &spec.pipeline;
        let mut row = Row {
            label: spec.label.clone(),
            paradigm: p.paradigm,
            alpha: (p.paradigm == Paradigm::Seq2Peak).then(|| p.alpha.unwrap_or(DEFAULT_ALPHA)),
            cyclicnorm: p.cyclicnorm.enabled,
            seeds: Vec::new(),
            mean: None,
            error: None,
        };
        let mut first = None;
        let mut err = None;
        for _ in &config.seeds {
            match results.next().expect("one result per cell") {
                Ok((pipeline, s)) => {
                    if first.is_none() && row.seeds.is_empty() {
                        first = Some(pipeline);
                    }
                    row.seeds.push(s);
                }
                Err(e) => {
                    if err.is_none() {
                        row.error = Some(e.to_string());
                        err = Some(e);
                    }
                }
            }
        }
        if row.error.is_some() {
            row.seeds.clear();
            first = None;
        } else {
            row.mean = Some(seed_mean(&row.seeds));
        }
        out.push(RowOutcome { row, first, err });
    }
    Ok(out)
}

fn report_set(suite: &str, data: &Dataset, config: &SuiteConfig, rows: Vec<Row>) -> ReportSet {
    ReportSet {
        suite: suite.to_string(),
        dataset: data.name.clone(),
        input_len: config.base.input_len,
        horizon: config.base.horizon,
        model: config.base.model.to_string(),
        rows,
    }
}

/// Rows as a result, failing with the first cell error.
fn strict(outcomes: Vec<RowOutcome>) -> Result<Vec<Row>> {
    outcomes
        .into_iter()
        .map(|o| match o.err {
            Some(e) => Err(e),
            None => Ok(o.row),
        })
        .collect()
}

/// Pipeline settings for `paradigm` in the comparison: PFP, SFP and SFS
/// run without cyclic normalization; Seq2Peak keeps the base settings.
pub fn paradigm_config(base: &PipelineConfig, paradigm: Paradigm) -> PipelineConfig {
    let mut c = base.clone();
    c.paradigm = paradigm;
    if paradigm == Paradigm::Seq2Peak {
        c.alpha = Some(base.alpha.unwrap_or(DEFAULT_ALPHA));
    } else {
        c.alpha = None;
        c.cyclicnorm = CyclicNormConfig {
            enabled: false,
            ..base.cyclicnorm.clone()
        };
    }
    c
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub report: ReportSet,
    /// Trace CSVs written, one per successful paradigm.
    pub traces: Vec<std::path::PathBuf>,
}

/// Trains every listed paradigm on shared data and seeds. When `trace_dir`
/// is given, writes `trace_<paradigm>.csv` for the first seed of each
/// paradigm. A failing paradigm is reported in its row.
pub fn run_paradigm_comparison(
    data: &Dataset,
    config: &SuiteConfig,
    paradigms: &[Paradigm],
    trace_dir: Option<&Path>,
) -> Result<Comparison> {
    if paradigms.is_empty() {
        return Err(config_err!("no paradigms listed"));
    }
    let rows: Vec<RowSpec> = paradigms
        .iter()
        .map(|&p| RowSpec {
            label: p.to_string(),
            pipeline: paradigm_config(&config.base, p),
        })
        .collect();
    let outcomes = run_rows("compare", data, config, &rows)?;
    let mut traces = Vec::new();
    if let Some(dir) = trace_dir {
        for o in &outcomes {
            if let Some(p) = &o.first {
                let path = dir.join(format!("trace_{}.csv", o.row.paradigm));
                write_trace(p, &data.test, &data.stats, &path)?;
                traces.push(path);
            }
        }
    }
    let rows = outcomes.into_iter().map(|o| o.row).collect();
    Ok(Comparison {
        report: report_set("compare", data, config, rows),
        traces,
    })
}

pub const ABLATION_LABELS: [&str; 4] = ["baseline", "+Decoder", "+CyclicNorm", "+Seq2Peak"];

/// The four ablation rows over the base model.
pub fn ablation_rows(base: &PipelineConfig) -> Vec<RowSpec> {
    let cn_on = CyclicNormConfig {
        enabled: true,
        ..base.cyclicnorm.clone()
    };
    let cn_off = CyclicNormConfig {
        enabled: false,
        ..base.cyclicnorm.clone()
    };
    let alpha = Some(base.alpha.unwrap_or(DEFAULT_ALPHA));
    let make = |paradigm, cyclicnorm: &CyclicNormConfig| PipelineConfig {
        paradigm,
        alpha: if paradigm == Paradigm::Seq2Peak { alpha } else { None },
        cyclicnorm: cyclicnorm.clone(),
        ..base.clone()
    };
    let configs = [
        make(Paradigm::Sfs, &cn_off),
        make(Paradigm::Seq2Peak, &cn_off),
        make(Paradigm::Sfs, &cn_on),
        make(Paradigm::Seq2Peak, &cn_on),
    ];
    ABLATION_LABELS
        .iter()
        .zip(configs)
        .map(|(l, pipeline)| RowSpec {
            label: l.to_string(),
            pipeline,
        })
        .collect()
}

pub fn run_ablation(data: &Dataset, config: &SuiteConfig) -> Result<ReportSet> {
    let outcomes = run_rows("ablate", data, config, &ablation_rows(&config.base))?;
    let rows = strict(outcomes)?;
    Ok(report_set("ablate", data, config, rows))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub mse: f64,
    pub mae: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaSweep {
    pub report: ReportSet,
    /// Seed-mean average peak errors per alpha, in input order.
    pub curve: Vec<SweepPoint>,
}

impl AlphaSweep {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "alpha,mse,mae")?;
        for p in &self.curve {
            writeln!(out, "{},{},{}", p.alpha, p.mse, p.mae)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One Seq2Peak row per alpha with the base cyclic-norm settings.
pub fn run_alpha_sweep(data: &Dataset, config: &SuiteConfig, alphas: &[f64]) -> Result<AlphaSweep> {
    if alphas.len() < 3 {
        return Err(config_err!("an alpha sweep needs at least 3 values, got {}", alphas.len()));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(config_err!("alpha {a} outside [0, 1]"));
    }
    let rows: Vec<RowSpec> = alphas
        .iter()
        .map(|&a| RowSpec {
            label: format!("alpha={a}"),
            pipeline: PipelineConfig {
                paradigm: Paradigm::Seq2Peak,
                alpha: Some(a),
                ..config.base.clone()
            },
        })
        .collect();
    let outcomes = run_rows("sweep-alpha", data, config, &rows)?;
    let rows = strict(outcomes)?;
    let curve = rows
        .iter()
        .zip(alphas)
        .map(|(r, &alpha)| {
            let m = r.mean.as_ref().expect("rows without error carry a mean").avg;
            SweepPoint {
                alpha,
                mse: m.mse,
                mae: m.mae,
            }
        })
        .collect();
    Ok(AlphaSweep {
        report: report_set("sweep-alpha", data, config, rows),
        curve,
    })
}

/// Writes `window,day,channel,y_true_peak,y_pred_peak` for every test
/// window, in raw units.
pub fn write_trace(pipeline: &Pipeline, test: &WindowSet, stats: &ChannelStats, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "window,day,channel,y_true_peak,y_pred_peak")?;
    let names = test.frame().channel_names();
    for (w, s) in test.iter().enumerate() {
        let pred = pipeline.predict(&s)?;
        let truth = stats.invert(&s.y_peak);
        let pred = stats.invert(&pred.peaks);
        for d in 0..truth.rows() {
            for (j, name) in names.iter().enumerate() {
                writeln!(out, "{w},{d},{name},{},{}", truth.get(d, j), pred.get(d, j))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
