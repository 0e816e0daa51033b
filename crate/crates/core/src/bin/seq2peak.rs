use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use seq2peak::config::ExperimentConfig;
use seq2peak::cyclicnorm::ShiftVariant;
use seq2peak::data::{acf, extract_peak, fetch_dataset, sha256_file, PERIOD};
use seq2peak::models::{ModelArgs, ModelKind};
use seq2peak::pipeline::{build_pipeline, gradient_check, CyclicNormConfig, Paradigm, PipelineConfig};
use seq2peak::train::{
    checkpoint, evaluate, prepare_dataset, run_ablation, run_alpha_sweep, run_paradigm_comparison, train,
    Dataset,
};
use seq2peak::{Error, Matrix, Result};

#[derive(Parser, Debug)]
#[command(name = "seq2peak", version, about = "Peak-hour series forecasting experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON experiment config or a previous run.json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dotted override, e.g. `train.max_epochs=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory (default: `out` from the config, else `runs/latest`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Input window in days.
    #[arg(long, global = true)]
    input_days: Option<usize>,
    /// Forecast horizon in days.
    #[arg(long, global = true)]
    horizon_days: Option<usize>,
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Download a dataset into the cache and record its checksum.
    Fetch {
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        url: Option<String>,
    },
    /// Write the configured synthetic series as CSV.
    Synth,
    /// Autocorrelation of one channel and of its daily peak series.
    Acf {
        #[arg(long, default_value = "OT")]
        channel: String,
        #[arg(long, default_value_t = 96)]
        max_lag: usize,
    },
    /// Train the configured paradigm with `train.seed`; writes a checkpoint.
    Train,
    /// Score a checkpoint on the test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train and score every configured paradigm over all seeds.
    Compare,
    /// Four-row module ablation over all seeds.
    Ablate,
    /// One Seq2Peak run per configured alpha over all seeds.
    SweepAlpha,
    /// Finite-difference check of every model under the hybrid loss.
    CheckGrads {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fetch { .. } => "fetch",
            Command::Synth => "synth",
            Command::Acf { .. } => "acf",
            Command::Train => "train",
            Command::Eval { .. } => "eval",
            Command::Compare => "compare",
            Command::Ablate => "ablate",
            Command::SweepAlpha => "sweep-alpha",
            Command::CheckGrads { .. } => "check-grads",
        }
    }

    fn args(&self) -> serde_json::Value {
        match self {
            Command::Fetch { name, url } => json!({ "name": name, "url": url }),
            Command::Acf { channel, max_lag } => json!({ "channel": channel, "max_lag": max_lag }),
            Command::Eval { checkpoint } => json!({ "checkpoint": checkpoint }),
            Command::CheckGrads { seed } => json!({ "seed": seed }),
            _ => json!({}),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.common.quiet {
        log::LevelFilter::Error
    } else if cli.common.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Info
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn resolve_config(common: &Common) -> Result<ExperimentConfig> {
    let mut overrides = common.overrides.clone();
    if let Some(d) = common.input_days {
        overrides.push(format!("input_len={}", d * PERIOD));
    }
    if let Some(d) = common.horizon_days {
        overrides.push(format!("horizon={}", d * PERIOD));
        overrides.push(format!("horizons=[{d}]"));
    }
    ExperimentConfig::load(common.config.as_deref(), &overrides)
}

fn run(cli: &Cli) -> Result<()> {
    let config = resolve_config(&cli.common)?;
    if let Some(jobs) = cli.common.jobs {
        if jobs == 0 {
            return Err(Error::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Usage(e.to_string()))?;
    }
    let out = cli
        .common
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs/latest"));

    // Everything checkable without computing is checked before `out` exists.
    match &cli.command {
        Command::Fetch { name, .. } if name.is_none() && config.dataset.name.is_none() => {
            return Err(Error::Usage("fetch needs --name or dataset.name".into()));
        }
        Command::Synth if config.dataset.synthetic.is_none() => {
            return Err(Error::Usage("synth needs dataset.synthetic".into()));
        }
        Command::Acf { max_lag, .. } if *max_lag == 0 => {
            return Err(Error::Usage("--max-lag must be at least 1".into()));
        }
        Command::Eval { checkpoint } if !checkpoint.is_file() => {
            return Err(Error::Usage(format!("no checkpoint at {}", checkpoint.display())));
        }
        Command::SweepAlpha if config.alphas.len() < 3 => {
            return Err(Error::Usage("sweep-alpha needs at least 3 alphas".into()));
        }
        _ => {}
    }

    std::fs::create_dir_all(&out)?;
    write_manifest(&out, cli, &config)?;
    info!("{} -> {}", cli.command.name(), out.display());

    match &cli.command {
        Command::Fetch { name, url } => {
            let name = name.clone().or_else(|| config.dataset.name.clone()).expect("checked");
            let url = url.clone().or_else(|| config.dataset.url.clone());
            let path = fetch_dataset(&name, url.as_deref(), &config.dataset.cache_dir())?;
            let digest = sha256_file(&path)?;
            std::fs::write(
                out.join("fetch.json"),
                serde_json::to_string_pretty(&json!({ "name": name, "path": path, "sha256": digest }))? + "\n",
            )?;
            println!("{name}: {} (sha256 {digest})", path.display());
        }
        Command::Synth => {
            let frame = config.dataset.load()?;
            let path = out.join("synthetic.csv");
            frame.write_csv(&path)?;
            println!("wrote {} rows x {} channels to {}", frame.len(), frame.channels(), path.display());
        }
        Command::Acf { channel, max_lag } => {
            let frame = config.dataset.load()?;
            let j = frame
                .channel_index(channel)
                .ok_or_else(|| Error::Usage(format!("no channel `{channel}` in {:?}", frame.channel_names())))?;
            let series = frame.channel(j);
            let full = acf(&series, *max_lag)?;
            full.write_csv(&out.join("acf.csv"))?;
            let days = series.len() / PERIOD;
            let peaks = extract_peak(&Matrix::column_vector(series[..days * PERIOD].to_vec()))?.into_data();
            let peak_lag = (*max_lag / PERIOD).max(1).min(peaks.len().saturating_sub(1));
            let peak = acf(&peaks, peak_lag)?;
            peak.write_csv(&out.join("acf_peak.csv"))?;
            if *max_lag >= PERIOD {
                println!(
                    "{channel}: full-series acf at lag 24 = {:.4}, peak-series acf at lag 1 = {:.4}",
                    full.at(PERIOD),
                    peak.at(1)
                );
            }
        }
        Command::Train => {
            let data = load_data(&config)?;
            let mut pipeline = build_pipeline(&config.pipeline(data.stats.mean.len()), config.train.seed)?;
            let history = train(&mut pipeline, &data.train, &data.val, &config.train)?;
            checkpoint::save(&pipeline, &out.join("model.s2pk"))?;
            std::fs::write(out.join("history.json"), serde_json::to_string_pretty(&history)? + "\n")?;
            let report = evaluate(&pipeline, &data.test, &config.horizons())?;
            std::fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            println!(
                "{}: best epoch {} of {}, test peak mse {:.5}, mae {:.5}",
                config.paradigm,
                history.best_epoch,
                history.epochs.len(),
                report.avg.mse,
                report.avg.mae
            );
        }
        Command::Eval { checkpoint: path } => {
            let data = load_data(&config)?;
            let mut pipeline = build_pipeline(&config.pipeline(data.stats.mean.len()), config.train.seed)?;
            checkpoint::load(&mut pipeline, path)?;
            let report = evaluate(&pipeline, &data.test, &config.horizons())?;
            std::fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            for h in &report.horizons {
                println!("{}d: mse {:.5} mae {:.5}", h.horizon_days, h.mse, h.mae);
            }
            println!("avg: mse {:.5} mae {:.5}", report.avg.mse, report.avg.mae);
        }
        Command::Compare => {
            let data = load_data(&config)?;
            let suite = config.suite(data.stats.mean.len());
            let cmp = run_paradigm_comparison(&data, &suite, &config.paradigms, Some(&out))?;
            cmp.report.write(&out, "compare")?;
            print!("{}", cmp.report.to_markdown());
            if let Some(r) = cmp.report.rows.iter().find(|r| r.error.is_some()) {
                return Err(Error::Failed(format!(
                    "paradigm {}: {}",
                    r.label,
                    r.error.as_deref().unwrap_or_default()
                )));
            }
        }
        Command::Ablate => {
            let data = load_data(&config)?;
            let report = run_ablation(&data, &config.suite(data.stats.mean.len()))?;
            report.write(&out, "ablation")?;
            print!("{}", report.to_markdown());
        }
        Command::SweepAlpha => {
            let data = load_data(&config)?;
            let sweep = run_alpha_sweep(&data, &config.suite(data.stats.mean.len()), &config.alphas)?;
            sweep.write_csv(&out.join("sweep.csv"))?;
            sweep.report.write(&out, "sweep")?;
            for p in &sweep.curve {
                println!("alpha {:<5} mse {:.5} mae {:.5}", p.alpha, p.mse, p.mae);
            }
        }
        Command::CheckGrads { seed } => {
            let cases = check_grads(*seed)?;
            let failed = cases.iter().filter(|c| !c.1).count();
            let body: Vec<_> = cases.iter().map(|c| c.2.clone()).collect();
            std::fs::write(out.join("gradcheck.json"), serde_json::to_string_pretty(&body)? + "\n")?;
            for (label, ok, _) in &cases {
                println!("{} {label}", if *ok { "pass" } else { "FAIL" });
            }
            if failed > 0 {
                return Err(Error::Failed(format!("{failed} gradient checks")));
            }
        }
    }
    Ok(())
}

fn load_data(config: &ExperimentConfig) -> Result<Dataset> {
    let frame = config.dataset.load()?;
    prepare_dataset(
        &config.dataset.label(),
        &frame,
        config.split,
        config.input_len,
        config.horizon,
        config.strides,
    )
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| format!("v{}", env!("CARGO_PKG_VERSION")))
}

fn write_manifest(out: &Path, cli: &Cli, config: &ExperimentConfig) -> Result<()> {
    let manifest = json!({
        "command": cli.command.name(),
        "args": cli.command.args(),
        "version": git_describe(),
        "config": config,
    });
    std::fs::write(out.join("run.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

fn check_grads(seed: u64) -> Result<Vec<(String, bool, serde_json::Value)>> {
    let mut cases = Vec::new();
    for model in [ModelKind::Linear, ModelKind::DLinear, ModelKind::Mlp] {
        for alpha in [0.0, 0.3, 0.5, 1.0] {
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
            let report = gradient_check(&config, seed, 1e-5, 1e-4)?;
            let label = format!("{model} alpha={alpha} seed={seed}");
            let ok = report.passed();
            cases.push((
                label.clone(),
                ok,
                json!({
                    "case": label,
                    "passed": ok,
                    "checked": report.checked,
                    "excluded": report.excluded.len(),
                    "max_rel_error": report.max_rel_error,
                    "failures": report.failures,
                }),
            ));
        }
    }
    Ok(cases)
}
