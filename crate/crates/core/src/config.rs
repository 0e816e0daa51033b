//! Experiment configuration: one JSON document plus dotted-path overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cyclicnorm::ShiftVariant;
use crate::data::{
    fetch_dataset, gen_synthetic, load_csv, MissingPolicy, SplitRatios, SyntheticSpec, TimeSeriesFrame,
    PERIOD,
};
use crate::error::{config_err, Error, Result};
use crate::models::{ModelArgs, ModelKind};
use crate::pipeline::{CyclicNormConfig, Paradigm, PipelineConfig};
use crate::train::{validate_horizons, SuiteConfig, TrainConfig, WindowStrides};

/// Exactly one of `name`, `csv` or `synthetic`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Known dataset (`ETTh1`, `ETTh2`) or any name with `url`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    pub cache_dir: Option<PathBuf>,
    pub missing: MissingPolicy,
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let sources = [self.name.is_some(), self.csv.is_some(), self.synthetic.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(config_err!(
                "dataset needs exactly one of `name`, `csv` or `synthetic`"
            ));
        }
        if self.url.is_some() && self.name.is_none() {
            return Err(config_err!("dataset.url requires dataset.name"));
        }
        if let Some(spec) = &self.synthetic {
            spec.validate().map_err(|e| config_err!("dataset.synthetic: {e}"))?;
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            n.clone()
        } else if let Some(p) = &self.csv {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "csv".into())
        } else {
            "synthetic".into()
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| PathBuf::from("data"))
    }

    /// Loads, fetches or generates the frame.
    pub fn load(&self) -> Result<TimeSeriesFrame> {
        self.validate()?;
        if let Some(spec) = &self.synthetic {
            return gen_synthetic(spec);
        }
        if let Some(path) = &self.csv {
            return load_csv(path, self.missing);
        }
        let name = self.name.as_deref().expect("validated");
        let path = fetch_dataset(name, self.url.as_deref(), &self.cache_dir())?;
        load_csv(&path, self.missing)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub split: SplitRatios,
    /// History length `N`, hours.
    pub input_len: usize,
    /// Forecast length `M`, hours.
    pub horizon: usize,
    /// Evaluation horizons in days; defaults to the full forecast.
    pub horizons: Option<Vec<usize>>,
    pub strides: WindowStrides,
    /// Paradigm for `train` and `eval`.
    pub paradigm: Paradigm,
    /// Paradigms for `compare`.
    pub paradigms: Vec<Paradigm>,
    pub model: ModelKind,
    pub model_args: ModelArgs,
    pub cyclicnorm: CyclicNormConfig,
    pub alpha: Option<f64>,
    /// Grid for `sweep-alpha`.
    pub alphas: Vec<f64>,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetConfig {
                synthetic: Some(SyntheticSpec::default()),
                ..DatasetConfig::default()
            },
            split: SplitRatios::default(),
            input_len: 30 * PERIOD,
            horizon: 5 * PERIOD,
            horizons: None,
            strides: WindowStrides::default(),
            paradigm: Paradigm::Seq2Peak,
            paradigms: Paradigm::ALL.to_vec(),
            model: ModelKind::Linear,
            model_args: ModelArgs::default(),
            cyclicnorm: CyclicNormConfig::with_shift(ShiftVariant::Identity),
            alpha: None,
            alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            train: TrainConfig::default(),
            seeds: (0..5).collect(),
            out: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses JSON text. A run manifest (an object with a `config` member)
    /// yields its embedded config.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_value(value, &[])
    }

    /// Reads `path` (or starts from defaults), applies `key=value`
    /// overrides in order and validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_err!("cannot read config {}: {e}", p.display()))?;
                serde_json::from_str(&text)?
            }
            None => Value::Object(Default::default()),
        };
        Self::from_value(value, overrides)
    }

    pub fn from_value(mut value: Value, overrides: &[String]) -> Result<Self> {
        if let Some(inner) = value.get("config").filter(|_| value.get("version").is_some()) {
            value = inner.clone();
        }
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("override `{o}` is not key=value")))?;
            set_path(&mut value, key.trim(), parse_scalar(raw))?;
        }
        let config: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| config_err!("{e}"))?;
        config.validate()?;
        Ok(config)
    }

    pub fn horizons(&self) -> Vec<usize> {
        self.horizons.clone().unwrap_or_else(|| vec![self.horizon / PERIOD])
    }

    /// Pipeline settings for `channels` channels.
    pub fn pipeline(&self, channels: usize) -> PipelineConfig {
        PipelineConfig {
            paradigm: self.paradigm,
            input_len: self.input_len,
            horizon: self.horizon,
            channels,
            model: self.model,
            model_args: self.model_args.clone(),
            cyclicnorm: self.cyclicnorm.clone(),
            alpha: self.alpha,
        }
    }

    pub fn suite(&self, channels: usize) -> SuiteConfig {
        SuiteConfig {
            base: self.pipeline(channels),
            train: self.train.clone(),
            seeds: self.seeds.clone(),
            horizons: self.horizons(),
        }
    }

    /// Everything that can be checked without data.
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.split.validate()?;
        self.pipeline(1).validate()?;
        self.train.validate()?;
        validate_horizons(&self.horizons(), self.horizon / PERIOD)?;
        if self.strides.train == 0 || self.strides.eval == 0 {
            return Err(config_err!("window strides must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(config_err!("at least one seed is required"));
        }
        if self.paradigms.is_empty() {
            return Err(config_err!("at least one paradigm is required"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(config_err!("alphas: {a} outside [0, 1]"));
        }
        if self.model_args.kernel % 2 == 0 || self.model_args.kernel == 0 {
            return Err(config_err!("model_args.kernel must be odd"));
        }
        if self.model_args.hidden == 0 {
            return Err(config_err!("model_args.hidden must be at least 1"));
        }
        Ok(())
    }
}

/// JSON when it parses, otherwise the raw text as a string.
fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Sets `a.b.c` in `root`, creating objects along the way.
pub fn set_path(root: &mut Value, key: &str, v: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Usage(format!("bad override key `{key}`")));
    }
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| config_err!("`{}` is not an object", parts[..i].join(".")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), v);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("loop returns on the last part")
}
