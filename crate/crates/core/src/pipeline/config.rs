use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::embedding::EmbeddingTrainConfig;
use crate::encoder::Pooling;
use crate::error::{Error, Result};
use crate::filter::FilterConfig;
use crate::kg::DEFAULT_MAX_CHAIN_LEN;
use crate::numerics::{OptimizerKind, OptimizerSettings};
use crate::reasoner::ReasonerConfig;

/// Every knob of a pipeline run. Text form is flat `key = value` lines;
/// `#` starts a comment.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub kg: Option<PathBuf>,
    pub qa_train: Option<PathBuf>,
    pub qa_dev: Option<PathBuf>,
    pub qa_test: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,

    pub dim: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub negatives_per_positive: usize,
    pub corrupt_heads: bool,

    pub kge_epochs: usize,
    pub kge_batch: usize,
    pub kge_optimizer: OptimizerKind,
    pub kge_lr: f64,
    pub kge_l2: f64,

    pub filter_epochs: usize,
    pub filter_batch: usize,
    pub filter_optimizer: OptimizerKind,
    pub filter_lr: f64,
    pub filter_negative_weight: f64,
    pub filter_mask_topic: bool,

    pub reasoner_epochs: usize,
    pub reasoner_batch: usize,
    pub reasoner_optimizer: OptimizerKind,
    pub reasoner_lr: f64,
    pub reasoner_mask_topic: bool,

    pub eval_every: usize,
    pub patience: usize,
    pub top_n: usize,
    pub max_chain_len: usize,
    pub seed: u64,

    pub half: bool,
    pub keep_probability: f64,
    pub no_reasoner: bool,
    pub no_attention: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            kg: None,
            qa_train: None,
            qa_dev: None,
            qa_test: None,
            checkpoint: None,
            dim: 200,
            hidden: 256,
            dropout: 0.3,
            negatives_per_positive: 50,
            corrupt_heads: false,
            kge_epochs: 100,
            kge_batch: 128,
            kge_optimizer: OptimizerKind::Adam,
            kge_lr: 3e-2,
            kge_l2: 1e-3,
            filter_epochs: 200,
            filter_batch: 128,
            filter_optimizer: OptimizerKind::Adam,
            filter_lr: 1e-3,
            filter_negative_weight: 1.0,
            filter_mask_topic: false,
            reasoner_epochs: 120,
            reasoner_batch: 32,
            reasoner_optimizer: OptimizerKind::Adam,
            reasoner_lr: 1e-3,
            reasoner_mask_topic: true,
            eval_every: 10,
            patience: 3,
            top_n: 5,
            max_chain_len: DEFAULT_MAX_CHAIN_LEN,
            seed: 0,
            half: false,
            keep_probability: 0.5,
            no_reasoner: false,
            no_attention: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key} = {value}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key} = {value}: expected a boolean"))),
    }
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl PipelineConfig {
    /// Small dimensions and short schedules sized for a single CPU core.
    pub fn desk() -> Self {
        Self {
            dim: 32,
            hidden: 32,
            negatives_per_positive: 10,
            kge_epochs: 60,
            kge_batch: 256,
            filter_epochs: 40,
            filter_batch: 32,
            filter_lr: 5e-3,
            reasoner_epochs: 20,
            reasoner_lr: 3e-3,
            eval_every: 5,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "full" | "default" => Ok(Self::default()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::Config(format!("unknown preset '{other}'"))),
        }
    }

    /// Parses `key = value` lines. A `preset` line selects the base values
    /// wherever it appears; other keys override it.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut config = match pairs.iter().find(|(k, _)| k == "preset") {
            Some((_, v)) => Self::preset(v)?,
            None => Self::default(),
        };
        for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
            config.set(k, v)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || (!value.is_empty()).then(|| PathBuf::from(value));
        match key {
            "kg" => self.kg = path(),
            "qa_train" => self.qa_train = path(),
            "qa_dev" => self.qa_dev = path(),
            "qa_test" => self.qa_test = path(),
            "checkpoint" => self.checkpoint = path(),
            "dim" => self.dim = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "negatives_per_positive" => self.negatives_per_positive = parse(key, value)?,
            "corrupt_heads" => self.corrupt_heads = parse_bool(key, value)?,
            "kge_epochs" => self.kge_epochs = parse(key, value)?,
            "kge_batch" => self.kge_batch = parse(key, value)?,
            "kge_optimizer" => self.kge_optimizer = parse(key, value)?,
            "kge_lr" => self.kge_lr = parse(key, value)?,
            "kge_l2" => self.kge_l2 = parse(key, value)?,
            "filter_epochs" => self.filter_epochs = parse(key, value)?,
            "filter_batch" => self.filter_batch = parse(key, value)?,
            "filter_optimizer" => self.filter_optimizer = parse(key, value)?,
            "filter_lr" => self.filter_lr = parse(key, value)?,
            "filter_negative_weight" => self.filter_negative_weight = parse(key, value)?,
            "filter_mask_topic" => self.filter_mask_topic = parse_bool(key, value)?,
            "reasoner_epochs" => self.reasoner_epochs = parse(key, value)?,
            "reasoner_batch" => self.reasoner_batch = parse(key, value)?,
            "reasoner_optimizer" => self.reasoner_optimizer = parse(key, value)?,
            "reasoner_lr" => self.reasoner_lr = parse(key, value)?,
            "reasoner_mask_topic" => self.reasoner_mask_topic = parse_bool(key, value)?,
            "eval_every" => self.eval_every = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "top_n" => self.top_n = parse(key, value)?,
            "max_chain_len" => self.max_chain_len = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "half" => self.half = parse_bool(key, value)?,
            "keep_probability" => self.keep_probability = parse(key, value)?,
            "no_reasoner" => self.no_reasoner = parse_bool(key, value)?,
            "no_attention" => self.no_attention = parse_bool(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("hidden", self.hidden),
            ("negatives_per_positive", self.negatives_per_positive),
            ("kge_batch", self.kge_batch),
            ("filter_batch", self.filter_batch),
            ("reasoner_batch", self.reasoner_batch),
            ("top_n", self.top_n),
            ("max_chain_len", self.max_chain_len),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{k} must be positive")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(0.0..=1.0).contains(&self.keep_probability) {
            return Err(Error::Config(format!(
                "keep_probability {} outside [0, 1]",
                self.keep_probability
            )));
        }
        for (k, lr) in [
            ("kge_lr", self.kge_lr),
            ("filter_lr", self.filter_lr),
            ("reasoner_lr", self.reasoner_lr),
        ] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::Config(format!("{k} must be a positive number")));
            }
        }
        Ok(())
    }

    /// Every key in `parse` order; parsing the echo reproduces the config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("kg", path_text(&self.kg));
        put("qa_train", path_text(&self.qa_train));
        put("qa_dev", path_text(&self.qa_dev));
        put("qa_test", path_text(&self.qa_test));
        put("checkpoint", path_text(&self.checkpoint));
        put("dim", self.dim.to_string());
        put("hidden", self.hidden.to_string());
        put("dropout", self.dropout.to_string());
        put("negatives_per_positive", self.negatives_per_positive.to_string());
        put("corrupt_heads", self.corrupt_heads.to_string());
        put("kge_epochs", self.kge_epochs.to_string());
        put("kge_batch", self.kge_batch.to_string());
        put("kge_optimizer", self.kge_optimizer.to_string());
        put("kge_lr", self.kge_lr.to_string());
        put("kge_l2", self.kge_l2.to_string());
        put("filter_epochs", self.filter_epochs.to_string());
        put("filter_batch", self.filter_batch.to_string());
        put("filter_optimizer", self.filter_optimizer.to_string());
        put("filter_lr", self.filter_lr.to_string());
        put("filter_negative_weight", self.filter_negative_weight.to_string());
        put("filter_mask_topic", self.filter_mask_topic.to_string());
        put("reasoner_epochs", self.reasoner_epochs.to_string());
        put("reasoner_batch", self.reasoner_batch.to_string());
        put("reasoner_optimizer", self.reasoner_optimizer.to_string());
        put("reasoner_lr", self.reasoner_lr.to_string());
        put("reasoner_mask_topic", self.reasoner_mask_topic.to_string());
        put("eval_every", self.eval_every.to_string());
        put("patience", self.patience.to_string());
        put("top_n", self.top_n.to_string());
        put("max_chain_len", self.max_chain_len.to_string());
        put("seed", self.seed.to_string());
        put("half", self.half.to_string());
        put("keep_probability", self.keep_probability.to_string());
        put("no_reasoner", self.no_reasoner.to_string());
        put("no_attention", self.no_attention.to_string());
        s
    }

    pub fn pooling(&self) -> Pooling {
        if self.no_attention {
            Pooling::Mean
        } else {
            Pooling::Attention
        }
    }

    fn optimizer(kind: OptimizerKind, lr: f64) -> OptimizerSettings {
        match kind {
            OptimizerKind::Adam => OptimizerSettings::adam(lr),
            OptimizerKind::Sgd => OptimizerSettings::sgd(lr),
        }
    }

    pub fn embedding(&self) -> EmbeddingTrainConfig {
        EmbeddingTrainConfig {
            dim: self.dim,
            negatives_per_positive: self.negatives_per_positive,
            epochs: self.kge_epochs,
            batch_size: self.kge_batch,
            optimizer: Self::optimizer(self.kge_optimizer, self.kge_lr),
            l2_weight: self.kge_l2,
            corrupt_heads: self.corrupt_heads,
            seed: self.seed,
        }
    }

    pub fn filter(&self) -> FilterConfig {
        FilterConfig {
            hidden: self.hidden,
            epochs: self.filter_epochs,
            batch_size: self.filter_batch,
            optimizer: Self::optimizer(self.filter_optimizer, self.filter_lr),
            negative_weight: self.filter_negative_weight,
            mask_topic: self.filter_mask_topic,
            pooling: self.pooling(),
            eval_every: self.eval_every,
            patience: self.patience,
            seed: self.seed.wrapping_add(1),
        }
    }

    pub fn reasoner(&self) -> ReasonerConfig {
        ReasonerConfig {
            hidden: self.hidden,
            epochs: self.reasoner_epochs,
            batch_size: self.reasoner_batch,
            optimizer: Self::optimizer(self.reasoner_optimizer, self.reasoner_lr),
            dropout: self.dropout,
            mask_topic: self.reasoner_mask_topic,
            pooling: self.pooling(),
            eval_every: self.eval_every,
            patience: self.patience,
            seed: self.seed.wrapping_add(2),
        }
    }
}
