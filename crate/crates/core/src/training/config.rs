use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::order::ScorerKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Hypernym,
    Retrieval,
    Entailment,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Hypernym => "hypernym",
            TaskKind::Retrieval => "retrieval",
            TaskKind::Entailment => "entailment",
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hypernym" => Ok(TaskKind::Hypernym),
            "retrieval" => Ok(TaskKind::Retrieval),
            "entailment" | "entail" => Ok(TaskKind::Entailment),
            other => Err(Error::contract(format!("unknown task '{other}'"))),
        }
    }
}

/// Hyperparameters for one training run. Serialised as `key = value` lines
/// whose keys are exactly the field names.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub task: TaskKind,
    /// Embedding dimension (GRU hidden size for sentence tasks).
    pub dim: usize,
    /// Word-vector dimension for sentence tasks; ignored by hypernym.
    pub word_dim: usize,
    pub margin: f64,
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub normalize: bool,
    pub scorer: ScorerKind,
    /// Places images above captions instead of below.
    pub reverse_order: bool,
    /// Global gradient-norm clip; off when `None`.
    pub grad_clip: Option<f64>,
}

impl TrainConfig {
    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::Hypernym => Self {
                task,
                dim: 50,
                word_dim: 0,
                margin: 1.0,
                lr: 0.01,
                batch: 500,
                max_epochs: 50,
                patience: 5,
                seed: 0,
                normalize: false,
                scorer: ScorerKind::Order,
                reverse_order: false,
                grad_clip: None,
            },
            TaskKind::Retrieval => Self {
                task,
                dim: 1024,
                word_dim: 300,
                margin: 0.05,
                lr: 0.001,
                batch: 128,
                max_epochs: 30,
                patience: 5,
                seed: 0,
                normalize: true,
                scorer: ScorerKind::Order,
                reverse_order: false,
                grad_clip: None,
            },
            TaskKind::Entailment => Self {
                task,
                dim: 1024,
                word_dim: 300,
                margin: 0.2,
                lr: 0.001,
                batch: 128,
                max_epochs: 10,
                patience: 5,
                seed: 0,
                normalize: true,
                scorer: ScorerKind::Order,
                reverse_order: false,
                grad_clip: None,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::contract(format!("invalid config: {m}")));
        if self.dim == 0 {
            return fail("dim must be positive");
        }
        if self.task != TaskKind::Hypernym && self.word_dim == 0 {
            return fail("word_dim must be positive for sentence tasks");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return fail("margin must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("lr must be positive");
        }
        if self.batch == 0 || (self.task == TaskKind::Retrieval && self.batch < 2) {
            return fail("batch too small (retrieval needs >= 2 for contrastives)");
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return fail("max_epochs and patience must be positive");
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return fail("grad_clip must be positive");
            }
        }
        Ok(())
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::contract(format!("bad value '{v}' for '{key}'")))
        }
        match key {
            "task" => self.task = value.parse()?,
            "dim" => self.dim = num(key, value)?,
            "word_dim" => self.word_dim = num(key, value)?,
            "margin" => self.margin = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "batch" => self.batch = num(key, value)?,
            "max_epochs" => self.max_epochs = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "normalize" => self.normalize = num(key, value)?,
            "scorer" => self.scorer = value.parse()?,
            "reverse_order" => self.reverse_order = num(key, value)?,
            "grad_clip" => {
                self.grad_clip = match value {
                    "none" | "off" => None,
                    v => Some(num(key, v)?),
                }
            }
            other => return Err(Error::contract(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parses a config file body. `task` must come first if present, since
    /// it selects the defaults the remaining keys override.
    pub fn parse(text: &str, default_task: TaskKind) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::contract(format!("config line {}: expected 'key = value'", lineno + 1))
            })?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        let task = match entries.iter().find(|(k, _)| k == "task") {
            Some((_, v)) => v.parse()?,
            None => default_task,
        };
        let mut cfg = Self::for_task(task);
        for (k, v) in &entries {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("task", self.task.to_string()),
            ("dim", self.dim.to_string()),
            ("word_dim", self.word_dim.to_string()),
            ("margin", self.margin.to_string()),
            ("lr", self.lr.to_string()),
            ("batch", self.batch.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("seed", self.seed.to_string()),
            ("normalize", self.normalize.to_string()),
            ("scorer", self.scorer.to_string()),
            ("reverse_order", self.reverse_order.to_string()),
            (
                "grad_clip",
                self.grad_clip.map_or("none".to_string(), |c| c.to_string()),
            ),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
