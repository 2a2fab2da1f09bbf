//! Plain-text key-value configuration files.
//!
//! One format serves training runs and synthetic-corpus specs: `key = value`
//! per line, `#` comments, blank lines ignored. Unknown keys are errors so a
//! typo cannot silently fall back to a default. Command-line flags override
//! file values; every default matches the reference constants.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hin::SyntheticSpec;
use crate::metapath::MetaPath;
use crate::trainer::RunConfig;

/// Parse `key = value` lines. Later occurrences of a key win.
pub fn parse_key_values(source: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in source.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config(format!(
            "line {}: expected `key = value`, got {raw:?}",
            lineno + 1
        )))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key {key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("key {key}: expected a bool, got {other:?}"))),
    }
}

/// A training configuration file: a `RunConfig` plus the corpus path.
#[derive(Clone, Debug, Default)]
pub struct TrainFileConfig {
    pub run: RunConfig,
    pub corpus: Option<PathBuf>,
    /// Whether the file pinned `outer_budget` explicitly; otherwise it is
    /// derived as epochs / inner_epochs.
    outer_budget_set: bool,
}

impl TrainFileConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_str_source(&source)
    }

    pub fn from_str_source(source: &str) -> Result<Self> {
        let map = parse_key_values(source)?;
        let mut config = TrainFileConfig::default();
        for (key, value) in &map {
            config.apply(key, value)?;
        }
        config.finish();
        Ok(config)
    }

    /// Apply one key (from the file or from a CLI override).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let run = &mut self.run;
        match key {
            "corpus" => self.corpus = Some(PathBuf::from(value)),
            "seed" => run.seed = parse_value(key, value)?,
            "max_hops" => run.max_hops = parse_value(key, value)?,
            "k" => run.sample_k = parse_value(key, value)?,
            "top_k" => run.top_k = parse_value(key, value)?,
            "inner_epochs" => run.inner_epochs = parse_value(key, value)?,
            "outer_budget" => {
                run.outer_budget = parse_value(key, value)?;
                self.outer_budget_set = true;
            }
            "convergence_tol" => run.convergence_tol = parse_value(key, value)?,
            "convergence_window" => run.convergence_window = parse_value(key, value)?,
            "train_frac" => run.train_frac = parse_value(key, value)?,
            "val_frac" => run.val_frac = parse_value(key, value)?,
            "test_frac" => run.test_frac = parse_value(key, value)?,
            "strategy" => run.strategy = value.parse()?,
            "epsilon0" => run.epsilon0 = parse_value(key, value)?,
            "beta" => run.beta = parse_value(key, value)?,
            "gamma" => run.gamma = parse_value(key, value)?,
            "norm" => run.norm_mode = value.parse()?,
            "evaluate_all" => run.evaluate_all = parse_bool(key, value)?,
            "hidden" => run.model.hidden = parse_value(key, value)?,
            "encoder_layers" => run.model.encoder_layers = parse_value(key, value)?,
            "decoder_layers" => run.model.decoder_layers = parse_value(key, value)?,
            "dropout" => run.model.dropout = parse_value(key, value)?,
            "residual" => run.model.residual = parse_bool(key, value)?,
            "learning_rate" => run.model.learning_rate = parse_value(key, value)?,
            "batch_size" => run.model.batch_size = parse_value(key, value)?,
            "epochs" => run.model.epochs = parse_value(key, value)?,
            "bn_momentum" => run.model.bn_momentum = parse_value(key, value)?,
            other => {
                return Err(Error::Config(format!("unknown configuration key {other:?}")))
            }
        }
        Ok(())
    }

    /// Derive dependent defaults after all keys are applied.
    pub fn finish(&mut self) {
        if !self.outer_budget_set {
            self.run.outer_budget = self.run.model.epochs.div_ceil(self.run.inner_epochs);
        }
    }
}

/// Synthetic-corpus spec file, same key-value format.
pub fn synthetic_spec_from_file(path: &Path) -> Result<SyntheticSpec> {
    let source = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    synthetic_spec_from_str(&source)
}

pub fn synthetic_spec_from_str(source: &str) -> Result<SyntheticSpec> {
    let map = parse_key_values(source)?;
    let mut spec = SyntheticSpec {
        num_classes: 4,
        texts_per_class: 200,
        num_users: 200,
        num_entities: 40,
        signal_paths: vec![MetaPath::parse("TE")?, MetaPath::parse("TETE")?],
        noise_level: 0.1,
        seed: 666,
    };
    for (key, value) in &map {
        match key.as_str() {
            "num_classes" => spec.num_classes = parse_value(key, value)?,
            "texts_per_class" => spec.texts_per_class = parse_value(key, value)?,
            "num_users" => spec.num_users = parse_value(key, value)?,
            "num_entities" => spec.num_entities = parse_value(key, value)?,
            "noise_level" => spec.noise_level = parse_value(key, value)?,
            "seed" => spec.seed = parse_value(key, value)?,
            "signal_paths" => {
                spec.signal_paths = value
                    .split(',')
                    .map(|name| MetaPath::parse(name.trim()))
                    .collect::<Result<Vec<_>>>()?;
            }
            other => {
                return Err(Error::Config(format!("unknown synthetic spec key {other:?}")))
            }
        }
    }
    Ok(spec)
}
