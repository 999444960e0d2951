//! `key = value` pipeline configuration. Command-line flags override file
//! values; unknown keys are reported so typos do not pass silently.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use crate::debias::ObjectiveWeights;
use crate::{Error, Result};

/// Everything a pipeline stage can be told: input/output paths, word lists,
/// thresholds, optimizer settings and parallelism. All fields are optional;
/// commands apply their own defaults for what they need.
#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    pub embedding: Option<PathBuf>,
    pub reference_embedding: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub stop_words: Option<PathBuf>,
    pub seed_words: Option<PathBuf>,
    pub names: Option<PathBuf>,
    pub dictionaries: Vec<PathBuf>,
    pub gender_pairs: Option<PathBuf>,
    pub words: Option<PathBuf>,
    pub preserve_file: Option<PathBuf>,
    pub debias_file: Option<PathBuf>,
    pub neighbour_cache: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub sembias: Option<PathBuf>,
    pub analogy: Vec<PathBuf>,
    pub msr: Vec<PathBuf>,
    pub similarity: Vec<PathBuf>,
    pub lambda: Option<ObjectiveWeights>,
    pub theta_r: Option<f64>,
    pub theta_s: Option<Vec<f64>>,
    pub k: Option<usize>,
    pub epsilon: Option<f64>,
    pub analogy_eps: Option<f64>,
    pub precision: Option<usize>,
    pub expected_dim: Option<usize>,
    pub learning_rate: Option<f64>,
    pub max_steps: Option<usize>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub adam_epsilon: Option<f64>,
    pub tolerance: Option<f64>,
    pub workers: Option<usize>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(BufReader::new(File::open(path)?))
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(lineno, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            cfg.set(key, value)
                .map_err(|e| Error::parse(lineno, e.to_string()))?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = |v: &str| Some(PathBuf::from(v));
        let paths = |v: &str| -> Vec<PathBuf> {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(PathBuf::from)
                .collect()
        };
        match key {
            "embedding" => self.embedding = path(value),
            "reference_embedding" => self.reference_embedding = path(value),
            "out" => self.out = path(value),
            "stop_words" => self.stop_words = path(value),
            "seed_words" => self.seed_words = path(value),
            "names" => self.names = path(value),
            "dictionaries" => self.dictionaries = paths(value),
            "gender_pairs" => self.gender_pairs = path(value),
            "words" => self.words = path(value),
            "preserve_file" => self.preserve_file = path(value),
            "debias_file" => self.debias_file = path(value),
            "neighbour_cache" => self.neighbour_cache = path(value),
            "trace" => self.trace = path(value),
            "sembias" => self.sembias = path(value),
            "analogy" => self.analogy = paths(value),
            "msr" => self.msr = paths(value),
            "similarity" => self.similarity = paths(value),
            "lambda" => self.lambda = Some(parse_lambda(value)?),
            "theta_r" => self.theta_r = Some(parse_number(key, value)?),
            "theta_s" => self.theta_s = Some(parse_number_list(key, value)?),
            "k" => self.k = Some(parse_integer(key, value)?),
            "epsilon" => self.epsilon = Some(parse_number(key, value)?),
            "analogy_eps" => self.analogy_eps = Some(parse_number(key, value)?),
            "precision" => self.precision = Some(parse_integer(key, value)?),
            "expected_dim" => self.expected_dim = Some(parse_integer(key, value)?),
            "learning_rate" => self.learning_rate = Some(parse_number(key, value)?),
            "max_steps" => self.max_steps = Some(parse_integer(key, value)?),
            "beta1" => self.beta1 = Some(parse_number(key, value)?),
            "beta2" => self.beta2 = Some(parse_number(key, value)?),
            "adam_epsilon" => self.adam_epsilon = Some(parse_number(key, value)?),
            "tolerance" => self.tolerance = Some(parse_number(key, value)?),
            "workers" => self.workers = Some(parse_integer(key, value)?),
            other => {
                return Err(Error::InvalidConfig(format!("unknown key `{other}`")));
            }
        }
        Ok(())
    }
}

/// Parses `r,a,n` into validated objective weights.
pub fn parse_lambda(value: &str) -> Result<ObjectiveWeights> {
    let parts = parse_number_list("lambda", value)?;
    if parts.len() != 3 {
        return Err(Error::InvalidConfig(format!(
            "lambda needs exactly 3 comma-separated weights, got {}",
            parts.len()
        )));
    }
    ObjectiveWeights::new(parts[0], parts[1], parts[2])
}

pub fn parse_number_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_number(key, s))
        .collect()
}

pub fn parse_number(key: &str, value: &str) -> Result<f64> {
    let x: f64 = value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: unparsable number `{value}`")))?;
    if !x.is_finite() {
        return Err(Error::InvalidConfig(format!("{key}: non-finite value")));
    }
    Ok(x)
}

pub fn parse_integer(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: unparsable integer `{value}`")))
}
