//! `key = value` configuration files for the experiment runner.
//!
//! Blank lines and `#` comments are ignored. Unknown keys and malformed
//! values are reported with their line number.

use crate::error::{Error, Result};
use crate::toylab::{ExperimentConfig, Weighting};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_config(text: &str) -> Result<Vec<ConfigEntry>> {
    let mut entries = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config {
                line,
                message: "missing key".into(),
            });
        }
        entries.push(ConfigEntry {
            line,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(entries)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value `{value}` for `{key}`"))
}

/// Sets one field by name. The error is a message without location.
pub fn set_field(config: &mut ExperimentConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    match key {
        "num_train" => config.num_train = parse(key, value)?,
        "num_eval" => config.num_eval = parse(key, value)?,
        "size" => config.size = parse(key, value)?,
        "num_classes" => config.num_classes = parse(key, value)?,
        "target_count" | "count" => config.target_count = parse(key, value)?,
        "compactness" => config.compactness = parse(key, value)?,
        "slic_iters" => config.slic_iters = parse(key, value)?,
        "beta" => config.beta = parse(key, value)?,
        "alpha" => config.alpha = parse(key, value)?,
        "sigma" => config.sigma = parse(key, value)?,
        "learning_rate" => config.learning_rate = parse(key, value)?,
        "epochs" => config.epochs = parse(key, value)?,
        "corruption" => config.corruption = parse(key, value)?,
        "noise" => config.noise = parse(key, value)?,
        "bias" => config.bias = parse(key, value)?,
        "blur" => config.blur = parse(key, value)?,
        "shapes" => config.shapes = parse(key, value)?,
        "weighting" => {
            config.weighting = match value {
                "uniform" => Weighting::Uniform,
                "enet" => Weighting::Enet,
                _ => return Err(format!("weighting must be `uniform` or `enet`, got `{value}`")),
            }
        }
        "seeds" => {
            let n: u64 = parse(key, value)?;
            config.seeds = (0..n).collect();
        }
        "seed_list" => {
            config.seeds = value
                .split(',')
                .map(|s| parse(key, s.trim()))
                .collect::<std::result::Result<_, _>>()?;
        }
        _ => return Err(format!("unknown key `{key}`")),
    }
    Ok(())
}

pub fn apply_config(config: &mut ExperimentConfig, entries: &[ConfigEntry]) -> Result<()> {
    for e in entries {
        set_field(config, &e.key, &e.value).map_err(|message| Error::Config { line: e.line, message })?;
    }
    Ok(())
}

/// Parses `text` on top of the defaults.
pub fn load_experiment_config(text: &str) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    apply_config(&mut config, &parse_config(text)?)?;
    Ok(config)
}
