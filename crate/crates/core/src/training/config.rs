use std::fmt::{self, Write};

use thiserror::Error;

use crate::corpus::Domain;
use crate::losses::LossConfig;
use crate::model::{ForwardOptions, GateReading, Variant};

pub const DEFAULT_LR: f64 = 0.01;
pub const DEFAULT_GAMMA: f64 = 2.0;
pub const DEFAULT_BATCH: usize = 32;
pub const DEFAULT_EPOCHS: usize = 30;
pub const DEFAULT_PATIENCE: usize = 5;
pub const DEFAULT_HIDDEN: usize = 150;
pub const DEFAULT_DEV_FRACTION: f64 = 0.1;
pub const DEFAULT_SEED: u64 = 1;

/// Neighbor-loss weight used by the neighbor-aware presets.
pub fn domain_lambda(domain: Domain) -> f64 {
    match domain {
        Domain::Restaurant => 0.4,
        Domain::Laptop => 0.2,
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {message}")]
    Value { key: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub domain: Domain,
    pub variant: Variant,
    pub gamma: f64,
    pub lambda: f64,
    pub lr: f64,
    /// Sentences per batch.
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub hidden: usize,
    pub dev_fraction: f64,
    pub gate_reading: GateReading,
    pub freeze_embeddings: bool,
}

impl TrainConfig {
    /// Defaults for a domain with the variant's loss settings.
    pub fn preset(domain: Domain, variant: Variant) -> Self {
        Self {
            domain,
            variant,
            gamma: if variant.uses_focal_loss() { DEFAULT_GAMMA } else { 0.0 },
            lambda: if variant.uses_neighbor_loss() { domain_lambda(domain) } else { 0.0 },
            lr: DEFAULT_LR,
            batch_size: DEFAULT_BATCH,
            epochs: DEFAULT_EPOCHS,
            patience: DEFAULT_PATIENCE,
            seed: DEFAULT_SEED,
            hidden: DEFAULT_HIDDEN,
            dev_fraction: DEFAULT_DEV_FRACTION,
            gate_reading: GateReading::NeighborsOnly,
            freeze_embeddings: false,
        }
    }

    /// Builds a config from ordered `(key, value)` pairs, later pairs winning.
    /// `domain` and `variant` pick the preset; every other key overrides it.
    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> Result<Self, ConfigError> {
        let mut domain = Domain::Restaurant;
        let mut variant = Variant::Miad;
        for (k, v) in pairs {
            match k.as_ref() {
                "domain" => domain = parse_value("domain", v.as_ref())?,
                "variant" => variant = parse_value("variant", v.as_ref())?,
                _ => {}
            }
        }
        let mut cfg = Self::preset(domain, variant);
        for (k, v) in pairs {
            cfg.set(k.as_ref(), v.as_ref())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "domain" => self.domain = parse_value(key, value)?,
            "variant" => self.variant = parse_value(key, value)?,
            "gamma" => self.gamma = parse_value(key, value)?,
            "lambda" => self.lambda = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "batch" | "batch_size" => self.batch_size = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "patience" => self.patience = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "hidden" => self.hidden = parse_value(key, value)?,
            "dev_fraction" => self.dev_fraction = parse_value(key, value)?,
            "gate_reading" => self.gate_reading = parse_value(key, value)?,
            "freeze_embeddings" => self.freeze_embeddings = parse_value(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, message: String| Err(ConfigError::Value { key: key.into(), message });
        self.loss().validate().map_err(|message| ConfigError::Value { key: "gamma/lambda".into(), message })?;
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr", format!("must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch", "must be at least 1".into());
        }
        if self.hidden == 0 {
            return bad("hidden", "must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dev_fraction) {
            return bad("dev_fraction", format!("must be in [0, 1), got {}", self.dev_fraction));
        }
        Ok(())
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig { gamma: self.gamma, lambda: self.lambda }
    }

    pub fn forward_options(&self) -> ForwardOptions {
        ForwardOptions { fusion: self.variant.fusion(), gate_reading: self.gate_reading }
    }

    /// `key=value` lines accepted by [`parse_config_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.pairs() {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("domain", self.domain.as_str().to_string()),
            ("variant", self.variant.to_string()),
            ("gamma", self.gamma.to_string()),
            ("lambda", self.lambda.to_string()),
            ("lr", self.lr.to_string()),
            ("batch", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("seed", self.seed.to_string()),
            ("hidden", self.hidden.to_string()),
            ("dev_fraction", self.dev_fraction.to_string()),
            ("gate_reading", self.gate_reading.to_string()),
            ("freeze_embeddings", self.freeze_embeddings.to_string()),
        ]
    }
}

impl fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::Value { key: key.to_string(), message: e.to_string() })
}

/// Splits `key=value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
        };
        pairs.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restaurant_miad_defaults() {
        let c = TrainConfig::preset(Domain::Restaurant, Variant::Miad);
        assert_eq!((c.gamma, c.lambda, c.lr), (2.0, 0.4, 0.01));
        let c = TrainConfig::preset(Domain::Laptop, Variant::Miad);
        assert_eq!(c.lambda, 0.2);
    }

    #[test]
    fn preset_loss_pairs() {
        let r = Domain::Restaurant;
        let p = |v| {
            let c = TrainConfig::preset(r, v);
            (c.gamma, c.lambda)
        };
        assert_eq!(p(Variant::Gru), (0.0, 0.0));
        assert_eq!(p(Variant::GruTm), (0.0, 0.4));
        assert_eq!(p(Variant::GruNoTm), (0.0, 0.4));
        assert_eq!(p(Variant::GruFl), (2.0, 0.0));
        assert_eq!(p(Variant::Miad), (2.0, 0.4));
    }

    #[test]
    fn text_round_trip() {
        let mut c = TrainConfig::preset(Domain::Laptop, Variant::GruTm);
        c.seed = 17;
        c.lr = 0.003;
        c.gate_reading = GateReading::IncludeTarget;
        let back = TrainConfig::from_pairs(&parse_config_text(&c.to_text()).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn later_pairs_win_and_variant_sets_preset() {
        let pairs = [("variant", "gru"), ("gamma", "1.5"), ("domain", "laptop"), ("variant", "miad")];
        let c = TrainConfig::from_pairs(&pairs).unwrap();
        assert_eq!(c.variant, Variant::Miad);
        assert_eq!(c.lambda, 0.2);
        assert_eq!(c.gamma, 1.5);
    }

    #[test]
    fn errors_are_reported() {
        assert!(matches!(parse_config_text("lr 0.1"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(TrainConfig::from_pairs(&[("nope", "1")]), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(TrainConfig::from_pairs(&[("lr", "abc")]), Err(ConfigError::Value { .. })));
        assert!(TrainConfig::from_pairs(&[("dev_fraction", "1.0")]).is_err());
        assert!(TrainConfig::from_pairs(&[("gamma", "-1")]).is_err());
    }

    #[test]
    fn comments_and_dashes() {
        let p = parse_config_text("# exp\n\ndev-fraction = 0.2\n").unwrap();
        assert_eq!(p, vec![("dev_fraction".to_string(), "0.2".to_string())]);
    }
}
