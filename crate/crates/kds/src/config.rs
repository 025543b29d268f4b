//! Flat `key = value` run configuration.
//!
//! Each command starts from its defaults, overlays an optional config file,
//! then overlays command-line flags. The resolved result is written next to
//! the outputs as `config.cfg` and parses back to the same map.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use kds_core::datagen::Preprocess;
use kds_core::{EncoderParams, LaplacianMode, Momentum, StepSize, TrainConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("config key {key:?}: {msg}")]
    Value { key: String, msg: String },
    #[error("config key {0:?} is required")]
    Missing(String),
    #[error("config key {0:?} is not used by this command")]
    Unknown(String),
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn valid_value(v: &str) -> bool {
    !v.contains(['\n', '\r', '#']) && v.trim() == v
}

impl RunConfig {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are ignored;
    /// a repeated key is an error.
    pub fn parse(text: &str) -> ConfigResult<Self> {
        let mut cfg = RunConfig::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |msg: &str| ConfigError::Syntax {
                line: i + 1,
                msg: msg.into(),
            };
            let (k, v) = line.split_once('=').ok_or_else(|| syntax("expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            if !valid_key(k) {
                return Err(syntax("keys use letters, digits, `_` and `-`"));
            }
            if cfg.entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(syntax("duplicate key"));
            }
        }
        Ok(cfg)
    }

    pub fn serialize(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> ConfigResult<()> {
        let value = value.to_string();
        if !valid_key(key) || !valid_value(&value) {
            return Err(ConfigError::Value {
                key: key.into(),
                msg: format!("cannot store {value:?}"),
            });
        }
        self.entries.insert(key.to_string(), value);
        Ok(())
    }

    /// Overlays every entry of `other`.
    pub fn merge(&mut self, other: &RunConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> ConfigResult<T> {
        let raw = self.raw(key).ok_or_else(|| ConfigError::Missing(key.into()))?;
        raw.parse().map_err(|_| ConfigError::Value {
            key: key.into(),
            msg: format!("cannot parse {raw:?}"),
        })
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> ConfigResult<Vec<T>> {
        let raw = self.raw(key).ok_or_else(|| ConfigError::Missing(key.into()))?;
        raw.split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| ConfigError::Value {
                    key: key.into(),
                    msg: format!("cannot parse list item {s:?}"),
                })
            })
            .collect()
    }

    /// Fails on keys outside `allowed`, which usually means a typo.
    pub fn check_keys(&self, allowed: &[&str]) -> ConfigResult<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(ConfigError::Unknown(k.into())),
            None => Ok(()),
        }
    }
}

/// Float formatting that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn fmt_list<T: Display>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn bad(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.into(),
        msg: msg.into(),
    }
}

pub fn momentum_name(m: Momentum) -> &'static str {
    match m {
        Momentum::Standard => "standard",
        Momentum::Printed => "printed",
    }
}

pub fn parse_momentum(s: &str) -> Option<Momentum> {
    match s {
        "standard" => Some(Momentum::Standard),
        "printed" => Some(Momentum::Printed),
        _ => None,
    }
}

pub fn mode_name(m: LaplacianMode) -> &'static str {
    match m {
        LaplacianMode::Quadratic => "quadratic",
        LaplacianMode::Normalized => "normalized",
    }
}

pub fn parse_mode(s: &str) -> Option<LaplacianMode> {
    match s {
        "quadratic" => Some(LaplacianMode::Quadratic),
        "normalized" => Some(LaplacianMode::Normalized),
        _ => None,
    }
}

/// Preprocessing choice for `fit`; `Best` runs all three modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreprocessChoice {
    None,
    One(Preprocess),
    Best,
}

impl PreprocessChoice {
    pub fn name(self) -> &'static str {
        match self {
            PreprocessChoice::None => "none",
            PreprocessChoice::One(p) => p.name(),
            PreprocessChoice::Best => "best",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(PreprocessChoice::None),
            "best" => Some(PreprocessChoice::Best),
            _ => Preprocess::parse(s).map(PreprocessChoice::One),
        }
    }
}

pub const TRAIN_KEYS: &[&str] = &[
    "m", "lambda", "T", "lr", "epochs", "batch_size", "seed", "momentum", "step", "learn_alpha",
    "final_T", "beta1", "beta2", "adam_eps",
];

/// Writes every field of `cfg` (except `parallel`, which never changes results).
pub fn train_to_config(cfg: &TrainConfig, out: &mut RunConfig) {
    let e = &cfg.encoder;
    let step = match e.step {
        StepSize::Auto => "auto".to_string(),
        StepSize::Fixed(a) => fmt_f64(a),
    };
    let final_t = cfg.final_iterations.map_or("none".to_string(), |t| t.to_string());
    let pairs: [(&str, String); 14] = [
        ("m", cfg.atoms.to_string()),
        ("lambda", fmt_f64(e.lambda)),
        ("T", e.iterations.to_string()),
        ("lr", fmt_f64(cfg.learning_rate)),
        ("epochs", cfg.epochs.to_string()),
        ("batch_size", cfg.batch_size.to_string()),
        ("seed", cfg.seed.to_string()),
        ("momentum", momentum_name(e.momentum).into()),
        ("step", step),
        ("learn_alpha", e.learn_alpha.to_string()),
        ("final_T", final_t),
        ("beta1", fmt_f64(cfg.adam_beta1)),
        ("beta2", fmt_f64(cfg.adam_beta2)),
        ("adam_eps", fmt_f64(cfg.adam_epsilon)),
    ];
    for (k, v) in pairs {
        out.set(k, v).expect("generated entries are valid");
    }
}

/// Reads a [`TrainConfig`]; absent keys keep their defaults.
pub fn train_from_config(cfg: &RunConfig) -> ConfigResult<TrainConfig> {
    let mut base = RunConfig::new();
    train_to_config(&TrainConfig::default(), &mut base);
    base.merge(cfg);
    let cfg = &base;
    let momentum = parse_momentum(cfg.raw("momentum").unwrap_or_default())
        .ok_or_else(|| bad("momentum", "expected standard or printed"))?;
    let step = match cfg.raw("step").unwrap_or_default() {
        "auto" => StepSize::Auto,
        _ => StepSize::Fixed(cfg.get("step")?),
    };
    let final_iterations = match cfg.raw("final_T").unwrap_or_default() {
        "none" => None,
        _ => Some(cfg.get("final_T")?),
    };
    let out = TrainConfig {
        atoms: cfg.get("m")?,
        epochs: cfg.get("epochs")?,
        batch_size: cfg.get("batch_size")?,
        learning_rate: cfg.get("lr")?,
        adam_beta1: cfg.get("beta1")?,
        adam_beta2: cfg.get("beta2")?,
        adam_epsilon: cfg.get("adam_eps")?,
        seed: cfg.get("seed")?,
        encoder: EncoderParams {
            lambda: cfg.get("lambda")?,
            iterations: cfg.get("T")?,
            step,
            learn_alpha: cfg.get("learn_alpha")?,
            momentum,
        },
        final_iterations,
        parallel: false,
    };
    out.encoder.validate().map_err(|e| bad("lambda/T/step", e.to_string()))?;
    Ok(out)
}

/// Settings of the `cluster` command.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSettings {
    pub k: usize,
    pub mode: LaplacianMode,
    pub replicates: usize,
    pub seed: u64,
    pub include_atoms: bool,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        ClusterSettings {
            k: 2,
            mode: LaplacianMode::Quadratic,
            replicates: 10,
            seed: 0,
            include_atoms: true,
        }
    }
}

pub const CLUSTER_KEYS: &[&str] = &["k", "mode", "replicates", "seed", "include_atoms"];

impl ClusterSettings {
    pub fn to_config(&self, out: &mut RunConfig) {
        for (k, v) in [
            ("k", self.k.to_string()),
            ("mode", mode_name(self.mode).to_string()),
            ("replicates", self.replicates.to_string()),
            ("seed", self.seed.to_string()),
            ("include_atoms", self.include_atoms.to_string()),
        ] {
            out.set(k, v).expect("generated entries are valid");
        }
    }

    pub fn from_config(cfg: &RunConfig) -> ConfigResult<Self> {
        let mut base = RunConfig::new();
        ClusterSettings::default().to_config(&mut base);
        base.merge(cfg);
        let mode = parse_mode(base.raw("mode").unwrap_or_default())
            .ok_or_else(|| bad("mode", "expected quadratic or normalized"))?;
        let out = ClusterSettings {
            k: base.get("k")?,
            mode,
            replicates: base.get("replicates")?,
            seed: base.get("seed")?,
            include_atoms: base.get("include_atoms")?,
        };
        if out.k == 0 || out.replicates == 0 {
            return Err(bad("k/replicates", "must be at least 1"));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn comments_blank_lines_and_spacing() {
        let cfg = RunConfig::parse("# run\n\nm=24\n  lambda   =  5.0  # moons default\n").unwrap();
        assert_eq!(cfg.raw("m"), Some("24"));
        assert_eq!(cfg.get::<f64>("lambda").unwrap(), 5.0);
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(RunConfig::parse("m 24"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(RunConfig::parse("m=1\nm=2"), Err(ConfigError::Syntax { line: 2, .. })));
        assert!(RunConfig::parse("a b = 1").is_err());
    }

    #[test]
    fn defaults_survive_a_round_trip() {
        let mut cfg = RunConfig::new();
        train_to_config(&TrainConfig::default(), &mut cfg);
        let back = train_from_config(&RunConfig::parse(&cfg.serialize()).unwrap()).unwrap();
        assert_eq!(back, TrainConfig::default());
    }

    #[test]
    fn bad_values_name_the_key() {
        let cfg = RunConfig::parse("lambda = five").unwrap();
        let err = train_from_config(&cfg).unwrap_err().to_string();
        assert!(err.contains("lambda"));
        let cfg = RunConfig::parse("mode = spectral").unwrap();
        assert!(ClusterSettings::from_config(&cfg).is_err());
    }

    fn value() -> impl Strategy<Value = String> {
        "[A-Za-z0-9_.,:/+-]([A-Za-z0-9_.,:/ +-]{0,12}[A-Za-z0-9_.,:/+-])?"
    }

    fn train_config() -> impl Strategy<Value = TrainConfig> {
        (
            (1usize..200, 1usize..5000, 1usize..20000, 1e-8f64..1.0, any::<u64>()),
            (0.0f64..100.0, 1usize..50, proptest::option::of(1e-6f64..10.0), any::<bool>(), any::<bool>()),
            (proptest::option::of(1usize..2000), 0.0f64..0.999, 0.0f64..0.9999, 1e-12f64..1e-3),
        )
            .prop_map(|((m, epochs, batch, lr, seed), (lambda, t, step, learn, printed), (fin, b1, b2, eps))| {
                TrainConfig {
                    atoms: m,
                    epochs,
                    batch_size: batch,
                    learning_rate: lr,
                    adam_beta1: b1,
                    adam_beta2: b2,
                    adam_epsilon: eps,
                    seed,
                    encoder: EncoderParams {
                        lambda,
                        iterations: t,
                        step: step.map_or(StepSize::Auto, StepSize::Fixed),
                        learn_alpha: learn,
                        momentum: if printed { Momentum::Printed } else { Momentum::Standard },
                    },
                    final_iterations: fin,
                    parallel: false,
                }
            })
    }

    proptest! {
        #[test]
        fn text_round_trip(map in proptest::collection::btree_map("[A-Za-z_][A-Za-z0-9_-]{0,10}", value(), 0..12)) {
            let mut cfg = RunConfig::new();
            for (k, v) in &map {
                cfg.set(k, v).unwrap();
            }
            prop_assert_eq!(RunConfig::parse(&cfg.serialize()).unwrap(), cfg);
        }

        #[test]
        fn train_config_round_trip(tc in train_config()) {
            let mut cfg = RunConfig::new();
            train_to_config(&tc, &mut cfg);
            let parsed = RunConfig::parse(&cfg.serialize()).unwrap();
            prop_assert_eq!(&parsed, &cfg);
            prop_assert_eq!(train_from_config(&parsed).unwrap(), tc);
        }

        #[test]
        fn cluster_settings_round_trip(k in 1usize..50, rep in 1usize..20, seed in any::<u64>(), norm in any::<bool>(), inc in any::<bool>()) {
            let s = ClusterSettings {
                k,
                mode: if norm { LaplacianMode::Normalized } else { LaplacianMode::Quadratic },
                replicates: rep,
                seed,
                include_atoms: inc,
            };
            let mut cfg = RunConfig::new();
            s.to_config(&mut cfg);
            prop_assert_eq!(ClusterSettings::from_config(&RunConfig::parse(&cfg.serialize()).unwrap()).unwrap(), s);
        }
    }
}
