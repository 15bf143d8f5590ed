//! Flat key-value experiment configuration.
//!
//! Files are TOML. Keys may be written dotted (`observable.alpha = 2`) or as
//! tables; either way they flatten to the same schema. Every key has a
//! default, and the fully materialized configuration is echoed into each
//! report.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A number, or one of a few named choices such as `"golden"` or `"auto"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumOrName {
    Num(f64),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub master_seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub out_dir: String,
    /// Overrides every tolerance band of the experiment when numeric.
    pub tolerance: NumOrName,
    pub system: SystemConfig,
    pub measure: MeasureConfig,
    pub observable: ObservableConfig,
    pub cylinders: CylindersConfig,
    pub evl: EvlConfig,
    pub hts: HtsConfig,
    pub conditions: ConditionsConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            master_seed: 42,
            threads: 0,
            out_dir: "out".into(),
            tolerance: NumOrName::Name("auto".into()),
            system: SystemConfig::default(),
            measure: MeasureConfig::default(),
            observable: ObservableConfig::default(),
            cylinders: CylindersConfig::default(),
            evl: EvlConfig::default(),
            hts: HtsConfig::default(),
            conditions: ConditionsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// tent, doubling, rotation or manneville-pomeau.
    pub kind: String,
    /// Rotation angle, or "golden".
    pub alpha: NumOrName,
    /// Intermittency exponent of the Manneville-Pomeau map.
    pub s: f64,
    /// interval, circle, or auto for the map's natural metric.
    pub metric: String,
    /// bitstream, float64, or auto.
    pub backend: String,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            kind: "doubling".into(),
            alpha: NumOrName::Name("golden".into()),
            s: 0.5,
            metric: "auto".into(),
            backend: "auto".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    /// lebesgue, bernoulli or empirical-orbit.
    pub kind: String,
    /// Mass of binary digit 0 for the Bernoulli measure.
    pub p: f64,
    pub burn_in: u64,
    pub orbit_len: usize,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            kind: "lebesgue".into(),
            p: 0.5,
            burn_in: 10_000,
            orbit_len: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservableConfig {
    /// g1, g2 or g3.
    #[serde(rename = "type")]
    pub kind: String,
    pub alpha: f64,
    #[serde(rename = "D")]
    pub d: f64,
    /// ball or cylinder.
    pub mode: String,
    /// Centre, or "typical" for a point drawn from the measure.
    pub zeta: NumOrName,
}

impl Default for ObservableConfig {
    fn default() -> Self {
        Self {
            kind: "g1".into(),
            alpha: 1.0,
            d: 1.0,
            mode: "ball".into(),
            zeta: NumOrName::Name("typical".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CylindersConfig {
    pub max_depth: usize,
}

impl Default for CylindersConfig {
    fn default() -> Self {
        Self { max_depth: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvlConfig {
    /// Block lengths for ball maxima, cylinder depths for cylinder maxima.
    pub n_list: Vec<u64>,
    pub samples: usize,
    /// Empty means a nine-point grid suited to the observable type.
    pub y_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    /// proof or quantile.
    pub construction: String,
    /// off, on (iid maxima only) or compare (both, compared pointwise).
    pub iid_mode: String,
    /// proof or narrative threshold for cylinder maxima.
    pub un_convention: String,
}

impl Default for EvlConfig {
    fn default() -> Self {
        Self {
            n_list: vec![1000],
            samples: 10_000,
            y_grid: Vec::new(),
            tau_grid: vec![0.5, 1.0, 2.0],
            construction: "proof".into(),
            iid_mode: "off".into(),
            un_convention: "proof".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HtsConfig {
    pub t_grid: Vec<f64>,
    pub samples: usize,
    pub cap_factor: f64,
    /// ball or cylinder.
    pub target: String,
    pub mass_list: Vec<f64>,
    pub depth_list: Vec<usize>,
    pub hit_from_zero: bool,
}

impl Default for HtsConfig {
    fn default() -> Self {
        Self {
            t_grid: vec![0.25, 0.5, 1.0, 1.5, 2.0, 3.0],
            samples: 10_000,
            cap_factor: 50.0,
            target: "ball".into(),
            mass_list: vec![0.001],
            depth_list: Vec::new(),
            hit_from_zero: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionsConfig {
    pub n: u64,
    pub k_list: Vec<u64>,
    /// Gaps probed for the mixing condition; empty means `ceil(n^tn_exponent)`.
    pub t_grid: Vec<u64>,
    /// 0 means `n`.
    pub block_len: u64,
    pub samples: usize,
    pub tn_exponent: f64,
    /// The event is a ball or cylinder of mass `tau / n`.
    pub tau: f64,
    /// any, consistent-with-zero or non-vanishing.
    pub expect: String,
}

impl Default for ConditionsConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            k_list: vec![10],
            t_grid: Vec::new(),
            block_len: 0,
            samples: 10_000,
            tn_exponent: 0.7,
            tau: 1.0,
            expect: "any".into(),
        }
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<String>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        _ => out.push(prefix.to_string()),
    }
}

/// Every key the schema accepts, in dotted form.
pub fn known_keys() -> BTreeSet<String> {
    let value = toml::Value::try_from(Config::default()).expect("default config serializes");
    let mut keys = Vec::new();
    flatten("", &value, &mut keys);
    keys.into_iter().collect()
}

fn suggest(key: &str, known: &BTreeSet<String>) -> Option<String> {
    known
        .iter()
        .map(|k| (strsim::levenshtein(key, k), k))
        .filter(|(d, _)| *d <= 3)
        .min()
        .map(|(_, k)| k.clone())
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let value: toml::Value = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let mut keys = Vec::new();
        flatten("", &value, &mut keys);
        let known = known_keys();
        for key in keys {
            if !known.contains(&key) {
                let hint = match suggest(&key, &known) {
                    Some(s) => format!("; did you mean \"{s}\"?"),
                    None => String::new(),
                };
                return Err(CliError::Config(format!("unknown key \"{key}\"{hint}")));
            }
        }
        value.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// The tolerance to use for a band whose built-in default is `default`.
    pub fn tolerance_or(&self, default: f64) -> Result<f64, CliError> {
        match &self.tolerance {
            NumOrName::Num(t) if *t >= 0.0 => Ok(*t),
            NumOrName::Name(n) if n == "auto" => Ok(default),
            other => Err(CliError::Config(format!("tolerance must be \"auto\" or non-negative, got {other:?}"))),
        }
    }

    /// The configuration as echoed in reports: everything except settings
    /// that must not influence results.
    pub fn materialized(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("threads");
            map.remove("out_dir");
        }
        v
    }
}
