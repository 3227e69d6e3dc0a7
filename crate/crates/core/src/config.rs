//! Tunable runtime parameters and their override syntax.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::messaging::{LayerId, MessageKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown setting `{0}`")]
    UnknownKey(String),
    #[error("setting `{key}`: {detail}")]
    Invalid { key: String, detail: String },
    #[error("override `{0}` is not of the form key=value")]
    Syntax(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Per-layer percolation thresholds, indexed by rank - 1.
    pub thresholds: [f64; 6],
    pub weight_urgency: f64,
    pub weight_importance: f64,
    pub weight_cost: f64,
    pub frustration_window: usize,
    pub frustration_threshold: f64,
    pub retry_cap: u32,
    pub alpha: f64,
    pub beta: f64,
    pub demotion_floor: f64,
    pub prior: f64,
    pub feasibility: f64,
    pub denial_limit: usize,
    pub denial_window: u64,
    pub auto_reboot: bool,
    pub gated: Vec<MessageKind>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            thresholds: [0.5; 6],
            weight_urgency: 0.4,
            weight_importance: 0.4,
            weight_cost: 0.2,
            frustration_window: 5,
            frustration_threshold: 0.6,
            retry_cap: 2,
            alpha: 0.2,
            beta: 0.3,
            demotion_floor: 0.05,
            prior: 0.5,
            feasibility: 0.3,
            denial_limit: 3,
            denial_window: 10,
            auto_reboot: false,
            gated: vec![MessageKind::StrategicDocument, MessageKind::Roadmap],
        }
    }
}

fn unit(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v.parse().map_err(|_| ConfigError::Invalid {
        key: key.into(),
        detail: format!("`{v}` is not a number"),
    })?;
    if !(0.0..=1.0).contains(&x) {
        return Err(ConfigError::Invalid {
            key: key.into(),
            detail: format!("{x} is outside [0, 1]"),
        });
    }
    Ok(x)
}

fn positive<T: std::str::FromStr + PartialOrd + Default>(key: &str, v: &str) -> Result<T, ConfigError> {
    let x: T = v.parse().map_err(|_| ConfigError::Invalid {
        key: key.into(),
        detail: format!("`{v}` is not a whole number"),
    })?;
    if x <= T::default() {
        return Err(ConfigError::Invalid {
            key: key.into(),
            detail: "must be positive".into(),
        });
    }
    Ok(x)
}

impl Settings {
    pub fn threshold(&self, layer: LayerId) -> f64 {
        self.thresholds[layer.index()]
    }

    /// Applies one `key=value` override.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key.trim() {
            "threshold" => self.thresholds = [unit(key, value)?; 6],
            k if k.starts_with("threshold.") => {
                let layer: LayerId = k["threshold.".len()..]
                    .parse()
                    .map_err(|_| ConfigError::UnknownKey(k.into()))?;
                self.thresholds[layer.index()] = unit(key, value)?;
            }
            "weights.urgency" => self.weight_urgency = unit(key, value)?,
            "weights.importance" => self.weight_importance = unit(key, value)?,
            "weights.cost" => self.weight_cost = unit(key, value)?,
            "frustration.window" => self.frustration_window = positive(key, value)?,
            "frustration.threshold" => self.frustration_threshold = unit(key, value)?,
            "retry_cap" => {
                self.retry_cap = value.parse().map_err(|_| ConfigError::Invalid {
                    key: key.into(),
                    detail: format!("`{value}` is not a whole number"),
                })?
            }
            "capability.alpha" => self.alpha = unit(key, value)?,
            "capability.beta" => self.beta = unit(key, value)?,
            "capability.floor" => self.demotion_floor = unit(key, value)?,
            "capability.prior" => self.prior = unit(key, value)?,
            "feasibility" => self.feasibility = unit(key, value)?,
            "escalation.denials" => self.denial_limit = positive(key, value)?,
            "escalation.window" => self.denial_window = positive(key, value)?,
            "auto_reboot" => {
                self.auto_reboot = value.parse().map_err(|_| ConfigError::Invalid {
                    key: key.into(),
                    detail: "expected true or false".into(),
                })?
            }
            "gate" => {
                self.gated = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse().map_err(|e: String| ConfigError::Invalid {
                            key: key.into(),
                            detail: e,
                        })
                    })
                    .collect::<Result<_, _>>()?
            }
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
        Ok(())
    }

    /// Parses and applies a `key=value` string.
    pub fn apply_str(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax(pair.into()))?;
        self.apply(k, v)
    }
}
