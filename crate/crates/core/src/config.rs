//! JSON market configuration.
//!
//! A config is either a single market
//!
//! ```json
//! { "r": 0.02, "mu": [0.08, 0.05], "sigma": [[0.2, 0.0], [0.1, 0.3]], "labels": ["IDX", "ACME"] }
//! ```
//!
//! or a piecewise-constant schedule whose segments carry a `duration` next to
//! the market fields:
//!
//! ```json
//! { "schedule": [ { "duration": 50, "r": 0.02, "mu": [...], "sigma": [[...]] }, ... ] }
//! ```
//!
//! Numbers may also be written as decimal strings (`"0.02"`). `labels` is optional.

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::error::{MarketError, SimError};
use crate::market::MarketSpec;
use crate::simulation::{Schedule, Segment};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("malformed JSON: {0}")]
    Json(String),

    #[error("{path}: missing required field")]
    MissingField { path: String },

    #[error("{path}: expected {expected}")]
    WrongType {
        path: String,
        expected: &'static str,
    },

    #[error("{path}: cannot parse {text:?} as a number")]
    BadNumber { path: String, text: String },

    #[error("{path}: value is not finite")]
    NonFinite { path: String },

    #[error("{path}: expected length {expected}, found {found}")]
    DimensionMismatch {
        path: String,
        expected: usize,
        found: usize,
    },

    #[error("{path}: {source}")]
    RankDeficient { path: String, source: MarketError },

    #[error("{path}: {source}")]
    Structure { path: String, source: MarketError },

    #[error("schedule: {0}")]
    Schedule(String),
}

impl ConfigError {
    /// Stable machine-readable code for each failure class.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Json(_) => "E_JSON",
            Self::MissingField { .. } => "E_MISSING_FIELD",
            Self::WrongType { .. } => "E_TYPE",
            Self::BadNumber { .. } => "E_NUMBER",
            Self::NonFinite { .. } => "E_NON_FINITE",
            Self::DimensionMismatch { .. } => "E_DIMENSION",
            Self::RankDeficient { .. } => "E_RANK",
            Self::Structure { .. } => "E_STRUCTURE",
            Self::Schedule(_) => "E_SCHEDULE",
        }
    }
}

/// Parsed market configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum MarketConfig {
    Single(MarketSpec),
    Schedule(Schedule),
}

impl MarketConfig {
    pub fn schedule(&self) -> Schedule {
        match self {
            Self::Single(m) => Schedule::constant(m.clone()),
            Self::Schedule(s) => s.clone(),
        }
    }

    /// The constant market, or the first segment of a schedule.
    pub fn primary_market(&self) -> &MarketSpec {
        match self {
            Self::Single(m) => m,
            Self::Schedule(s) => &s.segments()[0].market,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Self::Single(m) => market_to_json(m),
            Self::Schedule(s) => {
                let segments = s
                    .segments()
                    .iter()
                    .map(|seg| {
                        let mut v = market_to_json(&seg.market);
                        v.as_object_mut()
                            .expect("market serialises to an object")
                            .insert("duration".into(), json!(seg.duration));
                        v
                    })
                    .collect::<Vec<_>>();
                json!({ "schedule": segments })
            }
        }
    }
}

pub fn market_to_json(m: &MarketSpec) -> Value {
    let mut v = json!({
        "r": m.r(),
        "mu": m.mu(),
        "sigma": m.sigma_rows(),
    });
    if let Some(labels) = m.labels() {
        v["labels"] = json!(labels);
    }
    v
}

pub fn parse_market_config(text: &str) -> Result<MarketConfig, ConfigError> {
    let root: Value = serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
    let obj = as_object(&root, "$")?;
    match obj.get("schedule") {
        None => parse_market(obj, "").map(MarketConfig::Single),
        Some(Value::Array(items)) => {
            if items.is_empty() {
                return Err(ConfigError::Schedule("no segments".into()));
            }
            let segments = items
                .iter()
                .enumerate()
                .map(|(i, item)| {
                    let prefix = format!("schedule[{i}].");
                    let seg = as_object(item, &format!("schedule[{i}]"))?;
                    let duration = number(
                        seg.get("duration")
                            .ok_or_else(|| ConfigError::MissingField {
                                path: format!("{prefix}duration"),
                            })?,
                        &format!("{prefix}duration"),
                    )?;
                    let market = parse_market(seg, &prefix)?;
                    Ok(Segment { duration, market })
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;
            Schedule::new(segments)
                .map(MarketConfig::Schedule)
                .map_err(|e| match e {
                    SimError::Config(msg) => ConfigError::Schedule(msg),
                    other => ConfigError::Schedule(other.to_string()),
                })
        }
        Some(_) => Err(ConfigError::WrongType {
            path: "schedule".into(),
            expected: "an array of segments",
        }),
    }
}

fn parse_market(obj: &Map<String, Value>, prefix: &str) -> Result<MarketSpec, ConfigError> {
    let field = |name: &str| {
        obj.get(name).ok_or_else(|| ConfigError::MissingField {
            path: format!("{prefix}{name}"),
        })
    };
    let r = number(field("r")?, &format!("{prefix}r"))?;
    let mu = number_array(field("mu")?, &format!("{prefix}mu"))?;
    let sigma_path = format!("{prefix}sigma");
    let rows = as_array(field("sigma")?, &sigma_path)?;
    let sigma = rows
        .iter()
        .enumerate()
        .map(|(k, row)| number_array(row, &format!("{sigma_path}[{k}]")))
        .collect::<Result<Vec<_>, _>>()?;

    let spec = MarketSpec::new(r, mu, sigma).map_err(|e| lift(e, prefix))?;
    match obj.get("labels") {
        None | Some(Value::Null) => Ok(spec),
        Some(v) => {
            let path = format!("{prefix}labels");
            let labels = as_array(v, &path)?
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    l.as_str()
                        .map(str::to_string)
                        .ok_or(ConfigError::WrongType {
                            path: format!("{path}[{i}]"),
                            expected: "a string",
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            spec.with_labels(labels).map_err(|e| lift(e, prefix))
        }
    }
}

fn lift(e: MarketError, prefix: &str) -> ConfigError {
    match e {
        MarketError::DimensionMismatch {
            field,
            expected,
            found,
        } => ConfigError::DimensionMismatch {
            path: format!("{prefix}{field}"),
            expected,
            found,
        },
        MarketError::NonFinite { field, .. } => ConfigError::NonFinite {
            path: format!("{prefix}{field}"),
        },
        e @ MarketError::RankDeficient { .. } => ConfigError::RankDeficient {
            path: format!("{prefix}sigma"),
            source: e,
        },
        e => ConfigError::Structure {
            path: format!("{prefix}sigma"),
            source: e,
        },
    }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, ConfigError> {
    v.as_object().ok_or(ConfigError::WrongType {
        path: path.to_string(),
        expected: "an object",
    })
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, ConfigError> {
    v.as_array().ok_or(ConfigError::WrongType {
        path: path.to_string(),
        expected: "an array",
    })
}

fn number(v: &Value, path: &str) -> Result<f64, ConfigError> {
    let x = match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| ConfigError::BadNumber {
            path: path.to_string(),
            text: n.to_string(),
        })?,
        Value::String(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| ConfigError::BadNumber {
                path: path.to_string(),
                text: s.clone(),
            })?,
        _ => {
            return Err(ConfigError::WrongType {
                path: path.to_string(),
                expected: "a number or decimal string",
            })
        }
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ConfigError::NonFinite {
            path: path.to_string(),
        })
    }
}

fn number_array(v: &Value, path: &str) -> Result<Vec<f64>, ConfigError> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}[{i}]")))
        .collect()
}
