//! Flat `key = value` configuration files and the settings they share with
//! command-line flags.
//!
//! Values use JSON scalar syntax: numbers, `true`/`false`, and quoted
//! strings. Blank lines and lines starting with `#` are skipped.

use std::fmt;

use intersection_consensus::net::DelayKind;
use intersection_consensus::scenario::ScenarioConfig;
use intersection_consensus::{ConfigError, QuorumRule};
use serde_json::Value;

/// Every setting, by its configuration-file key.
pub const KEYS: [&str; 15] = [
    "lanes",
    "vehicles",
    "cav_ratio",
    "t_vision_ms",
    "hv_delay_ms",
    "quorum",
    "delay",
    "loss",
    "jitter_ms",
    "handling_ms",
    "passage_ms",
    "min_batch",
    "max_batch",
    "seed",
    "runs",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SettingError {
    pub field: String,
    pub reason: String,
}

impl SettingError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for SettingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid value for `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for SettingError {}

impl From<ConfigError> for SettingError {
    fn from(e: ConfigError) -> Self {
        Self::new(e.field, e.reason)
    }
}

/// Parse a configuration file into `(key, value)` pairs, in file order.
pub fn parse_config(text: &str) -> Result<Vec<(String, Value)>, SettingError> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| SettingError::new("config", format!("line {}: expected `key = value`", no + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(SettingError::new(key, "unknown key"));
        }
        let value: Value = serde_json::from_str(value.trim())
            .map_err(|e| SettingError::new(key, format!("line {}: {e}", no + 1)))?;
        if value.is_array() || value.is_object() || value.is_null() {
            return Err(SettingError::new(key, "expected a number, boolean or string"));
        }
        out.push((key.to_string(), value));
    }
    Ok(out)
}

fn number(key: &str, v: &Value) -> Result<f64, SettingError> {
    v.as_f64().ok_or_else(|| SettingError::new(key, format!("expected a number, got {v}")))
}

fn count(key: &str, v: &Value) -> Result<u64, SettingError> {
    v.as_u64()
        .ok_or_else(|| SettingError::new(key, format!("expected a non-negative integer, got {v}")))
}

fn small_count(key: &str, v: &Value) -> Result<u32, SettingError> {
    u32::try_from(count(key, v)?).map_err(|_| SettingError::new(key, "too large"))
}

fn text<'v>(key: &str, v: &'v Value) -> Result<&'v str, SettingError> {
    v.as_str().ok_or_else(|| SettingError::new(key, format!("expected a string, got {v}")))
}

fn micros(key: &str, v: &Value) -> Result<u64, SettingError> {
    let ms = number(key, v)?;
    if !ms.is_finite() || ms < 0.0 {
        return Err(SettingError::new(key, format!("{ms} is not a non-negative duration")));
    }
    Ok((ms * 1000.0).round() as u64)
}

pub fn parse_quorum(s: &str) -> Result<QuorumRule, String> {
    match s {
        "majority" => Ok(QuorumRule::Majority),
        "full" => Ok(QuorumRule::Full),
        other => Err(format!("`{other}` is not `majority` or `full`")),
    }
}

/// Apply one setting. Range checks are left to `ScenarioConfig::validate`.
pub fn apply(cfg: &mut ScenarioConfig, key: &str, v: &Value) -> Result<(), SettingError> {
    match key {
        "lanes" => cfg.total_lanes = small_count(key, v)?,
        "vehicles" => cfg.n_vehicles = small_count(key, v)?,
        "cav_ratio" => cfg.cav_ratio = number(key, v)?,
        "t_vision_ms" => cfg.t_vision = micros(key, v)?,
        "hv_delay_ms" => cfg.hv_delay = micros(key, v)?,
        "quorum" => cfg.quorum_mode = parse_quorum(text(key, v)?).map_err(|r| SettingError::new(key, r))?,
        "delay" => {
            cfg.delay = text(key, v)?
                .parse::<DelayKind>()
                .map_err(|r| SettingError::new(key, r))?
        }
        "loss" => cfg.loss_prob = number(key, v)?,
        "jitter_ms" => cfg.jitter_bound = micros(key, v)?,
        "handling_ms" => cfg.handling_time = micros(key, v)?,
        "passage_ms" => cfg.passage_time = micros(key, v)?,
        "min_batch" => cfg.batch_model.min_batch = count(key, v)? as usize,
        "max_batch" => cfg.batch_model.max_batch = Some(count(key, v)? as usize),
        "seed" => cfg.seed = count(key, v)?,
        "runs" => cfg.runs = small_count(key, v)?,
        other => return Err(SettingError::new(other, "unknown key")),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalars_and_comments() {
        let text = "# baseline\nlanes = 4\n\ncav_ratio = 0.5\nquorum = \"full\"\ndelay = \"fixed:2\"\n";
        let pairs = parse_config(text).unwrap();
        assert_eq!(pairs.len(), 4);
        let mut cfg = ScenarioConfig::default();
        for (k, v) in &pairs {
            apply(&mut cfg, k, v).unwrap();
        }
        assert_eq!(cfg.total_lanes, 4);
        assert_eq!(cfg.cav_ratio, 0.5);
        assert_eq!(cfg.quorum_mode, QuorumRule::Full);
        assert_eq!(cfg.delay, DelayKind::Fixed { d: 2_000 });
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert_eq!(parse_config("lane = 2").unwrap_err().field, "lane");
    }

    #[test]
    fn bad_values_name_their_key() {
        assert_eq!(parse_config("seed = [1]").unwrap_err().field, "seed");
        assert_eq!(parse_config("runs = nope").unwrap_err().field, "runs");
        assert_eq!(parse_config("lanes 2").unwrap_err().field, "config");
        let mut cfg = ScenarioConfig::default();
        let err = apply(&mut cfg, "vehicles", &Value::from(-3)).unwrap_err();
        assert_eq!(err.field, "vehicles");
        let err = apply(&mut cfg, "quorum", &Value::from("most")).unwrap_err();
        assert_eq!(err.field, "quorum");
        let err = apply(&mut cfg, "t_vision_ms", &Value::from(-1.0)).unwrap_err();
        assert_eq!(err.field, "t_vision_ms");
    }

    #[test]
    fn fractional_milliseconds() {
        let mut cfg = ScenarioConfig::default();
        apply(&mut cfg, "handling_ms", &Value::from(3.5)).unwrap();
        assert_eq!(cfg.handling_time, 3_500);
    }

    #[test]
    fn every_key_is_applicable() {
        let samples = [
            ("lanes", Value::from(6)),
            ("vehicles", Value::from(10)),
            ("cav_ratio", Value::from(0.3)),
            ("t_vision_ms", Value::from(300)),
            ("hv_delay_ms", Value::from(1000)),
            ("quorum", Value::from("majority")),
            ("delay", Value::from("lognormal:1,0.25")),
            ("loss", Value::from(0.1)),
            ("jitter_ms", Value::from(2)),
            ("handling_ms", Value::from(1)),
            ("passage_ms", Value::from(1500)),
            ("min_batch", Value::from(2)),
            ("max_batch", Value::from(4)),
            ("seed", Value::from(99)),
            ("runs", Value::from(3)),
        ];
        assert_eq!(samples.len(), KEYS.len());
        let mut cfg = ScenarioConfig::default();
        for (k, v) in &samples {
            assert!(KEYS.contains(k));
            apply(&mut cfg, k, v).unwrap();
        }
        assert!(cfg.validate().is_ok());
        assert_ne!(cfg, ScenarioConfig::default());
    }
}
