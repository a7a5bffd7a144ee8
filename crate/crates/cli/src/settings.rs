//! Merges a `key = value` config file, command-line flags and the seed
//! environment override into one validated key map.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::str::FromStr;

use clap::parser::ValueSource;
use clap::{ArgMatches, Command};

use crate::CliError;

/// Environment variable that replaces `--seed` when set.
pub const SEED_ENV: &str = "PICONET_SEED";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses flat `key = value` text. Blank lines and `#` comments are skipped;
/// underscores in keys read as dashes.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("config line {}: expected key = value", k + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(config_err(format!("config line {}: empty key", k + 1)));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

impl Settings {
    /// Collects the settings of one subcommand. File values come first,
    /// explicit flags replace them, and the seed variable replaces both.
    pub fn from_matches(cmd: &Command, m: &ArgMatches, env_seed: Option<&str>) -> Result<Self, CliError> {
        let args: Vec<_> = cmd.get_arguments().filter(|a| a.get_id() != "config").collect();
        let allowed: BTreeSet<&str> = args.iter().map(|a| a.get_id().as_str()).collect();
        let mut values = BTreeMap::new();

        if let Some(path) = m.get_one::<String>("config") {
            let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read config {path}: {e}")))?;
            for (key, value) in parse_config(&text)? {
                if !allowed.contains(key.as_str()) {
                    return Err(config_err(format!(
                        "unknown key `{key}` in {path} for `{}`",
                        cmd.get_name()
                    )));
                }
                values.insert(key, value);
            }
        }
        for arg in &args {
            let id = arg.get_id().as_str();
            if m.value_source(id) != Some(ValueSource::CommandLine) {
                continue;
            }
            let value = if arg.get_action().takes_values() {
                m.get_one::<String>(id).cloned().unwrap_or_default()
            } else {
                m.get_flag(id).to_string()
            };
            values.insert(id.to_string(), value);
        }
        if let Some(seed) = env_seed {
            if allowed.contains("seed") {
                values.insert("seed".into(), seed.trim().to_string());
            }
        }
        Ok(Settings { values })
    }

    pub fn from_pairs<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        Settings {
            values: pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    pub fn opt<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| config_err(format!("invalid value `{v}` for `{key}`: {e}")))
            })
            .transpose()
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            None => Ok(false),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" | "on" => Ok(true),
                "false" | "0" | "no" | "off" => Ok(false),
                _ => Err(config_err(format!("invalid value `{v}` for `{key}`: expected true or false"))),
            },
        }
    }

    pub fn with<T>(&self, key: &str, default: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, CliError> {
        let v = self.raw(key).unwrap_or(default);
        parse(v).map_err(|e| config_err(format!("invalid value `{v}` for `{key}`: {e}")))
    }
}

/// `WxH` in meters.
pub fn parse_area(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| "expected WIDTHxHEIGHT".to_string())?;
    let w: f64 = w.trim().parse().map_err(|e| format!("{e}"))?;
    let h: f64 = h.trim().parse().map_err(|e| format!("{e}"))?;
    if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
        return Err("dimensions must be positive".into());
    }
    Ok((w, h))
}

/// `A..B` (inclusive), `A,B,C` or a single number.
pub fn parse_counts(s: &str) -> Result<Vec<usize>, String> {
    let s = s.trim();
    let out: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|e| format!("{e}"))?;
        if a > b {
            return Err(format!("empty range {a}..{b}"));
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{e}")))
            .collect::<Result<_, _>>()?
    };
    if out.is_empty() {
        return Err("no values".into());
    }
    Ok(out)
}

/// Comma-separated reals.
pub fn parse_reals(s: &str) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{e}")))
        .collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err("no values".into());
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines() {
        let parsed = parse_config("# comment\n\nn = 40\nd_max=6\n").unwrap();
        assert_eq!(parsed, vec![("n".into(), "40".into()), ("d-max".into(), "6".into())]);
        assert!(parse_config("just words").is_err());
        assert!(parse_config("= 3").is_err());
    }

    #[test]
    fn area_and_lists() {
        assert_eq!(parse_area("10x20").unwrap(), (10.0, 20.0));
        assert!(parse_area("10").is_err());
        assert!(parse_area("0x5").is_err());
        assert_eq!(parse_counts("2..5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_counts("1,5,10").unwrap(), vec![1, 5, 10]);
        assert_eq!(parse_counts("7").unwrap(), vec![7]);
        assert!(parse_counts("5..2").is_err());
        assert_eq!(parse_reals("2, 3.5").unwrap(), vec![2.0, 3.5]);
    }

    #[test]
    fn typed_access() {
        let s = Settings::from_pairs([("n", "12"), ("forced", "true"), ("bad", "x")]);
        assert_eq!(s.get("n", 0usize).unwrap(), 12);
        assert_eq!(s.get("seed", 5u64).unwrap(), 5);
        assert!(s.flag("forced").unwrap());
        assert!(!s.flag("no-wifi").unwrap());
        assert!(matches!(s.get::<f64>("bad", 0.0), Err(CliError::Config(_))));
        assert!(s.flag("bad").is_err());
    }
}
