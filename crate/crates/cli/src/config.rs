//! Settings file named by `DUALPART_CONFIG`: one `key = value` per line, `#`
//! starts a comment. Command-line flags override it; built-in defaults apply
//! to anything neither sets.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::CliError;

pub const ENV_VAR: &str = "DUALPART_CONFIG";

pub const KEYS: &[&str] = &[
    "parts",
    "segments",
    "iters",
    "seed",
    "lr",
    "lambda_p",
    "lambda_u",
    "warmup_fraction",
    "no_warmup",
    "grid_res",
    "invert",
    "steps",
    "refine_lr",
    "lambda_reg",
    "prune_area",
    "short_len",
    "flatten_angle",
    "join_angle",
    "coeff_tol",
    "split_len",
    "res",
    "samples",
];

#[derive(Debug, Default)]
pub struct Settings {
    source: String,
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn from_env() -> Result<Self, CliError> {
        match std::env::var_os(ENV_VAR) {
            None => Ok(Settings::default()),
            Some(path) => {
                let path = path.to_string_lossy().into_owned();
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(format!("{ENV_VAR}={path}: {e}")))?;
                Settings::parse(&text, &path)
            }
        }
    }

    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!("{source}:{}: expected key = value", i + 1)));
            };
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::usage(format!("{source}:{}: unknown key '{key}'", i + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Settings { source: source.to_string(), values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        debug_assert!(KEYS.contains(&key));
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| CliError::usage(format!("{}: bad value '{v}' for {key}", self.source))),
        }
    }

    /// `flag`, else the file's value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    /// Boolean switches: set by the flag or by `key = true` in the file.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        Ok(flag || self.get::<bool>(key)?.unwrap_or(false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_precedence() {
        let s = Settings::parse("# fit\nparts = 3\nlr=0.05 # faster\n\ninvert = true\n", "cfg").unwrap();
        assert_eq!(s.pick(None, "parts", 6usize).unwrap(), 3);
        assert_eq!(s.pick(Some(2usize), "parts", 6).unwrap(), 2);
        assert_eq!(s.pick(None, "segments", 4usize).unwrap(), 4);
        assert_eq!(s.pick(None, "lr", 0.01f64).unwrap(), 0.05);
        assert!(s.switch(false, "invert").unwrap());
        assert!(!s.switch(false, "no_warmup").unwrap());
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(Settings::parse("colour = red", "cfg").is_err());
        assert!(Settings::parse("parts 3", "cfg").is_err());
        let s = Settings::parse("parts = many", "cfg").unwrap();
        assert!(s.get::<usize>("parts").is_err());
    }
}
