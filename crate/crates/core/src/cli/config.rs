use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// `key = value` settings read from a config file. Keys are normalized to
/// use underscores, so `max-epochs` and `max_epochs` are the same key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i as u64 + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = normalize(k);
            if key.is_empty() {
                return Err(Error::Parse {
                    line: i as u64 + 1,
                    message: "empty key".into(),
                });
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }
}

/// Settings resolved from flags, then the config file, then defaults, and
/// recorded in resolution order for the echo file.
#[derive(Debug, Default)]
pub struct Resolver {
    file: ConfigFile,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(file: ConfigFile) -> Self {
        Self {
            file,
            resolved: BTreeMap::new(),
        }
    }

    /// Flag value if given, otherwise the config-file value, if any.
    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + ToString,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) => Some(
                    raw.parse::<T>()
                        .map_err(|_| Error::Config(format!("invalid value `{raw}` for `{key}`")))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.insert(normalize(key), v.to_string());
        }
        Ok(value)
    }

    pub fn with_default<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + ToString,
    {
        let v = self.optional(key, flag)?.unwrap_or(default);
        self.resolved.insert(normalize(key), v.to_string());
        Ok(v)
    }

    /// Comma-separated list setting.
    pub fn list<T>(&mut self, key: &str, flag: Option<String>, default: Vec<T>) -> Result<Vec<T>>
    where
        T: FromStr + ToString,
    {
        let raw = self.optional::<String>(key, flag)?;
        let values = match raw {
            Some(s) => s
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<T>()
                        .map_err(|_| Error::Config(format!("invalid entry `{p}` in `{key}`")))
                })
                .collect::<Result<Vec<T>>>()?,
            None => default,
        };
        let joined = values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        self.resolved.insert(normalize(key), joined);
        Ok(values)
    }

    /// The resolved settings as `key = value` lines, headed by the tool
    /// version and the command.
    pub fn echo(&self, command: &str) -> String {
        let mut out = format!("tool_version = {}\ncommand = {command}\n", env!("CARGO_PKG_VERSION"));
        for (k, v) in &self.resolved {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_dashes() {
        let f = ConfigFile::parse("# run\nmax-epochs = 7  # short\n\nkind=put\n").unwrap();
        assert_eq!(f.get("max_epochs"), Some("7"));
        assert_eq!(f.get("kind"), Some("put"));
        assert!(ConfigFile::parse("oops").is_err());
    }

    #[test]
    fn flags_override_file() {
        let f = ConfigFile::parse("seed = 3\nbatch_size = 64").unwrap();
        let mut r = Resolver::new(f);
        assert_eq!(r.with_default("seed", Some(9u64), 0).unwrap(), 9);
        assert_eq!(r.with_default::<usize>("batch_size", None, 1024).unwrap(), 64);
        assert_eq!(r.with_default::<usize>("patience", None, 5).unwrap(), 5);
        let echo = r.echo("train");
        assert!(echo.contains("seed = 9\n"));
        assert!(echo.contains("batch_size = 64\n"));
        assert!(echo.starts_with("tool_version = "));
    }

    #[test]
    fn bad_value_is_config_error() {
        let mut r = Resolver::new(ConfigFile::parse("seed = x").unwrap());
        assert!(matches!(r.with_default::<u64>("seed", None, 0), Err(Error::Config(_))));
    }

    #[test]
    fn lists() {
        let mut r = Resolver::new(ConfigFile::default());
        let v: Vec<f64> = r.list("strikes", Some("0.9, 1.0,1.1".into()), vec![]).unwrap();
        assert_eq!(v, vec![0.9, 1.0, 1.1]);
    }
}
