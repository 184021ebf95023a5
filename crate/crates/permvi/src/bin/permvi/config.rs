//! Plain-text configuration files: `key = value` lines with `#` comments.
//! Values fill in for flags the user did not pass; flags always win.

use permvi::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Default)]
pub struct FileConfig {
    entries: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let body = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut entries = BTreeMap::new();
        for (lineno, raw) in body.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidArgument(format!(
                    "{}:{}: expected `key = value`, got `{line}`",
                    path.display(),
                    lineno + 1
                )));
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    /// Parse a value if the key is present.
    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                Error::InvalidArgument(format!("config key `{key}` = `{raw}`: {e}"))
            }),
        }
    }

    /// Flag value if given, else config value, else the default.
    pub fn resolve<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(flag.or(self.get(key)?).unwrap_or(default))
    }

    /// Flag value if given, else config value.
    pub fn resolve_opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(flag.or(self.get(key)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_key_value_lines_and_comments() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# a comment").unwrap();
        writeln!(file, "metric = mse  # trailing comment").unwrap();
        writeln!(file).unwrap();
        writeln!(file, "reps=7").unwrap();
        let cfg = FileConfig::load(Some(file.path())).unwrap();
        assert_eq!(cfg.get::<String>("metric").unwrap().as_deref(), Some("mse"));
        assert_eq!(cfg.get::<usize>("reps").unwrap(), Some(7));
        assert_eq!(cfg.get::<usize>("missing").unwrap(), None);
        assert_eq!(cfg.resolve(None, "reps", 3usize).unwrap(), 7);
        assert_eq!(cfg.resolve(Some(9usize), "reps", 3).unwrap(), 9);
        assert_eq!(cfg.resolve(None, "missing", 3usize).unwrap(), 3);
    }

    #[test]
    fn rejects_malformed_lines() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "just a bare word").unwrap();
        assert!(FileConfig::load(Some(file.path())).is_err());
    }
}
