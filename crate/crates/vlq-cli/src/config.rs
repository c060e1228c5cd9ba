//! Flat key = value config files mirroring the flag names.
//!
//! Lines are `key = value`, `#` starts a comment. Flags win over config
//! values; the merged result is echoed into the run manifest.

use std::collections::BTreeMap;
use std::path::Path;

pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn empty() -> Self {
        Self { values: BTreeMap::new() }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!(
                    "{}:{}: expected `key = value`, got {raw:?}",
                    path.display(),
                    lineno + 1
                ));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| format!("config key {key} = {raw:?}: {e}")),
        }
    }

    pub fn get_raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Parse a comma-separated list of positive reals.
pub fn parse_grid(raw: &str) -> Result<Vec<f64>, String> {
    let grid: Vec<f64> = raw
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad grid entry {s:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if grid.is_empty() {
        return Err("grid must contain at least one value".into());
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_ignores_comments() {
        let dir = std::env::temp_dir().join("vlq-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(&path, "# run\nt = 2\nrho = 1.5 # target\np-grid = 10,20\n").unwrap();
        let cfg = ConfigFile::load(&path).unwrap();
        assert_eq!(cfg.get::<usize>("t").unwrap(), Some(2));
        assert_eq!(cfg.get::<f64>("rho").unwrap(), Some(1.5));
        assert_eq!(parse_grid(cfg.get_raw("p-grid").unwrap()).unwrap(), vec![10.0, 20.0]);
        assert_eq!(cfg.get::<u64>("samples").unwrap(), None);
    }

    #[test]
    fn rejects_malformed_lines() {
        let dir = std::env::temp_dir().join("vlq-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.conf");
        std::fs::write(&path, "t 2\n").unwrap();
        assert!(ConfigFile::load(&path).is_err());
    }
}
