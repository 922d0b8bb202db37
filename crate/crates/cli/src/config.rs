//! `key = value` run configuration, one entry per line. Flags given on the
//! command line take precedence over the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const KEYS: [&str; 12] = [
    "precision_bits",
    "abs_tol",
    "rel_tol",
    "max_step",
    "delta",
    "epsilon",
    "seed",
    "steps",
    "noise",
    "offset",
    "out",
    "report",
];

#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    entries: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, Vec<String>> {
        let mut entries = BTreeMap::new();
        let mut problems = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                problems.push(format!("line {}: expected `key = value`", i + 1));
                continue;
            };
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                problems.push(format!("line {}: unknown key `{key}`", i + 1));
                continue;
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                problems.push(format!("line {}: `{key}` given twice", i + 1));
            }
        }
        if problems.is_empty() {
            Ok(FileConfig { entries })
        } else {
            Err(problems)
        }
    }

    pub fn load(path: &Path) -> Result<Self, Vec<String>> {
        let text = fs::read_to_string(path).map_err(|e| vec![format!("{}: {e}", path.display())])?;
        FileConfig::parse(&text).map_err(|ps| ps.into_iter().map(|p| format!("{}: {p}", path.display())).collect())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_reports_all_problems() {
        let cfg = FileConfig::parse("# run\ndelta = 0.1\nseed=7  # trailing\n").unwrap();
        assert_eq!(cfg.get("delta"), Some("0.1"));
        assert_eq!(cfg.get("seed"), Some("7"));
        let errs = FileConfig::parse("delta 0.1\ncolour = red\nseed = 1\nseed = 2\n").unwrap_err();
        assert_eq!(errs.len(), 3);
    }
}
