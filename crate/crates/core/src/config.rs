//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a full-line comment, blank lines are
//! ignored, and a repeated key keeps its last value. Key names mirror the
//! corresponding config struct fields; the CLI exposes each key as the
//! matching `--key-name` flag and flags override file values.

use crate::error::{Error, Result};
use std::io::BufRead;
use std::path::Path;

/// Parses assignments in file order.
pub fn parse_kv<R: BufRead>(reader: R) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`, got {trimmed:?}",
                lineno + 1
            )));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Reads and parses a config file.
pub fn load_kv(path: &Path) -> Result<Vec<(String, String)>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Config(format!("cannot open config file {}: {e}", path.display())))?;
    parse_kv(std::io::BufReader::new(file))
}
