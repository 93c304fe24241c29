use std::fs;
use std::path::{Path, PathBuf};

use super::RawTriple;
use crate::{Error, Result};

/// Raw (unresolved) triples for the three standard split files.
#[derive(Debug, Clone, Default)]
pub struct RawSplits {
    pub train: Vec<RawTriple>,
    pub valid: Vec<RawTriple>,
    pub test: Vec<RawTriple>,
}

/// Parses a UTF-8 triple file: one triple per line, exactly three
/// tab-separated fields. Labels are taken verbatim. An empty file yields an
/// empty list; a malformed line is an error naming the line number.
pub fn parse_triples(path: impl AsRef<Path>) -> Result<Vec<RawTriple>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_triples_str(&text, path)
}

fn parse_triples_str(text: &str, path: &Path) -> Result<Vec<RawTriple>> {
    let mut triples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (head, relation, tail) = match (fields.next(), fields.next(), fields.next()) {
            (Some(h), Some(r), Some(t)) if fields.next().is_none() => (h, r, t),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!(
                        "expected 3 tab-separated fields, got {}",
                        line.split('\t').count()
                    ),
                })
            }
        };
        triples.push(RawTriple::new(head, relation, tail));
    }
    Ok(triples)
}

/// Loads `train.txt`, `valid.txt` and `test.txt` from a dataset directory.
/// `valid.txt`/`test.txt` may be absent (treated as empty splits).
pub fn load_splits(dir: impl AsRef<Path>) -> Result<RawSplits> {
    let dir = dir.as_ref();
    let load = |name: &str, required: bool| -> Result<Vec<RawTriple>> {
        let path: PathBuf = dir.join(name);
        if !path.exists() {
            if required {
                return Err(Error::Config(format!("missing split file {}", path.display())));
            }
            return Ok(Vec::new());
        }
        parse_triples(&path)
    };
    Ok(RawSplits {
        train: load("train.txt", true)?,
        valid: load("valid.txt", false)?,
        test: load("test.txt", false)?,
    })
}
