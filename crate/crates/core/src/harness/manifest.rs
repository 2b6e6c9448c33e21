//! Dataset manifests: one `class_id<TAB>path` line per clip. Blank lines
//! and lines starting with `#` are skipped; relative paths resolve against
//! the manifest's directory.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub class: u32,
    pub path: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (class, path) = line
                .split_once('\t')
                .ok_or_else(|| HarnessError::Config(format!("manifest line {}: expected class_id<TAB>path", n + 1)))?;
            let class = class
                .trim()
                .parse()
                .map_err(|_| HarnessError::Config(format!("manifest line {}: bad class id {class:?}", n + 1)))?;
            if path.is_empty() {
                return Err(HarnessError::Config(format!("manifest line {}: empty path", n + 1)));
            }
            let path = Path::new(path);
            let path = if path.is_absolute() {
                path.to_path_buf()
            } else {
                base.join(path)
            };
            entries.push(ManifestEntry { class, path });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::File {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    /// Serialize with paths written as given.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}", e.class, e.path.display());
        }
        out
    }

    pub fn classes(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.entries.iter().map(|e| e.class).collect();
        set.into_iter().collect()
    }

    /// Largest class id plus one; the id space the holdout rule applies to.
    pub fn class_count(&self) -> u32 {
        self.entries.iter().map(|e| e.class + 1).max().unwrap_or(0)
    }
}
