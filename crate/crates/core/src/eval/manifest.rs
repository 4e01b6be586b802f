use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PcdError, Result};

pub const MANIFEST_HEADER: [&str; 4] = ["stimulus_id", "ref_dir", "dist_dir", "mos"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StimulusRecord {
    pub stimulus_id: String,
    pub ref_dir: PathBuf,
    pub dist_dir: PathBuf,
    pub mos: f64,
}

/// Stimuli with their subjective scores, in file order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: Vec<StimulusRecord>,
}

impl DatasetManifest {
    /// Parses `stimulus_id,ref_dir,dist_dir,mos` CSV. Quoting is not
    /// recognized, so a path containing a comma produces an extra field and
    /// the row is rejected. Relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path, origin: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .quoting(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());

        let header = reader
            .headers()
            .map_err(|e| PcdError::format(origin, e.to_string()))?
            .clone();
        if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
            return Err(PcdError::format(
                origin,
                format!("expected header `{}`", MANIFEST_HEADER.join(",")),
            ));
        }

        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (i, row) in reader.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| PcdError::format(origin, format!("line {line}: {e}")))?;
            if row.len() == 1 && row[0].is_empty() {
                continue;
            }
            if row.len() != 4 {
                return Err(PcdError::format(
                    origin,
                    format!(
                        "line {line}: expected 4 fields, found {} (paths must not contain commas)",
                        row.len()
                    ),
                ));
            }
            let id = row[0].to_string();
            if id.is_empty() {
                return Err(PcdError::format(origin, format!("line {line}: empty stimulus_id")));
            }
            if !seen.insert(id.clone()) {
                return Err(PcdError::format(origin, format!("line {line}: duplicate stimulus_id `{id}`")));
            }
            let mos: f64 = row[3]
                .parse()
                .map_err(|_| PcdError::format(origin, format!("line {line}: bad mos `{}`", &row[3])))?;
            if !mos.is_finite() {
                return Err(PcdError::format(origin, format!("line {line}: mos must be finite")));
            }
            records.push(StimulusRecord {
                stimulus_id: id,
                ref_dir: base.join(&row[1]),
                dist_dir: base.join(&row[2]),
                mos,
            });
        }
        Ok(Self { records })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PcdError::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base, path)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
