use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PcdError, Result};

use super::logistic::LogisticParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Base,
    Enhanced,
    /// A score with no base/enhanced pair (the crack artifact score).
    Standalone,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::Enhanced => "enhanced",
            Variant::Standalone => "standalone",
        }
    }
}

/// One correlation row. `srcc`/`plcc` are absent when `error` explains why.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub metric: String,
    pub variant: Variant,
    pub srcc: Option<f64>,
    pub plcc: Option<f64>,
    pub params: Option<LogisticParams>,
    pub n: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedStimulus {
    pub stimulus_id: String,
    pub reason: String,
}

/// Per-stimulus sequence scores, kept so reports can be audited.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StimulusScores {
    pub stimulus_id: String,
    pub mos: f64,
    pub frames_scored: usize,
    /// `(metric, base, enhanced)` per base model.
    pub models: Vec<(String, f64, f64)>,
    pub cas: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub stimuli: Vec<StimulusScores>,
    pub skipped: Vec<SkippedStimulus>,
}

impl EvalReport {
    pub fn row(&self, metric: &str, variant: Variant) -> Option<&EvalRow> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.variant == variant)
    }

    /// Pretty JSON with two-space indentation.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| PcdError::param(e.to_string()))
    }

    /// Flat CSV: `metric,variant,r_s,r_p,n,beta1,beta2,beta3,beta4,error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,variant,r_s,r_p,n,beta1,beta2,beta3,beta4,error\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let p = r.params;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.metric,
                r.variant.name(),
                opt(r.srcc),
                opt(r.plcc),
                r.n,
                opt(p.map(|p| p.beta1)),
                opt(p.map(|p| p.beta2)),
                opt(p.map(|p| p.beta3)),
                opt(p.map(|p| p.beta4)),
                r.error.as_deref().unwrap_or("").replace(',', ";"),
            );
        }
        out
    }

    /// Writes `report.json` and `report.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| PcdError::io(dir, e))?;
        let json = dir.join("report.json");
        std::fs::write(&json, self.to_json()? + "\n").map_err(|e| PcdError::io(&json, e))?;
        let csv = dir.join("report.csv");
        std::fs::write(&csv, self.to_csv()).map_err(|e| PcdError::io(&csv, e))?;
        Ok(())
    }
}
