//! Correlation harness: per-stimulus base/enhanced sequence scores against
//! MOS, summarized as SRCC and logistic-fitted PLCC.

mod correlation;
mod logistic;
mod manifest;
mod report;

pub use correlation::{average_ranks, pearson, srcc};
pub use logistic::{
    initial_params, logistic_fit, plcc, plcc_with, LogisticFit, LogisticParams, MAX_ITERATIONS,
    REL_TOLERANCE,
};
pub use manifest::{DatasetManifest, StimulusRecord, MANIFEST_HEADER};
pub use report::{EvalReport, EvalRow, SkippedStimulus, StimulusScores, Variant};

use serde::{Deserialize, Serialize};

use crate::error::{PcdError, Result};
use crate::integration::{
    mean_of, prepare_pair, sampled_indices, score_prepared, IntegrationConfig, DEFAULT_STRIDE,
};
use crate::io::{list_sequence_pairs, load_gray};
use crate::parallel::ordered_map;
use crate::pcd::PcdConfig;
use crate::qa_models::QualityModel;

/// A predictor evaluated by the harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalMetric {
    Model(QualityModel),
    /// Crack artifact score on its own.
    Cas,
}

impl EvalMetric {
    pub fn name(self) -> &'static str {
        match self {
            EvalMetric::Model(m) => m.name(),
            EvalMetric::Cas => "cas",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        if name.eq_ignore_ascii_case("cas") {
            return Some(EvalMetric::Cas);
        }
        QualityModel::parse(name).map(EvalMetric::Model)
    }

    pub fn all() -> Vec<Self> {
        QualityModel::ALL
            .iter()
            .map(|&m| EvalMetric::Model(m))
            .chain(std::iter::once(EvalMetric::Cas))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub pcd: PcdConfig<f64>,
    pub integration: IntegrationConfig<f64>,
    pub stride: usize,
    /// Worker threads across stimuli; 1 is fully sequential.
    pub threads: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            pcd: PcdConfig::default(),
            integration: IntegrationConfig::default(),
            stride: DEFAULT_STRIDE,
            threads: 1,
        }
    }
}

/// Scores one stimulus sequentially over its sampled frames.
pub fn score_stimulus(
    record: &StimulusRecord,
    models: &[QualityModel],
    opts: &EvalOptions,
) -> Result<StimulusScores> {
    let pairs = list_sequence_pairs(&record.ref_dir, &record.dist_dir)?;
    let picked = sampled_indices(pairs.len(), opts.stride);
    let mut per_model: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); models.len()];
    let mut cas = Vec::with_capacity(picked.len());
    for &i in &picked {
        let (rp, dp) = &pairs[i];
        let reference = load_gray::<f64>(rp)?;
        let distorted = load_gray::<f64>(dp)?;
        let pair = prepare_pair(&reference, &distorted, &opts.pcd, &opts.integration)?;
        for (slot, &model) in per_model.iter_mut().zip(models) {
            let s = score_prepared(&pair, &reference, &distorted, model, &opts.integration)?;
            slot.0.push(s.base);
            slot.1.push(s.enhanced);
        }
        cas.push(crate::pcd::crack_artifact_score(&pair.crack)?);
        log::debug!("{}: scored frame {i}", record.stimulus_id);
    }
    let models = models
        .iter()
        .zip(&per_model)
        .map(|(m, (b, e))| Ok((m.name().to_string(), mean_of(b)?, mean_of(e)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(StimulusScores {
        stimulus_id: record.stimulus_id.clone(),
        mos: record.mos,
        frames_scored: picked.len(),
        models,
        cas: mean_of(&cas)?,
    })
}

/// SRCC and PLCC of one predictor; failures become an `error` on the row.
pub fn correlate_row(metric: &str, variant: Variant, pred: &[f64], mos: &[f64]) -> EvalRow {
    let mut row = EvalRow {
        metric: metric.to_string(),
        variant,
        srcc: None,
        plcc: None,
        params: None,
        n: pred.len(),
        error: None,
    };
    if pred.len() < 3 {
        row.error = Some(format!("need at least 3 stimuli, have {}", pred.len()));
        return row;
    }
    match srcc(pred, mos) {
        Ok(r) => row.srcc = Some(r),
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    }
    match plcc(pred, mos) {
        Ok((r, fit)) => {
            row.plcc = Some(r);
            row.params = Some(fit.params);
        }
        Err(e) => {
            if let PcdError::Fit { fallback, .. } = &e {
                row.params = Some(*fallback);
            }
            row.error = Some(e.to_string());
        }
    }
    row
}

/// Runs every metric over every stimulus and correlates with MOS.
///
/// Stimuli that fail to load or score are skipped and listed in the report;
/// rows carry the number of stimuli actually used.
pub fn evaluate(
    manifest: &DatasetManifest,
    metrics: &[EvalMetric],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    opts.pcd.validate()?;
    if opts.stride == 0 {
        return Err(PcdError::param("stride must be at least 1"));
    }
    let models: Vec<QualityModel> = metrics
        .iter()
        .filter_map(|m| match m {
            EvalMetric::Model(q) => Some(*q),
            EvalMetric::Cas => None,
        })
        .collect();

    let results = ordered_map(&manifest.records, opts.threads, |_, rec| {
        score_stimulus(rec, &models, opts)
    });

    let mut report = EvalReport::default();
    for (rec, res) in manifest.records.iter().zip(results) {
        match res {
            Ok(s) => {
                log::info!("{}: {} frames scored", rec.stimulus_id, s.frames_scored);
                report.stimuli.push(s);
            }
            Err(e) => {
                log::warn!("skipping stimulus {}: {e}", rec.stimulus_id);
                report.skipped.push(SkippedStimulus {
                    stimulus_id: rec.stimulus_id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }

    let mos: Vec<f64> = report.stimuli.iter().map(|s| s.mos).collect();
    for metric in metrics {
        match metric {
            EvalMetric::Model(m) => {
                let k = models.iter().position(|x| x == m).expect("model listed");
                let base: Vec<f64> = report.stimuli.iter().map(|s| s.models[k].1).collect();
                let enhanced: Vec<f64> = report.stimuli.iter().map(|s| s.models[k].2).collect();
                report.rows.push(correlate_row(m.name(), Variant::Base, &base, &mos));
                report.rows.push(correlate_row(m.name(), Variant::Enhanced, &enhanced, &mos));
            }
            EvalMetric::Cas => {
                let cas: Vec<f64> = report.stimuli.iter().map(|s| s.cas).collect();
                report.rows.push(correlate_row("cas", Variant::Standalone, &cas, &mos));
            }
        }
    }
    Ok(report)
}
