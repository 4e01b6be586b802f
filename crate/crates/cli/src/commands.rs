use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use pcd_core::eval::{evaluate as run_evaluation, DatasetManifest, EvalMetric, EvalOptions};
use pcd_core::integration::{
    crop, mean_frame_scores, object_bounding_box, pool_with_crack_map, prepare_pair,
    score_prepared, score_sampled,
};
use pcd_core::io::{list_sequence_pairs, load_gray, read_qmap, save_crack_map_png, save_gray_png, write_qmap};
use pcd_core::pcd::{compute_crack_map, crack_artifact_score};
use pcd_core::qa_models::binarize_map;
use pcd_core::synth::random_pair;
use pcd_core::{GrayFrame, PcdError, QualityModel, Raster, Result};

use crate::config::Settings;

fn out_err(e: std::io::Error) -> PcdError {
    PcdError::Io {
        path: "<stdout>".into(),
        source: e,
    }
}

fn load_pair(reference: &Path, distorted: &Path) -> Result<(GrayFrame, GrayFrame)> {
    Ok((load_gray(reference)?, load_gray(distorted)?))
}

fn parse_models(names: &str) -> Result<Vec<QualityModel>> {
    if names.eq_ignore_ascii_case("all") {
        return Ok(QualityModel::ALL.to_vec());
    }
    names.split(',')
        .map(|name| {
            QualityModel::parse(name.trim())
                .ok_or_else(|| PcdError::Parameter(format!("unknown metric {name:?}")))
        })
        .collect()
}

fn parse_metrics(names: &str) -> Result<Vec<EvalMetric>> {
    if names.eq_ignore_ascii_case("all") {
        return Ok(EvalMetric::all());
    }
    names.split(',')
        .map(|name| {
            EvalMetric::parse(name.trim())
                .ok_or_else(|| PcdError::Parameter(format!("unknown metric {name:?}")))
        })
        .collect()
}

pub fn detect(
    s: &Settings,
    reference: &Path,
    distorted: &Path,
    map_path: Option<&Path>,
    crop_first: bool,
    out: &mut impl Write,
) -> Result<()> {
    let (r, d) = load_pair(reference, distorted)?;
    let map = if crop_first {
        prepare_pair(&r, &d, &s.pcd, &s.integration)?.crack
    } else {
        compute_crack_map(&r, &d, &s.pcd)?
    };
    if let Some(p) = map_path {
        save_crack_map_png(&map, p)?;
    }
    writeln!(out, "CAS={:.6}", crack_artifact_score(&map)?).map_err(out_err)
}

pub fn score(s: &Settings, ref_dir: &Path, dist_dir: &Path, metric: &str, out: &mut impl Write) -> Result<()> {
    let models = parse_models(metric)?;
    let pairs = list_sequence_pairs(ref_dir, dist_dir)?;
    let frames = score_sampled(&pairs, s.stride, s.threads, |i, (rp, dp)| {
        let (r, d) = load_pair(rp, dp)?;
        let pair = prepare_pair(&r, &d, &s.pcd, &s.integration)?;
        let scores = models
            .iter()
            .map(|&m| score_prepared(&pair, &r, &d, m, &s.integration))
            .collect::<Result<Vec<_>>>()?;
        log::info!("scored frame {i}");
        Ok(scores)
    })?;
    for (k, m) in models.iter().enumerate() {
        let per_frame: Vec<_> = frames.iter().map(|f| f[k]).collect();
        let agg = mean_frame_scores(&per_frame)?;
        writeln!(
            out,
            "metric={} base={} enhanced={} cas={}",
            m.name(),
            agg.base,
            agg.enhanced,
            agg.cas
        )
        .map_err(out_err)?;
    }
    Ok(())
}

pub fn evaluate(s: &Settings, manifest: &Path, out_dir: &Path, metric: &str, out: &mut impl Write) -> Result<()> {
    let metrics = parse_metrics(metric)?;
    let manifest = DatasetManifest::load(manifest)?;
    let opts = EvalOptions {
        pcd: s.pcd,
        integration: s.integration,
        stride: s.stride,
        threads: s.threads,
    };
    let report = run_evaluation(&manifest, &metrics, &opts)?;
    report.write(out_dir)?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| format!("{x:.6}"));
    let mut failed = None;
    for row in &report.rows {
        writeln!(
            out,
            "metric={} variant={} n={} srcc={} plcc={}",
            row.metric,
            row.variant.name(),
            row.n,
            fmt(row.srcc),
            fmt(row.plcc)
        )
        .map_err(out_err)?;
        if let (None, Some(e)) = (&failed, &row.error) {
            failed = Some(format!("{} {}: {e}", row.metric, row.variant.name()));
        }
    }
    for skip in &report.skipped {
        log::warn!("skipped {}: {}", skip.stimulus_id, skip.reason);
    }
    match failed {
        // Reports are already on disk; the exit status still flags the row.
        Some(msg) => Err(PcdError::UndefinedCorrelation(msg)),
        None => Ok(()),
    }
}

pub fn ablate(s: &Settings, reference: &Path, distorted: &Path, out_dir: &Path, out: &mut impl Write) -> Result<()> {
    let (r, d) = load_pair(reference, distorted)?;
    fs::create_dir_all(out_dir).map_err(|e| PcdError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    for (name, cfg) in s.pcd.ablation_variants() {
        let map = compute_crack_map(&r, &d, &cfg)?;
        save_crack_map_png(&map, out_dir.join(format!("{name}.png")))?;
        writeln!(
            out,
            "variant={name} flagged={} cas={:.6}",
            map.flagged_count(),
            crack_artifact_score(&map)?
        )
        .map_err(out_err)?;
    }
    Ok(())
}

pub fn bench(s: &Settings, width: usize, height: usize, iterations: usize, seed: u64, out: &mut impl Write) -> Result<()> {
    if iterations == 0 || width == 0 || height == 0 {
        return Err(PcdError::Parameter("width, height and iterations must be positive".into()));
    }
    let mut times = Vec::with_capacity(iterations);
    for i in 0..iterations {
        let (r, d) = random_pair::<f64>(width, height, seed.wrapping_add(i as u64));
        let t = Instant::now();
        let map = compute_crack_map(&r, &d, &s.pcd)?;
        times.push(t.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(map);
    }
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    times.sort_by(f64::total_cmp);
    let n = times.len();
    let median = if n % 2 == 1 {
        times[n / 2]
    } else {
        0.5 * (times[n / 2 - 1] + times[n / 2])
    };
    writeln!(
        out,
        "size={width}x{height} iterations={n} min_ms={:.3} median_ms={median:.3} mean_ms={mean:.3}",
        times[0]
    )
    .map_err(out_err)
}

pub fn baseline(
    reference: &Path,
    distorted: &Path,
    model: &str,
    threshold: f64,
    map_path: Option<&Path>,
    qmap_path: Option<&Path>,
    out: &mut impl Write,
) -> Result<()> {
    // The GMSD detector thresholds the GMS map itself.
    let name = if model.eq_ignore_ascii_case("gmsd") { "gms" } else { model };
    let model = QualityModel::parse(name)
        .ok_or_else(|| PcdError::Parameter(format!("unknown model {model:?}")))?;
    if !threshold.is_finite() {
        return Err(PcdError::Parameter(format!("threshold must be finite, got {threshold}")));
    }
    let (r, d) = load_pair(reference, distorted)?;
    let q = model.quality_map(&r, &d)?;
    if let Some(p) = qmap_path {
        write_qmap(&q, p)?;
    }
    let bin = binarize_map(&q, threshold);
    if let Some(p) = map_path {
        let frame = GrayFrame::new(
            bin.width,
            bin.height,
            bin.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )?;
        save_gray_png(&frame, p)?;
    }
    writeln!(out, "model={} flagged={} of {}", model.name(), bin.count(), bin.data.len()).map_err(out_err)
}

pub fn pool(s: &Settings, qmap: &Path, reference: &Path, distorted: &Path, out: &mut impl Write) -> Result<()> {
    let q = read_qmap::<f64>(qmap)?;
    let (r, d) = load_pair(reference, distorted)?;
    // Accept maps of either the full frame or the object bounding box.
    let crack = if q.dims() == r.dims() {
        compute_crack_map(&r, &d, &s.pcd)?
    } else {
        let bg = s.integration.background.resolve(&r);
        let rect = object_bounding_box(&r, &d, bg, s.integration.bg_tol)?;
        if (rect.width(), rect.height()) != q.dims() {
            return Err(PcdError::Dimension {
                left_w: q.width(),
                left_h: q.height(),
                right_w: r.width(),
                right_h: r.height(),
            });
        }
        compute_crack_map(&crop(&r, &rect)?, &crop(&d, &rect)?, &s.pcd)?
    };
    let (mean, pooled) = pool_with_crack_map(&q, &crack, s.integration.c2)?;
    writeln!(out, "mean={mean} pooled={pooled}").map_err(out_err)
}
