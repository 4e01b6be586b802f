//! Crack-weighted pooling of quality maps.
//!
//! Frames are cropped to the union bounding box of the rendered object, the
//! crack map is turned into per-pixel weights `w = (1 + c2) / (1 - m + c2)`,
//! and a model's quality map is pooled as `sum(w q) / sum(w)`. Non-crack
//! pixels keep weight 1, so a crack-free pair pools to the plain mean.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{PcdError, Result};
use crate::imgproc::{ensure_same_dims, GrayFrame, Raster, RealField};
use crate::parallel::ordered_map;
use crate::pcd::{compute_crack_map, crack_artifact_score, CrackMap, PcdConfig};
use crate::qa_models::{QualityMap, QualityModel};
use crate::scalar::{lit, Scalar};

pub const DEFAULT_C2: f64 = 0.0001;
pub const DEFAULT_BG_TOL: f64 = 0.02;
/// Frame sampling stride for sequences (one frame in ten).
pub const DEFAULT_STRIDE: usize = 10;

/// Half-open pixel rectangle `[left, right) x [top, bottom)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropRect {
    pub left: usize,
    pub top: usize,
    pub right: usize,
    pub bottom: usize,
}

impl CropRect {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            left: 0,
            top: 0,
            right: width,
            bottom: height,
        }
    }

    pub fn width(&self) -> usize {
        self.right - self.left
    }

    pub fn height(&self) -> usize {
        self.bottom - self.top
    }

    pub fn validate_for(&self, width: usize, height: usize) -> Result<()> {
        if self.left < self.right && self.right <= width && self.top < self.bottom && self.bottom <= height {
            Ok(())
        } else {
            Err(PcdError::param(format!(
                "crop rect {self:?} does not fit a {width}x{height} frame"
            )))
        }
    }
}

/// Background intensity used to find the object bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Background<S> {
    /// Most frequent value on the reference frame's one-pixel border.
    Auto,
    Value(S),
}

impl<S: Scalar> Background<S> {
    pub fn resolve(&self, reference: &GrayFrame<S>) -> S {
        match *self {
            Background::Value(v) => v,
            Background::Auto => border_mode(reference),
        }
    }
}

/// Modal value of the one-pixel border; ties resolve to the smallest value.
pub fn border_mode<S: Scalar>(frame: &GrayFrame<S>) -> S {
    let (w, h) = frame.dims();
    let mut counts: BTreeMap<u64, (S, usize)> = BTreeMap::new();
    let mut add = |v: S| {
        // Order-preserving key for nonnegative floats.
        let key = v.to_f64_lossy().to_bits();
        counts.entry(key).or_insert((v, 0)).1 += 1;
    };
    for x in 0..w {
        add(frame.get(x, 0));
        if h > 1 {
            add(frame.get(x, h - 1));
        }
    }
    for y in 1..h.saturating_sub(1) {
        add(frame.get(0, y));
        if w > 1 {
            add(frame.get(w - 1, y));
        }
    }
    let mut best = (S::zero(), 0usize);
    for &(v, n) in counts.values() {
        if n > best.1 {
            best = (v, n);
        }
    }
    best.0
}

/// Tight rectangle around every pixel of either frame farther than `tol`
/// from `bg`. The same rectangle is meant for both frames.
pub fn object_bounding_box<S: Scalar>(
    reference: &GrayFrame<S>,
    distorted: &GrayFrame<S>,
    bg: S,
    tol: S,
) -> Result<CropRect> {
    ensure_same_dims(reference, distorted)?;
    if !(tol >= S::zero()) {
        return Err(PcdError::param(format!("background tolerance must be >= 0, got {tol}")));
    }
    let (w, h) = reference.dims();
    let mut rect: Option<CropRect> = None;
    for y in 0..h {
        for x in 0..w {
            let fg = (reference.get(x, y) - bg).abs() > tol || (distorted.get(x, y) - bg).abs() > tol;
            if !fg {
                continue;
            }
            rect = Some(match rect {
                None => CropRect {
                    left: x,
                    top: y,
                    right: x + 1,
                    bottom: y + 1,
                },
                Some(r) => CropRect {
                    left: r.left.min(x),
                    top: r.top.min(y),
                    right: r.right.max(x + 1),
                    bottom: r.bottom.max(y + 1),
                },
            });
        }
    }
    rect.ok_or(PcdError::EmptyObject {
        bg: bg.to_f64_lossy(),
        tol: tol.to_f64_lossy(),
    })
}

fn crop_values<T: Copy>(data: &[T], width: usize, rect: &CropRect) -> Vec<T> {
    let mut out = Vec::with_capacity(rect.width() * rect.height());
    for y in rect.top..rect.bottom {
        out.extend_from_slice(&data[y * width + rect.left..y * width + rect.right]);
    }
    out
}

/// Rasters that can be cut to a sub-rectangle.
pub trait Crop: Sized {
    fn crop(&self, rect: &CropRect) -> Result<Self>;
}

impl<S: Scalar> Crop for GrayFrame<S> {
    fn crop(&self, rect: &CropRect) -> Result<Self> {
        rect.validate_for(self.width(), self.height())?;
        Ok(GrayFrame::from_parts(
            rect.width(),
            rect.height(),
            crop_values(self.data(), self.width(), rect),
        ))
    }
}

impl<S: Scalar> Crop for RealField<S> {
    fn crop(&self, rect: &CropRect) -> Result<Self> {
        rect.validate_for(self.width(), self.height())?;
        Ok(RealField::from_parts(
            rect.width(),
            rect.height(),
            crop_values(self.data(), self.width(), rect),
        ))
    }
}

impl<S: Scalar> Crop for QualityMap<S> {
    fn crop(&self, rect: &CropRect) -> Result<Self> {
        rect.validate_for(self.width(), self.height())?;
        QualityMap::new(
            rect.width(),
            rect.height(),
            crop_values(self.data(), self.width(), rect),
            self.polarity(),
        )
    }
}

impl<S: Scalar> Crop for CrackMap<S> {
    fn crop(&self, rect: &CropRect) -> Result<Self> {
        rect.validate_for(self.width(), self.height())?;
        CrackMap::new(
            rect.width(),
            rect.height(),
            crop_values(self.data(), self.width(), rect),
        )
    }
}

/// Exact sub-rectangle copy.
pub fn crop<T: Crop>(frame: &T, rect: &CropRect) -> Result<T> {
    frame.crop(rect)
}

/// Per-pixel pooling weights; 1 on non-crack pixels, growing without bound
/// (up to `(1 + c2) / c2`) as the crack likelihood approaches 1.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMap<S> {
    width: usize,
    height: usize,
    data: Vec<S>,
}

impl<S> Raster<S> for WeightMap<S> {
    fn width(&self) -> usize {
        self.width
    }
    fn height(&self) -> usize {
        self.height
    }
    fn data(&self) -> &[S] {
        &self.data
    }
}

#[inline]
pub fn crack_weight<S: Scalar>(m: S, c2: S) -> S {
    if m == S::zero() {
        return S::one();
    }
    (S::one() + c2) / (S::one() - m + c2)
}

pub fn weight_map<S: Scalar>(map: &CrackMap<S>, c2: S) -> Result<WeightMap<S>> {
    if !(c2 > S::zero()) || !c2.is_finite() {
        return Err(PcdError::param(format!("c2 must be positive, got {c2}")));
    }
    Ok(WeightMap {
        width: map.width(),
        height: map.height(),
        data: map.data().iter().map(|&m| crack_weight(m, c2)).collect(),
    })
}

/// `sum(w q) / sum(w)`.
pub fn weighted_pool<S: Scalar, Q: Raster<S>, W: Raster<S>>(q: &Q, w: &W) -> Result<S> {
    ensure_same_dims(q, w)?;
    let mut num = S::zero();
    let mut den = S::zero();
    for (&qi, &wi) in q.data().iter().zip(w.data()) {
        num = num + wi * qi;
        den = den + wi;
    }
    if !(den > S::zero()) {
        return Err(PcdError::param("weights must have a positive sum"));
    }
    Ok(num / den)
}

/// Integration settings besides the detector's own.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig<S> {
    pub c2: S,
    pub background: Background<S>,
    pub bg_tol: S,
    /// Compute base scores on the uncropped frames.
    pub base_on_full_frame: bool,
}

impl<S: Scalar> Default for IntegrationConfig<S> {
    fn default() -> Self {
        Self {
            c2: lit(DEFAULT_C2),
            background: Background::Auto,
            bg_tol: lit(DEFAULT_BG_TOL),
            base_on_full_frame: false,
        }
    }
}

/// Base and crack-weighted scores for one frame pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameScores<S> {
    pub base: S,
    pub enhanced: S,
    /// Crack artifact score of the cropped pair.
    pub cas: S,
}

/// Cropped frames together with their crack map.
#[derive(Clone, Debug)]
pub struct PreparedPair<S> {
    pub rect: CropRect,
    pub reference: GrayFrame<S>,
    pub distorted: GrayFrame<S>,
    pub crack: CrackMap<S>,
}

pub fn prepare_pair<S: Scalar>(
    reference: &GrayFrame<S>,
    distorted: &GrayFrame<S>,
    pcd: &PcdConfig<S>,
    icfg: &IntegrationConfig<S>,
) -> Result<PreparedPair<S>> {
    let bg = icfg.background.resolve(reference);
    let rect = object_bounding_box(reference, distorted, bg, icfg.bg_tol)?;
    let reference = crop(reference, &rect)?;
    let distorted = crop(distorted, &rect)?;
    let crack = compute_crack_map(&reference, &distorted, pcd)?;
    Ok(PreparedPair {
        rect,
        reference,
        distorted,
        crack,
    })
}

/// Pools an externally supplied quality map with a crack map of the same
/// size. Returns `(unweighted, weighted)` in the map's native polarity.
pub fn pool_with_crack_map<S: Scalar>(
    q: &QualityMap<S>,
    crack: &CrackMap<S>,
    c2: S,
) -> Result<(S, S)> {
    let w = weight_map(crack, c2)?;
    Ok((q.mean(), weighted_pool(q, &w)?))
}

/// Crop, detect, weight, and pool one frame pair with a base model.
pub fn enhanced_frame_score<S: Scalar>(
    reference: &GrayFrame<S>,
    distorted: &GrayFrame<S>,
    model: QualityModel,
    pcd: &PcdConfig<S>,
    icfg: &IntegrationConfig<S>,
) -> Result<FrameScores<S>> {
    let pair = prepare_pair(reference, distorted, pcd, icfg)?;
    score_prepared(&pair, reference, distorted, model, icfg)
}

/// Scores an already prepared pair; `full_*` are only used for full-frame
/// base scores.
pub fn score_prepared<S: Scalar>(
    pair: &PreparedPair<S>,
    full_reference: &GrayFrame<S>,
    full_distorted: &GrayFrame<S>,
    model: QualityModel,
    icfg: &IntegrationConfig<S>,
) -> Result<FrameScores<S>> {
    let q = model.quality_map(&pair.reference, &pair.distorted)?;
    let (mean, pooled) = pool_with_crack_map(&q, &pair.crack, icfg.c2)?;
    let base_mean = if icfg.base_on_full_frame {
        model.quality_map(full_reference, full_distorted)?.mean()
    } else {
        mean
    };
    Ok(FrameScores {
        base: model.score_from_pooled(base_mean)?,
        enhanced: model.score_from_pooled(pooled)?,
        cas: crack_artifact_score(&pair.crack)?,
    })
}

/// Indices `0, stride, 2 stride, ...` below `len`.
pub fn sampled_indices(len: usize, stride: usize) -> Vec<usize> {
    (0..len).step_by(stride.max(1)).collect()
}

/// Applies `scorer` to every `stride`-th item (in parallel when `threads != 1`)
/// and returns per-item results in index order.
pub fn score_sampled<T, R, F>(items: &[T], stride: usize, threads: usize, scorer: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> Result<R> + Sync + Send,
{
    if stride == 0 {
        return Err(PcdError::param("stride must be at least 1"));
    }
    if items.is_empty() {
        return Err(PcdError::param("sequence has no frames"));
    }
    let picked: Vec<(usize, &T)> = sampled_indices(items.len(), stride)
        .into_iter()
        .map(|i| (i, &items[i]))
        .collect();
    ordered_map(&picked, threads, |_, &(i, t)| scorer(i, t))
        .into_iter()
        .collect()
}

pub fn mean_of<S: Scalar>(values: &[S]) -> Result<S> {
    if values.is_empty() {
        return Err(PcdError::param("mean of an empty list"));
    }
    let sum = values.iter().fold(S::zero(), |acc, &v| acc + v);
    Ok(sum / S::from_usize_lossy(values.len()))
}

/// Mean of per-frame scores over every `stride`-th frame.
pub fn sequence_score<T, S, F>(items: &[T], stride: usize, threads: usize, scorer: F) -> Result<S>
where
    T: Sync,
    S: Scalar,
    F: Fn(usize, &T) -> Result<S> + Sync + Send,
{
    mean_of(&score_sampled(items, stride, threads, scorer)?)
}

/// Component-wise mean of frame scores.
pub fn mean_frame_scores<S: Scalar>(scores: &[FrameScores<S>]) -> Result<FrameScores<S>> {
    let pick = |f: fn(&FrameScores<S>) -> S| mean_of(&scores.iter().map(f).collect::<Vec<_>>());
    Ok(FrameScores {
        base: pick(|s| s.base)?,
        enhanced: pick(|s| s.enhanced)?,
        cas: pick(|s| s.cas)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounding_box_examples() {
        let bg = GrayFrame::constant(6, 5, 0.2).unwrap();
        assert!(matches!(
            object_bounding_box(&bg, &bg, 0.2, 0.02),
            Err(PcdError::EmptyObject { .. })
        ));

        let one = GrayFrame::from_fn(6, 5, |x, y| if (x, y) == (4, 1) { 0.9 } else { 0.2 }).unwrap();
        let r = object_bounding_box(&one, &bg, 0.2, 0.02).unwrap();
        assert_eq!(
            r,
            CropRect {
                left: 4,
                top: 1,
                right: 5,
                bottom: 2
            }
        );
        assert_eq!(r, object_bounding_box(&bg, &one, 0.2, 0.02).unwrap());
        assert!(object_bounding_box(&one, &bg, 0.2, -1.0).is_err());
    }

    #[test]
    fn bounding_box_is_union_of_both_frames() {
        let reference =
            GrayFrame::from_fn(10, 10, |x, y| if (3..6).contains(&x) && (3..6).contains(&y) { 0.7 } else { 0.0 })
                .unwrap();
        let distorted = GrayFrame::from_fn(10, 10, |x, y| {
            if (3..6).contains(&x) && (3..6).contains(&y) || (x == 8 && y == 1) {
                0.7
            } else {
                0.0
            }
        })
        .unwrap();
        let r = object_bounding_box(&reference, &distorted, 0.0, 0.02).unwrap();
        assert_eq!((r.left, r.top, r.right, r.bottom), (3, 1, 9, 6));
    }

    #[test]
    fn auto_background_is_border_mode() {
        let f = GrayFrame::from_fn(8, 8, |x, y| {
            if x == 0 && y < 3 {
                0.9
            } else if (2..6).contains(&x) && (2..6).contains(&y) {
                0.5
            } else {
                0.1
            }
        })
        .unwrap();
        assert_eq!(border_mode(&f), 0.1);
        assert_eq!(Background::Auto.resolve(&f), 0.1);
        assert_eq!(Background::Value(0.3).resolve(&f), 0.3);
    }

    #[test]
    fn crop_examples() {
        let f = GrayFrame::from_fn(5, 4, |x, y| (x + 5 * y) as f64 / 20.0).unwrap();
        assert_eq!(crop(&f, &CropRect::full(5, 4)).unwrap(), f);
        let one = crop(
            &f,
            &CropRect {
                left: 2,
                top: 3,
                right: 3,
                bottom: 4,
            },
        )
        .unwrap();
        assert_eq!(one.data(), &[f.get(2, 3)]);
        let bad = CropRect {
            left: 2,
            top: 0,
            right: 6,
            bottom: 1,
        };
        assert!(crop(&f, &bad).is_err());
        let empty = CropRect {
            left: 2,
            top: 0,
            right: 2,
            bottom: 1,
        };
        assert!(crop(&f, &empty).is_err());
    }

    #[test]
    fn weight_examples() {
        assert_eq!(crack_weight(0.0f64, 1e-4), 1.0);
        assert!((crack_weight(1.0f64, 1e-4) - 10001.0).abs() < 1e-9);
        assert!((crack_weight(0.5f64, 1e-4) - 1.0001 / 0.5001).abs() < 1e-15);
        let m = CrackMap::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(weight_map(&m, 0.0).is_err());
        let w = weight_map(&m, 1e-4).unwrap();
        assert_eq!(w.data()[0], 1.0);
    }

    #[test]
    fn pooling_examples() {
        let q = QualityMap::new(2, 2, vec![0.2f64, 0.4, 0.6, 0.8], crate::qa_models::Polarity::HigherIsBetter)
            .unwrap();
        let unit = WeightMap {
            width: 2,
            height: 2,
            data: vec![1.0; 4],
        };
        assert!((weighted_pool(&q, &unit).unwrap() - 0.5).abs() < 1e-15);
        let spike = WeightMap {
            width: 2,
            height: 2,
            data: vec![1e-12, 1e-12, 1.0, 1e-12],
        };
        assert!((weighted_pool(&q, &spike).unwrap() - 0.6).abs() < 1e-9);
        let wrong = WeightMap {
            width: 1,
            height: 4,
            data: vec![1.0; 4],
        };
        assert!(weighted_pool(&q, &wrong).is_err());
    }

    #[test]
    fn sampling_and_sequence_mean() {
        assert_eq!(sampled_indices(30, 10), vec![0, 10, 20]);
        assert_eq!(sampled_indices(31, 10), vec![0, 10, 20, 30]);
        assert_eq!(sampled_indices(1, 10), vec![0]);

        let scores: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let s = sequence_score(&scores, 10, 1, |_, &v| Ok(v)).unwrap();
        assert_eq!(s, 10.0);
        let single = sequence_score(&[0.7f64], 10, 1, |_, &v| Ok(v)).unwrap();
        assert_eq!(single, 0.7);
        let constant = sequence_score(&[0.25f64; 7], 1, 3, |_, &v| Ok(v)).unwrap();
        assert_eq!(constant, 0.25);

        assert!(sequence_score::<f64, f64, _>(&[], 10, 1, |_, &v| Ok(v)).is_err());
        assert!(sequence_score(&scores, 0, 1, |_, &v| Ok(v)).is_err());
    }
}
