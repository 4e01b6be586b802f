//! Perceptual crack detection.
//!
//! The detector runs five fixed stages on a reference/distorted frame pair:
//!
//! 1. truncated absolute difference (TAD) of the two frames;
//! 2. contrast modulation: divide by the local standard deviation of the
//!    *reference* frame plus `c1`, so cracks in textured regions are masked;
//! 3. Laplacian modulation: multiply by the absolute Laplacian of the
//!    *distorted* frame, which is large on the sharp edges cracks create;
//! 4. truncated sigmoid with threshold `t1`, giving a crack likelihood in
//!    `{0} ∪ (0.5, 1]`.
//!
//! Stages 2 and 3 can be switched off for ablation; a disabled stage is the
//! identity and the remaining order is unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{PcdError, Result};
use crate::imgproc::{ensure_same_dims, laplacian, local_std, GrayFrame, Kernel, Raster, RealField};
use crate::scalar::{lit, Scalar};

/// Shipped sigmoid threshold. Calibrated on synthetic fissure fixtures; see
/// the README for how it was chosen.
pub const DEFAULT_T1: f64 = 0.75;
pub const DEFAULT_TAD_THRESHOLD: f64 = 0.1;
pub const DEFAULT_C1: f64 = 0.01;
pub const DEFAULT_WINDOW_SIZE: usize = 5;
pub const DEFAULT_WINDOW_SIGMA: f64 = 1.5;

/// Constants and ablation switches of the detector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcdConfig<S> {
    pub tad_threshold: S,
    pub c1: S,
    pub t1: S,
    pub contrast_modulation: bool,
    pub laplacian_modulation: bool,
    pub window_size: usize,
    pub window_sigma: S,
}

impl<S: Scalar> Default for PcdConfig<S> {
    fn default() -> Self {
        Self {
            tad_threshold: lit(DEFAULT_TAD_THRESHOLD),
            c1: lit(DEFAULT_C1),
            t1: lit(DEFAULT_T1),
            contrast_modulation: true,
            laplacian_modulation: true,
            window_size: DEFAULT_WINDOW_SIZE,
            window_sigma: lit(DEFAULT_WINDOW_SIGMA),
        }
    }
}

impl<S: Scalar> PcdConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tad_threshold >= S::zero() && self.tad_threshold < S::one()) {
            return Err(PcdError::param(format!(
                "tad_threshold must lie in [0, 1), got {}",
                self.tad_threshold
            )));
        }
        if !(self.c1 > S::zero()) || !self.c1.is_finite() {
            return Err(PcdError::param(format!("c1 must be positive, got {}", self.c1)));
        }
        if !(self.t1 > S::zero()) || !self.t1.is_finite() {
            return Err(PcdError::param(format!("t1 must be positive, got {}", self.t1)));
        }
        if self.window_size == 0 || self.window_size % 2 == 0 {
            return Err(PcdError::param(format!(
                "window_size must be odd and positive, got {}",
                self.window_size
            )));
        }
        if !(self.window_sigma > S::zero()) || !self.window_sigma.is_finite() {
            return Err(PcdError::param(format!(
                "window_sigma must be positive, got {}",
                self.window_sigma
            )));
        }
        Ok(())
    }

    /// The four ablation variants: full, no contrast, no Laplacian, neither.
    pub fn ablation_variants(&self) -> [(&'static str, Self); 4] {
        let with = |contrast, lap| Self {
            contrast_modulation: contrast,
            laplacian_modulation: lap,
            ..*self
        };
        [
            ("full", with(true, true)),
            ("no_contrast", with(false, true)),
            ("no_laplacian", with(true, false)),
            ("neither", with(false, false)),
        ]
    }

    pub fn window(&self) -> Result<Kernel<S>> {
        Kernel::gaussian(self.window_size, self.window_sigma)
    }
}

/// Per-pixel crack likelihood; every value is exactly 0 or in `(0.5, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrackMap<S> {
    width: usize,
    height: usize,
    data: Vec<S>,
}

impl<S: Scalar> CrackMap<S> {
    pub fn new(width: usize, height: usize, data: Vec<S>) -> Result<Self> {
        if width == 0 || height == 0 || width * height != data.len() {
            return Err(PcdError::param(format!(
                "crack map of {width}x{height} cannot hold {} values",
                data.len()
            )));
        }
        let half: S = lit(0.5);
        if let Some(v) = data
            .iter()
            .find(|&&v| !(v == S::zero() || (v > half && v <= S::one())))
        {
            return Err(PcdError::param(format!("crack likelihood {v} outside {{0}} ∪ (0.5, 1]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Number of pixels with a nonzero (hence > 0.5) likelihood.
    pub fn flagged_count(&self) -> usize {
        self.data.iter().filter(|&&v| v > S::zero()).count()
    }

    pub fn is_flagged(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] > S::zero()
    }

    /// 8-bit quantization `round(255 m)` used for PNG export.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.to_f64_lossy() * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }
}

impl<S> Raster<S> for CrackMap<S> {
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

/// `|x - y|`, zeroed where strictly below `threshold`.
pub fn truncated_abs_diff<S: Scalar>(
    reference: &GrayFrame<S>,
    distorted: &GrayFrame<S>,
    threshold: S,
) -> Result<RealField<S>> {
    ensure_same_dims(reference, distorted)?;
    if !(threshold >= S::zero() && threshold < S::one()) {
        return Err(PcdError::param(format!(
            "TAD threshold must lie in [0, 1), got {threshold}"
        )));
    }
    reference.to_field().zip_with(distorted, |x, y| {
        let d = (x - y).abs();
        if d >= threshold {
            d
        } else {
            S::zero()
        }
    })
}

/// Masking by reference contrast: `tad / (sigma + c1)`.
pub fn contrast_modulate<S: Scalar>(tad: &RealField<S>, sigma: &RealField<S>, c1: S) -> Result<RealField<S>> {
    if !(c1 > S::zero()) {
        return Err(PcdError::param(format!("c1 must be positive, got {c1}")));
    }
    tad.zip_with(sigma, |d, s| d / (s + c1))
}

/// `m * |lap|`.
pub fn laplacian_modulate<S: Scalar>(modulated: &RealField<S>, lap: &RealField<S>) -> Result<RealField<S>> {
    modulated.zip_with(lap, |m, l| m * l.abs())
}

/// Scalar form of the truncated sigmoid.
///
/// Values whose sigmoid rounds to exactly 0.5 (only possible a few ulps above
/// `t1`) are treated as below threshold so the codomain stays `{0} ∪ (0.5, 1]`.
#[inline]
pub fn truncated_sigmoid_scalar<S: Scalar>(value: S, t1: S) -> S {
    if value > t1 {
        let s = S::one() / (S::one() + (-(value - t1) / t1).exp());
        if s > lit(0.5) {
            return s;
        }
    }
    S::zero()
}

pub fn truncated_sigmoid<S: Scalar>(initial: &RealField<S>, t1: S) -> Result<CrackMap<S>> {
    if !(t1 > S::zero()) || !t1.is_finite() {
        return Err(PcdError::param(format!("t1 must be positive, got {t1}")));
    }
    if initial.data().iter().any(|&v| v < S::zero()) {
        return Err(PcdError::param("initial crack map must be nonnegative"));
    }
    Ok(CrackMap {
        width: initial.width(),
        height: initial.height(),
        data: initial
            .data()
            .iter()
            .map(|&v| truncated_sigmoid_scalar(v, t1))
            .collect(),
    })
}

/// Full detector on a frame pair.
pub fn compute_crack_map<S: Scalar>(
    reference: &GrayFrame<S>,
    distorted: &GrayFrame<S>,
    cfg: &PcdConfig<S>,
) -> Result<CrackMap<S>> {
    cfg.validate()?;
    let mut stage = truncated_abs_diff(reference, distorted, cfg.tad_threshold)?;
    if cfg.contrast_modulation {
        let sigma = local_std(reference, &cfg.window()?)?;
        stage = contrast_modulate(&stage, &sigma, cfg.c1)?;
    }
    if cfg.laplacian_modulation {
        stage = laplacian_modulate(&stage, &laplacian(distorted)?)?;
    }
    truncated_sigmoid(&stage, cfg.t1)
}

/// Crack artifact score: mean likelihood. Larger means worse.
pub fn crack_artifact_score<S: Scalar>(map: &CrackMap<S>) -> Result<S> {
    if map.is_empty() {
        return Err(PcdError::param("crack artifact score of an empty map"));
    }
    let sum: S = map.data().iter().copied().sum();
    Ok(sum / S::from_usize_lossy(map.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(w: usize, h: usize, v: Vec<f64>) -> RealField<f64> {
        RealField::new(w, h, v).unwrap()
    }

    #[test]
    fn tad_examples() {
        let a = GrayFrame::new(3, 1, vec![0.55f64, 0.95, 0.3]).unwrap();
        let b = GrayFrame::new(3, 1, vec![0.50, 0.05, 0.3]).unwrap();
        let t = truncated_abs_diff(&a, &b, 0.1).unwrap();
        assert_eq!(t.get(0, 0), 0.0);
        assert!((t.get(1, 0) - 0.9).abs() < 1e-15);
        assert_eq!(t.get(2, 0), 0.0);
        assert_eq!(truncated_abs_diff(&a, &a, 0.1).unwrap().data(), &[0.0; 3]);
    }

    #[test]
    fn tad_keeps_values_at_threshold() {
        let a = GrayFrame::new(1, 1, vec![0.75]).unwrap();
        let b = GrayFrame::new(1, 1, vec![0.5]).unwrap();
        assert_eq!(truncated_abs_diff(&a, &b, 0.25).unwrap().get(0, 0), 0.25);
    }

    #[test]
    fn tad_errors() {
        let a = GrayFrame::constant(2, 2, 0.5).unwrap();
        let b = GrayFrame::constant(2, 3, 0.5).unwrap();
        assert!(matches!(
            truncated_abs_diff(&a, &b, 0.1),
            Err(PcdError::Dimension { .. })
        ));
        assert!(truncated_abs_diff(&a, &a, 1.0).is_err());
        assert!(truncated_abs_diff(&a, &a, -0.1).is_err());
    }

    #[test]
    fn contrast_modulation_examples() {
        let tad = field(3, 1, vec![0.2, 0.0, 0.3]);
        let sigma = field(3, 1, vec![0.0, 0.4, 0.29]);
        let m = contrast_modulate(&tad, &sigma, 0.01).unwrap();
        assert!((m.get(0, 0) - 20.0).abs() < 1e-12);
        assert_eq!(m.get(1, 0), 0.0);
        assert!((m.get(2, 0) - 1.0).abs() < 1e-12);
        assert!(contrast_modulate(&tad, &sigma, 0.0).is_err());
        assert!(contrast_modulate(&tad, &field(1, 1, vec![0.0]), 0.01).is_err());
    }

    #[test]
    fn laplacian_modulation_examples() {
        let m = field(2, 1, vec![20.0, 3.0]);
        let l = field(2, 1, vec![-2.0, 0.0]);
        let out = laplacian_modulate(&m, &l).unwrap();
        assert_eq!(out.data(), &[40.0, 0.0]);
    }

    #[test]
    fn sigmoid_boundaries() {
        let t1 = 2.0f64;
        assert_eq!(truncated_sigmoid_scalar(t1, t1), 0.0);
        assert_eq!(truncated_sigmoid_scalar(0.0, t1), 0.0);
        let s = truncated_sigmoid_scalar(2.0 * t1, t1);
        assert!((s - 0.731_058_578_630_004_9).abs() < 1e-12);
        let sat = truncated_sigmoid_scalar(100.0 * t1, t1);
        assert!(sat > 0.999_999 && sat <= 1.0);
        // A few ulps above the threshold the sigmoid may round to 0.5; the
        // result must still be 0 or strictly above one half.
        for t in [1.5f64, 2.0, 0.3, 7.0] {
            for k in 1..4u64 {
                let v = truncated_sigmoid_scalar(f64::from_bits(t.to_bits() + k), t);
                assert!(v == 0.0 || v > 0.5, "{t} +{k} ulp -> {v}");
            }
        }
    }

    #[test]
    fn sigmoid_rejects_negative_input_and_bad_threshold() {
        assert!(truncated_sigmoid(&field(1, 1, vec![-1.0]), 2.0).is_err());
        assert!(truncated_sigmoid(&field(1, 1, vec![1.0]), 0.0).is_err());
    }

    #[test]
    fn identical_frames_give_empty_map() {
        let f = GrayFrame::from_fn(12, 9, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0).unwrap();
        let m = compute_crack_map(&f, &f, &PcdConfig::default()).unwrap();
        assert_eq!(m.flagged_count(), 0);
        assert_eq!(crack_artifact_score(&m).unwrap(), 0.0);
    }

    #[test]
    fn disabled_stages_below_threshold_give_empty_map() {
        let a = GrayFrame::constant(8, 8, 0.5).unwrap();
        let b = GrayFrame::constant(8, 8, 0.45).unwrap();
        let cfg = PcdConfig {
            contrast_modulation: false,
            laplacian_modulation: false,
            ..PcdConfig::default()
        };
        assert_eq!(compute_crack_map(&a, &b, &cfg).unwrap().flagged_count(), 0);
    }

    #[test]
    fn dark_column_on_smooth_reference_is_localized() {
        let reference = GrayFrame::constant(21, 15, 0.8).unwrap();
        let distorted =
            GrayFrame::from_fn(21, 15, |x, _| if x == 10 { 0.1 } else { 0.8 }).unwrap();
        let m = compute_crack_map(&reference, &distorted, &PcdConfig::default()).unwrap();
        for y in 0..15 {
            for x in 0..21 {
                // TAD is zero off the column, so nothing can respond there.
                assert_eq!(m.is_flagged(x, y), x == 10, "({x},{y})");
            }
        }
        // sigma = 0, |lap| = 1.4, TAD = 0.7: initial value 0.7 * 1.4 / 0.01 = 98.
        let t1 = DEFAULT_T1;
        let want = 1.0 / (1.0 + (-(98.0 - t1) / t1).exp());
        assert!((m.data()[10] - want).abs() < 1e-12);
    }

    #[test]
    fn cas_examples() {
        let zeros = CrackMap::new(2, 2, vec![0.0; 4]).unwrap();
        let ones = CrackMap::new(2, 2, vec![1.0; 4]).unwrap();
        let half = CrackMap::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(crack_artifact_score(&zeros).unwrap(), 0.0);
        assert_eq!(crack_artifact_score(&ones).unwrap(), 1.0);
        assert_eq!(crack_artifact_score(&half).unwrap(), 0.5);
    }

    #[test]
    fn crack_map_rejects_values_outside_codomain() {
        assert!(CrackMap::new(1, 1, vec![0.5]).is_err());
        assert!(CrackMap::new(1, 1, vec![0.3]).is_err());
        assert!(CrackMap::new(1, 1, vec![1.01]).is_err());
        assert!(CrackMap::<f64>::new(0, 0, vec![]).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = PcdConfig::<f64>::default();
        assert!(ok.validate().is_ok());
        assert!(PcdConfig { tad_threshold: 1.0, ..ok }.validate().is_err());
        assert!(PcdConfig { c1: 0.0, ..ok }.validate().is_err());
        assert!(PcdConfig { t1: -1.0, ..ok }.validate().is_err());
        assert!(PcdConfig { window_size: 4, ..ok }.validate().is_err());
        assert!(PcdConfig { window_sigma: 0.0, ..ok }.validate().is_err());
    }

    #[test]
    fn quantization_rounds_to_nearest() {
        let m = CrackMap::new(3, 1, vec![0.0, 0.731_058_578_630_004_9, 1.0]).unwrap();
        assert_eq!(m.to_u8(), vec![0, 186, 255]);
    }
}
