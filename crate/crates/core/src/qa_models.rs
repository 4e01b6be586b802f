//! Base full-reference quality models that emit per-pixel quality maps, plus
//! the thresholded-map crack detectors used as baselines.

use serde::{Deserialize, Serialize};

use crate::error::{PcdError, Result};
use crate::imgproc::{convolve_same, ensure_same_dims, GrayFrame, Kernel, Raster, RealField};
use crate::scalar::{lit, Scalar};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
/// GMSD's 170 on a 0..255 range, rescaled to unit range.
pub const GMS_C: f64 = 170.0 / (255.0 * 255.0);
/// Reported PSNR when the pooled error is zero.
pub const PSNR_CAP_DB: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    HigherIsBetter,
    HigherIsWorse,
}

impl Polarity {
    pub fn to_byte(self) -> u8 {
        match self {
            Polarity::HigherIsBetter => 0,
            Polarity::HigherIsWorse => 1,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Polarity::HigherIsBetter),
            1 => Some(Polarity::HigherIsWorse),
            _ => None,
        }
    }
}

/// Per-pixel output of a quality model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityMap<S> {
    width: usize,
    height: usize,
    data: Vec<S>,
    polarity: Polarity,
}

impl<S: Scalar> QualityMap<S> {
    pub fn new(width: usize, height: usize, data: Vec<S>, polarity: Polarity) -> Result<Self> {
        if width == 0 || height == 0 || width * height != data.len() {
            return Err(PcdError::param(format!(
                "quality map of {width}x{height} cannot hold {} values",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(PcdError::param("quality map values must be finite"));
        }
        Ok(Self {
            width,
            height,
            data,
            polarity,
        })
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn get(&self, x: usize, y: usize) -> S {
        self.data[y * self.width + x]
    }

    /// Unweighted mean of the map.
    pub fn mean(&self) -> S {
        let sum: S = self.data.iter().copied().sum();
        sum / S::from_usize_lossy(self.data.len())
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    fn from_field(field: RealField<S>, polarity: Polarity) -> Self {
        Self {
            width: field.width(),
            height: field.height(),
            data: field.into_data(),
            polarity,
        }
    }
}

impl<S> Raster<S> for QualityMap<S> {
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

/// Crack / non-crack labels from a thresholded quality map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryMap {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }
}

fn product<S: Scalar, A: Raster<S>, B: Raster<S>>(a: &A, b: &B) -> RealField<S> {
    RealField::from_parts(
        a.width(),
        a.height(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect(),
    )
}

/// Per-pixel SSIM (11x11 Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03, L = 1),
/// same size as the input via edge replication.
pub fn ssim_map<S: Scalar>(reference: &GrayFrame<S>, distorted: &GrayFrame<S>) -> Result<QualityMap<S>> {
    ensure_same_dims(reference, distorted)?;
    let (w, h) = reference.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(PcdError::param(format!(
            "SSIM needs frames of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let window = Kernel::gaussian(SSIM_WINDOW, lit(SSIM_SIGMA))?;
    let c1: S = lit(SSIM_K1 * SSIM_K1);
    let c2: S = lit(SSIM_K2 * SSIM_K2);
    let two: S = lit(2.0);

    let mu_x = convolve_same(reference, &window)?;
    let mu_y = convolve_same(distorted, &window)?;
    let exx = convolve_same(&product(reference, reference), &window)?;
    let eyy = convolve_same(&product(distorted, distorted), &window)?;
    let exy = convolve_same(&product(reference, distorted), &window)?;

    let data = (0..w * h)
        .map(|i| {
            let (mx, my) = (mu_x.data()[i], mu_y.data()[i]);
            let (mxx, myy, mxy) = (mx * mx, my * my, mx * my);
            let sxx = exx.data()[i] - mxx;
            let syy = eyy.data()[i] - myy;
            let sxy = exy.data()[i] - mxy;
            ((two * mxy + c1) * (two * sxy + c2)) / ((mxx + myy + c1) * (sxx + syy + c2))
        })
        .collect();
    QualityMap::new(w, h, data, Polarity::HigherIsBetter)
}

/// Mean SSIM.
pub fn ssim_index<S: Scalar>(reference: &GrayFrame<S>, distorted: &GrayFrame<S>) -> Result<S> {
    Ok(ssim_map(reference, distorted)?.mean())
}

/// Per-pixel squared luma error; pooled and converted with [`psnr_from_pooled_mse`].
pub fn squared_error_map<S: Scalar>(
    reference: &GrayFrame<S>,
    distorted: &GrayFrame<S>,
) -> Result<QualityMap<S>> {
    let e = reference.to_field().zip_with(distorted, |x, y| (x - y) * (x - y))?;
    Ok(QualityMap::from_field(e, Polarity::HigherIsWorse))
}

/// PSNR in dB for unit peak; zero error reports [`PSNR_CAP_DB`].
pub fn psnr_from_pooled_mse<S: Scalar>(mse: S) -> Result<S> {
    if !(mse >= S::zero()) {
        return Err(PcdError::param(format!("mse must be nonnegative, got {mse}")));
    }
    if mse == S::zero() {
        return Ok(lit(PSNR_CAP_DB));
    }
    Ok(lit::<S>(10.0) * (S::one() / mse).log10())
}

fn prewitt_kernels<S: Scalar>() -> (Kernel<S>, Kernel<S>) {
    let t: S = S::one() / lit(3.0);
    let z = S::zero();
    let gx = Kernel::new(3, vec![t, z, -t, t, z, -t, t, z, -t]).expect("3x3 prewitt");
    let gy = Kernel::new(3, vec![t, t, t, z, z, z, -t, -t, -t]).expect("3x3 prewitt");
    (gx, gy)
}

/// Prewitt gradient magnitude with edge replication.
pub fn gradient_magnitude<S: Scalar>(frame: &GrayFrame<S>) -> Result<RealField<S>> {
    let (kx, ky) = prewitt_kernels();
    let gx = convolve_same(frame, &kx)?;
    let gy = convolve_same(frame, &ky)?;
    gx.zip_with(&gy, |a, b| (a * a + b * b).sqrt())
}

/// Gradient magnitude similarity map, values in `(0, 1]`.
pub fn gms_map<S: Scalar>(reference: &GrayFrame<S>, distorted: &GrayFrame<S>) -> Result<QualityMap<S>> {
    ensure_same_dims(reference, distorted)?;
    let (w, h) = reference.dims();
    if w < 3 || h < 3 {
        return Err(PcdError::param(format!("GMS needs at least 3x3 frames, got {w}x{h}")));
    }
    let gr = gradient_magnitude(reference)?;
    let gd = gradient_magnitude(distorted)?;
    let c: S = lit(GMS_C);
    let two: S = lit(2.0);
    let gms = gr.zip_with(&gd, |a, b| (two * a * b + c) / (a * a + b * b + c))?;
    Ok(QualityMap::from_field(gms, Polarity::HigherIsBetter))
}

/// GMSD: population standard deviation of the GMS map. Higher is worse.
pub fn gmsd_score<S: Scalar>(reference: &GrayFrame<S>, distorted: &GrayFrame<S>) -> Result<S> {
    let map = gms_map(reference, distorted)?;
    let mean = map.mean();
    let var: S = map.data().iter().map(|&v| (v - mean) * (v - mean)).sum::<S>()
        / S::from_usize_lossy(map.len());
    Ok(var.sqrt())
}

/// Hard-threshold a quality map: worse-than-threshold pixels are flagged.
pub fn binarize_map<S: Scalar>(map: &QualityMap<S>, threshold: S) -> BinaryMap {
    let data = map
        .data()
        .iter()
        .map(|&v| match map.polarity() {
            Polarity::HigherIsWorse => v > threshold,
            Polarity::HigherIsBetter => v < threshold,
        })
        .collect();
    BinaryMap {
        width: map.width(),
        height: map.height(),
        data,
    }
}

/// The base models with a per-pixel map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityModel {
    /// PSNR on luma; the map is squared error.
    LumaPsnr,
    Ssim,
    /// Mean gradient magnitude similarity.
    Gms,
}

impl QualityModel {
    pub const ALL: [QualityModel; 3] = [QualityModel::LumaPsnr, QualityModel::Ssim, QualityModel::Gms];

    pub fn name(self) -> &'static str {
        match self {
            QualityModel::LumaPsnr => "lumapsnr",
            QualityModel::Ssim => "ssim",
            QualityModel::Gms => "gms",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "lumapsnr" | "psnr" => Some(QualityModel::LumaPsnr),
            "ssim" => Some(QualityModel::Ssim),
            "gms" | "gmsm" => Some(QualityModel::Gms),
            _ => None,
        }
    }

    pub fn quality_map<S: Scalar>(
        self,
        reference: &GrayFrame<S>,
        distorted: &GrayFrame<S>,
    ) -> Result<QualityMap<S>> {
        match self {
            QualityModel::LumaPsnr => squared_error_map(reference, distorted),
            QualityModel::Ssim => ssim_map(reference, distorted),
            QualityModel::Gms => gms_map(reference, distorted),
        }
    }

    /// Converts a pooled map value into the model's reported score.
    pub fn score_from_pooled<S: Scalar>(self, pooled: S) -> Result<S> {
        match self {
            QualityModel::LumaPsnr => psnr_from_pooled_mse(pooled),
            QualityModel::Ssim | QualityModel::Gms => Ok(pooled),
        }
    }
}

impl std::fmt::Display for QualityModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
