//! Low-level image primitives: frames, kernels, convolution and Gaussian
//! local statistics.
//!
//! All convolutions are correlation-style (the kernel is not flipped) and
//! replicate edge pixels beyond the frame border, so the output always has
//! the input's dimensions.

use serde::{Deserialize, Serialize};

use crate::error::{PcdError, Result};
use crate::scalar::{lit, Scalar};

/// Read access to a row-major single-channel raster.
pub trait Raster<S> {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn data(&self) -> &[S];

    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    fn len(&self) -> usize {
        self.data().len()
    }

    fn is_empty(&self) -> bool {
        self.data().is_empty()
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> S
    where
        S: Copy,
    {
        self.data()[y * self.width() + x]
    }
}

pub(crate) fn ensure_same_dims<S, A: Raster<S>, B: Raster<S>>(a: &A, b: &B) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(PcdError::dims(a.dims(), b.dims()));
    }
    Ok(())
}

fn check_shape(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(PcdError::param(format!(
            "frame dimensions must be positive, got {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(PcdError::param(format!(
            "data length {len} does not match {width}x{height}"
        )));
    }
    Ok(())
}

/// Normalized single-channel image with every intensity in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrayFrame<S> {
    width: usize,
    height: usize,
    data: Vec<S>,
}

impl<S: Scalar> GrayFrame<S> {
    pub fn new(width: usize, height: usize, data: Vec<S>) -> Result<Self> {
        check_shape(width, height, data.len())?;
        if let Some((i, v)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= S::zero() && **v <= S::one()))
        {
            return Err(PcdError::param(format!(
                "intensity {v} at index {i} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> S) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn constant(width: usize, height: usize, value: S) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Maps integer samples to `[0, 1]` by dividing by `max_value`.
    pub fn from_samples<T: Copy + Into<f64>>(
        width: usize,
        height: usize,
        samples: &[T],
        max_value: f64,
    ) -> Result<Self> {
        let data = samples
            .iter()
            .map(|&s| S::from_f64_lossy(s.into() / max_value))
            .collect();
        Self::new(width, height, data)
    }

    pub fn get(&self, x: usize, y: usize) -> S {
        self.data[y * self.width + x]
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn to_field(&self) -> RealField<S> {
        RealField::from_parts(self.width, self.height, self.data.clone())
    }

    /// Intensity reflection `1 - x`.
    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| S::one() - v).collect(),
        }
    }

    pub(crate) fn from_parts(width: usize, height: usize, data: Vec<S>) -> Self {
        debug_assert_eq!(width * height, data.len());
        Self {
            width,
            height,
            data,
        }
    }
}

impl<S> Raster<S> for GrayFrame<S> {
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

/// Unbounded real-valued map (signed Laplacians, modulated differences).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealField<S> {
    width: usize,
    height: usize,
    data: Vec<S>,
}

impl<S: Scalar> RealField<S> {
    pub fn new(width: usize, height: usize, data: Vec<S>) -> Result<Self> {
        check_shape(width, height, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(PcdError::param(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::from_parts(width, height, vec![S::zero(); width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> S) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn get(&self, x: usize, y: usize) -> S {
        self.data[y * self.width + x]
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self::from_parts(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise combination of two equally sized fields.
    pub fn zip_with<R: Raster<S>>(&self, other: &R, f: impl Fn(S, S) -> S) -> Result<Self> {
        ensure_same_dims(self, other)?;
        let data = self
            .data
            .iter()
            .zip(other.data())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_parts(self.width, self.height, data))
    }

    pub(crate) fn from_parts(width: usize, height: usize, data: Vec<S>) -> Self {
        debug_assert_eq!(width * height, data.len());
        Self {
            width,
            height,
            data,
        }
    }
}

impl<S> Raster<S> for RealField<S> {
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

/// Square, odd-sized correlation kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel<S> {
    size: usize,
    coeffs: Vec<S>,
}

impl<S: Scalar> Kernel<S> {
    pub fn new(size: usize, coeffs: Vec<S>) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return Err(PcdError::param(format!("kernel size must be odd, got {size}")));
        }
        if coeffs.len() != size * size {
            return Err(PcdError::param(format!(
                "kernel of size {size} needs {} coefficients, got {}",
                size * size,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(PcdError::param("kernel coefficients must be finite"));
        }
        Ok(Self { size, coeffs })
    }

    /// Sampled isotropic Gaussian normalized to unit sum.
    pub fn gaussian(size: usize, sigma: S) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return Err(PcdError::param(format!("kernel size must be odd, got {size}")));
        }
        if !(sigma > S::zero()) || !sigma.is_finite() {
            return Err(PcdError::param(format!("gaussian sigma must be positive, got {sigma}")));
        }
        let c = (size / 2) as f64;
        let s = sigma.to_f64_lossy();
        let denom = 2.0 * s * s;
        let raw: Vec<f64> = (0..size * size)
            .map(|k| {
                let (i, j) = ((k / size) as f64, (k % size) as f64);
                (-((i - c).powi(2) + (j - c).powi(2)) / denom).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let coeffs = raw.into_iter().map(|v| S::from_f64_lossy(v / total)).collect();
        Ok(Self { size, coeffs })
    }

    pub fn identity(size: usize) -> Result<Self> {
        let mut coeffs = vec![S::zero(); size * size];
        if size % 2 == 1 {
            coeffs[(size / 2) * size + size / 2] = S::one();
        }
        Self::new(size, coeffs)
    }

    /// Uniform averaging kernel.
    pub fn box_filter(size: usize) -> Result<Self> {
        let w = S::one() / S::from_usize_lossy(size * size);
        Self::new(size, vec![w; size * size])
    }

    /// 4-neighbour discrete Laplacian `[[0,1,0],[1,-4,1],[0,1,0]]`.
    pub fn laplacian4() -> Self {
        let (z, o) = (S::zero(), S::one());
        Self {
            size: 3,
            coeffs: vec![z, o, z, o, lit(-4.0), o, z, o, z],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    /// Coefficient at row `i`, column `j`.
    pub fn get(&self, i: usize, j: usize) -> S {
        self.coeffs[i * self.size + j]
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn sum(&self) -> S {
        self.coeffs.iter().copied().sum()
    }

    fn ensure_weighting(&self) -> Result<()> {
        if self.coeffs.iter().any(|&c| c < S::zero()) {
            return Err(PcdError::param("weighting kernel has negative coefficients"));
        }
        let tol: S = lit(1e-9);
        if (self.sum() - S::one()).abs() > tol {
            return Err(PcdError::param(format!(
                "weighting kernel must sum to 1, sums to {}",
                self.sum()
            )));
        }
        Ok(())
    }
}

/// Sliding-window correlation with edge replication; output has the input's shape.
pub fn convolve_same<S: Scalar, R: Raster<S>>(frame: &R, kernel: &Kernel<S>) -> Result<RealField<S>> {
    let (w, h) = frame.dims();
    if w == 0 || h == 0 {
        return Err(PcdError::param("cannot convolve an empty frame"));
    }
    let limit = 2 * w.min(h) + 1;
    if kernel.size() > limit {
        return Err(PcdError::param(format!(
            "kernel size {} exceeds {limit} for a {w}x{h} frame",
            kernel.size()
        )));
    }

    let src = frame.data();
    let size = kernel.size();
    let r = kernel.radius();
    let mut out = vec![S::zero(); w * h];

    // Interior columns [lo, hi) read contiguous source spans for every kx.
    let lo = r.min(w);
    let hi = w.saturating_sub(r).max(lo);
    let clamp_x = |x: usize, kx: usize| -> usize { (x + kx).saturating_sub(r).min(w - 1) };

    for y in 0..h {
        let out_row = &mut out[y * w..(y + 1) * w];
        for ky in 0..size {
            let sy = (y + ky).saturating_sub(r).min(h - 1);
            let src_row = &src[sy * w..(sy + 1) * w];
            for kx in 0..size {
                let c = kernel.get(ky, kx);
                if c == S::zero() {
                    continue;
                }
                for x in 0..lo {
                    out_row[x] = out_row[x] + c * src_row[clamp_x(x, kx)];
                }
                if hi > lo {
                    let shifted = &src_row[lo + kx - r..hi + kx - r];
                    for (o, &s) in out_row[lo..hi].iter_mut().zip(shifted) {
                        *o = *o + c * s;
                    }
                }
                for x in hi..w {
                    out_row[x] = out_row[x] + c * src_row[clamp_x(x, kx)];
                }
            }
        }
    }
    Ok(RealField::from_parts(w, h, out))
}

/// Weighted local mean under a normalized, nonnegative kernel.
pub fn local_mean<S: Scalar, R: Raster<S>>(frame: &R, gkernel: &Kernel<S>) -> Result<RealField<S>> {
    gkernel.ensure_weighting()?;
    convolve_same(frame, gkernel)
}

/// Weighted local standard deviation `sqrt(max(0, E[x^2] - E[x]^2))`.
pub fn local_std<S: Scalar, R: Raster<S>>(frame: &R, gkernel: &Kernel<S>) -> Result<RealField<S>> {
    let mean = local_mean(frame, gkernel)?;
    let squares = RealField::from_parts(
        frame.width(),
        frame.height(),
        frame.data().iter().map(|&v| v * v).collect(),
    );
    let second = convolve_same(&squares, gkernel)?;
    second.zip_with(&mean, |ex2, mu| (ex2 - mu * mu).max(S::zero()).sqrt())
}

/// Signed 4-neighbour Laplacian of a frame.
pub fn laplacian<S: Scalar, R: Raster<S>>(frame: &R) -> Result<RealField<S>> {
    convolve_same(frame, &Kernel::laplacian4())
}

/// Rec. 601 luma of a three-channel frame.
pub fn to_grayscale<S: Scalar>(
    r: &GrayFrame<S>,
    g: &GrayFrame<S>,
    b: &GrayFrame<S>,
) -> Result<GrayFrame<S>> {
    ensure_same_dims(r, g)?;
    ensure_same_dims(r, b)?;
    let (wr, wg, wb): (S, S, S) = (lit(0.299), lit(0.587), lit(0.114));
    let data = r
        .data()
        .iter()
        .zip(g.data())
        .zip(b.data())
        .map(|((&r, &g), &b)| (wr * r + wg * g + wb * b).max(S::zero()).min(S::one()))
        .collect();
    Ok(GrayFrame::from_parts(r.width(), r.height(), data))
}
