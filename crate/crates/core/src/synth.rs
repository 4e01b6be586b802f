//! Synthetic frames for benchmarks and fixtures: random noise, shaded discs
//! standing in for rendered objects, and carved fissures standing in for
//! crack artifacts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::imgproc::{convolve_same, GrayFrame, Kernel, Raster};
use crate::scalar::Scalar;

/// Uniform noise in `[0, 1]`.
pub fn random_frame<S: Scalar>(width: usize, height: usize, rng: &mut impl Rng) -> GrayFrame<S> {
    let data = (0..width * height)
        .map(|_| S::from_f64_lossy(rng.gen::<f64>()))
        .collect();
    GrayFrame::from_parts(width, height, data)
}

/// Independent reference/distorted noise frames from a seed.
pub fn random_pair<S: Scalar>(width: usize, height: usize, seed: u64) -> (GrayFrame<S>, GrayFrame<S>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_frame(width, height, &mut rng);
    let b = random_frame(width, height, &mut rng);
    (a, b)
}

/// Disc with a smooth diagonal shading from `lo` to `hi` on a uniform `bg`.
#[derive(Clone, Copy, Debug)]
pub struct ShadedDisc {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub bg: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ShadedDisc {
    pub fn centered(width: usize, height: usize, radius: f64) -> Self {
        Self {
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            radius,
            bg: 0.1,
            lo: 0.55,
            hi: 0.85,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.cx).powi(2) + (y - self.cy).powi(2) <= self.radius * self.radius
    }

    pub fn render<S: Scalar>(&self, width: usize, height: usize) -> GrayFrame<S> {
        let span = 4.0 * self.radius;
        let data = (0..width * height)
            .map(|i| {
                let (x, y) = ((i % width) as f64, (i / width) as f64);
                let v = if self.contains(x, y) {
                    let t = ((x - self.cx) + (y - self.cy) + 2.0 * self.radius) / span;
                    self.lo + (self.hi - self.lo) * t.clamp(0.0, 1.0)
                } else {
                    self.bg
                };
                S::from_f64_lossy(v)
            })
            .collect();
        GrayFrame::from_parts(width, height, data)
    }
}

/// Straight fissure segment of the given pixel width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fissure {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub width: f64,
}

impl Fissure {
    fn distance(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (self.x1 - self.x0, self.y1 - self.y0);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((x - self.x0) * dx + (y - self.y0) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        ((x - self.x0 - t * dx).powi(2) + (y - self.y0 - t * dy).powi(2)).sqrt()
    }

    /// Pixels within half the width of the segment's centre line.
    pub fn covers(&self, x: usize, y: usize) -> bool {
        self.distance(x as f64, y as f64) < self.width / 2.0
    }
}

/// Random fissures whose end points stay at least `margin` inside the disc.
pub fn random_fissures(disc: &ShadedDisc, count: usize, length: f64, margin: f64, seed: u64) -> Vec<Fissure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inner = disc.radius - margin;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let r = inner * rng.gen::<f64>().sqrt();
        let a = rng.gen::<f64>() * std::f64::consts::TAU;
        let (x0, y0) = (disc.cx + r * a.cos(), disc.cy + r * a.sin());
        let dir = rng.gen::<f64>() * std::f64::consts::TAU;
        let (x1, y1) = (x0 + length * dir.cos(), y0 + length * dir.sin());
        if (x1 - disc.cx).powi(2) + (y1 - disc.cy).powi(2) > inner * inner {
            continue;
        }
        let width = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
        out.push(Fissure { x0, y0, x1, y1, width });
    }
    out
}

/// Paints every fissure with `value`. Returns the distorted frame and the
/// mask of carved pixels.
pub fn carve<S: Scalar>(frame: &GrayFrame<S>, fissures: &[Fissure], value: S) -> (GrayFrame<S>, Vec<bool>) {
    let (w, h) = frame.dims();
    let mut data = frame.data().to_vec();
    let mut mask = vec![false; w * h];
    for f in fissures {
        let x_lo = (f.x0.min(f.x1) - f.width).floor().max(0.0) as usize;
        let x_hi = ((f.x0.max(f.x1) + f.width).ceil().max(0.0) as usize).min(w.saturating_sub(1));
        let y_lo = (f.y0.min(f.y1) - f.width).floor().max(0.0) as usize;
        let y_hi = ((f.y0.max(f.y1) + f.width).ceil().max(0.0) as usize).min(h.saturating_sub(1));
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                if f.covers(x, y) {
                    data[y * w + x] = value;
                    mask[y * w + x] = true;
                }
            }
        }
    }
    (GrayFrame::from_parts(w, h, data), mask)
}

/// Square dilation of a boolean mask by `radius` pixels.
pub fn dilate(mask: &[bool], width: usize, height: usize, radius: usize) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    for y in 0..height {
        for x in 0..width {
            if !mask[y * width + x] {
                continue;
            }
            for yy in y.saturating_sub(radius)..=(y + radius).min(height - 1) {
                for xx in x.saturating_sub(radius)..=(x + radius).min(width - 1) {
                    out[yy * width + xx] = true;
                }
            }
        }
    }
    out
}

/// Gaussian blur with a `2 ceil(3 sigma) + 1` window and edge replication.
pub fn gaussian_blur<S: Scalar>(frame: &GrayFrame<S>, sigma: f64) -> Result<GrayFrame<S>> {
    let size = 2 * (3.0 * sigma).ceil().max(1.0) as usize + 1;
    let k = Kernel::gaussian(size, S::from_f64_lossy(sigma))?;
    let out = convolve_same(frame, &k)?;
    let data = out
        .data()
        .iter()
        .map(|&v| v.max(S::zero()).min(S::one()))
        .collect();
    Ok(GrayFrame::from_parts(frame.width(), frame.height(), data))
}

pub fn mean_abs_diff<S: Scalar>(a: &GrayFrame<S>, b: &GrayFrame<S>) -> f64 {
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y).abs().to_f64_lossy())
        .sum();
    sum / a.len() as f64
}

/// Blur sigma whose mean absolute difference against `frame` matches
/// `target`, found by bisection on `[lo, hi]`.
pub fn blur_matching_mad<S: Scalar>(frame: &GrayFrame<S>, target: f64, lo: f64, hi: f64) -> Result<(f64, GrayFrame<S>)> {
    let (mut a, mut b) = (lo, hi);
    for _ in 0..40 {
        let mid = 0.5 * (a + b);
        if mean_abs_diff(frame, &gaussian_blur(frame, mid)?) < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    let sigma = 0.5 * (a + b);
    Ok((sigma, gaussian_blur(frame, sigma)?))
}
