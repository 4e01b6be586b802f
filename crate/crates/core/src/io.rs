//! Image, quality-map and frame-sequence file formats.
//!
//! * Frames: 8/16-bit gray or RGB(A) PNG and binary PGM/PPM. Samples are
//!   divided by the type maximum; colour is reduced to Rec. 601 luma.
//! * Crack maps: 8-bit gray PNG storing `round(255 m)`.
//! * Quality maps: `QMAP` raster. A 16-byte little-endian header
//!   (`b"QMAP"`, `u32` width, `u32` height, `u8` polarity, 3 zero bytes)
//!   followed by `width * height` `f32` values, row-major.
//! * Sequences: a directory of frames in lexicographic file-name order, or a
//!   descriptor text file listing one frame file name per line (relative to
//!   the descriptor). A directory containing `sequence.txt` uses it.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};

use crate::error::{PcdError, Result};
use crate::imgproc::{to_grayscale, GrayFrame, Raster};
use crate::pcd::CrackMap;
use crate::qa_models::{Polarity, QualityMap};
use crate::scalar::Scalar;

pub const QMAP_MAGIC: &[u8; 4] = b"QMAP";
pub const QMAP_HEADER_LEN: usize = 16;
pub const SEQUENCE_DESCRIPTOR: &str = "sequence.txt";
const FRAME_EXTENSIONS: [&str; 5] = ["png", "ppm", "pgm", "pnm", "pbm"];

fn image_err(path: &Path, source: image::ImageError) -> PcdError {
    PcdError::Image {
        path: path.to_path_buf(),
        source,
    }
}

fn channels_to_gray<S: Scalar, T: Copy + Into<f64>>(
    width: usize,
    height: usize,
    raw: &[T],
    stride: usize,
    max: f64,
) -> Result<GrayFrame<S>> {
    if stride < 3 {
        let luma: Vec<T> = raw.iter().step_by(stride).copied().collect();
        return GrayFrame::from_samples(width, height, &luma, max);
    }
    let plane = |c: usize| -> Result<GrayFrame<S>> {
        let samples: Vec<T> = raw.iter().skip(c).step_by(stride).copied().collect();
        GrayFrame::from_samples(width, height, &samples, max)
    };
    to_grayscale(&plane(0)?, &plane(1)?, &plane(2)?)
}

/// Decodes an in-memory image into a normalized gray frame.
pub fn gray_from_image<S: Scalar>(img: &DynamicImage) -> Result<GrayFrame<S>> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(b) => channels_to_gray(w, h, b.as_raw(), 1, 255.0),
        DynamicImage::ImageLumaA8(b) => channels_to_gray(w, h, b.as_raw(), 2, 255.0),
        DynamicImage::ImageRgb8(b) => channels_to_gray(w, h, b.as_raw(), 3, 255.0),
        DynamicImage::ImageRgba8(b) => channels_to_gray(w, h, b.as_raw(), 4, 255.0),
        DynamicImage::ImageLuma16(b) => channels_to_gray(w, h, b.as_raw(), 1, 65535.0),
        DynamicImage::ImageLumaA16(b) => channels_to_gray(w, h, b.as_raw(), 2, 65535.0),
        DynamicImage::ImageRgb16(b) => channels_to_gray(w, h, b.as_raw(), 3, 65535.0),
        DynamicImage::ImageRgba16(b) => channels_to_gray(w, h, b.as_raw(), 4, 65535.0),
        other => Err(PcdError::param(format!(
            "unsupported pixel layout {:?}",
            other.color()
        ))),
    }
}

pub fn load_gray<S: Scalar>(path: impl AsRef<Path>) -> Result<GrayFrame<S>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| PcdError::io(path, e))?;
    let img = image::ImageReader::new(std::io::Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| PcdError::io(path, e))?
        .decode()
        .map_err(|e| image_err(path, e))?;
    gray_from_image(&img)
}

/// Writes a gray frame as 8-bit PNG (`round(255 v)`).
pub fn save_gray_png<S: Scalar>(frame: &GrayFrame<S>, path: impl AsRef<Path>) -> Result<()> {
    let bytes = frame
        .data()
        .iter()
        .map(|&v| (v.to_f64_lossy() * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    save_luma8(frame.width(), frame.height(), bytes, path.as_ref())
}

pub fn save_crack_map_png<S: Scalar>(map: &CrackMap<S>, path: impl AsRef<Path>) -> Result<()> {
    save_luma8(map.width(), map.height(), map.to_u8(), path.as_ref())
}

fn save_luma8(width: usize, height: usize, bytes: Vec<u8>, path: &Path) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_raw(width as u32, height as u32, bytes)
        .ok_or_else(|| PcdError::param("raster size overflow"))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_err(path, e))
}

/// 16-bit PNG of a quality map, linearly mapping `[lo, hi]` to `[0, 65535]`
/// with clamping. Lossy; for viewing only.
pub fn save_quality_png16<S: Scalar>(
    map: &QualityMap<S>,
    lo: f64,
    hi: f64,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if !(hi > lo) {
        return Err(PcdError::param(format!("empty display range [{lo}, {hi}]")));
    }
    let samples: Vec<u16> = map
        .data()
        .iter()
        .map(|&v| (((v.to_f64_lossy() - lo) / (hi - lo)).clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(map.width() as u32, map.height() as u32, samples)
            .ok_or_else(|| PcdError::param("raster size overflow"))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_err(path, e))
}

pub fn encode_qmap<S: Scalar>(map: &QualityMap<S>) -> Vec<u8> {
    let mut out = Vec::with_capacity(QMAP_HEADER_LEN + 4 * map.len());
    out.extend_from_slice(QMAP_MAGIC);
    out.extend_from_slice(&(map.width() as u32).to_le_bytes());
    out.extend_from_slice(&(map.height() as u32).to_le_bytes());
    out.push(map.polarity().to_byte());
    out.extend_from_slice(&[0, 0, 0]);
    for &v in map.data() {
        out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
    out
}

pub fn decode_qmap<S: Scalar>(bytes: &[u8], origin: &Path) -> Result<QualityMap<S>> {
    if bytes.len() < QMAP_HEADER_LEN || &bytes[..4] != QMAP_MAGIC {
        return Err(PcdError::format(origin, "missing QMAP header"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (w, h) = (word(4), word(8));
    let polarity = Polarity::from_byte(bytes[12])
        .ok_or_else(|| PcdError::format(origin, format!("unknown polarity byte {}", bytes[12])))?;
    let body = &bytes[QMAP_HEADER_LEN..];
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| PcdError::format(origin, "dimensions overflow"))?;
    if body.len() != expected {
        return Err(PcdError::format(
            origin,
            format!("expected {expected} payload bytes for {w}x{h}, found {}", body.len()),
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| S::from_f64_lossy(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
        .collect();
    QualityMap::new(w, h, data, polarity).map_err(|e| PcdError::format(origin, e.to_string()))
}

pub fn write_qmap<S: Scalar>(map: &QualityMap<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| PcdError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_qmap(map))
        .and_then(|_| w.flush())
        .map_err(|e| PcdError::io(path, e))
}

pub fn read_qmap<S: Scalar>(path: impl AsRef<Path>) -> Result<QualityMap<S>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| PcdError::io(path, e))?;
    decode_qmap(&bytes, path)
}

fn is_frame_file(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            .unwrap_or(false)
}

fn read_descriptor(path: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(path).map_err(|e| PcdError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

/// Ordered frame files of a sequence (directory or descriptor file).
pub fn list_sequence(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let meta = fs::metadata(path).map_err(|e| PcdError::io(path, e))?;
    if meta.is_file() {
        return read_descriptor(path);
    }
    let descriptor = path.join(SEQUENCE_DESCRIPTOR);
    if descriptor.is_file() {
        return read_descriptor(&descriptor);
    }
    let mut frames: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| PcdError::io(path, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| is_frame_file(p))
        .collect();
    frames.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(frames)
}

/// Pairs up reference and distorted frames; both sequences must be nonempty
/// and equally long.
pub fn list_sequence_pairs(
    reference: impl AsRef<Path>,
    distorted: impl AsRef<Path>,
) -> Result<Vec<(PathBuf, PathBuf)>> {
    let (r, d) = (reference.as_ref(), distorted.as_ref());
    let refs = list_sequence(r)?;
    let dists = list_sequence(d)?;
    if refs.is_empty() {
        let e = std::io::Error::new(std::io::ErrorKind::NotFound, "sequence contains no frames");
        return Err(PcdError::io(r, e));
    }
    if refs.len() != dists.len() {
        return Err(PcdError::format(
            d,
            format!("{} distorted frames for {} reference frames", dists.len(), refs.len()),
        ));
    }
    Ok(refs.into_iter().zip(dists).collect())
}
