//! Settings shared by every subcommand: module defaults, overridden by a flat
//! `key=value` file, overridden by explicit flags.

use std::fs;
use std::path::Path;

use clap::Args;
use pcd_core::integration::DEFAULT_STRIDE;
use pcd_core::{Background, IntegrationConfig, PcdConfig, PcdError};

#[derive(Args, Debug, Clone, Default)]
pub struct CommonFlags {
    /// Flat key=value file; explicit flags win over its entries.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,

    #[arg(long, global = true)]
    pub tad_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub c1: Option<f64>,
    #[arg(long, global = true)]
    pub t1: Option<f64>,
    /// Skip the contrast (local std) normalization stage.
    #[arg(long, global = true)]
    pub no_contrast: bool,
    /// Skip the Laplacian modulation stage.
    #[arg(long, global = true)]
    pub no_laplacian: bool,
    #[arg(long, global = true)]
    pub window_size: Option<usize>,
    #[arg(long, global = true)]
    pub window_sigma: Option<f64>,

    #[arg(long, global = true)]
    pub c2: Option<f64>,
    /// Background intensity in [0, 1], or `auto` for the border mode.
    #[arg(long, global = true, value_name = "VALUE|auto")]
    pub bg: Option<String>,
    #[arg(long, global = true)]
    pub bg_tol: Option<f64>,
    /// Compute base scores on uncropped frames.
    #[arg(long, global = true)]
    pub full_frame_base: bool,

    #[arg(long, global = true)]
    pub stride: Option<usize>,
    /// Worker threads; 1 is sequential, 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub pcd: PcdConfig,
    pub integration: IntegrationConfig,
    pub stride: usize,
    pub threads: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            pcd: PcdConfig::default(),
            integration: IntegrationConfig::default(),
            stride: DEFAULT_STRIDE,
            threads: 1,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, PcdError> {
    value
        .parse()
        .map_err(|_| PcdError::Parameter(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, PcdError> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(PcdError::Parameter(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

fn parse_background(value: &str) -> Result<Background<f64>, PcdError> {
    if value.eq_ignore_ascii_case("auto") {
        return Ok(Background::Auto);
    }
    let v: f64 = parse_num("bg", value)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(PcdError::Parameter(format!("bg must be in [0, 1] or auto, got {v}")));
    }
    Ok(Background::Value(v))
}

impl Settings {
    /// Applies one `key=value` entry. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PcdError> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "tad_threshold" => self.pcd.tad_threshold = parse_num(&key, value)?,
            "c1" => self.pcd.c1 = parse_num(&key, value)?,
            "t1" => self.pcd.t1 = parse_num(&key, value)?,
            "contrast_modulation" => self.pcd.contrast_modulation = parse_bool(&key, value)?,
            "laplacian_modulation" => self.pcd.laplacian_modulation = parse_bool(&key, value)?,
            "no_contrast" => self.pcd.contrast_modulation = !parse_bool(&key, value)?,
            "no_laplacian" => self.pcd.laplacian_modulation = !parse_bool(&key, value)?,
            "window_size" => self.pcd.window_size = parse_num(&key, value)?,
            "window_sigma" => self.pcd.window_sigma = parse_num(&key, value)?,
            "c2" => self.integration.c2 = parse_num(&key, value)?,
            "bg" | "background" => self.integration.background = parse_background(value)?,
            "bg_tol" => self.integration.bg_tol = parse_num(&key, value)?,
            "full_frame_base" => self.integration.base_on_full_frame = parse_bool(&key, value)?,
            "stride" => self.stride = parse_num(&key, value)?,
            "threads" => self.threads = parse_num(&key, value)?,
            _ => return Err(PcdError::Parameter(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<(), PcdError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| PcdError::Format {
                path: origin.to_path_buf(),
                msg: format!("line {}: expected key=value", n + 1),
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn resolve(flags: &CommonFlags) -> Result<Self, PcdError> {
        let mut s = Settings::default();
        if let Some(path) = &flags.config {
            let text = fs::read_to_string(path).map_err(|e| PcdError::Io {
                path: path.clone(),
                source: e,
            })?;
            s.apply_text(&text, path)?;
        }
        if let Some(v) = flags.tad_threshold {
            s.pcd.tad_threshold = v;
        }
        if let Some(v) = flags.c1 {
            s.pcd.c1 = v;
        }
        if let Some(v) = flags.t1 {
            s.pcd.t1 = v;
        }
        if flags.no_contrast {
            s.pcd.contrast_modulation = false;
        }
        if flags.no_laplacian {
            s.pcd.laplacian_modulation = false;
        }
        if let Some(v) = flags.window_size {
            s.pcd.window_size = v;
        }
        if let Some(v) = flags.window_sigma {
            s.pcd.window_sigma = v;
        }
        if let Some(v) = flags.c2 {
            s.integration.c2 = v;
        }
        if let Some(v) = &flags.bg {
            s.integration.background = parse_background(v)?;
        }
        if let Some(v) = flags.bg_tol {
            s.integration.bg_tol = v;
        }
        if flags.full_frame_base {
            s.integration.base_on_full_frame = true;
        }
        if let Some(v) = flags.stride {
            s.stride = v;
        }
        if let Some(v) = flags.threads {
            s.threads = v;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), PcdError> {
        self.pcd.validate()?;
        let c2 = self.integration.c2;
        if !(c2 > 0.0) || !c2.is_finite() {
            return Err(PcdError::Parameter(format!("c2 must be positive, got {c2}")));
        }
        let tol = self.integration.bg_tol;
        if !(tol >= 0.0) || !tol.is_finite() {
            return Err(PcdError::Parameter(format!("bg_tol must be >= 0, got {tol}")));
        }
        if self.stride == 0 {
            return Err(PcdError::Parameter("stride must be at least 1".into()));
        }
        Ok(())
    }
}
