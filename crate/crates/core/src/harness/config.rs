use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::degrade::DegradeSpec;
use crate::depth_codec::{ColorLut, CubePath, DepthCodecConfig, LutDecodeOptions, PowerTransformParams};
use crate::error::{Error, Result};
use crate::harness::io::line_col_offset;
use crate::metrics::DEFAULT_IOU_THRESHOLD;
use crate::normal_codec::DEFAULT_MIN_NORM;
use crate::seg_codec::{InstanceDecodeOptions, DEFAULT_COLOR_TOL, DEFAULT_MAX_DIST, DEFAULT_MIN_AREA};

/// Everything that influences a run. Loaded from `--config` (JSON), then
/// overridden by command-line flags, and echoed verbatim into reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lambda: f64,
    pub c: f64,
    pub t_max: f64,
    pub corner_order: String,
    pub invalid_distance_threshold: f64,
    /// Decode depth through this colormap instead of the cube path.
    pub lut: Option<String>,
    pub lut_resolution: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub min_norm: f64,
    pub max_dist: f64,
    /// Apply a 3x3 mode filter to decoded semantic labels.
    pub majority_filter: bool,
    pub color_tol: f64,
    pub min_area: usize,
    pub iou_threshold: f64,
    pub seed: u64,
    /// Corruption applied to predictions before decoding.
    pub degrade: Option<DegradeSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let depth = DepthCodecConfig::default();
        Self {
            lambda: depth.transform.lambda,
            c: depth.transform.c,
            t_max: depth.t_max,
            corner_order: depth.path.order_string(),
            invalid_distance_threshold: depth.invalid_distance_threshold,
            lut: None,
            lut_resolution: LutDecodeOptions::default().resolution,
            d_min: 1e-3,
            d_max: 80.0,
            min_norm: DEFAULT_MIN_NORM,
            max_dist: DEFAULT_MAX_DIST,
            majority_filter: false,
            color_tol: DEFAULT_COLOR_TOL,
            min_area: DEFAULT_MIN_AREA,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            seed: 0,
            degrade: None,
        }
    }
}

/// Evaluation depth ranges for common benchmark families.
pub fn depth_range_preset(name: &str) -> Result<(f64, f64)> {
    match name {
        "indoor" => Ok((1e-3, 10.0)),
        "driving" | "outdoor" => Ok((1e-3, 80.0)),
        _ => Err(Error::Config(format!(
            "unknown depth range preset {name:?} (expected indoor or driving)"
        ))),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| {
            Error::format(path, line_col_offset(&text, e.line(), e.column()), e.to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.depth_codec()?;
        self.lut()?;
        if !(self.d_min < self.d_max) {
            return Err(Error::Config(format!(
                "depth range [{}, {}] is empty",
                self.d_min, self.d_max
            )));
        }
        if !(self.min_norm > 0.0 && self.min_norm < 1.0) {
            return Err(Error::Config(format!("min_norm must lie in (0, 1), got {}", self.min_norm)));
        }
        if !(self.max_dist >= 0.0) {
            return Err(Error::Config(format!("max_dist must be >= 0, got {}", self.max_dist)));
        }
        if !(self.color_tol > 0.0) {
            return Err(Error::Config(format!("color_tol must be > 0, got {}", self.color_tol)));
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "iou_threshold must lie in (0, 1], got {}",
                self.iou_threshold
            )));
        }
        if let Some(d) = &self.degrade {
            d.validate()?;
        }
        Ok(())
    }

    pub fn transform(&self) -> Result<PowerTransformParams> {
        PowerTransformParams::new(self.lambda, self.c)
    }

    pub fn depth_codec(&self) -> Result<DepthCodecConfig> {
        let cfg = DepthCodecConfig {
            transform: self.transform()?,
            path: CubePath::from_order(&self.corner_order)?,
            t_max: self.t_max,
            invalid_distance_threshold: self.invalid_distance_threshold,
            ..DepthCodecConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn lut(&self) -> Result<Option<ColorLut>> {
        self.lut.as_deref().map(ColorLut::builtin).transpose()
    }

    pub fn lut_options(&self) -> LutDecodeOptions {
        LutDecodeOptions {
            resolution: self.lut_resolution,
            t_max: self.t_max,
        }
    }

    pub fn instance_options(&self) -> InstanceDecodeOptions {
        InstanceDecodeOptions {
            color_tol: self.color_tol,
            min_area: self.min_area,
        }
    }
}
