//! Raster containers shared by the codecs: RGB visualizations, depth maps and
//! normal maps.

use crate::error::{Error, Result};

/// An RGB triple with channels in `[0, 1]`.
pub type Rgb = [f64; 3];

/// Convert a unit-range channel to 8 bits, rounding half away from zero.
#[inline]
pub fn quantize_channel(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[inline]
pub fn quantize_rgb(c: Rgb) -> [u8; 3] {
    [
        quantize_channel(c[0]),
        quantize_channel(c[1]),
        quantize_channel(c[2]),
    ]
}

#[inline]
pub fn unit_rgb(c: [u8; 3]) -> Rgb {
    [
        f64::from(c[0]) / 255.0,
        f64::from(c[1]) / 255.0,
        f64::from(c[2]) / 255.0,
    ]
}

/// Pixel storage of an [`RgbImage`].
#[derive(Clone, Debug, PartialEq)]
pub enum Pixels {
    U8(Vec<[u8; 3]>),
    Unit(Vec<Rgb>),
}

/// A row-major RGB raster, either 8-bit or real-valued in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Pixels,
}

impl RgbImage {
    pub fn from_u8(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        check_len(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels: Pixels::U8(pixels),
        })
    }

    pub fn from_unit(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self> {
        check_len(width, height, pixels.len())?;
        if let Some(bad) = pixels
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite() || *c < 0.0 || *c > 1.0))
        {
            return Err(Error::Domain(format!(
                "pixel {bad} has a channel outside [0, 1]: {:?}",
                pixels[bad]
            )));
        }
        Ok(Self {
            width,
            height,
            pixels: Pixels::Unit(pixels),
        })
    }

    pub fn filled_u8(width: usize, height: usize, color: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: Pixels::U8(vec![color; width * height]),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixels(&self) -> &Pixels {
        &self.pixels
    }

    pub fn is_u8(&self) -> bool {
        matches!(self.pixels, Pixels::U8(_))
    }

    /// Pixel `i` (row-major) in unit range.
    #[inline]
    pub fn unit(&self, i: usize) -> Rgb {
        match &self.pixels {
            Pixels::U8(p) => unit_rgb(p[i]),
            Pixels::Unit(p) => p[i],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Rgb {
        self.unit(y * self.width + x)
    }

    pub fn to_unit_vec(&self) -> Vec<Rgb> {
        (0..self.len()).map(|i| self.unit(i)).collect()
    }

    /// 8-bit pixels; real-valued images are quantized with half-away rounding.
    pub fn to_u8_vec(&self) -> Vec<[u8; 3]> {
        match &self.pixels {
            Pixels::U8(p) => p.clone(),
            Pixels::Unit(p) => p.iter().map(|&c| quantize_rgb(c)).collect(),
        }
    }

    pub fn quantized(&self) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            pixels: Pixels::U8(self.to_u8_vec()),
        }
    }

    /// Flat `RGBRGB...` byte buffer, quantizing if needed.
    pub fn to_raw_u8(&self) -> Vec<u8> {
        self.to_u8_vec().into_iter().flatten().collect()
    }
}

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    if width.checked_mul(height) != Some(len) {
        return Err(Error::Structural(format!(
            "{len} pixels do not fill a {width}x{height} raster"
        )));
    }
    Ok(())
}

/// Per-pixel metric depth in meters with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        let map = Self {
            width,
            height,
            values,
            valid,
        };
        map.validate()?;
        Ok(map)
    }

    /// All pixels valid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let valid = vec![true; values.len()];
        Self::new(width, height, values, valid)
    }

    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn validate(&self) -> Result<()> {
        check_len(self.width, self.height, self.values.len())?;
        check_len(self.width, self.height, self.valid.len())?;
        for (i, (&d, &ok)) in self.values.iter().zip(&self.valid).enumerate() {
            if ok && !(d.is_finite() && d >= 0.0) {
                return Err(Error::Domain(format!("valid depth pixel {i} holds {d}")));
            }
        }
        Ok(())
    }
}

/// Camera-space unit normals (+x right, +y up, +z toward the viewer).
#[derive(Clone, Debug, PartialEq)]
pub struct NormalMap {
    pub width: usize,
    pub height: usize,
    pub vectors: Vec<[f64; 3]>,
    pub valid: Vec<bool>,
}

/// Tolerance on `|n| - 1` for vectors on valid pixels.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

impl NormalMap {
    pub fn new(
        width: usize,
        height: usize,
        vectors: Vec<[f64; 3]>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let map = Self {
            width,
            height,
            vectors,
            valid,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn from_vectors(width: usize, height: usize, vectors: Vec<[f64; 3]>) -> Result<Self> {
        let valid = vec![true; vectors.len()];
        Self::new(width, height, vectors, valid)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        check_len(self.width, self.height, self.vectors.len())?;
        check_len(self.width, self.height, self.valid.len())?;
        for (i, (v, &ok)) in self.vectors.iter().zip(&self.valid).enumerate() {
            if ok && (norm(*v) - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::Domain(format!(
                    "normal at pixel {i} is not unit length: {v:?}"
                )));
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline]
pub(crate) fn dist2(a: Rgb, b: Rgb) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}
