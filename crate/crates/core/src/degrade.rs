//! Deterministic image corruptions standing in for an imperfect generator.
//!
//! Gaussian noise uses ChaCha8 seeded with `rand_core`'s `seed_from_u64`.
//! Pixels are visited row-major and channels in R, G, B order; each sample
//! consumes two `u64` draws mapped to `a, b in [0, 1)` as `(x >> 11) * 2^-53`
//! and is `sqrt(-2 ln(1 - a)) * cos(2 pi b)`. One generator is shared by all
//! ops of a spec.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Pixels, Rgb, RgbImage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum DegradeOp {
    /// Round channels to 8 bits.
    Quantize8,
    /// I.i.d. per-channel noise; `sigma` in 8-bit units.
    GaussianNoise { sigma: f64 },
    /// Mean over a `(2r+1)^2` window, clamped at the borders.
    BoxBlur { radius: usize },
    /// Add a constant offset per channel, in 8-bit units.
    ChromaShift { delta: [i32; 3] },
}

impl fmt::Display for DegradeOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegradeOp::Quantize8 => write!(f, "quantize8"),
            DegradeOp::GaussianNoise { sigma } => write!(f, "noise={sigma}"),
            DegradeOp::BoxBlur { radius } => write!(f, "blur={radius}"),
            DegradeOp::ChromaShift { delta } => write!(f, "chroma={},{},{}", delta[0], delta[1], delta[2]),
        }
    }
}

/// Parses `quantize8`, `noise=<sigma>`, `blur=<radius>` and `chroma=<r>,<g>,<b>`.
impl FromStr for DegradeOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse degradation op {s:?}"));
        let (name, arg) = match s.split_once('=') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let op = match (name, arg) {
            ("quantize8", None) => DegradeOp::Quantize8,
            ("noise" | "gaussian_noise", Some(a)) => DegradeOp::GaussianNoise {
                sigma: a.parse().map_err(|_| bad())?,
            },
            ("blur" | "box_blur", Some(a)) => DegradeOp::BoxBlur {
                radius: a.parse().map_err(|_| bad())?,
            },
            ("chroma" | "chroma_shift", Some(a)) => {
                let parts: Vec<i32> = a
                    .split(',')
                    .map(|p| p.trim().parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?;
                let delta: [i32; 3] = parts.try_into().map_err(|_| bad())?;
                DegradeOp::ChromaShift { delta }
            }
            _ => return Err(bad()),
        };
        op.validate()?;
        Ok(op)
    }
}

impl DegradeOp {
    fn validate(&self) -> Result<()> {
        if let DegradeOp::GaussianNoise { sigma } = self {
            if !(sigma.is_finite() && *sigma >= 0.0) {
                return Err(Error::Config(format!("noise sigma must be >= 0, got {sigma}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DegradeSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ops: Vec<DegradeOp>,
}

impl DegradeSpec {
    pub fn new(seed: u64, ops: Vec<DegradeOp>) -> Result<Self> {
        let spec = Self { seed, ops };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.ops.iter().try_for_each(DegradeOp::validate)
    }
}

fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// One standard normal sample (Box-Muller, cosine branch).
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let a = 1.0 - unit_f64(rng.next_u64());
    let b = unit_f64(rng.next_u64());
    (-2.0 * a.ln()).sqrt() * (std::f64::consts::TAU * b).cos()
}

pub fn apply(img: &RgbImage, spec: &DegradeSpec) -> Result<RgbImage> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cur = img.clone();
    for op in &spec.ops {
        cur = match op {
            DegradeOp::Quantize8 => cur.quantized(),
            DegradeOp::GaussianNoise { sigma } => {
                let scale = sigma / 255.0;
                let px: Vec<Rgb> = (0..cur.len())
                    .map(|i| {
                        let c = cur.unit(i);
                        let mut out = [0.0; 3];
                        for k in 0..3 {
                            out[k] = (c[k] + scale * standard_normal(&mut rng)).clamp(0.0, 1.0);
                        }
                        out
                    })
                    .collect();
                RgbImage::from_unit(cur.width(), cur.height(), px)?
            }
            DegradeOp::BoxBlur { radius } => box_blur(&cur, *radius)?,
            DegradeOp::ChromaShift { delta } => chroma_shift(&cur, *delta)?,
        };
    }
    Ok(cur)
}

fn box_blur(img: &RgbImage, radius: usize) -> Result<RgbImage> {
    if radius == 0 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let window = |x: usize, y: usize| {
        let (x0, x1) = (x.saturating_sub(radius), (x + radius).min(w - 1));
        let (y0, y1) = (y.saturating_sub(radius), (y + radius).min(h - 1));
        (x0..=x1, y0..=y1)
    };
    match img.pixels() {
        Pixels::U8(src) => {
            let mut out = Vec::with_capacity(src.len());
            for y in 0..h {
                for x in 0..w {
                    let (xs, ys) = window(x, y);
                    let mut sum = [0u64; 3];
                    let mut count = 0u64;
                    for yy in ys {
                        for xx in xs.clone() {
                            let p = src[yy * w + xx];
                            for k in 0..3 {
                                sum[k] += u64::from(p[k]);
                            }
                            count += 1;
                        }
                    }
                    // Integer rounding, half away from zero.
                    out.push(sum.map(|s| ((2 * s + count) / (2 * count)) as u8));
                }
            }
            RgbImage::from_u8(w, h, out)
        }
        Pixels::Unit(src) => {
            let mut out = Vec::with_capacity(src.len());
            for y in 0..h {
                for x in 0..w {
                    let (xs, ys) = window(x, y);
                    let mut sum = [0.0; 3];
                    let mut count = 0.0;
                    for yy in ys {
                        for xx in xs.clone() {
                            let p = src[yy * w + xx];
                            for k in 0..3 {
                                sum[k] += p[k];
                            }
                            count += 1.0;
                        }
                    }
                    out.push(sum.map(|s| (s / count).clamp(0.0, 1.0)));
                }
            }
            RgbImage::from_unit(w, h, out)
        }
    }
}

fn chroma_shift(img: &RgbImage, delta: [i32; 3]) -> Result<RgbImage> {
    match img.pixels() {
        Pixels::U8(src) => {
            let out = src
                .iter()
                .map(|p| {
                    let mut q = [0u8; 3];
                    for k in 0..3 {
                        q[k] = (i32::from(p[k]) + delta[k]).clamp(0, 255) as u8;
                    }
                    q
                })
                .collect();
            RgbImage::from_u8(img.width(), img.height(), out)
        }
        Pixels::Unit(src) => {
            let out = src
                .iter()
                .map(|p| {
                    let mut q = [0.0; 3];
                    for k in 0..3 {
                        q[k] = (p[k] + f64::from(delta[k]) / 255.0).clamp(0.0, 1.0);
                    }
                    q
                })
                .collect();
            RgbImage::from_unit(img.width(), img.height(), out)
        }
    }
}
