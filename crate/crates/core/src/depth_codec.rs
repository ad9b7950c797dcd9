//! Invertible depth visualization.
//!
//! Metric depth `d >= 0` is first compressed into a normalized distance
//! `t in [0, 1)` with a rescaled power transform, then `t` is mapped onto a
//! piecewise-linear path that walks seven edges of the RGB cube from black to
//! white. Decoding projects a color onto the nearest path segment and inverts
//! both steps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{dist2, DepthMap, Rgb, RgbImage};

/// Shape (`lambda < -1`) and scale (`c > 0`) of the depth power transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTransformParams {
    pub lambda: f64,
    pub c: f64,
}

impl Default for PowerTransformParams {
    fn default() -> Self {
        Self {
            lambda: -3.0,
            c: 10.0 / 3.0,
        }
    }
}

impl PowerTransformParams {
    pub fn new(lambda: f64, c: f64) -> Result<Self> {
        let p = Self { lambda, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda < -1.0) {
            return Err(Error::Config(format!(
                "power transform shape must be finite and < -1, got {}",
                self.lambda
            )));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::Config(format!(
                "power transform scale must be finite and > 0, got {}",
                self.c
            )));
        }
        Ok(())
    }

    /// `1 - (1 - d / (lambda c))^(lambda + 1)`, evaluated through `ln_1p`/`expm1`
    /// so that small depths keep full relative precision.
    pub fn curve(&self, d: f64) -> Result<f64> {
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::Domain(format!("depth must be finite and >= 0, got {d}")));
        }
        let x = -d / (self.lambda * self.c);
        Ok(-((self.lambda + 1.0) * x.ln_1p()).exp_m1())
    }

    pub fn uncurve(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t < 1.0) {
            return Err(Error::Domain(format!(
                "normalized distance must lie in [0, 1), got {t}"
            )));
        }
        let y = (-t).ln_1p() / (self.lambda + 1.0);
        Ok(-self.lambda * self.c * y.exp_m1())
    }
}

pub fn curve_depth(d: f64, p: &PowerTransformParams) -> Result<f64> {
    p.curve(d)
}

pub fn uncurve_depth(t: f64, p: &PowerTransformParams) -> Result<f64> {
    p.uncurve(t)
}

pub const PATH_CORNERS: usize = 8;
pub const PATH_SEGMENTS: usize = PATH_CORNERS - 1;

/// A Hamiltonian walk over the RGB cube vertices from black to white in
/// which consecutive corners share an edge.
#[derive(Clone, Debug, PartialEq)]
pub struct CubePath {
    corners: [Rgb; PATH_CORNERS],
}

impl Default for CubePath {
    fn default() -> Self {
        Self::from_order("01326457").expect("default corner order is a valid path")
    }
}

impl CubePath {
    pub fn new(corners: [Rgb; PATH_CORNERS]) -> Result<Self> {
        for (i, c) in corners.iter().enumerate() {
            if c.iter().any(|v| *v != 0.0 && *v != 1.0) {
                return Err(Error::Config(format!("corner {i} is not a cube vertex: {c:?}")));
            }
        }
        for i in 0..PATH_CORNERS {
            for j in i + 1..PATH_CORNERS {
                if corners[i] == corners[j] {
                    return Err(Error::Config(format!("corners {i} and {j} coincide")));
                }
            }
        }
        for (i, w) in corners.windows(2).enumerate() {
            let changed = (0..3).filter(|&k| w[0][k] != w[1][k]).count();
            if changed != 1 {
                return Err(Error::Config(format!(
                    "corners {i} and {} are not joined by a cube edge",
                    i + 1
                )));
            }
        }
        if corners[0] != [0.0; 3] || corners[PATH_CORNERS - 1] != [1.0; 3] {
            return Err(Error::Config("path must run from black to white".into()));
        }
        Ok(Self { corners })
    }

    /// Parse a corner order written as eight digits `0..=7`, each digit being
    /// `4R + 2G + B` of a cube vertex (the default is `01326457`).
    pub fn from_order(order: &str) -> Result<Self> {
        let digits: Vec<u32> = order
            .chars()
            .filter(|c| !matches!(c, ',' | ' '))
            .map(|c| {
                c.to_digit(8)
                    .ok_or_else(|| Error::Config(format!("bad corner digit {c:?} in {order:?}")))
            })
            .collect::<Result<_>>()?;
        if digits.len() != PATH_CORNERS {
            return Err(Error::Config(format!(
                "corner order {order:?} must list {PATH_CORNERS} corners"
            )));
        }
        let mut corners = [[0.0; 3]; PATH_CORNERS];
        for (corner, d) in corners.iter_mut().zip(digits) {
            *corner = [
                f64::from((d >> 2) & 1),
                f64::from((d >> 1) & 1),
                f64::from(d & 1),
            ];
        }
        Self::new(corners)
    }

    pub fn order_string(&self) -> String {
        self.corners
            .iter()
            .map(|c| {
                let d = (c[0] as u32) * 4 + (c[1] as u32) * 2 + c[2] as u32;
                char::from_digit(d, 8).unwrap()
            })
            .collect()
    }

    pub fn corners(&self) -> &[Rgb; PATH_CORNERS] {
        &self.corners
    }

    /// Color at normalized distance `t in [0, 1]`.
    pub fn color(&self, t: f64) -> Result<Rgb> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("path position must lie in [0, 1], got {t}")));
        }
        let s = t * PATH_SEGMENTS as f64;
        let i = (s.floor() as usize).min(PATH_SEGMENTS - 1);
        let u = s - i as f64;
        let (a, b) = (self.corners[i], self.corners[i + 1]);
        Ok([
            (1.0 - u) * a[0] + u * b[0],
            (1.0 - u) * a[1] + u * b[1],
            (1.0 - u) * a[2] + u * b[2],
        ])
    }

    /// Nearest path position to `rgb` and the Euclidean distance to it.
    /// Exact ties resolve to the smallest position.
    pub fn project(&self, rgb: Rgb) -> (f64, f64) {
        let mut best_t = 0.0;
        let mut best_d2 = f64::INFINITY;
        for i in 0..PATH_SEGMENTS {
            let (a, b) = (self.corners[i], self.corners[i + 1]);
            // Segments are unit-length cube edges, so the projection
            // parameter is a plain dot product.
            let dir = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let u = ((rgb[0] - a[0]) * dir[0] + (rgb[1] - a[1]) * dir[1] + (rgb[2] - a[2]) * dir[2])
                .clamp(0.0, 1.0);
            let foot = [a[0] + u * dir[0], a[1] + u * dir[1], a[2] + u * dir[2]];
            let d2 = dist2(rgb, foot);
            if d2 < best_d2 {
                best_d2 = d2;
                best_t = (i as f64 + u) / PATH_SEGMENTS as f64;
            }
        }
        (best_t, best_d2.sqrt())
    }
}

pub fn path_color(t: f64, path: &CubePath) -> Result<Rgb> {
    path.color(t)
}

pub fn path_project(rgb: Rgb, path: &CubePath) -> f64 {
    path.project(rgb).0
}

/// Full configuration of the cube-path depth codec.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthCodecConfig {
    pub transform: PowerTransformParams,
    pub path: CubePath,
    /// Upper clamp on the normalized distance; bounds the decodable depth.
    pub t_max: f64,
    /// Color written for invalid pixels.
    pub invalid_color: Rgb,
    /// Colors farther than this from the path decode as invalid.
    pub invalid_distance_threshold: f64,
}

impl Default for DepthCodecConfig {
    fn default() -> Self {
        Self {
            transform: PowerTransformParams::default(),
            path: CubePath::default(),
            t_max: 0.995,
            invalid_color: [0.5, 0.5, 0.5],
            invalid_distance_threshold: 0.35,
        }
    }
}

impl DepthCodecConfig {
    pub fn validate(&self) -> Result<()> {
        self.transform.validate()?;
        if !(self.t_max > 0.0 && self.t_max < 1.0) {
            return Err(Error::Config(format!("t_max must lie in (0, 1), got {}", self.t_max)));
        }
        if !(self.invalid_distance_threshold.is_finite() && self.invalid_distance_threshold > 0.0)
        {
            return Err(Error::Config(format!(
                "invalid-distance threshold must be > 0, got {}",
                self.invalid_distance_threshold
            )));
        }
        if self.invalid_color.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Config(format!(
                "invalid color {:?} is outside the unit cube",
                self.invalid_color
            )));
        }
        let (_, gap) = self.path.project(self.invalid_color);
        if gap <= self.invalid_distance_threshold {
            return Err(Error::Config(format!(
                "invalid color {:?} lies {gap:.4} from the path, not beyond the threshold {}",
                self.invalid_color, self.invalid_distance_threshold
            )));
        }
        Ok(())
    }

    /// Largest depth that survives an encode/decode round trip.
    pub fn depth_cap(&self) -> f64 {
        self.transform
            .uncurve(self.t_max)
            .expect("t_max is validated to lie in (0, 1)")
    }

    fn decode_color(&self, rgb: Rgb) -> Option<f64> {
        let (t, gap) = self.path.project(rgb);
        if !(gap <= self.invalid_distance_threshold) {
            return None;
        }
        self.transform.uncurve(t.min(self.t_max)).ok()
    }
}

/// Encode a depth map as a real-valued RGB image.
pub fn encode_depth(map: &DepthMap, cfg: &DepthCodecConfig) -> Result<RgbImage> {
    map.validate()?;
    cfg.validate()?;
    let pixels = map
        .values
        .par_iter()
        .zip(map.valid.par_iter())
        .map(|(&d, &ok)| {
            if !ok {
                return Ok(cfg.invalid_color);
            }
            let t = cfg.transform.curve(d)?.min(cfg.t_max);
            cfg.path.color(t)
        })
        .collect::<Result<Vec<_>>>()?;
    RgbImage::from_unit(map.width, map.height, pixels)
}

/// Decode an RGB visualization back to metric depth. Pixels too far from the
/// path are marked invalid.
pub fn decode_depth(img: &RgbImage, cfg: &DepthCodecConfig) -> DepthMap {
    let decoded: Vec<Option<f64>> = (0..img.len())
        .into_par_iter()
        .map(|i| cfg.decode_color(img.unit(i)))
        .collect();
    DepthMap {
        width: img.width(),
        height: img.height(),
        values: decoded.iter().map(|d| d.unwrap_or(0.0)).collect(),
        valid: decoded.iter().map(Option::is_some).collect(),
    }
}

/// A colormap given as `N >= 2` colors at equally spaced positions in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorLut {
    name: String,
    entries: Vec<Rgb>,
}

impl ColorLut {
    pub fn new(name: impl Into<String>, entries: Vec<Rgb>) -> Result<Self> {
        let name = name.into();
        if entries.len() < 2 {
            return Err(Error::Config(format!(
                "colormap {name:?} needs at least 2 entries, got {}",
                entries.len()
            )));
        }
        if entries
            .iter()
            .any(|c| c.iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            return Err(Error::Config(format!("colormap {name:?} has entries outside [0, 1]")));
        }
        Ok(Self { name, entries })
    }

    /// One of `grayscale`, `viridis`, `plasma`, `inferno`.
    pub fn builtin(name: &str) -> Result<Self> {
        let table: &[Rgb] = match name {
            "grayscale" | "gray" => &[[0.0; 3], [1.0; 3]],
            "viridis" => &VIRIDIS,
            "plasma" => &PLASMA,
            "inferno" => &INFERNO,
            _ => {
                return Err(Error::Config(format!(
                    "unknown colormap {name:?} (expected grayscale, viridis, plasma or inferno)"
                )))
            }
        };
        Self::new(name, table.to_vec())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entries(&self) -> &[Rgb] {
        &self.entries
    }

    fn spans(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn color(&self, t: f64) -> Rgb {
        let s = t.clamp(0.0, 1.0) * self.spans() as f64;
        let i = (s.floor() as usize).min(self.spans() - 1);
        let u = s - i as f64;
        lerp(self.entries[i], self.entries[i + 1], u)
    }

    /// Exact projection onto span `i`, as `(t, squared distance)`.
    fn project_span(&self, i: usize, rgb: Rgb) -> (f64, f64) {
        let (a, b) = (self.entries[i], self.entries[i + 1]);
        let dir = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let len2 = dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2];
        let u = if len2 > 0.0 {
            (((rgb[0] - a[0]) * dir[0] + (rgb[1] - a[1]) * dir[1] + (rgb[2] - a[2]) * dir[2])
                / len2)
                .clamp(0.0, 1.0)
        } else {
            0.0
        };
        let t = (i as f64 + u) / self.spans() as f64;
        (t, dist2(rgb, lerp(a, b, u)))
    }
}

fn lerp(a: Rgb, b: Rgb, u: f64) -> Rgb {
    [
        (1.0 - u) * a[0] + u * b[0],
        (1.0 - u) * a[1] + u * b[1],
        (1.0 - u) * a[2] + u * b[2],
    ]
}

/// Encode depth through a colormap instead of the cube path. Invalid pixels
/// become black.
pub fn encode_depth_lut(map: &DepthMap, lut: &ColorLut, p: &PowerTransformParams) -> Result<RgbImage> {
    map.validate()?;
    p.validate()?;
    let pixels = map
        .values
        .iter()
        .zip(&map.valid)
        .map(|(&d, &ok)| {
            if ok {
                Ok(lut.color(p.curve(d)?))
            } else {
                Ok([0.0; 3])
            }
        })
        .collect::<Result<Vec<_>>>()?;
    RgbImage::from_unit(map.width, map.height, pixels)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LutDecodeOptions {
    /// Number of samples taken along the colormap for the nearest-color search.
    pub resolution: usize,
    pub t_max: f64,
}

impl Default for LutDecodeOptions {
    fn default() -> Self {
        Self {
            resolution: 4096,
            t_max: 0.995,
        }
    }
}

/// Nearest-position search along a colormap: a dense sample scan followed by
/// exact projection onto the spans adjacent to the best sample.
pub struct LutDecoder<'a> {
    lut: &'a ColorLut,
    opts: LutDecodeOptions,
    samples: Vec<Rgb>,
}

impl<'a> LutDecoder<'a> {
    pub fn new(lut: &'a ColorLut, opts: LutDecodeOptions) -> Result<Self> {
        if opts.resolution < 2 {
            return Err(Error::Config("colormap decode resolution must be >= 2".into()));
        }
        if !(opts.t_max > 0.0 && opts.t_max < 1.0) {
            return Err(Error::Config(format!("t_max must lie in (0, 1), got {}", opts.t_max)));
        }
        let last = (opts.resolution - 1) as f64;
        let samples = (0..opts.resolution)
            .map(|j| lut.color(j as f64 / last))
            .collect();
        Ok(Self { lut, opts, samples })
    }

    pub fn position(&self, rgb: Rgb) -> f64 {
        let mut best = 0;
        let mut best_d2 = f64::INFINITY;
        for (j, s) in self.samples.iter().enumerate() {
            let d2 = dist2(rgb, *s);
            if d2 < best_d2 {
                best_d2 = d2;
                best = j;
            }
        }
        let last = (self.opts.resolution - 1) as f64;
        let spans = self.lut.spans();
        let lo_t = (best.saturating_sub(1)) as f64 / last;
        let hi_t = ((best + 1).min(self.opts.resolution - 1)) as f64 / last;
        let lo_span = ((lo_t * spans as f64).floor() as usize).min(spans - 1);
        let hi_span = ((hi_t * spans as f64).floor() as usize).min(spans - 1);
        let mut t = best as f64 / last;
        for i in lo_span..=hi_span {
            let (ti, d2) = self.lut.project_span(i, rgb);
            if d2 < best_d2 || (d2 == best_d2 && ti < t) {
                best_d2 = d2;
                t = ti;
            }
        }
        t
    }
}

pub fn decode_depth_lut(img: &RgbImage, lut: &ColorLut, p: &PowerTransformParams) -> Result<DepthMap> {
    decode_depth_lut_with(img, lut, p, &LutDecodeOptions::default())
}

pub fn decode_depth_lut_with(
    img: &RgbImage,
    lut: &ColorLut,
    p: &PowerTransformParams,
    opts: &LutDecodeOptions,
) -> Result<DepthMap> {
    p.validate()?;
    let decoder = LutDecoder::new(lut, *opts)?;
    let values = (0..img.len())
        .into_par_iter()
        .map(|i| p.uncurve(decoder.position(img.unit(i)).min(opts.t_max)))
        .collect::<Result<Vec<_>>>()?;
    let valid = vec![true; values.len()];
    Ok(DepthMap {
        width: img.width(),
        height: img.height(),
        values,
        valid,
    })
}

// 17 evenly spaced samples of the matplotlib colormaps.
const VIRIDIS: [Rgb; 17] = [
    [0.267004, 0.004874, 0.329415],
    [0.282327, 0.094955, 0.417331],
    [0.278826, 0.175490, 0.483397],
    [0.258965, 0.251537, 0.524736],
    [0.229739, 0.322361, 0.545706],
    [0.199430, 0.387607, 0.554642],
    [0.172719, 0.448791, 0.557885],
    [0.149039, 0.508051, 0.557250],
    [0.127568, 0.566949, 0.550556],
    [0.120638, 0.625828, 0.533488],
    [0.157851, 0.683765, 0.501686],
    [0.246070, 0.738910, 0.452024],
    [0.369214, 0.788888, 0.382914],
    [0.515992, 0.831158, 0.294279],
    [0.678489, 0.863742, 0.189503],
    [0.845561, 0.887322, 0.099702],
    [0.993248, 0.906157, 0.143936],
];

const PLASMA: [Rgb; 17] = [
    [0.050383, 0.029803, 0.527975],
    [0.193374, 0.018354, 0.590330],
    [0.299855, 0.009561, 0.631624],
    [0.399411, 0.000859, 0.656133],
    [0.494877, 0.011990, 0.657865],
    [0.584391, 0.068579, 0.632812],
    [0.665129, 0.138566, 0.585582],
    [0.736019, 0.209439, 0.527908],
    [0.798216, 0.280197, 0.469538],
    [0.853319, 0.351553, 0.413734],
    [0.901807, 0.425087, 0.359688],
    [0.942598, 0.502639, 0.305816],
    [0.973416, 0.585761, 0.251540],
    [0.991365, 0.675355, 0.198453],
    [0.993033, 0.771720, 0.154808],
    [0.974443, 0.874622, 0.144061],
    [0.940015, 0.975158, 0.131326],
];

const INFERNO: [Rgb; 17] = [
    [0.001462, 0.000466, 0.013866],
    [0.042253, 0.028139, 0.141141],
    [0.129285, 0.047293, 0.290788],
    [0.238273, 0.036621, 0.396353],
    [0.341500, 0.062325, 0.429425],
    [0.441207, 0.099338, 0.431594],
    [0.540920, 0.134729, 0.415123],
    [0.640135, 0.171438, 0.381065],
    [0.735683, 0.215906, 0.330245],
    [0.822386, 0.275197, 0.266085],
    [0.894305, 0.353399, 0.193584],
    [0.946965, 0.449191, 0.115272],
    [0.978422, 0.557937, 0.034931],
    [0.987874, 0.675267, 0.065257],
    [0.974638, 0.797692, 0.206332],
    [0.947594, 0.917399, 0.410665],
    [0.988362, 0.998364, 0.644924],
];
