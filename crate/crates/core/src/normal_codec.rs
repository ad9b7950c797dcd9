//! Camera-space surface normals as RGB.
//!
//! `R = (1 - x) / 2`, `G = (1 + y) / 2`, `B = (1 + z) / 2`. The x channel is
//! flipped so that left-facing surfaces come out pinkish red, up-facing ones
//! light green and camera-facing ones light blue.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{norm, NormalMap, Rgb, RgbImage};

/// Color of pixels without a normal. It decodes to the zero vector, which
/// always falls below `min_norm`.
pub const NORMAL_INVALID_COLOR: Rgb = [0.5, 0.5, 0.5];

pub const DEFAULT_MIN_NORM: f64 = 0.2;

#[inline]
pub fn normal_to_rgb(n: [f64; 3]) -> Rgb {
    [(1.0 - n[0]) / 2.0, (1.0 + n[1]) / 2.0, (1.0 + n[2]) / 2.0]
}

/// The unnormalized vector carried by a color.
#[inline]
pub fn rgb_to_vector(c: Rgb) -> [f64; 3] {
    [1.0 - 2.0 * c[0], 2.0 * c[1] - 1.0, 2.0 * c[2] - 1.0]
}

pub fn encode_normals(map: &NormalMap) -> Result<RgbImage> {
    map.validate()?;
    let pixels = map
        .vectors
        .iter()
        .zip(&map.valid)
        .map(|(&n, &ok)| {
            if ok {
                normal_to_rgb(n).map(|c| c.clamp(0.0, 1.0))
            } else {
                NORMAL_INVALID_COLOR
            }
        })
        .collect();
    RgbImage::from_unit(map.width, map.height, pixels)
}

pub fn decode_normals(img: &RgbImage, min_norm: f64) -> Result<NormalMap> {
    if !(min_norm > 0.0 && min_norm < 1.0) {
        return Err(Error::Config(format!("min_norm must lie in (0, 1), got {min_norm}")));
    }
    let decoded: Vec<Option<[f64; 3]>> = (0..img.len())
        .into_par_iter()
        .map(|i| {
            let v = rgb_to_vector(img.unit(i));
            let len = norm(v);
            (len >= min_norm).then(|| [v[0] / len, v[1] / len, v[2] / len])
        })
        .collect();
    Ok(NormalMap {
        width: img.width(),
        height: img.height(),
        vectors: decoded.iter().map(|v| v.unwrap_or([0.0; 3])).collect(),
        valid: decoded.iter().map(Option::is_some).collect(),
    })
}

/// Angle between two vectors in degrees. atan2 keeps small angles exact
/// where acos of a dot product near 1 would not.
#[inline]
pub fn angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    norm(cross).atan2(dot).to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{quantize_rgb, UNIT_NORM_TOLERANCE};

    fn is_unit(v: [f64; 3]) -> bool {
        (norm(v) - 1.0).abs() <= UNIT_NORM_TOLERANCE
    }

    fn one(n: [f64; 3]) -> NormalMap {
        NormalMap::from_vectors(1, 1, vec![n]).unwrap()
    }

    #[test]
    fn anchor_colors() {
        let left = encode_normals(&one([-1.0, 0.0, 0.0])).unwrap();
        assert_eq!(left.unit(0), [1.0, 0.5, 0.5]);
        assert_eq!(quantize_rgb(left.unit(0)), [255, 128, 128]);
        assert_eq!(encode_normals(&one([0.0, 1.0, 0.0])).unwrap().unit(0), [0.5, 1.0, 0.5]);
        assert_eq!(encode_normals(&one([0.0, 0.0, 1.0])).unwrap().unit(0), [0.5, 0.5, 1.0]);
    }

    #[test]
    fn invalid_pixels_encode_to_the_zero_vector() {
        let map = NormalMap::new(2, 1, vec![[0.0, 0.0, 1.0], [9.0; 3]], vec![true, false]).unwrap();
        let img = encode_normals(&map).unwrap();
        assert_eq!(img.unit(1), NORMAL_INVALID_COLOR);
        let back = decode_normals(&img, DEFAULT_MIN_NORM).unwrap();
        assert_eq!(back.valid, vec![true, false]);
    }

    #[test]
    fn encode_rejects_non_unit_vectors() {
        let map = NormalMap {
            width: 1,
            height: 1,
            vectors: vec![[0.5, 0.0, 0.0]],
            valid: vec![true],
        };
        assert!(matches!(encode_normals(&map), Err(Error::Domain(_))));
    }

    #[test]
    fn decode_examples() {
        let img = RgbImage::from_unit(3, 1, vec![[1.0, 0.5, 0.5], [0.5; 3], [0.6, 0.6, 1.0]]).unwrap();
        let back = decode_normals(&img, DEFAULT_MIN_NORM).unwrap();
        assert_eq!(back.valid, vec![true, false, true]);
        assert_eq!(back.vectors[0], [-1.0, 0.0, 0.0]);
        let raw = [-0.2, 0.2, 1.0];
        let len = norm(raw);
        for k in 0..3 {
            assert!((back.vectors[2][k] - raw[k] / len).abs() < 1e-12);
        }
        assert!(is_unit(back.vectors[2]));
        assert!(decode_normals(&img, 0.0).is_err());
        assert!(decode_normals(&img, 1.0).is_err());
    }

    #[test]
    fn angles() {
        assert_eq!(angle_deg([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]), 0.0);
        assert!((angle_deg([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]) - 90.0).abs() < 1e-12);
        assert!((angle_deg([0.0, 0.0, 1.0], [0.0, 0.0, -1.0]) - 180.0).abs() < 1e-12);
    }
}
