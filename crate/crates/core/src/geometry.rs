//! Pinhole unprojection of depth maps and ASCII PLY export.
//!
//! Pixel `(u, v)` has its center at integer coordinates, `u` to the right and
//! `v` downward. Depth is measured along the optical axis. Camera Y follows
//! image `v` (no flip).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{DepthMap, RgbImage};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::Config(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::Config("principal point must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    pub colors: Option<Vec<[u8; 3]>>,
    /// Source pixel `(u, v)` of each point.
    pub pixels: Vec<(usize, usize)>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn unproject(depth: &DepthMap, k: &Intrinsics, colors: Option<&RgbImage>) -> Result<PointCloud> {
    k.validate()?;
    depth.validate()?;
    if let Some(img) = colors {
        if (img.width(), img.height()) != (depth.width, depth.height) {
            return Err(Error::Structural(format!(
                "color image is {}x{}, depth map {}x{}",
                img.width(),
                img.height(),
                depth.width,
                depth.height
            )));
        }
    }
    let rgb = colors.map(RgbImage::to_u8_vec);
    let mut cloud = PointCloud {
        colors: rgb.as_ref().map(|_| Vec::new()),
        ..Default::default()
    };
    for v in 0..depth.height {
        for u in 0..depth.width {
            let i = v * depth.width + u;
            if !depth.valid[i] {
                continue;
            }
            let d = depth.values[i];
            cloud.points.push([
                (u as f64 - k.cx) * d / k.fx,
                (v as f64 - k.cy) * d / k.fy,
                d,
            ]);
            cloud.pixels.push((u, v));
            if let (Some(out), Some(src)) = (cloud.colors.as_mut(), rgb.as_ref()) {
                out.push(src[i]);
            }
        }
    }
    Ok(cloud)
}

/// Image coordinates and depth of a camera-space point.
pub fn project(point: [f64; 3], k: &Intrinsics) -> Result<(f64, f64, f64)> {
    k.validate()?;
    let [x, y, z] = point;
    if !(z > 0.0) {
        return Err(Error::Domain(format!("cannot project a point with Z = {z}")));
    }
    Ok((k.fx * x / z + k.cx, k.fy * y / z + k.cy, z))
}

/// ASCII PLY with `x y z` float vertices, plus `red green blue` bytes when the
/// cloud carries colors.
pub fn write_ply<W: Write>(cloud: &PointCloud, mut out: W) -> std::io::Result<()> {
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "comment camera frame: x right, y down (image v), z forward; meters")?;
    writeln!(out, "element vertex {}", cloud.len())?;
    writeln!(out, "property float x")?;
    writeln!(out, "property float y")?;
    writeln!(out, "property float z")?;
    if cloud.colors.is_some() {
        writeln!(out, "property uchar red")?;
        writeln!(out, "property uchar green")?;
        writeln!(out, "property uchar blue")?;
    }
    writeln!(out, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        write!(out, "{} {} {}", p[0] as f32, p[1] as f32, p[2] as f32)?;
        if let Some(c) = &cloud.colors {
            write!(out, " {} {} {}", c[i][0], c[i][1], c[i][2])?;
        }
        writeln!(out)?;
    }
    Ok(())
}
