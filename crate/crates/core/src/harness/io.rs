//! Image and depth file formats.
//!
//! - encoded visualizations: 8-bit RGB PNG
//! - depth ground truth: 16-bit grayscale PNG in millimeters (0 = invalid) or
//!   single-channel PFM in meters (NaN/inf/0 = invalid)
//! - normals: three-channel PFM holding `(x, y, z)`, zero vector = invalid
//! - semantic labels: 8-bit grayscale PNG of class indices, 255 = background
//! - instance ids: 8- or 16-bit grayscale PNG, 0 = background

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use image::{ImageBuffer, Luma, Rgb as PxRgb};

use crate::error::{Error, Result};
use crate::raster::{DepthMap, NormalMap, RgbImage};
use crate::seg_codec::{LabelMap, Palette};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];
pub const LABEL_BACKGROUND: u8 = 255;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileKind {
    Png,
    Pfm,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn sniff(path: &Path, bytes: &[u8]) -> Result<FileKind> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        Ok(FileKind::Png)
    } else if bytes.starts_with(b"PF") || bytes.starts_with(b"Pf") {
        Ok(FileKind::Pfm)
    } else {
        Err(Error::format(path, 0, "unknown file format (expected PNG or PFM)"))
    }
}

/// Bit depth and color type from the IHDR chunk.
fn png_header(path: &Path, bytes: &[u8]) -> Result<(u8, u8)> {
    if bytes.len() < 26 {
        return Err(Error::format(path, bytes.len() as u64, "truncated PNG header"));
    }
    if &bytes[12..16] != b"IHDR" {
        return Err(Error::format(path, 12, "first PNG chunk is not IHDR"));
    }
    Ok((bytes[24], bytes[25]))
}

fn decode_png(path: &Path, bytes: &[u8]) -> Result<image::DynamicImage> {
    image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::format(path, 8, format!("PNG decode failed: {e}")))
}

pub fn read_rgb_png(path: &Path) -> Result<RgbImage> {
    let bytes = read_bytes(path)?;
    if sniff(path, &bytes)? != FileKind::Png {
        return Err(Error::format(path, 0, "expected a PNG image"));
    }
    png_header(path, &bytes)?;
    let img = decode_png(path, &bytes)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let px = img.pixels().map(|p| p.0).collect();
    RgbImage::from_u8(w, h, px)
}

pub fn write_rgb_png(path: &Path, img: &RgbImage) -> Result<()> {
    let buf: ImageBuffer<PxRgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, img.to_raw_u8())
            .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Run(format!("writing {}: {e}", path.display())))
}

fn read_gray16_png(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let (depth, color) = png_header(path, bytes)?;
    if color != 0 {
        return Err(Error::format(path, 25, format!("expected grayscale PNG, color type {color}")));
    }
    if depth != 16 && depth != 8 {
        return Err(Error::format(path, 24, format!("unsupported PNG bit depth {depth}")));
    }
    let img = decode_png(path, bytes)?.to_luma16();
    let scale = if depth == 8 { 257 } else { 1 };
    Ok((
        img.width() as usize,
        img.height() as usize,
        img.pixels().map(|p| p.0[0] / scale).collect(),
    ))
}

/// Load ground-truth depth in meters from a millimeter PNG or a PFM.
pub fn load_depth_gt(path: &Path) -> Result<DepthMap> {
    let bytes = read_bytes(path)?;
    match sniff(path, &bytes)? {
        FileKind::Png => {
            let (depth, _) = png_header(path, &bytes)?;
            if depth != 16 {
                return Err(Error::format(
                    path,
                    24,
                    format!("depth PNG must be 16-bit, found bit depth {depth}"),
                ));
            }
            let (w, h, mm) = read_gray16_png(path, &bytes)?;
            let values = mm.iter().map(|&v| f64::from(v) / 1000.0).collect();
            let valid = mm.iter().map(|&v| v != 0).collect();
            DepthMap::new(w, h, values, valid)
        }
        FileKind::Pfm => {
            let pfm = parse_pfm(path, &bytes)?;
            if pfm.channels != 1 {
                return Err(Error::format(path, 0, "depth PFM must be single-channel (Pf)"));
            }
            let valid: Vec<bool> = pfm.data.iter().map(|v| v.is_finite() && *v > 0.0).collect();
            let values = pfm
                .data
                .iter()
                .zip(&valid)
                .map(|(&v, &ok)| if ok { f64::from(v) } else { 0.0 })
                .collect();
            DepthMap::new(pfm.width, pfm.height, values, valid)
        }
    }
}

/// Save depth as PFM (meters) or, for `.png` paths, as 16-bit millimeters.
pub fn save_depth(path: &Path, map: &DepthMap) -> Result<()> {
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        let mm: Vec<u16> = map
            .values
            .iter()
            .zip(&map.valid)
            .map(|(&d, &ok)| {
                if ok {
                    (d * 1000.0).round().clamp(1.0, f64::from(u16::MAX)) as u16
                } else {
                    0
                }
            })
            .collect();
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(map.width as u32, map.height as u32, mm)
                .expect("buffer length matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Run(format!("writing {}: {e}", path.display())))
    } else {
        let data = map
            .values
            .iter()
            .zip(&map.valid)
            .map(|(&d, &ok)| if ok { d as f32 } else { f32::NAN })
            .collect();
        write_pfm(path, &Pfm { width: map.width, height: map.height, channels: 1, data })
    }
}

pub fn load_normals(path: &Path) -> Result<NormalMap> {
    let bytes = read_bytes(path)?;
    if sniff(path, &bytes)? != FileKind::Pfm {
        return Err(Error::format(path, 0, "normal maps are read from three-channel PFM"));
    }
    let pfm = parse_pfm(path, &bytes)?;
    if pfm.channels != 3 {
        return Err(Error::format(path, 0, "normal PFM must be three-channel (PF)"));
    }
    let mut vectors = Vec::with_capacity(pfm.width * pfm.height);
    let mut valid = Vec::with_capacity(pfm.width * pfm.height);
    for c in pfm.data.chunks_exact(3) {
        let v = [f64::from(c[0]), f64::from(c[1]), f64::from(c[2])];
        let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if len.is_finite() && len > 0.5 {
            vectors.push([v[0] / len, v[1] / len, v[2] / len]);
            valid.push(true);
        } else {
            vectors.push([0.0; 3]);
            valid.push(false);
        }
    }
    NormalMap::new(pfm.width, pfm.height, vectors, valid)
}

pub fn save_normals(path: &Path, map: &NormalMap) -> Result<()> {
    let data = map
        .vectors
        .iter()
        .zip(&map.valid)
        .flat_map(|(v, &ok)| {
            if ok {
                [v[0] as f32, v[1] as f32, v[2] as f32]
            } else {
                [0.0; 3]
            }
        })
        .collect();
    write_pfm(path, &Pfm { width: map.width, height: map.height, channels: 3, data })
}

pub fn load_labels(path: &Path, pal: &Palette) -> Result<LabelMap> {
    let bytes = read_bytes(path)?;
    if sniff(path, &bytes)? != FileKind::Png {
        return Err(Error::format(path, 0, "label maps are 8-bit grayscale PNG"));
    }
    let (depth, color) = png_header(path, &bytes)?;
    if depth != 8 || color != 0 {
        return Err(Error::format(
            path,
            24,
            format!("label PNG must be 8-bit grayscale, found depth {depth} color type {color}"),
        ));
    }
    let img = decode_png(path, &bytes)?.to_luma8();
    let labels = img
        .pixels()
        .map(|p| (p.0[0] != LABEL_BACKGROUND).then_some(usize::from(p.0[0])))
        .collect();
    let map = LabelMap::new(img.width() as usize, img.height() as usize, labels)?;
    map.check_against(pal)?;
    Ok(map)
}

pub fn save_labels(path: &Path, map: &LabelMap) -> Result<()> {
    let px = map
        .labels
        .iter()
        .map(|l| match l {
            Some(i) if *i < usize::from(LABEL_BACKGROUND) => Ok(*i as u8),
            Some(i) => Err(Error::Config(format!("class index {i} does not fit a label PNG"))),
            None => Ok(LABEL_BACKGROUND),
        })
        .collect::<Result<Vec<u8>>>()?;
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(map.width as u32, map.height as u32, px).expect("dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Run(format!("writing {}: {e}", path.display())))
}

pub fn load_instance_ids(path: &Path) -> Result<(usize, usize, Vec<u32>)> {
    let bytes = read_bytes(path)?;
    if sniff(path, &bytes)? != FileKind::Png {
        return Err(Error::format(path, 0, "instance maps are grayscale PNG"));
    }
    let (w, h, ids) = read_gray16_png(path, &bytes)?;
    Ok((w, h, ids.into_iter().map(u32::from).collect()))
}

pub fn save_instance_ids(path: &Path, width: usize, height: usize, ids: &[u32]) -> Result<()> {
    let px = ids
        .iter()
        .map(|&i| u16::try_from(i).map_err(|_| Error::Config(format!("instance id {i} exceeds 16 bits"))))
        .collect::<Result<Vec<u16>>>()?;
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width as u32, height as u32, px).expect("dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Run(format!("writing {}: {e}", path.display())))
}

pub fn load_palette(path: &Path) -> Result<Palette> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::format(path, line_col_offset(&text, e.line(), e.column()), e.to_string())
    })
}

pub(crate) fn line_col_offset(text: &str, line: usize, column: usize) -> u64 {
    if line == 0 {
        return 0;
    }
    let before: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (before + column.saturating_sub(1)) as u64
}

/// Decoded PFM payload in top-to-bottom row order.
#[derive(Clone, Debug, PartialEq)]
pub struct Pfm {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

fn pfm_token<'a>(path: &Path, bytes: &'a [u8], pos: &mut usize) -> Result<(&'a str, u64)> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format(path, start as u64, "truncated PFM header"));
    }
    let tok = std::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| Error::format(path, start as u64, "non-ASCII PFM header"))?;
    Ok((tok, start as u64))
}

pub fn parse_pfm(path: &Path, bytes: &[u8]) -> Result<Pfm> {
    let mut pos = 0;
    let (magic, off) = pfm_token(path, bytes, &mut pos)?;
    let channels = match magic {
        "Pf" => 1,
        "PF" => 3,
        _ => return Err(Error::format(path, off, format!("bad PFM magic {magic:?}"))),
    };
    let mut dim = |what: &str| -> Result<usize> {
        let (tok, off) = pfm_token(path, bytes, &mut pos)?;
        tok.parse::<usize>()
            .ok()
            .filter(|v| *v > 0)
            .ok_or_else(|| Error::format(path, off, format!("bad PFM {what} {tok:?}")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let (tok, off) = pfm_token(path, bytes, &mut pos)?;
    let scale: f64 = tok
        .parse()
        .ok()
        .filter(|s: &f64| *s != 0.0 && s.is_finite())
        .ok_or_else(|| Error::format(path, off, format!("bad PFM scale {tok:?}")))?;
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let count = width * height * channels;
    let needed = count * 4;
    if bytes.len() < pos + needed {
        return Err(Error::format(
            path,
            bytes.len() as u64,
            format!("PFM raster truncated: need {needed} bytes after offset {pos}"),
        ));
    }
    let little = scale < 0.0;
    let raw = &bytes[pos..pos + needed];
    let mut data = vec![0f32; count];
    let row = width * channels;
    for (k, chunk) in raw.chunks_exact(4).enumerate() {
        let b: [u8; 4] = chunk.try_into().unwrap();
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        // Rows are stored bottom to top.
        let (r, c) = (k / row, k % row);
        data[(height - 1 - r) * row + c] = v;
    }
    Ok(Pfm {
        width,
        height,
        channels,
        data,
    })
}

pub fn write_pfm(path: &Path, pfm: &Pfm) -> Result<()> {
    use std::io::Write;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let magic = if pfm.channels == 3 { "PF" } else { "Pf" };
    let row = pfm.width * pfm.channels;
    let mut write = || -> std::io::Result<()> {
        write!(out, "{magic}\n{} {}\n-1.0\n", pfm.width, pfm.height)?;
        for r in (0..pfm.height).rev() {
            for v in &pfm.data[r * row..(r + 1) * row] {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
