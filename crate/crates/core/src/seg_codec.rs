//! Segmentation outputs as flat-colored images.
//!
//! Semantic and referring segmentation use a palette declared up front and
//! decode by nearest palette color. Instance segmentation assigns colors per
//! image and decodes by clustering similar colors.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RgbImage;

pub const DEFAULT_MAX_DIST: f64 = 64.0;
pub const DEFAULT_COLOR_TOL: f64 = 24.0;
pub const DEFAULT_MIN_AREA: usize = 20;
/// Minimum 8-bit Euclidean distance between generated instance colors.
pub const MIN_INSTANCE_SEPARATION: f64 = 96.0;
const COLOR_ATTEMPTS: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub name: String,
    pub color: [u8; 3],
}

/// Class colors plus a background color. Serialized as
/// `{"background": [r, g, b], "classes": [{"name": ..., "color": [r, g, b]}, ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPalette", into = "RawPalette")]
pub struct Palette {
    entries: Vec<PaletteEntry>,
    background: [u8; 3],
}

#[derive(Serialize, Deserialize)]
struct RawPalette {
    background: [u8; 3],
    classes: Vec<PaletteEntry>,
}

impl TryFrom<RawPalette> for Palette {
    type Error = Error;

    fn try_from(raw: RawPalette) -> Result<Self> {
        Palette::new(raw.classes, raw.background)
    }
}

impl From<Palette> for RawPalette {
    fn from(p: Palette) -> Self {
        RawPalette {
            background: p.background,
            classes: p.entries,
        }
    }
}

impl Palette {
    pub fn new(entries: Vec<PaletteEntry>, background: [u8; 3]) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if e.name.trim().is_empty() {
                return Err(Error::Config(format!("palette entry {i} has an empty name")));
            }
            if e.color == background {
                return Err(Error::Config(format!(
                    "class {:?} reuses the background color",
                    e.name
                )));
            }
            for other in &entries[..i] {
                if other.name == e.name {
                    return Err(Error::Config(format!("duplicate class name {:?}", e.name)));
                }
                if other.color == e.color {
                    return Err(Error::Config(format!(
                        "classes {:?} and {:?} share a color",
                        other.name, e.name
                    )));
                }
            }
        }
        Ok(Self {
            entries,
            background,
        })
    }

    pub fn from_pairs<S: Into<String>>(
        pairs: impl IntoIterator<Item = (S, [u8; 3])>,
        background: [u8; 3],
    ) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(name, color)| PaletteEntry {
                    name: name.into(),
                    color,
                })
                .collect(),
            background,
        )
    }

    pub fn entries(&self) -> &[PaletteEntry] {
        &self.entries
    }

    pub fn background(&self) -> [u8; 3] {
        self.background
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Smallest pairwise distance among all colors, background included.
    pub fn min_separation(&self) -> f64 {
        let colors: Vec<[u8; 3]> = self
            .entries
            .iter()
            .map(|e| e.color)
            .chain(std::iter::once(self.background))
            .collect();
        let mut best = f64::INFINITY;
        for i in 0..colors.len() {
            for j in i + 1..colors.len() {
                best = best.min(color_dist(colors[i].map(f64::from), colors[j].map(f64::from)));
            }
        }
        best
    }
}

/// Per-pixel class index into a palette; `None` is background.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<Option<usize>>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<Option<usize>>) -> Result<Self> {
        if width * height != labels.len() {
            return Err(Error::Structural(format!(
                "{} labels do not fill a {width}x{height} map",
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn background(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![None; width * height],
        }
    }

    pub fn check_against(&self, pal: &Palette) -> Result<()> {
        if self.width * self.height != self.labels.len() {
            return Err(Error::Structural(format!(
                "{} labels do not fill a {}x{} map",
                self.labels.len(),
                self.width,
                self.height
            )));
        }
        if let Some((i, idx)) = self
            .labels
            .iter()
            .enumerate()
            .find_map(|(i, l)| l.filter(|&c| c >= pal.len()).map(|c| (i, c)))
        {
            return Err(Error::Structural(format!(
                "pixel {i} has class {idx} but the palette has {} classes",
                pal.len()
            )));
        }
        Ok(())
    }
}

pub(crate) fn color_dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn to_255(c: [f64; 3]) -> [f64; 3] {
    c.map(|v| v * 255.0)
}

pub fn encode_semantic(map: &LabelMap, pal: &Palette) -> Result<RgbImage> {
    map.check_against(pal)?;
    let pixels = map
        .labels
        .iter()
        .map(|l| match l {
            Some(i) => pal.entries[*i].color,
            None => pal.background,
        })
        .collect();
    RgbImage::from_u8(map.width, map.height, pixels)
}

/// Nearest palette color per pixel (8-bit Euclidean units). Candidates are the
/// classes in palette order followed by the background; the first minimum
/// wins. Pixels farther than `max_dist` from every candidate are background.
pub fn decode_semantic(img: &RgbImage, pal: &Palette, max_dist: f64) -> Result<LabelMap> {
    if !(max_dist >= 0.0) {
        return Err(Error::Config(format!("max_dist must be >= 0, got {max_dist}")));
    }
    let candidates: Vec<(Option<usize>, [f64; 3])> = pal
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (Some(i), e.color.map(f64::from)))
        .chain(std::iter::once((None, pal.background.map(f64::from))))
        .collect();
    let labels = (0..img.len())
        .map(|i| {
            let px = to_255(img.unit(i));
            let mut best = (f64::INFINITY, None);
            for (label, color) in &candidates {
                let d = color_dist(px, *color);
                if d < best.0 {
                    best = (d, *label);
                }
            }
            if best.0 > max_dist {
                None
            } else {
                best.1
            }
        })
        .collect();
    LabelMap::new(img.width(), img.height(), labels)
}

/// 3x3 mode filter over labels, used to clean anti-aliased boundaries when
/// explicitly requested. Ties keep the center label; borders use the clipped window.
pub fn majority_filter(map: &LabelMap) -> LabelMap {
    let (w, h) = (map.width, map.height);
    let labels = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let mut votes: Vec<(Option<usize>, usize)> = Vec::with_capacity(9);
            for ny in y.saturating_sub(1)..(y + 2).min(h) {
                for nx in x.saturating_sub(1)..(x + 2).min(w) {
                    let l = map.labels[ny * w + nx];
                    match votes.iter_mut().find(|(k, _)| *k == l) {
                        Some(v) => v.1 += 1,
                        None => votes.push((l, 1)),
                    }
                }
            }
            let center = map.labels[i];
            let own = votes.iter().find(|(k, _)| *k == center).map_or(0, |v| v.1);
            votes
                .iter()
                .filter(|(_, n)| *n > own)
                .max_by_key(|(_, n)| *n)
                .map_or(center, |v| v.0)
        })
        .collect();
    LabelMap {
        width: w,
        height: h,
        labels,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width * height != bits.len() {
            return Err(Error::Structural(format!(
                "{} mask bits do not fill {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn intersection(&self, other: &BinaryMask) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| **a && **b)
            .count()
    }

    pub fn iou(&self, other: &BinaryMask) -> f64 {
        let inter = self.intersection(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceMask {
    pub mask: BinaryMask,
    /// Mean 8-bit color of the decoded pixels, when the mask came from an image.
    pub color: Option<[f64; 3]>,
    pub area: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceMaskSet {
    pub width: usize,
    pub height: usize,
    pub masks: Vec<InstanceMask>,
    pub background: [u8; 3],
}

impl InstanceMaskSet {
    /// Build from disjoint masks (e.g. ground truth).
    pub fn from_masks(width: usize, height: usize, masks: Vec<BinaryMask>, background: [u8; 3]) -> Result<Self> {
        check_disjoint(width, height, &masks)?;
        Ok(Self {
            width,
            height,
            masks: masks
                .into_iter()
                .map(|mask| InstanceMask {
                    area: mask.area(),
                    mask,
                    color: None,
                })
                .collect(),
            background,
        })
    }

    /// One mask per nonzero id, ordered by id.
    pub fn from_id_map(width: usize, height: usize, ids: &[u32], background: [u8; 3]) -> Result<Self> {
        if ids.len() != width * height {
            return Err(Error::Structural(format!(
                "{} instance ids do not fill {width}x{height}",
                ids.len()
            )));
        }
        let mut by_id: BTreeMap<u32, BinaryMask> = BTreeMap::new();
        for (i, &id) in ids.iter().enumerate() {
            if id != 0 {
                by_id
                    .entry(id)
                    .or_insert_with(|| BinaryMask::empty(width, height))
                    .bits[i] = true;
            }
        }
        Self::from_masks(width, height, by_id.into_values().collect(), background)
    }

    /// Inverse of [`InstanceMaskSet::from_id_map`]: ids `1..=n` in mask order.
    pub fn to_id_map(&self) -> Vec<u32> {
        let mut ids = vec![0u32; self.width * self.height];
        for (k, m) in self.masks.iter().enumerate() {
            for (i, &b) in m.mask.bits.iter().enumerate() {
                if b {
                    ids[i] = k as u32 + 1;
                }
            }
        }
        ids
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

fn check_disjoint(width: usize, height: usize, masks: &[BinaryMask]) -> Result<()> {
    let mut owner: Vec<Option<usize>> = vec![None; width * height];
    for (k, m) in masks.iter().enumerate() {
        if m.width != width || m.height != height || m.bits.len() != width * height {
            return Err(Error::Structural(format!(
                "mask {k} is {}x{}, expected {width}x{height}",
                m.width, m.height
            )));
        }
        for (i, &b) in m.bits.iter().enumerate() {
            if b {
                if let Some(prev) = owner[i] {
                    return Err(Error::Structural(format!(
                        "masks {prev} and {k} overlap at pixel {i}"
                    )));
                }
                owner[i] = Some(k);
            }
        }
    }
    Ok(())
}

/// `n` colors pairwise at least [`MIN_INSTANCE_SEPARATION`] apart and from
/// `background`, drawn by rejection sampling from ChaCha8 seeded with `seed`.
pub fn instance_colors(n: usize, background: [u8; 3], seed: u64) -> Result<Vec<[u8; 3]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken: Vec<[f64; 3]> = vec![background.map(f64::from)];
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut found = None;
        for _ in 0..COLOR_ATTEMPTS {
            let c: [u8; 3] = [rng.gen(), rng.gen(), rng.gen()];
            let cf = c.map(f64::from);
            if taken
                .iter()
                .all(|t| color_dist(*t, cf) >= MIN_INSTANCE_SEPARATION)
            {
                found = Some(c);
                break;
            }
        }
        let c = found.ok_or_else(|| {
            Error::Capacity(format!(
                "could not place instance color {} of {n} at separation {MIN_INSTANCE_SEPARATION}",
                k + 1
            ))
        })?;
        taken.push(c.map(f64::from));
        out.push(c);
    }
    Ok(out)
}

pub fn encode_instances(
    masks: &[BinaryMask],
    width: usize,
    height: usize,
    background: [u8; 3],
    seed: u64,
) -> Result<RgbImage> {
    check_disjoint(width, height, masks)?;
    let colors = instance_colors(masks.len(), background, seed)?;
    let mut pixels = vec![background; width * height];
    for (m, c) in masks.iter().zip(colors) {
        for (px, &b) in pixels.iter_mut().zip(&m.bits) {
            if b {
                *px = c;
            }
        }
    }
    RgbImage::from_u8(width, height, pixels)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstanceDecodeOptions {
    pub color_tol: f64,
    pub min_area: usize,
}

impl Default for InstanceDecodeOptions {
    fn default() -> Self {
        Self {
            color_tol: DEFAULT_COLOR_TOL,
            min_area: DEFAULT_MIN_AREA,
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Keep the smaller index as root for deterministic labels.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Split a generated image into instance masks: drop pixels near the
/// background, single-link the remaining distinct 8-bit colors at
/// `color_tol`, discard clusters under `min_area` pixels.
pub fn decode_instances(
    img: &RgbImage,
    background: [u8; 3],
    opts: &InstanceDecodeOptions,
) -> Result<InstanceMaskSet> {
    let tol = opts.color_tol;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Config(format!("color_tol must be > 0, got {tol}")));
    }
    let (width, height) = (img.width(), img.height());
    let pixels = img.to_u8_vec();
    let bg = background.map(f64::from);

    // Distinct foreground colors, indexed in order of first appearance.
    let mut index: HashMap<[u8; 3], usize> = HashMap::new();
    let mut colors: Vec<[u8; 3]> = Vec::new();
    let mut pixel_color: Vec<Option<usize>> = Vec::with_capacity(pixels.len());
    for px in &pixels {
        if color_dist(px.map(f64::from), bg) <= tol {
            pixel_color.push(None);
            continue;
        }
        let next = colors.len();
        let id = *index.entry(*px).or_insert_with(|| {
            colors.push(*px);
            next
        });
        pixel_color.push(Some(id));
    }

    // Grid buckets of side `tol`: any pair within `tol` lies in adjacent cells.
    let cell = |c: [u8; 3]| c.map(|v| (f64::from(v) / tol).floor() as i64);
    let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, c) in colors.iter().enumerate() {
        buckets.entry(cell(*c)).or_default().push(i);
    }
    let mut uf = UnionFind::new(colors.len());
    for (i, c) in colors.iter().enumerate() {
        let [x, y, z] = cell(*c);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(others) = buckets.get(&[x + dx, y + dy, z + dz]) {
                        for &j in others {
                            if j > i
                                && color_dist(c.map(f64::from), colors[j].map(f64::from)) <= tol
                            {
                                uf.union(i, j);
                            }
                        }
                    }
                }
            }
        }
    }

    // Components in order of their first pixel.
    let mut component_of_root: HashMap<usize, usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (p, c) in pixel_color.iter().enumerate() {
        if let Some(c) = c {
            let root = uf.find(*c);
            let k = *component_of_root.entry(root).or_insert_with(|| {
                members.push(Vec::new());
                members.len() - 1
            });
            members[k].push(p);
        }
    }

    let masks = members
        .into_iter()
        .filter(|m| m.len() >= opts.min_area)
        .map(|m| {
            let mut bits = vec![false; width * height];
            let mut sum = [0.0f64; 3];
            for &p in &m {
                bits[p] = true;
                for k in 0..3 {
                    sum[k] += f64::from(pixels[p][k]);
                }
            }
            let n = m.len() as f64;
            InstanceMask {
                mask: BinaryMask {
                    width,
                    height,
                    bits,
                },
                color: Some(sum.map(|s| s / n)),
                area: m.len(),
            }
        })
        .collect();
    Ok(InstanceMaskSet {
        width,
        height,
        masks,
        background,
    })
}
