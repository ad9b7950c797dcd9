//! Benchmark metrics: depth accuracy (delta1, AbsRel), normal angular error,
//! segmentation IoU variants and matched instance F1.

use std::collections::BTreeMap;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal_codec::angle_deg;
use crate::raster::{DepthMap, NormalMap};
use crate::seg_codec::{InstanceMaskSet, LabelMap, Palette};

pub const DELTA1_THRESHOLD: f64 = 1.25;
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    pub delta1: f64,
    pub absrel: f64,
    pub n_valid: usize,
}

/// delta1 and AbsRel over pixels valid in both maps whose ground truth lies in
/// `[d_min, d_max]` and is positive.
pub fn depth_metrics(pred: &DepthMap, gt: &DepthMap, d_min: f64, d_max: f64) -> Result<DepthMetrics> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(Error::Structural(format!(
            "prediction is {}x{}, ground truth {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    pred.validate()?;
    gt.validate()?;
    if !(d_min < d_max) {
        return Err(Error::Config(format!("depth range [{d_min}, {d_max}] is empty")));
    }
    let mut n = 0usize;
    let mut within = 0usize;
    let mut rel_sum = 0.0;
    for i in 0..gt.len() {
        if !(pred.valid[i] && gt.valid[i]) {
            continue;
        }
        let (p, g) = (pred.values[i], gt.values[i]);
        if !(g > 0.0 && g >= d_min && g <= d_max) {
            continue;
        }
        n += 1;
        if (p / g).max(g / p) < DELTA1_THRESHOLD {
            within += 1;
        }
        rel_sum += (p - g).abs() / g;
    }
    if n == 0 {
        return Err(Error::EmptyEvaluation(
            "no pixels are valid in both depth maps within the depth range".into(),
        ));
    }
    Ok(DepthMetrics {
        delta1: within as f64 / n as f64,
        absrel: rel_sum / n as f64,
        n_valid: n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalMetrics {
    pub mean_deg: f64,
    pub median_deg: f64,
    pub n_valid: usize,
}

/// Lower-middle element for even lengths.
pub fn lower_median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values[(values.len() - 1) / 2])
}

pub fn normal_metrics(pred: &NormalMap, gt: &NormalMap) -> Result<NormalMetrics> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(Error::Structural(format!(
            "prediction is {}x{}, ground truth {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    pred.validate()?;
    gt.validate()?;
    let mut errors: Vec<f64> = (0..gt.len())
        .filter(|&i| pred.valid[i] && gt.valid[i])
        .map(|i| angle_deg(pred.vectors[i], gt.vectors[i]))
        .collect();
    if errors.is_empty() {
        return Err(Error::EmptyEvaluation(
            "no pixels are valid in both normal maps".into(),
        ));
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let n = errors.len();
    let median = lower_median(&mut errors).unwrap();
    Ok(NormalMetrics {
        mean_deg: mean,
        median_deg: median,
        n_valid: n,
    })
}

/// Intersection and union pixel counts for one class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IouCounts {
    pub intersection: u64,
    pub union: u64,
}

impl IouCounts {
    pub fn iou(&self) -> Option<f64> {
        (self.union > 0).then(|| self.intersection as f64 / self.union as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    /// Mean IoU over classes present in prediction or ground truth.
    pub miou: f64,
    /// Summed intersections over summed unions.
    pub ciou: f64,
    /// The IoU of this image; averaged across images at dataset level.
    pub giou: f64,
    pub per_class_iou: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, IouCounts>,
}

/// Per-class IoU of two label maps. Background is not scored as a class, but
/// class pixels predicted over background (or missed into it) still count.
/// An image where no class appears anywhere scores 1.
pub fn seg_metrics(pred: &LabelMap, gt: &LabelMap, pal: &Palette) -> Result<SegMetrics> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(Error::Structural(format!(
            "prediction is {}x{}, ground truth {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    pred.check_against(pal)?;
    gt.check_against(pal)?;
    let mut counts = vec![IouCounts::default(); pal.len()];
    for (p, g) in pred.labels.iter().zip(&gt.labels) {
        match (p, g) {
            (Some(a), Some(b)) if a == b => {
                counts[*a].intersection += 1;
                counts[*a].union += 1;
            }
            _ => {
                if let Some(a) = p {
                    counts[*a].union += 1;
                }
                if let Some(b) = g {
                    counts[*b].union += 1;
                }
            }
        }
    }
    let mut per_class_iou = BTreeMap::new();
    let mut named_counts = BTreeMap::new();
    for (entry, c) in pal.entries().iter().zip(&counts) {
        if let Some(iou) = c.iou() {
            per_class_iou.insert(entry.name.clone(), iou);
        }
        named_counts.insert(entry.name.clone(), *c);
    }
    let inter: u64 = counts.iter().map(|c| c.intersection).sum();
    let union: u64 = counts.iter().map(|c| c.union).sum();
    let image_iou = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
    let miou = if per_class_iou.is_empty() {
        1.0
    } else {
        per_class_iou.values().sum::<f64>() / per_class_iou.len() as f64
    };
    Ok(SegMetrics {
        miou,
        ciou: image_iou,
        giou: image_iou,
        per_class_iou,
        counts: named_counts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedF1 {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub iou_threshold: f64,
    pub matches: usize,
    pub n_pred: usize,
    pub n_gt: usize,
}

impl MatchedF1 {
    pub fn from_counts(matches: usize, n_pred: usize, n_gt: usize, iou_threshold: f64) -> Self {
        // Empty sides are vacuously precise / complete.
        let precision = if n_pred == 0 { 1.0 } else { matches as f64 / n_pred as f64 };
        let recall = if n_gt == 0 { 1.0 } else { matches as f64 / n_gt as f64 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            f1,
            precision,
            recall,
            iou_threshold,
            matches,
            n_pred,
            n_gt,
        }
    }
}

pub fn iou_matrix(pred: &InstanceMaskSet, gt: &InstanceMaskSet) -> Vec<Vec<f64>> {
    pred.masks
        .iter()
        .map(|p| gt.masks.iter().map(|g| p.mask.iou(&g.mask)).collect())
        .collect()
}

/// Largest number of one-to-one pairs with IoU at or above `threshold`,
/// found with the Hungarian algorithm.
pub fn max_matches(ious: &[Vec<f64>], threshold: f64) -> usize {
    let rows = ious.len();
    let cols = ious.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0;
    }
    let hit = |r: usize, c: usize| i64::from(ious[r][c] >= threshold);
    // kuhn_munkres needs rows <= columns.
    let weights = if rows <= cols {
        Matrix::from_fn(rows, cols, |(r, c)| hit(r, c))
    } else {
        Matrix::from_fn(cols, rows, |(c, r)| hit(r, c))
    };
    let (total, _) = kuhn_munkres(&weights);
    total as usize
}

pub fn matched_f1(pred: &InstanceMaskSet, gt: &InstanceMaskSet, iou_threshold: f64) -> Result<MatchedF1> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::Config(format!(
            "IoU threshold must lie in (0, 1], got {iou_threshold}"
        )));
    }
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(Error::Structural(format!(
            "prediction is {}x{}, ground truth {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    let matches = max_matches(&iou_matrix(pred, gt), iou_threshold);
    Ok(MatchedF1::from_counts(matches, pred.len(), gt.len(), iou_threshold))
}
