//! Evaluation runner: decode every prediction in a manifest, score it against
//! its ground truth and aggregate.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degrade;
use crate::depth_codec::{decode_depth, decode_depth_lut_with};
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::io;
use crate::harness::manifest::{Manifest, Record, Task};
use crate::metrics::{
    depth_metrics, matched_f1, normal_metrics, seg_metrics, DepthMetrics, IouCounts, MatchedF1,
    NormalMetrics, SegMetrics,
};
use crate::normal_codec::decode_normals;
use crate::raster::RgbImage;
use crate::seg_codec::{decode_instances, decode_semantic, majority_filter, InstanceMaskSet};
use crate::CODEC_VERSION;

/// Which family of manifest records a run scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalKind {
    Depth,
    Normals,
    /// Semantic, referring and instance records.
    Segmentation,
}

impl EvalKind {
    pub fn accepts(self, task: Task) -> bool {
        match self {
            EvalKind::Depth => task == Task::Depth,
            EvalKind::Normals => task == Task::Normals,
            EvalKind::Segmentation => matches!(task, Task::Semantic | Task::Referring | Task::Instance),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImageMetrics {
    Depth(DepthMetrics),
    Normals(NormalMetrics),
    Semantic(SegMetrics),
    Instance(MatchedF1),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub id: String,
    pub task: Task,
    pub metrics: ImageMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub task: Task,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthAggregate {
    pub delta1: f64,
    pub absrel: f64,
    pub n_images: usize,
    pub n_pixels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalAggregate {
    pub mean_deg: f64,
    pub median_deg: f64,
    pub n_images: usize,
    pub n_pixels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegAggregate {
    /// Mean of per-image mIoU.
    pub miou: f64,
    /// Mean over classes of IoU from dataset-summed counts.
    pub miou_dataset: f64,
    /// Dataset-summed intersections over dataset-summed unions.
    pub ciou: f64,
    /// Mean of per-image IoU.
    pub giou: f64,
    pub per_class_iou: BTreeMap<String, f64>,
    pub n_images: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceAggregate {
    /// Mean of per-image matched F1.
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// F1 from dataset-summed matches and instance counts.
    pub micro_f1: f64,
    pub iou_threshold: f64,
    pub n_images: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<DepthAggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normals: Option<NormalAggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic: Option<SegAggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceAggregate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: EvalKind,
    pub codec_version: String,
    pub config_echo: RunConfig,
    pub per_image: Vec<ImageResult>,
    pub failures: Vec<Failure>,
    pub aggregate: Aggregate,
    pub notes: Vec<String>,
}

fn mean(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut sum = 0.0;
    let mut n = 0;
    for v in values {
        sum += v;
        n += 1;
    }
    (if n == 0 { 0.0 } else { sum / n as f64 }, n)
}

/// Fold per-image results in order. cIoU, `miou_dataset` and `micro_f1` use
/// summed counts; everything else is a plain mean over images.
pub fn aggregate(per_image: &[ImageResult], iou_threshold: f64) -> Aggregate {
    let depth: Vec<&DepthMetrics> = per_image
        .iter()
        .filter_map(|r| match &r.metrics {
            ImageMetrics::Depth(m) => Some(m),
            _ => None,
        })
        .collect();
    let normals: Vec<&NormalMetrics> = per_image
        .iter()
        .filter_map(|r| match &r.metrics {
            ImageMetrics::Normals(m) => Some(m),
            _ => None,
        })
        .collect();
    let seg: Vec<&SegMetrics> = per_image
        .iter()
        .filter_map(|r| match &r.metrics {
            ImageMetrics::Semantic(m) => Some(m),
            _ => None,
        })
        .collect();
    let inst: Vec<&MatchedF1> = per_image
        .iter()
        .filter_map(|r| match &r.metrics {
            ImageMetrics::Instance(m) => Some(m),
            _ => None,
        })
        .collect();

    let mut out = Aggregate::default();
    if !depth.is_empty() {
        out.depth = Some(DepthAggregate {
            delta1: mean(depth.iter().map(|m| m.delta1)).0,
            absrel: mean(depth.iter().map(|m| m.absrel)).0,
            n_images: depth.len(),
            n_pixels: depth.iter().map(|m| m.n_valid).sum(),
        });
    }
    if !normals.is_empty() {
        out.normals = Some(NormalAggregate {
            mean_deg: mean(normals.iter().map(|m| m.mean_deg)).0,
            median_deg: mean(normals.iter().map(|m| m.median_deg)).0,
            n_images: normals.len(),
            n_pixels: normals.iter().map(|m| m.n_valid).sum(),
        });
    }
    if !seg.is_empty() {
        let mut totals: BTreeMap<String, IouCounts> = BTreeMap::new();
        for m in &seg {
            for (name, c) in &m.counts {
                let t = totals.entry(name.clone()).or_default();
                t.intersection += c.intersection;
                t.union += c.union;
            }
        }
        let inter: u64 = totals.values().map(|c| c.intersection).sum();
        let union: u64 = totals.values().map(|c| c.union).sum();
        let per_class_iou: BTreeMap<String, f64> = totals
            .iter()
            .filter_map(|(name, c)| c.iou().map(|v| (name.clone(), v)))
            .collect();
        out.semantic = Some(SegAggregate {
            miou: mean(seg.iter().map(|m| m.miou)).0,
            miou_dataset: if per_class_iou.is_empty() {
                1.0
            } else {
                mean(per_class_iou.values().copied()).0
            },
            ciou: if union == 0 { 1.0 } else { inter as f64 / union as f64 },
            giou: mean(seg.iter().map(|m| m.giou)).0,
            per_class_iou,
            n_images: seg.len(),
        });
    }
    if !inst.is_empty() {
        let matches = inst.iter().map(|m| m.matches).sum();
        let n_pred = inst.iter().map(|m| m.n_pred).sum();
        let n_gt = inst.iter().map(|m| m.n_gt).sum();
        out.instance = Some(InstanceAggregate {
            f1: mean(inst.iter().map(|m| m.f1)).0,
            precision: mean(inst.iter().map(|m| m.precision)).0,
            recall: mean(inst.iter().map(|m| m.recall)).0,
            micro_f1: MatchedF1::from_counts(matches, n_pred, n_gt, iou_threshold).f1,
            iou_threshold,
            n_images: inst.len(),
        });
    }
    out
}

fn load_prediction(record: &Record, cfg: &RunConfig) -> Result<RgbImage> {
    let path = record
        .pred
        .as_ref()
        .ok_or_else(|| Error::Run(format!("record {:?} has no prediction", record.id)))?;
    let img = io::read_rgb_png(path)?;
    match &cfg.degrade {
        Some(spec) => degrade::apply(&img, spec),
        None => Ok(img),
    }
}

fn same_size(w: usize, h: usize, img: &RgbImage) -> Result<()> {
    if (img.width(), img.height()) != (w, h) {
        return Err(Error::Structural(format!(
            "prediction is {}x{}, ground truth {w}x{h}",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

pub fn evaluate_record(record: &Record, cfg: &RunConfig) -> Result<ImageMetrics> {
    match record.task {
        Task::Depth => {
            let gt = io::load_depth_gt(&record.gt)?;
            let img = load_prediction(record, cfg)?;
            same_size(gt.width, gt.height, &img)?;
            let pred = match cfg.lut()? {
                Some(lut) => decode_depth_lut_with(&img, &lut, &cfg.transform()?, &cfg.lut_options())?,
                None => decode_depth(&img, &cfg.depth_codec()?),
            };
            Ok(ImageMetrics::Depth(depth_metrics(&pred, &gt, cfg.d_min, cfg.d_max)?))
        }
        Task::Normals => {
            let gt = io::load_normals(&record.gt)?;
            let img = load_prediction(record, cfg)?;
            same_size(gt.width, gt.height, &img)?;
            let pred = decode_normals(&img, cfg.min_norm)?;
            Ok(ImageMetrics::Normals(normal_metrics(&pred, &gt)?))
        }
        Task::Semantic | Task::Referring => {
            let pal = io::load_palette(record.palette.as_ref().expect("validated manifest"))?;
            let gt = io::load_labels(&record.gt, &pal)?;
            let img = load_prediction(record, cfg)?;
            same_size(gt.width, gt.height, &img)?;
            let mut pred = decode_semantic(&img, &pal, cfg.max_dist)?;
            if cfg.majority_filter {
                pred = majority_filter(&pred);
            }
            Ok(ImageMetrics::Semantic(seg_metrics(&pred, &gt, &pal)?))
        }
        Task::Instance => {
            let pal = io::load_palette(record.palette.as_ref().expect("validated manifest"))?;
            let (w, h, ids) = io::load_instance_ids(&record.gt)?;
            let gt = InstanceMaskSet::from_id_map(w, h, &ids, pal.background())?;
            let img = load_prediction(record, cfg)?;
            same_size(w, h, &img)?;
            let pred = decode_instances(&img, pal.background(), &cfg.instance_options())?;
            Ok(ImageMetrics::Instance(matched_f1(&pred, &gt, cfg.iou_threshold)?))
        }
    }
}

pub fn run_eval(manifest: &Manifest, kind: EvalKind, cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let records: Vec<&Record> = manifest
        .records
        .iter()
        .filter(|r| kind.accepts(r.task))
        .collect();
    if records.is_empty() {
        return Err(Error::Run(format!("manifest has no records for {kind:?} evaluation")));
    }
    let outcomes: Vec<Result<ImageMetrics>> = records
        .par_iter()
        .map(|r| evaluate_record(r, cfg))
        .collect();
    let mut per_image = Vec::new();
    let mut failures = Vec::new();
    for (r, outcome) in records.iter().zip(outcomes) {
        match outcome {
            Ok(metrics) => per_image.push(ImageResult {
                id: r.id.clone(),
                task: r.task,
                metrics,
            }),
            Err(e) => failures.push(Failure {
                id: r.id.clone(),
                task: r.task,
                error: e.to_string(),
            }),
        }
    }
    if per_image.is_empty() {
        return Err(Error::Run(format!(
            "all {} records failed; first error: {}",
            failures.len(),
            failures[0].error
        )));
    }
    let mut notes = Vec::new();
    if per_image.iter().any(|r| matches!(r.metrics, ImageMetrics::Instance(_))) {
        notes.push(format!(
            "instance f1 is matched F1 at IoU >= {} under optimal one-to-one assignment, an \
             approximation of pmF1",
            cfg.iou_threshold
        ));
    }
    if kind == EvalKind::Depth {
        notes.push(format!(
            "depth metrics over ground truth in [{}, {}] m",
            cfg.d_min, cfg.d_max
        ));
    }
    let aggregate = aggregate(&per_image, cfg.iou_threshold);
    Ok(EvalReport {
        kind,
        codec_version: CODEC_VERSION.to_string(),
        config_echo: cfg.clone(),
        per_image,
        failures,
        aggregate,
        notes,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// One row per record, scored or failed.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::Run(format!("writing CSV: {e}"));
        w.write_record([
            "id", "task", "status", "delta1", "absrel", "mean_deg", "median_deg", "miou", "ciou",
            "giou", "f1", "precision", "recall", "error",
        ])
        .map_err(wrap)?;
        let f = |v: f64| v.to_string();
        for r in &self.per_image {
            let mut row = vec![r.id.clone(), r.task.to_string(), "ok".into()];
            let cols: [Option<f64>; 10] = match &r.metrics {
                ImageMetrics::Depth(m) => [Some(m.delta1), Some(m.absrel), None, None, None, None, None, None, None, None],
                ImageMetrics::Normals(m) => [None, None, Some(m.mean_deg), Some(m.median_deg), None, None, None, None, None, None],
                ImageMetrics::Semantic(m) => [None, None, None, None, Some(m.miou), Some(m.ciou), Some(m.giou), None, None, None],
                ImageMetrics::Instance(m) => [None, None, None, None, None, None, None, Some(m.f1), Some(m.precision), Some(m.recall)],
            };
            row.extend(cols.iter().map(|c| c.map(f).unwrap_or_default()));
            row.push(String::new());
            w.write_record(&row).map_err(wrap)?;
        }
        for fail in &self.failures {
            let mut row = vec![fail.id.clone(), fail.task.to_string(), "failed".into()];
            row.extend(std::iter::repeat(String::new()).take(10));
            row.push(fail.error.clone());
            w.write_record(&row).map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::Run(format!("writing CSV: {e}")))
    }
}
