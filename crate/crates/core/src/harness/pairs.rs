//! Training triples: (input image, instruction text, encoded target image).

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::depth_codec::{encode_depth, encode_depth_lut};
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::io;
use crate::harness::manifest::{Manifest, Record, Task};
use crate::harness::prompt::{render_prompt, PromptStyle, PromptTemplate};
use crate::normal_codec::encode_normals;
use crate::raster::RgbImage;
use crate::seg_codec::{encode_instances, encode_semantic, InstanceMaskSet};
use crate::CODEC_VERSION;

/// Sampling weights over prompt styles, e.g. `hex=0.5,json_map=0.5`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StyleMix(pub Vec<(PromptStyle, f64)>);

impl Default for StyleMix {
    fn default() -> Self {
        StyleMix(PromptStyle::ALL.iter().map(|s| (*s, 1.0)).collect())
    }
}

impl FromStr for StyleMix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = Vec::new();
        for item in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, weight) = match item.split_once('=') {
                Some((n, w)) => (
                    n.trim(),
                    w.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad style weight in {item:?}")))?,
                ),
                None => (item, 1.0),
            };
            parts.push((name.parse()?, weight));
        }
        let mix = StyleMix(parts);
        mix.validate()?;
        Ok(mix)
    }
}

impl StyleMix {
    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("style weights must be finite and >= 0".into()));
        }
        if !(self.0.iter().map(|(_, w)| w).sum::<f64>() > 0.0) {
            return Err(Error::Config("style mix needs a positive total weight".into()));
        }
        Ok(())
    }

    /// Pick a style for a uniform draw `u in [0, 1)`.
    pub fn pick(&self, u: f64) -> PromptStyle {
        let total: f64 = self.0.iter().map(|(_, w)| w).sum();
        let mut acc = 0.0;
        for (style, w) in &self.0 {
            acc += w / total;
            if u < acc && *w > 0.0 {
                return *style;
            }
        }
        self.0.iter().rev().find(|(_, w)| *w > 0.0).expect("validated").0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub id: String,
    pub task: Task,
    pub style: PromptStyle,
    pub input_image: PathBuf,
    pub prompt: String,
    /// Relative to the pair manifest's directory.
    pub target_image: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub id: String,
    pub warning: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairManifest {
    pub codec_version: String,
    pub seed: u64,
    pub style_mix: StyleMix,
    pub pairs: Vec<TrainingPair>,
    pub skipped: Vec<Skipped>,
}

impl PairManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("pair manifest serializes");
        s.push('\n');
        s
    }
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn encode_target(record: &Record, cfg: &RunConfig, seed: u64) -> Result<(RgbImage, Option<crate::seg_codec::Palette>)> {
    match record.task {
        Task::Depth => {
            let gt = io::load_depth_gt(&record.gt)?;
            let img = match cfg.lut()? {
                Some(lut) => encode_depth_lut(&gt, &lut, &cfg.transform()?)?,
                None => encode_depth(&gt, &cfg.depth_codec()?)?,
            };
            Ok((img, None))
        }
        Task::Normals => Ok((encode_normals(&io::load_normals(&record.gt)?)?, None)),
        Task::Semantic | Task::Referring => {
            let pal = io::load_palette(record.palette.as_ref().expect("validated manifest"))?;
            let labels = io::load_labels(&record.gt, &pal)?;
            Ok((encode_semantic(&labels, &pal)?, Some(pal)))
        }
        Task::Instance => {
            let pal = io::load_palette(record.palette.as_ref().expect("validated manifest"))?;
            let (w, h, ids) = io::load_instance_ids(&record.gt)?;
            let set = InstanceMaskSet::from_id_map(w, h, &ids, pal.background())?;
            let masks: Vec<_> = set.masks.into_iter().map(|m| m.mask).collect();
            Ok((encode_instances(&masks, w, h, pal.background(), seed)?, Some(pal)))
        }
    }
}

/// Encode every record's ground truth, render its prompt with a style drawn
/// from `mix`, write targets under `out_dir/targets/` and the pair manifest
/// to `out_dir/pairs.json`.
pub fn emit_training_pairs(
    manifest: &Manifest,
    mix: &StyleMix,
    seed: u64,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<PairManifest> {
    mix.validate()?;
    cfg.validate()?;
    let targets = out_dir.join("targets");
    fs::create_dir_all(&targets).map_err(|e| Error::io(&targets, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    for (k, record) in manifest.records.iter().enumerate() {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let style = mix.pick(u);
        let result = encode_target(record, cfg, seed.wrapping_add(k as u64)).and_then(|(img, pal)| {
            let mut template = PromptTemplate::new(record.task, style, pal);
            template.depth_path = cfg.depth_codec()?.path;
            Ok((img, render_prompt(&template)?))
        });
        match result {
            Ok((img, prompt)) => {
                let rel = Path::new("targets").join(format!("{}.png", file_stem(&record.id)));
                io::write_rgb_png(&out_dir.join(&rel), &img)?;
                let input_image = record
                    .input_image
                    .strip_prefix(&manifest.root)
                    .map(Path::to_path_buf)
                    .unwrap_or_else(|_| record.input_image.clone());
                pairs.push(TrainingPair {
                    id: record.id.clone(),
                    task: record.task,
                    style,
                    input_image,
                    prompt,
                    target_image: rel,
                });
            }
            Err(e) => skipped.push(Skipped {
                id: record.id.clone(),
                warning: e.to_string(),
            }),
        }
    }
    let out = PairManifest {
        codec_version: CODEC_VERSION.to_string(),
        seed,
        style_mix: mix.clone(),
        pairs,
        skipped,
    };
    let path = out_dir.join("pairs.json");
    fs::write(&path, out.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(out)
}
