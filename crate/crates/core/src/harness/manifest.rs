//! Dataset manifests.
//!
//! ```json
//! {"records": [
//!   {"id": "scene0", "task": "depth", "input_image": "rgb/0.png",
//!    "gt": "depth/0.png", "pred": "pred/0.png", "intrinsics": [500, 500, 320, 240]}
//! ]}
//! ```
//!
//! Relative paths resolve against the manifest's directory. `pred` files are
//! produced by a generator and are only checked when a run reads them.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Intrinsics;
use crate::harness::io::line_col_offset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Depth,
    Normals,
    Semantic,
    Instance,
    Referring,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Depth => "depth",
            Task::Normals => "normals",
            Task::Semantic => "semantic",
            Task::Instance => "instance",
            Task::Referring => "referring",
        }
    }

    pub fn needs_palette(self) -> bool {
        matches!(self, Task::Semantic | Task::Instance | Task::Referring)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depth" => Ok(Task::Depth),
            "normals" => Ok(Task::Normals),
            "semantic" => Ok(Task::Semantic),
            "instance" => Ok(Task::Instance),
            "referring" => Ok(Task::Referring),
            _ => Err(Error::Config(format!("unknown task {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: String,
    pub task: Task,
    pub input_image: PathBuf,
    pub gt: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub palette: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics: Option<[f64; 4]>,
}

impl Record {
    pub fn intrinsics(&self) -> Result<Option<Intrinsics>> {
        self.intrinsics
            .map(|[fx, fy, cx, cy]| Intrinsics::new(fx, fy, cx, cy))
            .transpose()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub records: Vec<Record>,
    /// Directory that relative paths were resolved against.
    #[serde(skip)]
    pub root: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: Manifest = serde_json::from_str(&text).map_err(|e| {
            Error::format(path, line_col_offset(&text, e.line(), e.column()), e.to_string())
        })?;
        manifest.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let root = manifest.root.clone();
        for r in &mut manifest.records {
            let resolve = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = root.join(&*p);
                }
            };
            resolve(&mut r.input_image);
            resolve(&mut r.gt);
            if let Some(p) = r.pred.as_mut() {
                resolve(p);
            }
            if let Some(p) = r.palette.as_mut() {
                resolve(p);
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if r.id.is_empty() {
                return Err(Error::Config("manifest record with an empty id".into()));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Config(format!("duplicate manifest id {:?}", r.id)));
            }
            if r.task.needs_palette() && r.palette.is_none() {
                return Err(Error::Config(format!(
                    "record {:?} ({}) needs a palette",
                    r.id, r.task
                )));
            }
            r.intrinsics()?;
            let required = [Some(&r.input_image), Some(&r.gt), r.palette.as_ref()];
            for p in required.into_iter().flatten() {
                if !p.exists() {
                    return Err(Error::Config(format!(
                        "record {:?} references missing file {}",
                        r.id,
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }
}
