//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taskviz::seg_codec::{BinaryMask, LabelMap};

/// Closed-form forward transform written directly from the definition.
pub fn curve_ref(d: f64, lambda: f64, c: f64) -> f64 {
    1.0 - (1.0 - d / (lambda * c)).powf(lambda + 1.0)
}

/// Corner colors for an order string of digits 4R+2G+B.
pub fn corners_ref(order: &str) -> Vec<[f64; 3]> {
    order
        .bytes()
        .map(|b| {
            let k = b - b'0';
            [((k >> 2) & 1) as f64, ((k >> 1) & 1) as f64, (k & 1) as f64]
        })
        .collect()
}

fn lerp(a: [f64; 3], b: [f64; 3], u: f64) -> [f64; 3] {
    [0, 1, 2].map(|i| a[i] + (b[i] - a[i]) * u)
}

fn d2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// Dense sampling of the path at `n + 1` evenly spaced parameters.
pub fn sample_path(order: &str, n: usize) -> Vec<(f64, [f64; 3])> {
    let corners = corners_ref(order);
    let segs = corners.len() - 1;
    (0..=n)
        .map(|k| {
            let t = k as f64 / n as f64;
            let s = t * segs as f64;
            let i = (s.floor() as usize).min(segs - 1);
            (t, lerp(corners[i], corners[i + 1], s - i as f64))
        })
        .collect()
}

/// Best sampled parameter and its squared distance, plus every parameter within
/// `tie` of that distance so callers can accept equidistant branches.
pub fn brute_project(samples: &[(f64, [f64; 3])], rgb: [f64; 3], tie: f64) -> (f64, f64, Vec<f64>) {
    let mut best = (0.0, f64::INFINITY);
    for &(t, c) in samples {
        let e = d2(c, rgb);
        if e < best.1 {
            best = (t, e);
        }
    }
    let near = samples
        .iter()
        .filter(|(_, c)| d2(*c, rgb).sqrt() <= best.1.sqrt() + tie)
        .map(|(t, _)| *t)
        .collect();
    (best.0, best.1, near)
}

/// Maximum one-to-one matches at `thr`, by trying every injection.
pub fn perm_matches(ious: &[Vec<f64>], thr: f64) -> usize {
    fn go(ious: &[Vec<f64>], thr: f64, row: usize, used: &mut Vec<bool>) -> usize {
        if row == ious.len() {
            return 0;
        }
        let mut best = go(ious, thr, row + 1, used);
        for c in 0..used.len() {
            if !used[c] && ious[row][c] >= thr {
                used[c] = true;
                best = best.max(1 + go(ious, thr, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    let cols = ious.first().map_or(0, Vec::len);
    go(ious, thr, 0, &mut vec![false; cols])
}

/// Per-class (intersection, union) by direct pixel counting.
pub fn count_iou(pred: &[Option<usize>], gt: &[Option<usize>], n_classes: usize) -> Vec<(u64, u64)> {
    (0..n_classes)
        .map(|k| {
            let mut inter = 0;
            let mut union = 0;
            for (p, g) in pred.iter().zip(gt) {
                let (a, b) = (*p == Some(k), *g == Some(k));
                inter += u64::from(a && b);
                union += u64::from(a || b);
            }
            (inter, union)
        })
        .collect()
}

/// Colors at least `sep` apart from each other and from `bg`.
pub fn separated_colors(rng: &mut ChaCha8Rng, n: usize, bg: [u8; 3], sep: f64) -> Vec<[u8; 3]> {
    let mut out: Vec<[u8; 3]> = Vec::new();
    while out.len() < n {
        let c: [u8; 3] = [rng.gen(), rng.gen(), rng.gen()];
        let far = |o: [u8; 3]| d2(c.map(f64::from), o.map(f64::from)).sqrt() >= sep;
        if far(bg) && out.iter().all(|o| far(*o)) {
            out.push(c);
        }
    }
    out
}

/// Random label map made of overlapping rectangles over background.
pub fn random_labels(rng: &mut ChaCha8Rng, w: usize, h: usize, n_classes: usize) -> LabelMap {
    let mut labels = vec![None; w * h];
    for _ in 0..rng.gen_range(1..8) {
        let k = rng.gen_range(0..n_classes);
        let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let (x1, y1) = (rng.gen_range(x0..w) + 1, rng.gen_range(y0..h) + 1);
        for y in y0..y1 {
            for x in x0..x1 {
                labels[y * w + x] = Some(k);
            }
        }
    }
    LabelMap::new(w, h, labels).unwrap()
}

/// Up to `max` disjoint rectangular blobs, each at least `min_side` on a side,
/// laid out on a grid so they never touch.
pub fn random_blobs(rng: &mut ChaCha8Rng, w: usize, h: usize, max: usize, min_side: usize) -> Vec<BinaryMask> {
    let n = rng.gen_range(1..=max);
    let cols = 4;
    let (cw, ch) = (w / cols, h / max.div_ceil(cols));
    (0..n)
        .map(|i| {
            let (gx, gy) = ((i % cols) * cw, (i / cols) * ch);
            let bw = rng.gen_range(min_side..cw - 1);
            let bh = rng.gen_range(min_side..ch - 1);
            let (ox, oy) = (gx + rng.gen_range(0..cw - bw), gy + rng.gen_range(0..ch - bh));
            let mut bits = vec![false; w * h];
            for y in oy..oy + bh {
                for x in ox..ox + bw {
                    bits[y * w + x] = true;
                }
            }
            BinaryMask::new(w, h, bits).unwrap()
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = d2(v, [0.0; 3]).sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.map(|x| x / n);
        }
    }
}

pub mod cli {
    use std::collections::BTreeMap;
    use std::fs;
    use std::path::{Path, PathBuf};
    use std::process::{Command, Output};

    pub fn fixtures() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
    }

    pub fn golden() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
    }

    /// One golden case per subcommand variant. `{f}` is the fixture directory,
    /// `{o}` the case's output directory.
    pub const CASES: &[(&str, &str)] = &[
        ("encode_depth", "encode-depth --input {f}/depth.png --out {o}/out.png"),
        ("encode_depth_pfm_lut", "encode-depth --input {f}/depth.pfm --lut viridis --out {o}/out.png"),
        ("decode_depth", "decode-depth --input {f}/pred_depth.png --out {o}/out.pfm"),
        ("decode_depth_png", "decode-depth --input {f}/pred_depth.png --t-max 0.99 --out {o}/out.png"),
        ("encode_normals", "encode-normals --input {f}/normals.pfm --out {o}/out.png"),
        ("decode_normals", "decode-normals --input {f}/pred_normals.png --out {o}/out.pfm"),
        ("encode_seg", "encode-seg --input {f}/labels.png --palette {f}/palette.json --out {o}/out.png"),
        ("encode_seg_instance", "encode-seg --instance --seed 7 --input {f}/ids.png --palette {f}/palette.json --out {o}/out.png"),
        ("decode_seg", "decode-seg --input {f}/pred_semantic.png --palette {f}/palette.json --out {o}/out.png"),
        ("decode_seg_instance", "decode-seg --instance --min-area 4 --input {f}/pred_instance.png --palette {f}/palette.json --out {o}/out.png"),
        ("degrade", "degrade --seed 5 --op noise=4 --op blur=1 --op chroma=3,0,-3 --op quantize8 --input {f}/pred_depth.png --out {o}/out.png"),
        ("eval_depth", "eval-depth --manifest {f}/manifest.json --d-max 10 --out {o}/report.json --csv {o}/report.csv"),
        ("eval_normals", "eval-normals --manifest {f}/manifest.json --seed 3 --op noise=4 --op quantize8 --out {o}/report.json"),
        ("eval_seg", "eval-seg --manifest {f}/manifest.json --iou-threshold 0.75 --out {o}/report.json --csv {o}/report.csv"),
        ("unproject", "unproject --input {f}/depth.png --intrinsics 20,20,7.5,5.5 --colors {f}/rgb.png --out {o}/cloud.ply"),
        ("make_prompts", "make-prompts --task semantic --style rgb_tuple --palette {f}/palette.json --out {o}/prompt.txt"),
        ("make_prompts_manifest", "make-prompts --manifest {f}/manifest.json --style natural_language --out {o}/prompts.json"),
        ("make_pairs", "make-pairs --manifest {f}/manifest.json --seed 11 --style-mix hex=1,json_map=2 --out {o}"),
    ];

    pub fn run(args: &str, out: &Path) -> Output {
        let f = fixtures();
        let line = args
            .replace("{f}", f.to_str().unwrap())
            .replace("{o}", out.to_str().unwrap());
        Command::new(env!("CARGO_BIN_EXE_taskviz"))
            .args(line.split_whitespace())
            .output()
            .expect("binary runs")
    }

    /// Every file under `dir`, keyed by relative path.
    pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
        fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
            let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
            entries.sort();
            for p in entries {
                if p.is_dir() {
                    walk(root, &p, out);
                } else {
                    let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                    out.insert(rel, fs::read(&p).unwrap());
                }
            }
        }
        let mut out = BTreeMap::new();
        if dir.exists() {
            walk(dir, dir, &mut out);
        }
        out
    }

    /// Run a case in a fresh directory and return its outputs.
    pub fn run_case(args: &str) -> BTreeMap<String, Vec<u8>> {
        let dir = tempfile::tempdir().unwrap();
        let out = run(args, dir.path());
        assert!(
            out.status.success(),
            "{args}: exit {:?}\n{}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
        snapshot(dir.path())
    }
}
