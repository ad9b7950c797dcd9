//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fail.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use taskviz::degrade::{self, DegradeOp, DegradeSpec};
use taskviz::depth_codec::{curve_depth, decode_depth, encode_depth, uncurve_depth, CubePath, DepthCodecConfig, PowerTransformParams};
use taskviz::geometry::{project, unproject, write_ply, Intrinsics};
use taskviz::metrics::{depth_metrics, iou_matrix, matched_f1, normal_metrics, seg_metrics};
use taskviz::normal_codec::{angle_deg, decode_normals, encode_normals, normal_to_rgb};
use taskviz::seg_codec::{
    decode_instances, decode_semantic, encode_instances, encode_semantic, InstanceDecodeOptions,
    InstanceMaskSet, LabelMap, Palette, DEFAULT_MAX_DIST,
};
use taskviz::{DepthMap, NormalMap};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail = format!("{}; {:.2?} (limit {:?})", o.detail, took, limit);
    o.pass &= took < limit;
    o
}

fn c1_power_transform() -> Outcome {
    timed(Duration::from_secs(1), || {
        let p = PowerTransformParams::default();
        let n = 10_000;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let d = 10f64.powf(-2.0 + 6.0 * k as f64 / (n - 1) as f64);
            let back = uncurve_depth(curve_depth(d, &p).unwrap(), &p).unwrap();
            worst = worst.max((back - d).abs() / d.max(1e-6));
        }
        let mut spot: f64 = 0.0;
        for (d, want) in [(10.0, 0.75), (30.0, 0.9375), (90.0, 0.99)] {
            let got = curve_depth(d, &p).unwrap();
            spot = spot.max((got - want).abs()).max((common::curve_ref(d, p.lambda, p.c) - want).abs());
        }
        outcome(worst < 1e-9 && spot <= 1e-12, format!("max rel round trip {worst:.2e}, max spot error {spot:.2e}"))
    })
}

fn c2_projection_oracle() -> Outcome {
    timed(Duration::from_secs(30), || {
        let path = CubePath::default();
        let samples = common::sample_path(&path.order_string(), 100_000);
        let mut rng = common::rng(2);
        let points: Vec<[f64; 3]> = (0..10_000).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let tol = 2e-5;
        let worst = points
            .par_iter()
            .map(|&p| {
                let (t, dist) = path.project(p);
                let (_, best2, near) = common::brute_project(&samples, p, 1e-9);
                // The projection must be at least as close as any sample and
                // agree in t with one of the (possibly tied) nearest samples.
                let closer = dist <= best2.sqrt() + 1e-12;
                let dt = near.iter().map(|s| (s - t).abs()).fold(f64::INFINITY, f64::min);
                if closer { dt } else { f64::INFINITY }
            })
            .reduce(|| 0.0, f64::max);
        outcome(worst <= tol, format!("max |dt| {worst:.2e} over 10^4 points (tolerance {tol:.0e})"))
    })
}

fn c3_depth_8bit() -> Outcome {
    let cfg = DepthCodecConfig::default();
    let n = 200_000;
    let values: Vec<f64> = (0..n).map(|k| 0.1 + (80.0 - 0.1) * k as f64 / (n - 1) as f64).collect();
    let map = DepthMap::from_values(n, 1, values.clone()).unwrap();
    let img = encode_depth(&map, &cfg).unwrap().quantized();
    let dec = decode_depth(&img, &cfg);
    let mut worst: f64 = 0.0;
    let mut at = 0.0;
    for (i, d) in values.iter().enumerate() {
        let e = if dec.valid[i] { (dec.values[i] - d).abs() / d } else { f64::INFINITY };
        if e > worst {
            worst = e;
            at = *d;
        }
    }
    outcome(worst <= 0.02, format!("max per-pixel AbsRel {worst:.4} (at d = {at:.2} m) over {n} depths in [0.1, 80]"))
}

fn c4_normals() -> Outcome {
    let mut rng = common::rng(4);
    let vectors: Vec<[f64; 3]> = (0..10_000).map(|_| common::random_unit(&mut rng)).collect();
    let map = NormalMap::from_vectors(vectors.len(), 1, vectors.clone()).unwrap();
    let enc = encode_normals(&map).unwrap();
    let real = decode_normals(&enc, 0.2).unwrap();
    let quant = decode_normals(&enc.quantized(), 0.2).unwrap();
    let max_err = |m: &NormalMap| {
        vectors
            .iter()
            .zip(&m.vectors)
            .map(|(a, b)| angle_deg(*a, *b))
            .fold(0.0f64, f64::max)
    };
    let (e_real, e_quant) = (max_err(&real), max_err(&quant));
    let dominant = |c: [f64; 3]| (0..3).max_by(|&i, &j| c[i].total_cmp(&c[j])).unwrap();
    let anchors = [
        ("left, pinkish red", [-1.0, 0.0, 0.0], 0),
        ("up, light green", [0.0, 1.0, 0.0], 1),
        ("camera-facing, light blue", [0.0, 0.0, 1.0], 2),
    ];
    let anchors_ok = anchors.iter().all(|(_, n, ch)| dominant(normal_to_rgb(*n)) == *ch);
    let valid = real.valid.iter().chain(&quant.valid).all(|v| *v);
    outcome(
        e_real <= 1e-12 && e_quant <= 0.5 && anchors_ok && valid,
        format!("max error real {e_real:.1e} deg, 8-bit {e_quant:.3} deg; anchors {}", if anchors_ok { "ok" } else { "wrong" }),
    )
}

fn c5_seg_round_trips() -> Outcome {
    let mut rng = common::rng(5);
    let mut worst_miou: f64 = 1.0;
    for _ in 0..100 {
        let k = rng.gen_range(1..=6);
        let bg: [u8; 3] = [rng.gen(), rng.gen(), rng.gen()];
        let colors = common::separated_colors(&mut rng, k, bg, 96.0);
        let pal = Palette::from_pairs(colors.iter().enumerate().map(|(i, c)| (format!("class{i}"), *c)), bg).unwrap();
        let (w, h) = (rng.gen_range(8..48), rng.gen_range(8..48));
        let map = common::random_labels(&mut rng, w, h, k);
        let back = decode_semantic(&encode_semantic(&map, &pal).unwrap(), &pal, DEFAULT_MAX_DIST).unwrap();
        worst_miou = worst_miou.min(seg_metrics(&back, &map, &pal).unwrap().miou);
    }
    let mut worst_f1: f64 = 1.0;
    for seed in 0..100u64 {
        let masks = common::random_blobs(&mut rng, 64, 48, 10, 5);
        let img = encode_instances(&masks, 64, 48, [0, 0, 0], seed).unwrap();
        let pred = decode_instances(&img, [0, 0, 0], &InstanceDecodeOptions::default()).unwrap();
        let gt = InstanceMaskSet::from_masks(64, 48, masks, [0, 0, 0]).unwrap();
        worst_f1 = worst_f1.min(matched_f1(&pred, &gt, 0.5).unwrap().f1);
    }
    outcome(
        worst_miou == 1.0 && worst_f1 == 1.0,
        format!("min semantic mIoU {worst_miou} over 100 maps, min instance F1 {worst_f1} over 100 blob sets"),
    )
}

fn c6_metric_oracles() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    // Every pair of 2x4 maps over two labels, once with two classes and once
    // with one class against background.
    let pal = Palette::from_pairs([("a", [255, 0, 0]), ("b", [0, 0, 255])], [0, 0, 0]).unwrap();
    let mut checked = 0u64;
    for alphabet in [[Some(0), Some(1)], [Some(0), None]] {
        let maps: Vec<Vec<Option<usize>>> = (0..256u32)
            .map(|bits| (0..8).map(|i| alphabet[((bits >> i) & 1) as usize]).collect())
            .collect();
        for p in &maps {
            for g in &maps {
                let m = seg_metrics(&LabelMap::new(4, 2, p.clone()).unwrap(), &LabelMap::new(4, 2, g.clone()).unwrap(), &pal)
                    .unwrap();
                let counts = common::count_iou(p, g, 2);
                let present: Vec<f64> = counts.iter().filter(|c| c.1 > 0).map(|c| c.0 as f64 / c.1 as f64).collect();
                let miou = if present.is_empty() { 1.0 } else { present.iter().sum::<f64>() / present.len() as f64 };
                let (si, su) = counts.iter().fold((0, 0), |a, c| (a.0 + c.0, a.1 + c.1));
                let ciou = if su == 0 { 1.0 } else { si as f64 / su as f64 };
                let same_counts = ["a", "b"].iter().zip(&counts).all(|(name, c)| {
                    m.counts.get(*name).map_or(c.1 == 0, |k| (k.intersection, k.union) == *c)
                });
                if !(same_counts && (m.miou - miou).abs() < 1e-15 && (m.ciou - ciou).abs() < 1e-15) {
                    ok = false;
                }
                checked += 1;
            }
        }
    }
    notes.push(format!("{checked} exhaustive 2x4 map pairs"));

    let mut rng = common::rng(6);
    let mut f1_cases = 0;
    for _ in 0..500 {
        let (w, h) = (12, 10);
        let random_set = |rng: &mut rand_chacha::ChaCha8Rng| {
            let n = rng.gen_range(0..=6);
            let mut ids = vec![0u32; w * h];
            for id in 1..=n {
                let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
                let (x1, y1) = (rng.gen_range(x0..w) + 1, rng.gen_range(y0..h) + 1);
                for y in y0..y1 {
                    for x in x0..x1 {
                        ids[y * w + x] = id as u32;
                    }
                }
            }
            InstanceMaskSet::from_id_map(w, h, &ids, [0, 0, 0]).unwrap()
        };
        let pred = random_set(&mut rng);
        let gt = random_set(&mut rng);
        for thr in [0.1, 0.3, 0.5, 0.75] {
            let got = matched_f1(&pred, &gt, thr).unwrap();
            let want = common::perm_matches(&iou_matrix(&pred, &gt), thr);
            let (np, ng) = (pred.masks.len(), gt.masks.len());
            let p = if np == 0 { 1.0 } else { want as f64 / np as f64 };
            let r = if ng == 0 { 1.0 } else { want as f64 / ng as f64 };
            let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            if got.matches != want || (got.f1 - f1).abs() > 1e-15 {
                ok = false;
            }
            f1_cases += 1;
        }
    }
    notes.push(format!("{f1_cases} matched-F1 cases vs exhaustive assignment"));

    let gt = DepthMap::from_values(3, 1, vec![1.0, 4.0, 20.0]).unwrap();
    for (scale, d1, absrel) in [(1.1, 1.0, 0.1), (1.3, 0.0, 0.3)] {
        let pred = DepthMap::from_values(3, 1, gt.values.iter().map(|v| v * scale).collect()).unwrap();
        let m = depth_metrics(&pred, &gt, 1e-3, 80.0).unwrap();
        if m.delta1 != d1 || (m.absrel - absrel).abs() > 1e-12 {
            ok = false;
        }
    }
    notes.push("depth closed forms at 1.1x and 1.3x".into());
    outcome(ok, notes.join(", "))
}

struct Scene {
    depth: DepthMap,
    normals: NormalMap,
    labels: LabelMap,
}

/// Floor, back wall, sky, tilted boxes and a sphere, with matching depth,
/// normals and class labels.
fn scene(seed: u64) -> Scene {
    let (w, h) = (128usize, 96usize);
    let mut rng = common::rng(1000 + seed);
    let horizon = rng.gen_range(30..50) as f64;
    let wall = rng.gen_range(15.0..40.0);
    let sky_row = rng.gen_range(5..25);
    let (fy, cam_h) = (100.0, 1.5);
    let mut depth = vec![0.0; w * h];
    let mut valid = vec![true; w * h];
    let mut normals = vec![[0.0; 3]; w * h];
    let mut labels = vec![None; w * h];
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            if v < sky_row {
                valid[i] = false;
                labels[i] = Some(4);
            } else if (v as f64) <= horizon || cam_h * fy / (v as f64 - horizon) >= wall {
                depth[i] = wall;
                normals[i] = [0.0, 0.0, 1.0];
                labels[i] = Some(1);
            } else {
                depth[i] = cam_h * fy / (v as f64 - horizon);
                normals[i] = [0.0, 1.0, 0.0];
                labels[i] = Some(0);
            }
        }
    }
    for _ in 0..rng.gen_range(1..=4) {
        let (x0, y0) = (rng.gen_range(0..w - 20), rng.gen_range(sky_row..h - 16));
        let (x1, y1) = (x0 + rng.gen_range(12..20), y0 + rng.gen_range(10..16));
        let d0 = rng.gen_range(2.0..12.0);
        let mut n = common::random_unit(&mut rng);
        n[2] = n[2].abs().max(0.3);
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let n = n.map(|c| c / len);
        for v in y0..y1 {
            for u in x0..x1 {
                let i = v * w + u;
                depth[i] = d0 + 0.02 * (u - x0) as f64;
                valid[i] = true;
                normals[i] = n;
                labels[i] = Some(2);
            }
        }
    }
    let (cx, cy, r) = (rng.gen_range(20.0..108.0), rng.gen_range(40.0..76.0), rng.gen_range(8.0..16.0));
    let d_center = rng.gen_range(3.0..10.0);
    for v in 0..h {
        for u in 0..w {
            let (dx, dy) = ((u as f64 - cx) / r, (v as f64 - cy) / r);
            let q = dx * dx + dy * dy;
            if q < 1.0 {
                let i = v * w + u;
                let nz = (1.0 - q).sqrt();
                // Camera y points down, normal y points up.
                normals[i] = [dx, -dy, nz];
                depth[i] = d_center - 0.5 * nz;
                valid[i] = true;
                labels[i] = Some(3);
            }
        }
    }
    Scene {
        depth: DepthMap::new(w, h, depth, valid.clone()).unwrap(),
        normals: NormalMap::new(w, h, normals, valid).unwrap(),
        labels: LabelMap::new(w, h, labels).unwrap(),
    }
}

fn c7_end_to_end() -> Outcome {
    timed(Duration::from_secs(120), || {
        let cfg = DepthCodecConfig::default();
        let pal = Palette::from_pairs(
            [
                ("floor", [255, 0, 0]),
                ("wall", [0, 255, 0]),
                ("box", [0, 0, 255]),
                ("ball", [255, 255, 0]),
                ("sky", [0, 255, 255]),
            ],
            [0, 0, 0],
        )
        .unwrap();
        let n_scenes = 24;
        let results: Vec<(f64, f64, f64)> = (0..n_scenes)
            .into_par_iter()
            .map(|k| {
                let s = scene(k);
                let spec = DegradeSpec::new(k, vec![DegradeOp::GaussianNoise { sigma: 4.0 }, DegradeOp::Quantize8]).unwrap();
                let d = decode_depth(&degrade::apply(&encode_depth(&s.depth, &cfg).unwrap(), &spec).unwrap(), &cfg);
                let n = decode_normals(&degrade::apply(&encode_normals(&s.normals).unwrap(), &spec).unwrap(), 0.2).unwrap();
                let l = decode_semantic(
                    &degrade::apply(&encode_semantic(&s.labels, &pal).unwrap(), &spec).unwrap(),
                    &pal,
                    DEFAULT_MAX_DIST,
                )
                .unwrap();
                (
                    depth_metrics(&d, &s.depth, 1e-3, 80.0).unwrap().delta1,
                    normal_metrics(&n, &s.normals).unwrap().mean_deg,
                    seg_metrics(&l, &s.labels, &pal).unwrap().miou,
                )
            })
            .collect();
        let mean = |f: fn(&(f64, f64, f64)) -> f64| results.iter().map(f).sum::<f64>() / results.len() as f64;
        let (delta1, normal, miou) = (mean(|r| r.0), mean(|r| r.1), mean(|r| r.2));
        let checks = [
            (delta1 >= 0.99, format!("delta1 {delta1:.4} (>= 0.99)")),
            (normal <= 2.0, format!("normal mean error {normal:.3} deg (<= 2)")),
            (miou >= 0.98, format!("mIoU {miou:.4} (>= 0.98)")),
        ];
        let failed: Vec<&str> = checks.iter().filter(|c| !c.0).map(|c| c.1.as_str()).collect();
        let detail = format!(
            "{n_scenes} scenes, noise sigma 4 + quantize8: {}{}",
            checks.iter().map(|c| c.1.as_str()).collect::<Vec<_>>().join(", "),
            if failed.is_empty() { String::new() } else { format!("; missed: {}", failed.join(", ")) }
        );
        outcome(failed.is_empty(), detail)
    })
}

fn c8_geometry() -> Outcome {
    let (w, h) = (640, 480);
    let mut rng = common::rng(8);
    let values: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.1..100.0)).collect();
    let mut valid = vec![true; w * h];
    for _ in 0..5000 {
        valid[rng.gen_range(0..w * h)] = false;
    }
    let n_valid = valid.iter().filter(|v| **v).count();
    let depth = DepthMap::new(w, h, values, valid).unwrap();
    let k = Intrinsics::new(525.0, 520.0, 319.5, 239.5).unwrap();
    let cloud = unproject(&depth, &k, None).unwrap();
    let mut worst: f64 = 0.0;
    for (p, &(u, v)) in cloud.points.iter().zip(&cloud.pixels) {
        let (pu, pv, pd) = project(*p, &k).unwrap();
        worst = worst.max((pu - u as f64).abs()).max((pv - v as f64).abs());
        worst = worst.max((pd - depth.values[v * w + u]).abs());
    }

    // Header conformance on a small colored cloud.
    let small = DepthMap::from_values(4, 3, (1..=12).map(f64::from).collect()).unwrap();
    let colors = taskviz::RgbImage::filled_u8(4, 3, [10, 20, 30]);
    let mut buf = Vec::new();
    write_ply(&unproject(&small, &k, Some(&colors)).unwrap(), &mut buf).unwrap();
    let ply = check_ply(&String::from_utf8(buf).unwrap(), 12, true);
    let mut buf = Vec::new();
    write_ply(&cloud, &mut buf).unwrap();
    let ply_big = check_ply(&String::from_utf8(buf).unwrap(), n_valid, false);

    let ok = worst <= 1e-6 && cloud.len() == n_valid && ply.is_ok() && ply_big.is_ok();
    outcome(
        ok,
        format!(
            "max pixel/depth error {worst:.1e} over {} points; PLY header {}",
            cloud.len(),
            ply.and(ply_big).map_or_else(|e| format!("invalid: {e}"), |_| "conformant".into())
        ),
    )
}

/// Minimal ASCII PLY reader: validates the header grammar and that the body
/// holds `n` vertices with the declared properties.
fn check_ply(text: &str, n: usize, colored: bool) -> Result<(), String> {
    let mut lines = text.lines();
    if lines.next() != Some("ply") {
        return Err("missing magic".into());
    }
    if lines.next() != Some("format ascii 1.0") {
        return Err("bad format line".into());
    }
    let mut count = None;
    let mut props = Vec::new();
    for line in lines.by_ref() {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["comment", ..] => {}
            ["element", "vertex", c] => count = Some(c.parse::<usize>().map_err(|e| e.to_string())?),
            ["property", ty, name] => {
                let known = ["char", "uchar", "short", "ushort", "int", "uint", "float", "double"];
                if !known.contains(ty) {
                    return Err(format!("unknown property type {ty}"));
                }
                props.push((ty.to_string(), name.to_string()));
            }
            ["end_header"] => break,
            _ => return Err(format!("unexpected header line {line:?}")),
        }
    }
    let mut want = vec![("float", "x"), ("float", "y"), ("float", "z")];
    if colored {
        want.extend([("uchar", "red"), ("uchar", "green"), ("uchar", "blue")]);
    }
    let got: Vec<(&str, &str)> = props.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    if got != want {
        return Err(format!("properties {got:?}"));
    }
    if count != Some(n) {
        return Err(format!("vertex count {count:?}, expected {n}"));
    }
    let body: Vec<&str> = lines.collect();
    if body.len() != n {
        return Err(format!("{} body lines", body.len()));
    }
    for line in body {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != want.len() {
            return Err(format!("row {line:?}"));
        }
        for (f, (ty, _)) in fields.iter().zip(&want) {
            let ok = if *ty == "uchar" { f.parse::<u8>().is_ok() } else { f.parse::<f32>().map_or(false, f32::is_finite) };
            if !ok {
                return Err(format!("field {f:?} in {line:?}"));
            }
        }
    }
    Ok(())
}

fn c9_cli_determinism() -> Outcome {
    let mut differing = Vec::new();
    for (name, args) in common::cli::CASES {
        if common::cli::run_case(args) != common::cli::run_case(args) {
            differing.push(*name);
        }
    }
    outcome(
        differing.is_empty(),
        format!("{} subcommand cases run twice, {} differed {differing:?}", common::cli::CASES.len(), differing.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("power transform bijection", c1_power_transform),
        ("path projection oracle", c2_projection_oracle),
        ("8-bit depth round trip", c3_depth_8bit),
        ("normal codec", c4_normals),
        ("segmentation round trips", c5_seg_round_trips),
        ("metric oracles", c6_metric_oracles),
        ("end-to-end robustness", c7_end_to_end),
        ("geometry", c8_geometry),
        ("CLI determinism", c9_cli_determinism),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let o = std::panic::catch_unwind(run).unwrap_or_else(|_| outcome(false, "panicked"));
        println!("[{}] criterion {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
