use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use taskviz::degrade::{self, DegradeOp, DegradeSpec};
use taskviz::depth_codec::{decode_depth, decode_depth_lut_with, encode_depth, encode_depth_lut};
use taskviz::geometry::{unproject, write_ply, Intrinsics};
use taskviz::harness::{
    emit_training_pairs, io, render_prompt, run_eval, EvalKind, Manifest, PromptStyle,
    PromptTemplate, RunConfig, StyleMix, Task,
};
use taskviz::normal_codec::{decode_normals, encode_normals};
use taskviz::seg_codec::{
    decode_instances, decode_semantic, encode_instances, encode_semantic, majority_filter, InstanceMaskSet,
};
use taskviz::{Error, Result};

#[derive(Parser)]
#[command(name = "taskviz", version, about = "Encode, decode and evaluate vision task visualizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

// Flags shared by every subcommand; they override values from `--config`.
#[derive(Args, Clone, Debug, Default)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    c: Option<f64>,
    #[arg(long, global = true)]
    t_max: Option<f64>,
    /// Cube path as eight digits 4R+2G+B, e.g. 01326457.
    #[arg(long, global = true)]
    corner_order: Option<String>,
    /// Use a colormap (grayscale, viridis, plasma, inferno) instead of the cube path.
    #[arg(long, global = true)]
    lut: Option<String>,
    #[arg(long, global = true)]
    color_tol: Option<f64>,
    #[arg(long, global = true)]
    min_area: Option<usize>,
    #[arg(long, global = true)]
    iou_threshold: Option<f64>,
    #[arg(long, global = true)]
    d_min: Option<f64>,
    #[arg(long, global = true)]
    d_max: Option<f64>,
    #[arg(long, global = true)]
    max_dist: Option<f64>,
    #[arg(long, global = true)]
    min_norm: Option<f64>,
    /// Smooth decoded semantic labels with a 3x3 mode filter.
    #[arg(long, global = true)]
    majority_filter: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        set!(lambda, c, t_max, corner_order, color_tol, min_area, iou_threshold, d_min, d_max, max_dist, min_norm, seed);
        cfg.majority_filter |= self.majority_filter;
        if self.lut.is_some() {
            cfg.lut = self.lut.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Depth ground truth (16-bit mm PNG or PFM) to an RGB visualization.
    EncodeDepth {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// RGB visualization to depth (PFM, or 16-bit mm PNG for .png outputs).
    DecodeDepth {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Three-channel normal PFM to an RGB visualization.
    EncodeNormals {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// RGB visualization to a three-channel normal PFM.
    DecodeNormals {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Label PNG (or instance-id PNG with --instance) to a colored mask image.
    EncodeSeg {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        palette: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        instance: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Colored mask image to a label PNG (or instance-id PNG with --instance).
    DecodeSeg {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        palette: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        instance: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Apply corruptions in order: quantize8, noise=<sigma>, blur=<radius>, chroma=<r>,<g>,<b>.
    Degrade {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "op")]
        ops: Vec<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score depth predictions listed in a manifest.
    EvalDepth(EvalArgs),
    /// Score surface normal predictions listed in a manifest.
    EvalNormals(EvalArgs),
    /// Score semantic, referring and instance predictions listed in a manifest.
    EvalSeg(EvalArgs),
    /// Depth map plus intrinsics to an ASCII PLY point cloud.
    Unproject {
        #[arg(long)]
        input: PathBuf,
        /// fx,fy,cx,cy in pixels.
        #[arg(long, value_delimiter = ',', required = true)]
        intrinsics: Vec<f64>,
        /// Optional RGB image for per-point colors.
        #[arg(long)]
        colors: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Render prompts for a palette, or for every record of a manifest.
    MakePrompts {
        #[arg(long)]
        task: Option<Task>,
        #[arg(long, default_value = "json_map")]
        style: PromptStyle,
        #[arg(long)]
        palette: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Emit (input, prompt, target) training triples for a manifest.
    MakePairs {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "json_map=1,rgb_tuple=1,hex=1,natural_language=1")]
        style_mix: StyleMix,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Report path (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Optional per-image CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Degradation applied to predictions before decoding.
    #[arg(long = "op")]
    ops: Vec<String>,
    #[command(flatten)]
    run: RunArgs,
}

fn parse_ops(ops: &[String]) -> Result<Vec<DegradeOp>> {
    ops.iter().map(|s| s.parse()).collect()
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Run(format!("writing {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn eval(kind: EvalKind, args: &EvalArgs) -> Result<()> {
    let mut cfg = args.run.resolve()?;
    if !args.ops.is_empty() {
        cfg.degrade = Some(DegradeSpec::new(cfg.seed, parse_ops(&args.ops)?)?);
    }
    let manifest = Manifest::load(&args.manifest)?;
    let report = run_eval(&manifest, kind, &cfg)?;
    report.write_json(&args.out)?;
    if let Some(csv) = &args.csv {
        let file = fs::File::create(csv).map_err(|e| Error::Run(format!("creating {}: {e}", csv.display())))?;
        report.write_csv(file)?;
    }
    if !report.failures.is_empty() {
        eprintln!("{} of {} records failed", report.failures.len(), report.failures.len() + report.per_image.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct PromptRow {
    id: String,
    task: Task,
    style: PromptStyle,
    prompt: String,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::EncodeDepth { input, out, run } => {
            let cfg = run.resolve()?;
            let gt = io::load_depth_gt(&input)?;
            let img = match cfg.lut()? {
                Some(lut) => encode_depth_lut(&gt, &lut, &cfg.transform()?)?,
                None => encode_depth(&gt, &cfg.depth_codec()?)?,
            };
            io::write_rgb_png(&out, &img)
        }
        Command::DecodeDepth { input, out, run } => {
            let cfg = run.resolve()?;
            let img = io::read_rgb_png(&input)?;
            let map = match cfg.lut()? {
                Some(lut) => decode_depth_lut_with(&img, &lut, &cfg.transform()?, &cfg.lut_options())?,
                None => decode_depth(&img, &cfg.depth_codec()?),
            };
            io::save_depth(&out, &map)
        }
        Command::EncodeNormals { input, out, run } => {
            run.resolve()?;
            io::write_rgb_png(&out, &encode_normals(&io::load_normals(&input)?)?)
        }
        Command::DecodeNormals { input, out, run } => {
            let cfg = run.resolve()?;
            let map = decode_normals(&io::read_rgb_png(&input)?, cfg.min_norm)?;
            io::save_normals(&out, &map)
        }
        Command::EncodeSeg { input, palette, out, instance, run } => {
            let cfg = run.resolve()?;
            let pal = io::load_palette(&palette)?;
            let img = if instance {
                let (w, h, ids) = io::load_instance_ids(&input)?;
                let set = InstanceMaskSet::from_id_map(w, h, &ids, pal.background())?;
                let masks: Vec<_> = set.masks.into_iter().map(|m| m.mask).collect();
                encode_instances(&masks, w, h, pal.background(), cfg.seed)?
            } else {
                encode_semantic(&io::load_labels(&input, &pal)?, &pal)?
            };
            io::write_rgb_png(&out, &img)
        }
        Command::DecodeSeg { input, palette, out, instance, run } => {
            let cfg = run.resolve()?;
            let pal = io::load_palette(&palette)?;
            let img = io::read_rgb_png(&input)?;
            if instance {
                let set = decode_instances(&img, pal.background(), &cfg.instance_options())?;
                io::save_instance_ids(&out, set.width, set.height, &set.to_id_map())
            } else {
                let mut labels = decode_semantic(&img, &pal, cfg.max_dist)?;
                if cfg.majority_filter {
                    labels = majority_filter(&labels);
                }
                io::save_labels(&out, &labels)
            }
        }
        Command::Degrade { input, out, ops, run } => {
            let cfg = run.resolve()?;
            let spec = if ops.is_empty() {
                let mut spec = cfg.degrade.clone().unwrap_or_default();
                if run.seed.is_some() {
                    spec.seed = cfg.seed;
                }
                spec
            } else {
                DegradeSpec::new(cfg.seed, parse_ops(&ops)?)?
            };
            io::write_rgb_png(&out, &degrade::apply(&io::read_rgb_png(&input)?, &spec)?)
        }
        Command::EvalDepth(args) => eval(EvalKind::Depth, &args),
        Command::EvalNormals(args) => eval(EvalKind::Normals, &args),
        Command::EvalSeg(args) => eval(EvalKind::Segmentation, &args),
        Command::Unproject { input, intrinsics, colors, out, run } => {
            run.resolve()?;
            let k = match intrinsics.as_slice() {
                [fx, fy, cx, cy] => Intrinsics::new(*fx, *fy, *cx, *cy)?,
                _ => return Err(Error::Config("--intrinsics takes fx,fy,cx,cy".into())),
            };
            let depth = io::load_depth_gt(&input)?;
            let rgb = colors.as_deref().map(io::read_rgb_png).transpose()?;
            let cloud = unproject(&depth, &k, rgb.as_ref())?;
            let file = fs::File::create(&out).map_err(|e| Error::Run(format!("creating {}: {e}", out.display())))?;
            let mut w = std::io::BufWriter::new(file);
            write_ply(&cloud, &mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::Run(format!("writing {}: {e}", out.display())))
        }
        Command::MakePrompts { task, style, palette, manifest, out, run } => {
            let cfg = run.resolve()?;
            let path = cfg.depth_codec()?.path;
            if let Some(m) = manifest {
                let manifest = Manifest::load(&m)?;
                let mut rows = Vec::new();
                for r in &manifest.records {
                    let pal = r.palette.as_deref().map(io::load_palette).transpose()?;
                    let mut t = PromptTemplate::new(r.task, style, pal);
                    t.depth_path = path.clone();
                    rows.push(PromptRow { id: r.id.clone(), task: r.task, style, prompt: render_prompt(&t)? });
                }
                let mut text = serde_json::to_string_pretty(&rows).expect("prompts serialize");
                text.push('\n');
                write_text(out.as_deref(), &text)
            } else {
                let task = task.ok_or_else(|| Error::Config("make-prompts needs --task or --manifest".into()))?;
                let pal = palette.as_deref().map(io::load_palette).transpose()?;
                let mut t = PromptTemplate::new(task, style, pal);
                t.depth_path = path;
                write_text(out.as_deref(), &format!("{}\n", render_prompt(&t)?))
            }
        }
        Command::MakePairs { manifest, out, style_mix, run } => {
            let cfg = run.resolve()?;
            let manifest = Manifest::load(&manifest)?;
            let pairs = emit_training_pairs(&manifest, &style_mix, cfg.seed, &cfg, &out)?;
            for s in &pairs.skipped {
                eprintln!("warning: skipped {}: {}", s.id, s.warning);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
