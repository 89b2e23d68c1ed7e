//! Command-line front end. [`run`] is what the `rotdet` binary calls.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::dataio::{
    format_dota, merge_detections, parse_dota, read_box_csv_path, read_fmap_path, read_manifest, tile_plan,
    write_box_csv, write_box_csv_path, write_fmap_path, write_manifest, ClassMap,
};
use crate::error::{Error, Result};
use crate::eval::{map_evaluate, EvalConfig, GroundTruth, Interpolation};
use crate::geom::{from_quad, rotated_iou, HorizontalBox, RotatedBox};
use crate::kernels::{center_pool, rroi_align, RRoiAlignConfig};
use crate::postprocess::{rotated_nms_with, NmsConfig};
use crate::synth::{scene, SceneConfig};
use crate::targets::{
    decode_hdelta, decode_local, decode_transform, encode_hdelta, encode_local, encode_transform, generate_anchors,
    AnchorConfig, HorizontalDelta, LocalTarget, TransformParams,
};

#[derive(Debug, Parser)]
#[command(name = "rotdet", version, about = "Rotated-box detection geometry toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Hdelta,
    Transform,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Interp {
    #[value(name = "allpoint")]
    AllPoint,
    #[value(name = "11point")]
    ElevenPoint,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rotated IoU of two boxes given as `cx cy w h theta`.
    Iou {
        #[arg(long, num_args = 5, allow_negative_numbers = true, required = true)]
        a: Vec<f64>,
        #[arg(long, num_args = 5, allow_negative_numbers = true, required = true)]
        b: Vec<f64>,
        #[arg(long)]
        degrees: bool,
    },
    /// Polygon NMS over a box CSV.
    Nms {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        iou: f64,
        #[arg(long)]
        class_agnostic: bool,
        /// Output CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regression target of `--target` relative to `--ref`.
    Encode {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long = "ref", num_args = 4..=5, allow_negative_numbers = true, required = true)]
        reference: Vec<f64>,
        #[arg(long, num_args = 4..=5, allow_negative_numbers = true, required = true)]
        target: Vec<f64>,
        #[arg(long)]
        degrees: bool,
    },
    /// Box from a reference box and a regression code.
    Decode {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long = "ref", num_args = 4..=5, allow_negative_numbers = true, required = true)]
        reference: Vec<f64>,
        #[arg(long, num_args = 4..=5, allow_negative_numbers = true, required = true)]
        code: Vec<f64>,
        #[arg(long)]
        degrees: bool,
    },
    /// Anchor grid as `cx,cy,w,h` CSV.
    Anchors {
        /// One `HxW` per pyramid level.
        #[arg(long, value_delimiter = ',', required = true)]
        shapes: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        strides: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// RRoI Align of one box over a feature-map file.
    Align {
        #[arg(long)]
        fmap: PathBuf,
        #[arg(long = "box", num_args = 5, allow_negative_numbers = true, required = true)]
        rbox: Vec<f64>,
        #[arg(long, default_value_t = 7)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        ks: usize,
        /// Image-to-feature-map stride; box coordinates are divided by it.
        #[arg(long, default_value_t = 1.0)]
        stride: f64,
        #[arg(long)]
        degrees: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Row-max plus column-max pooling of a feature-map file.
    Centerpool {
        #[arg(long)]
        fmap: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tile manifest (JSON lines) for a large image.
    Tile {
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long, default_value_t = crate::dataio::DEFAULT_PATCH)]
        patch: usize,
        #[arg(long, default_value_t = crate::dataio::DEFAULT_STRIDE)]
        stride: usize,
        #[arg(long, default_value = "image")]
        source: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge per-tile detection CSVs (`<tile_id>.csv`) back to image coordinates.
    Merge {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        dets_dir: PathBuf,
        #[arg(long, default_value_t = crate::dataio::DEFAULT_MERGE_NMS)]
        nms: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rotated mAP of a box CSV against DOTA-style annotations.
    Eval {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long, value_enum, default_value = "allpoint")]
        interp: Interp,
        /// Score difficult instances like any other.
        #[arg(long)]
        keep_difficult: bool,
    },
    /// Random scene: `gt.txt` annotations and jittered `dets.csv`.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1848.0)]
        width: f64,
        #[arg(long, default_value_t = 1848.0)]
        height: f64,
        #[arg(long, default_value_t = 50)]
        count: usize,
    },
    /// Run the built-in oracle checks.
    Selftest,
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(msg) => Error::Io(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn angle_in(v: f64, degrees: bool) -> f64 {
    if degrees {
        v.to_radians()
    } else {
        v
    }
}

fn angle_out(v: f64, degrees: bool) -> f64 {
    if degrees {
        v.to_degrees()
    } else {
        v
    }
}

fn arity(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Config(format!("--{name} takes {n} values, got {}", v.len())));
    }
    Ok(())
}

fn rbox_arg(name: &str, v: &[f64], degrees: bool) -> Result<RotatedBox> {
    arity(name, v, 5)?;
    RotatedBox::new(v[0], v[1], v[2], v[3], angle_in(v[4], degrees))
}

fn hbox_arg(name: &str, v: &[f64]) -> Result<HorizontalBox> {
    arity(name, v, 4)?;
    HorizontalBox::new(v[0], v[1], v[2], v[3])
}

fn join(v: &[f64]) -> String {
    // adding 0.0 turns -0.0 into 0.0
    v.iter()
        .map(|x| format!("{:.9}", x + 0.0))
        .collect::<Vec<_>>()
        .join(" ")
}

fn rbox_out(b: &RotatedBox, degrees: bool) -> String {
    join(&[b.cx, b.cy, b.w, b.h, angle_out(b.theta, degrees)])
}

fn open_out<'a>(path: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(with_path(p, File::create(p).map_err(Error::from))?)),
        None => Box::new(stdout),
    })
}

fn parse_shape(s: &str) -> Result<(usize, usize)> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Config(format!("shape {s:?} is not HxW")))?;
    let p = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("shape {s:?} is not HxW")))
    };
    Ok((p(h)?, p(w)?))
}

fn load_gt(path: &Path, classes: &mut ClassMap) -> Result<Vec<GroundTruth>> {
    let text = with_path(path, fs::read_to_string(path).map_err(Error::from))?;
    parse_dota(&text)?
        .into_iter()
        .map(|r| {
            Ok(GroundTruth {
                rbox: from_quad(&r.quad)?,
                class_id: classes.intern(&r.category),
                difficult: r.difficult,
            })
        })
        .collect()
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Iou { a, b, degrees } => {
            let a = rbox_arg("a", &a, degrees)?;
            let b = rbox_arg("b", &b, degrees)?;
            writeln!(out, "{:.6}", rotated_iou(&a, &b))?;
        }
        Command::Nms {
            input,
            iou,
            class_agnostic,
            out: dest,
        } => {
            if !(0.0..=1.0).contains(&iou) {
                return Err(Error::Config(format!("--iou {iou} outside [0, 1]")));
            }
            let mut classes = ClassMap::new();
            let dets = with_path(&input, read_box_csv_path(&input, &mut classes))?;
            let keep = rotated_nms_with(
                &dets,
                &NmsConfig {
                    iou_thresh: iou,
                    class_agnostic,
                },
            );
            let kept: Vec<_> = keep.iter().map(|&i| dets[i]).collect();
            write_box_csv(open_out(&dest, out)?, &kept, &classes)?;
            writeln!(err, "kept {} of {} boxes", kept.len(), dets.len())?;
        }
        Command::Encode {
            mode,
            reference,
            target,
            degrees,
        } => {
            let code: Vec<f64> = match mode {
                Mode::Hdelta => encode_hdelta(&hbox_arg("ref", &reference)?, &hbox_arg("target", &target)?)
                    .to_array()
                    .to_vec(),
                Mode::Transform => {
                    encode_transform(&hbox_arg("ref", &reference)?, &rbox_arg("target", &target, degrees)?)?
                        .to_array()
                        .to_vec()
                }
                Mode::Local => {
                    let mut t = encode_local(
                        &rbox_arg("ref", &reference, degrees)?,
                        &rbox_arg("target", &target, degrees)?,
                    );
                    t.otheta = angle_out(t.otheta, degrees);
                    t.to_array().to_vec()
                }
            };
            writeln!(out, "{}", join(&code))?;
        }
        Command::Decode {
            mode,
            reference,
            code,
            degrees,
        } => {
            let line = match mode {
                Mode::Hdelta => {
                    arity("code", &code, 4)?;
                    let h = decode_hdelta(
                        &hbox_arg("ref", &reference)?,
                        &HorizontalDelta::from_array([code[0], code[1], code[2], code[3]]),
                    )?;
                    join(&[h.cx, h.cy, h.w, h.h])
                }
                Mode::Transform => {
                    arity("code", &code, 4)?;
                    let v = TransformParams::from_array([code[0], code[1], code[2], code[3]]);
                    rbox_out(&decode_transform(&hbox_arg("ref", &reference)?, &v)?, degrees)
                }
                Mode::Local => {
                    arity("code", &code, 5)?;
                    let t = LocalTarget::from_array([code[0], code[1], code[2], code[3], angle_in(code[4], degrees)]);
                    rbox_out(&decode_local(&rbox_arg("ref", &reference, degrees)?, &t)?, degrees)
                }
            };
            writeln!(out, "{line}")?;
        }
        Command::Anchors {
            shapes,
            scales,
            ratios,
            strides,
            out: dest,
        } => {
            let shapes = shapes.iter().map(|s| parse_shape(s)).collect::<Result<Vec<_>>>()?;
            let base = AnchorConfig::dota();
            let n = shapes.len();
            let cfg = AnchorConfig {
                scales: scales.unwrap_or_else(|| base.scales.iter().take(n).copied().collect()),
                aspect_ratios: ratios.unwrap_or(base.aspect_ratios),
                stride_per_level: strides.unwrap_or_else(|| base.stride_per_level.iter().take(n).copied().collect()),
            };
            let anchors = generate_anchors(&shapes, &cfg)?;
            let mut w = open_out(&dest, out)?;
            writeln!(w, "cx,cy,w,h")?;
            for a in &anchors {
                writeln!(w, "{},{},{},{}", a.cx, a.cy, a.w, a.h)?;
            }
            w.flush()?;
        }
        Command::Align {
            fmap,
            rbox,
            k,
            ks,
            stride,
            degrees,
            out: dest,
        } => {
            if !(stride.is_finite() && stride > 0.0) {
                return Err(Error::Config(format!("--stride {stride} must be positive")));
            }
            let f = with_path(&fmap, read_fmap_path(&fmap))?;
            let b = rbox_arg("box", &rbox, degrees)?;
            let b = RotatedBox::new(b.cx / stride, b.cy / stride, b.w / stride, b.h / stride, b.theta)?;
            let pooled = rroi_align(&f, &b, &RRoiAlignConfig { k, ks })?;
            with_path(&dest, write_fmap_path(&dest, &pooled))?;
        }
        Command::Centerpool { fmap, out: dest } => {
            let f = with_path(&fmap, read_fmap_path(&fmap))?;
            with_path(&dest, write_fmap_path(&dest, &center_pool(&f)))?;
        }
        Command::Tile {
            width,
            height,
            patch,
            stride,
            source,
            out: dest,
        } => {
            let tiles = tile_plan(&source, width, height, patch, stride)?;
            let mut w = open_out(&dest, out)?;
            write_manifest(&mut w, &tiles)?;
        }
        Command::Merge {
            manifest,
            dets_dir,
            nms,
            out: dest,
        } => {
            let file = with_path(&manifest, File::open(&manifest).map_err(Error::from))?;
            let specs = read_manifest(BufReader::new(file))?;
            let mut entries: Vec<PathBuf> = with_path(&dets_dir, fs::read_dir(&dets_dir).map_err(Error::from))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            entries.sort();
            let mut classes = ClassMap::new();
            let mut per_tile = Vec::with_capacity(entries.len());
            for p in entries {
                let tile_id = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let dets = with_path(&p, read_box_csv_path(&p, &mut classes))?;
                per_tile.push((tile_id, dets));
            }
            let merged = merge_detections(&per_tile, &specs, nms)?;
            write_box_csv(open_out(&dest, out)?, &merged, &classes)?;
            writeln!(err, "merged {} tiles into {} boxes", per_tile.len(), merged.len())?;
        }
        Command::Eval {
            dets,
            gt,
            iou,
            interp,
            keep_difficult,
        } => {
            let mut classes = ClassMap::new();
            let gts = load_gt(&gt, &mut classes)?;
            let dets = with_path(&dets, read_box_csv_path(&dets, &mut classes))?;
            let cfg = EvalConfig {
                iou_thresh: iou,
                interpolation: match interp {
                    Interp::AllPoint => Interpolation::AllPoint,
                    Interp::ElevenPoint => Interpolation::ElevenPoint,
                },
                ignore_difficult: !keep_difficult,
            };
            let result = map_evaluate(&dets, &gts, &classes, &cfg)?;
            for (name, ap) in &result.per_class_ap {
                writeln!(out, "{name}\t{ap:.6}")?;
            }
            writeln!(out, "mAP\t{:.6}", result.map)?;
        }
        Command::Synth {
            seed,
            out_dir,
            width,
            height,
            count,
        } => {
            let cfg = SceneConfig {
                width,
                height,
                count,
                ..Default::default()
            };
            let s = scene(seed, &cfg)?;
            with_path(&out_dir, fs::create_dir_all(&out_dir).map_err(Error::from))?;
            let gt_path = out_dir.join("gt.txt");
            with_path(
                &gt_path,
                fs::write(&gt_path, format_dota(&s.annotations())).map_err(Error::from),
            )?;
            let det_path = out_dir.join("dets.csv");
            with_path(&det_path, write_box_csv_path(&det_path, &s.detections, &s.classes))?;
            writeln!(err, "wrote {} and {}", gt_path.display(), det_path.display())?;
        }
        Command::Selftest => {
            let results = crate::selftest::run();
            let failed = results.iter().filter(|r| !r.passed).count();
            for r in &results {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                if r.detail.is_empty() {
                    writeln!(out, "{tag} {}", r.name)?;
                } else {
                    writeln!(out, "{tag} {} ({})", r.name, r.detail)?;
                }
            }
            writeln!(out, "{} passed, {failed} failed", results.len() - failed)?;
            return Ok(i32::from(failed > 0));
        }
    }
    Ok(0)
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code: 0 on success, 1 on runtime errors, 2 on
/// usage errors.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    2
                }
            };
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if matches!(e, Error::Config(_)) {
                2
            } else {
                1
            }
        }
    }
}
