//! `dcor`: fisheye rectification, a small block codec, quality metrics, and
//! preDCOR/postDCOR experiment runs behind one binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure. Metric output is
//! printed with six decimals so scripts can compare it textually.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use dcor_core::codec::{decode, encode, Bitstream, CodecConfig, CodecMode};
use dcor_core::metrics::{
    bd_quality, bd_rate, psnr_y, read_rd_csv, ssim, QualityKind, RdCurve, SweepPoint,
};
use dcor_core::pipeline::report::render_tables;
use dcor_core::rectify::rectify_sequence;
use dcor_core::video::{
    read_yuv, synthesize_fisheye_sequence, write_yuv, SceneKind, VideoSequence,
};
use dcor_core::{
    fixtures, parse_intrinsics, run_experiment, CameraIntrinsics, ExperimentSpec, Interp,
    IntrinsicsFormat, SequenceFormat, ZoomFactor,
};

#[derive(Parser)]
#[command(
    name = "dcor",
    version,
    about = "Fisheye rectification and rectify-before vs rectify-after codec comparison"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rectify a raw video file through a calibrated camera model.
    Rectify(RectifyArgs),
    /// Generate a synthetic fisheye test sequence.
    Synth(SynthArgs),
    /// Encode raw video with the built-in block codec.
    Encode(EncodeArgs),
    /// Decode a built-in-codec bitstream back to raw video.
    Decode(DecodeArgs),
    /// Mean luma PSNR between two raw video files, in dB.
    Psnr(PairArgs),
    /// Mean SSIM between two raw video files.
    Ssim(PairArgs),
    /// Bjontegaard deltas between two rate-distortion CSV files.
    Bd(BdArgs),
    /// Run a preDCOR/postDCOR experiment from a JSON spec file.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    /// 8-bit luma planes only.
    LumaOnly,
    /// Planar YUV 4:2:0.
    Yuv420,
}

impl From<FormatArg> for SequenceFormat {
    fn from(v: FormatArg) -> Self {
        match v {
            FormatArg::LumaOnly => SequenceFormat::LumaOnly,
            FormatArg::Yuv420 => SequenceFormat::Yuv420,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum IntrinsicsArg {
    /// Plain-text calibration dump: coefficient count and values, center,
    /// stretch, sensor size.
    OcamcalibText,
    /// JSON object with the same fields.
    StructuredJson,
}

impl From<IntrinsicsArg> for IntrinsicsFormat {
    fn from(v: IntrinsicsArg) -> Self {
        match v {
            IntrinsicsArg::OcamcalibText => IntrinsicsFormat::OcamcalibText,
            IntrinsicsArg::StructuredJson => IntrinsicsFormat::StructuredJson,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InterpArg {
    Nearest,
    Bilinear,
}

impl From<InterpArg> for Interp {
    fn from(v: InterpArg) -> Self {
        match v {
            InterpArg::Nearest => Interp::Nearest,
            InterpArg::Bilinear => Interp::Bilinear,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SceneArg {
    Checker,
    LineField,
    TexturedNoise,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Intra,
    Lowdelay,
}

impl From<ModeArg> for CodecMode {
    fn from(v: ModeArg) -> Self {
        match v {
            ModeArg::Intra => CodecMode::Intra,
            ModeArg::Lowdelay => CodecMode::LowDelay,
        }
    }
}

#[derive(Args)]
struct RectifyArgs {
    /// Camera calibration file.
    #[arg(long)]
    intrinsics: PathBuf,
    /// Calibration file layout.
    #[arg(long, value_enum, default_value_t = IntrinsicsArg::OcamcalibText)]
    intrinsics_format: IntrinsicsArg,
    /// Zoom factor of the perspective view.
    #[arg(long)]
    sf: f64,
    /// Input raw video; geometry must match the calibration's sensor.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Input geometry as WxH, e.g. 320x240.
    #[arg(long, value_parser = parse_size)]
    size: (usize, usize),
    /// Pixel layout of the input (the output keeps it).
    #[arg(long, value_enum, default_value_t = FormatArg::Yuv420)]
    format: FormatArg,
    /// Output geometry as WxH (default: same as input).
    #[arg(long, value_parser = parse_size)]
    out_size: Option<(usize, usize)>,
    /// Resampling kernel.
    #[arg(long, value_enum, default_value_t = InterpArg::Bilinear)]
    interp: InterpArg,
    /// Read at most this many frames.
    #[arg(long)]
    frames: Option<usize>,
    /// Output raw video path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Built-in camera name: wide_circular, offcenter_affine, strong_quartic.
    #[arg(
        long,
        conflicts_with = "intrinsics",
        required_unless_present = "intrinsics"
    )]
    fixture: Option<String>,
    /// Camera calibration file (alternative to --fixture).
    #[arg(long)]
    intrinsics: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = IntrinsicsArg::OcamcalibText)]
    intrinsics_format: IntrinsicsArg,
    /// Scene painted on the plane the camera looks at.
    #[arg(long, value_enum, default_value_t = SceneArg::TexturedNoise)]
    scene: SceneArg,
    /// Noise seed (textured-noise scenes).
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Number of frames to generate.
    #[arg(long)]
    frames: usize,
    /// Per-frame scene translation as "dr,dc" in scene units.
    #[arg(long, value_parser = parse_motion, default_value = "0,0")]
    motion: (f64, f64),
    #[arg(long, value_enum, default_value_t = FormatArg::Yuv420)]
    format: FormatArg,
    /// Output raw video path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    /// Input raw video.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Input geometry as WxH.
    #[arg(long, value_parser = parse_size)]
    size: (usize, usize),
    /// Pixel layout of the input; only luma is coded.
    #[arg(long, value_enum, default_value_t = FormatArg::LumaOnly)]
    format: FormatArg,
    /// Coding mode.
    #[arg(long, value_enum, default_value_t = ModeArg::Lowdelay)]
    mode: ModeArg,
    /// Quantization parameter.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=51))]
    qp: u8,
    /// Motion search radius in pixels.
    #[arg(long, default_value_t = 8)]
    radius: u8,
    /// Encode at most this many frames.
    #[arg(long)]
    frames: Option<usize>,
    /// Output bitstream path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    /// Input bitstream.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Output raw video path (luma planes).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PairArgs {
    /// First raw video file.
    a: PathBuf,
    /// Second raw video file; must share geometry and layout with the first.
    b: PathBuf,
    /// Geometry of both files as WxH.
    #[arg(long, value_parser = parse_size)]
    size: (usize, usize),
    #[arg(long, value_enum, default_value_t = FormatArg::Yuv420)]
    format: FormatArg,
    /// Compare at most this many frames.
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Args)]
struct BdArgs {
    /// Reference curve CSV (qp,rate_bpp,psnr_y_db,ssim).
    reference: PathBuf,
    /// Test curve CSV; deltas are test relative to reference.
    test: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment spec JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Write report files here, overriding the spec's output_dir.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| format!("expected a positive pixel count, got {t:?}"))
    };
    Ok((parse(w)?, parse(h)?))
}

fn parse_motion(s: &str) -> Result<(f64, f64), String> {
    let (r, c) = s
        .split_once(',')
        .ok_or_else(|| format!("expected \"dr,dc\", got {s:?}"))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("expected a number, got {t:?}"))
    };
    Ok((parse(r)?, parse(c)?))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if usage_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    if let Some(jobs) = cli.jobs {
        // A second configuration attempt in one process is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), String> {
    match command {
        Command::Rectify(args) => cmd_rectify(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Encode(args) => cmd_encode(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Psnr(args) => cmd_psnr(args),
        Command::Ssim(args) => cmd_ssim(args),
        Command::Bd(args) => cmd_bd(args),
        Command::Run(args) => cmd_run(args),
    }
}

fn load_intrinsics(path: &Path, format: IntrinsicsArg) -> Result<CameraIntrinsics, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_intrinsics(&text, format.into()).map_err(|e| e.to_string())
}

fn cmd_rectify(args: RectifyArgs) -> Result<(), String> {
    let cam = load_intrinsics(&args.intrinsics, args.intrinsics_format)?;
    let sf = ZoomFactor::new(args.sf).map_err(|e| e.to_string())?;
    let (w, h) = args.size;
    let seq =
        read_yuv(&args.input, w, h, args.format.into(), args.frames).map_err(|e| e.to_string())?;
    let out_size = args.out_size.map(|(w, h)| (h, w));
    let out = rectify_sequence(&seq, &cam, sf, out_size, args.interp.into())
        .map_err(|e| e.to_string())?;
    write_yuv(&out, &args.out).map_err(|e| e.to_string())?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), String> {
    let cam = match (&args.fixture, &args.intrinsics) {
        (Some(name), None) => {
            fixtures::by_name(name).ok_or_else(|| format!("unknown fixture {name:?}"))?
        }
        (None, Some(path)) => load_intrinsics(path, args.intrinsics_format)?,
        _ => unreachable!("clap enforces exactly one camera source"),
    };
    let scene = match args.scene {
        SceneArg::Checker => SceneKind::Checker,
        SceneArg::LineField => SceneKind::LineField,
        SceneArg::TexturedNoise => SceneKind::TexturedNoise { seed: args.seed },
    };
    let seq =
        synthesize_fisheye_sequence(&cam, scene, args.frames, args.motion, args.format.into())
            .map_err(|e| e.to_string())?;
    write_yuv(&seq, &args.out).map_err(|e| e.to_string())?;
    Ok(())
}

fn cmd_encode(args: EncodeArgs) -> Result<(), String> {
    let (w, h) = args.size;
    let seq =
        read_yuv(&args.input, w, h, args.format.into(), args.frames).map_err(|e| e.to_string())?;
    let cfg = CodecConfig::new(args.mode.into(), args.qp)
        .map_err(|e| e.to_string())?
        .with_search_radius(args.radius);
    let bs = encode(&seq, &cfg).map_err(|e| e.to_string())?;
    fs::write(&args.out, bs.as_bytes())
        .map_err(|e| format!("cannot write {}: {e}", args.out.display()))?;
    Ok(())
}

fn cmd_decode(args: DecodeArgs) -> Result<(), String> {
    let bytes =
        fs::read(&args.input).map_err(|e| format!("cannot read {}: {e}", args.input.display()))?;
    let seq = decode(&Bitstream::from_bytes(bytes)).map_err(|e| e.to_string())?;
    write_yuv(&seq, &args.out).map_err(|e| e.to_string())?;
    Ok(())
}

fn read_pair(args: &PairArgs) -> Result<(VideoSequence, VideoSequence), String> {
    let (w, h) = args.size;
    let a = read_yuv(&args.a, w, h, args.format.into(), args.frames).map_err(|e| e.to_string())?;
    let b = read_yuv(&args.b, w, h, args.format.into(), args.frames).map_err(|e| e.to_string())?;
    Ok((a, b))
}

fn cmd_psnr(args: PairArgs) -> Result<(), String> {
    let (a, b) = read_pair(&args)?;
    let r = psnr_y(&a, &b).map_err(|e| e.to_string())?;
    println!("{:.6}", r.mean_db);
    Ok(())
}

fn cmd_ssim(args: PairArgs) -> Result<(), String> {
    let (a, b) = read_pair(&args)?;
    let s = ssim(&a, &b).map_err(|e| e.to_string())?;
    println!("{s:.6}");
    Ok(())
}

fn cmd_bd(args: BdArgs) -> Result<(), String> {
    let load = |path: &Path| -> Result<Vec<SweepPoint>, String> {
        read_rd_csv(path).map_err(|e| e.to_string())
    };
    let reference = load(&args.reference)?;
    let test = load(&args.test)?;
    let curve =
        |pts: &[SweepPoint], kind| RdCurve::from_sweep(pts, kind).map_err(|e| e.to_string());
    let ref_psnr = curve(&reference, QualityKind::Psnr)?;
    let test_psnr = curve(&test, QualityKind::Psnr)?;
    let ref_ssim = curve(&reference, QualityKind::Ssim)?;
    let test_ssim = curve(&test, QualityKind::Ssim)?;
    let bd_psnr = bd_quality(&ref_psnr, &test_psnr).map_err(|e| e.to_string())?;
    let bd_rate_pct = bd_rate(&ref_psnr, &test_psnr).map_err(|e| e.to_string())?;
    let delta_ssim = bd_quality(&ref_ssim, &test_ssim).map_err(|e| e.to_string())? * 100.0;
    println!("bd_psnr_db {bd_psnr:.6}");
    println!("bd_rate_percent {bd_rate_pct:.6}");
    println!("delta_ssim_x100 {delta_ssim:.6}");
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), String> {
    let text = fs::read_to_string(&args.spec)
        .map_err(|e| format!("cannot read {}: {e}", args.spec.display()))?;
    let mut spec = ExperimentSpec::from_json(&text).map_err(|e| e.to_string())?;
    if let Some(dir) = args.output_dir {
        spec.output_dir = Some(dir);
    }
    let report = run_experiment(&spec).map_err(|e| e.to_string())?;
    print!("{}", render_tables(&report));
    Ok(())
}
