//! End-to-end comparison of the two processing chain orders.
//!
//! The postDCOR chain encodes the distorted source and rectifies the decoded
//! output; the preDCOR chain rectifies first and encodes the perspective
//! video. Both are scored against the identical shared reference, the
//! rectified original, so the measured gap isolates the effect of the chain
//! order. [`run_experiment`] sweeps zoom factors, qps and codec modes and
//! assembles the report.

pub mod report;

use std::path::PathBuf;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::{run_profile, AdapterError, CodecProfile};
use crate::camera::{parse_intrinsics, CameraError, CameraIntrinsics, IntrinsicsFormat};
use crate::metrics::{
    bd_quality, bd_rate, bpp, psnr_y, ssim, MetricError, QualityKind, RdCurve, SweepPoint,
};
use crate::rectify::{rectify_sequence, Interp, RectifyError, ZoomFactor};
use crate::video::{
    read_yuv, synthesize_fisheye_sequence, SceneKind, SequenceFormat, VideoError, VideoSequence,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    /// The experiment description itself is invalid.
    #[error("spec error: {0}")]
    Spec(String),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Video(#[from] VideoError),
    #[error(transparent)]
    Rectify(#[from] RectifyError),
    #[error(transparent)]
    Codec(#[from] crate::codec::CodecError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn default_format() -> SequenceFormat {
    SequenceFormat::Yuv420
}

fn default_scene() -> SceneKind {
    SceneKind::TexturedNoise { seed: 7 }
}

fn default_intrinsics_format() -> IntrinsicsFormat {
    IntrinsicsFormat::OcamcalibText
}

fn default_zoom_factors() -> Vec<f64> {
    vec![5.0, 7.0, 9.0]
}

fn default_qps() -> Vec<i32> {
    vec![24, 28, 32, 36, 40]
}

fn default_search_radius() -> u8 {
    8
}

fn default_modes() -> Vec<crate::codec::CodecMode> {
    vec![
        crate::codec::CodecMode::Intra,
        crate::codec::CodecMode::LowDelay,
    ]
}

fn default_interp() -> Interp {
    Interp::Bilinear
}

fn default_timeout_secs() -> u64 {
    3600
}

/// Source video: an on-disk planar YUV file or a synthetic sequence rendered
/// through the experiment's camera.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    File {
        path: PathBuf,
        width: usize,
        height: usize,
        #[serde(default = "default_format")]
        format: SequenceFormat,
        #[serde(default)]
        frames: Option<usize>,
    },
    Synthesize {
        width: usize,
        height: usize,
        frames: usize,
        #[serde(default = "default_scene")]
        scene: SceneKind,
        #[serde(default)]
        motion: (f64, f64),
        #[serde(default = "default_format")]
        format: SequenceFormat,
    },
}

/// Camera calibration: a file in a supported format or a named built-in
/// test camera.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CameraSpec {
    File {
        path: PathBuf,
        #[serde(default = "default_intrinsics_format")]
        format: IntrinsicsFormat,
    },
    Fixture(String),
}

/// Which codec the sweep drives.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CodecChoice {
    Builtin {
        #[serde(default = "default_modes")]
        modes: Vec<crate::codec::CodecMode>,
        #[serde(default = "default_search_radius")]
        search_radius: u8,
    },
    External(CodecProfile),
}

impl Default for CodecChoice {
    fn default() -> Self {
        CodecChoice::Builtin {
            modes: default_modes(),
            search_radius: default_search_radius(),
        }
    }
}

/// Complete experiment description, deserializable from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub input: InputSpec,
    pub camera: CameraSpec,
    #[serde(default = "default_zoom_factors")]
    pub zoom_factors: Vec<f64>,
    #[serde(default = "default_qps")]
    pub qps: Vec<i32>,
    #[serde(default)]
    pub codec: CodecChoice,
    #[serde(default = "default_interp")]
    pub interpolation: Interp,
    /// When set, [`run_experiment`] writes the report files here.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Per-invocation limit for external codec commands.
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let spec: ExperimentSpec =
            serde_json::from_str(text).map_err(|e| PipelineError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.zoom_factors.is_empty() {
            return Err(PipelineError::Spec("zoom factor list is empty".into()));
        }
        for &sf in &self.zoom_factors {
            if !(sf.is_finite() && sf > 0.0) {
                return Err(PipelineError::Spec(format!(
                    "zoom factor {sf} is not a positive real"
                )));
            }
        }
        if self.qps.len() < 4 {
            return Err(PipelineError::Spec(format!(
                "need at least 4 qps for the rate-distortion deltas, got {}",
                self.qps.len()
            )));
        }
        let mut sorted = self.qps.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(PipelineError::Spec("qp list contains duplicates".into()));
        }
        match &self.codec {
            CodecChoice::Builtin { modes, .. } => {
                if modes.is_empty() {
                    return Err(PipelineError::Spec("mode list is empty".into()));
                }
                if let Some(&bad) = self.qps.iter().find(|&&q| !(0..=51).contains(&q)) {
                    return Err(PipelineError::Spec(format!(
                        "built-in codec accepts qp in [0, 51], got {bad}"
                    )));
                }
            }
            CodecChoice::External(profile) => profile.validate()?,
        }
        if let InputSpec::Synthesize { frames, .. } = &self.input {
            if *frames == 0 {
                return Err(PipelineError::Spec(
                    "synthetic input needs frames >= 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Loaded inputs, ready for chain runs.
pub struct PreparedExperiment {
    pub original: VideoSequence,
    pub camera: CameraIntrinsics,
    pub input_desc: String,
    pub camera_desc: String,
}

pub fn prepare(spec: &ExperimentSpec) -> Result<PreparedExperiment, PipelineError> {
    let (camera, camera_desc) = match &spec.camera {
        CameraSpec::File { path, format } => {
            let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
                path: path.clone(),
                source: e,
            })?;
            let k = parse_intrinsics(&text, *format)?;
            (k, format!("calibration file {}", path.display()))
        }
        CameraSpec::Fixture(name) => {
            let k = crate::fixtures::by_name(name)
                .ok_or_else(|| PipelineError::Spec(format!("unknown camera fixture `{name}`")))?;
            (k, format!("built-in camera `{name}`"))
        }
    };
    let (original, input_desc) = match &spec.input {
        InputSpec::File {
            path,
            width,
            height,
            format,
            frames,
        } => {
            let seq = read_yuv(path, *width, *height, *format, *frames)?;
            let desc = format!(
                "file {}, {}x{} {}, {} frames",
                path.display(),
                width,
                height,
                format_name(*format),
                seq.num_frames()
            );
            (seq, desc)
        }
        InputSpec::Synthesize {
            width,
            height,
            frames,
            scene,
            motion,
            format,
        } => {
            let (sh, sw) = camera.sensor_size();
            if *width != sw as usize || *height != sh as usize {
                return Err(PipelineError::Spec(format!(
                    "synthetic geometry {width}x{height} does not match the camera sensor {sw}x{sh}"
                )));
            }
            let seq = synthesize_fisheye_sequence(&camera, *scene, *frames, *motion, *format)?;
            let desc = format!(
                "synthetic {scene:?}, {width}x{height} {}, {frames} frames, motion ({}, {})",
                format_name(*format),
                motion.0,
                motion.1
            );
            (seq, desc)
        }
    };
    let (sh, sw) = camera.sensor_size();
    if original.width() != sw as usize || original.height() != sh as usize {
        return Err(PipelineError::Spec(format!(
            "input geometry {}x{} does not match the camera sensor {sw}x{sh}",
            original.width(),
            original.height()
        )));
    }
    Ok(PreparedExperiment {
        original,
        camera,
        input_desc,
        camera_desc,
    })
}

fn format_name(f: SequenceFormat) -> &'static str {
    match f {
        SequenceFormat::LumaOnly => "luma only",
        SequenceFormat::Yuv420 => "yuv 4:2:0",
    }
}

/// One concrete codec configuration driven through the sweep.
#[derive(Debug, Clone)]
pub enum CodecRun {
    Builtin {
        mode: crate::codec::CodecMode,
        search_radius: u8,
    },
    External {
        profile: CodecProfile,
        timeout: Duration,
    },
}

impl CodecRun {
    /// Mode column label in tables and csv names.
    pub fn label(&self) -> String {
        match self {
            CodecRun::Builtin { mode, .. } => mode.name().to_string(),
            CodecRun::External { profile, .. } => profile.name.clone(),
        }
    }

    /// Encode+decode at one qp, returning the decoded sequence and the
    /// coded size in bits.
    pub fn code(
        &self,
        seq: &VideoSequence,
        qp: i32,
    ) -> Result<(VideoSequence, u64), PipelineError> {
        match self {
            CodecRun::Builtin {
                mode,
                search_radius,
            } => {
                let qp8 = u8::try_from(qp).ok().filter(|&q| q <= 51).ok_or_else(|| {
                    PipelineError::Spec(format!("built-in codec accepts qp in [0, 51], got {qp}"))
                })?;
                let cfg =
                    crate::codec::CodecConfig::new(*mode, qp8)?.with_search_radius(*search_radius);
                // The encoder's closed-loop reconstruction is bit-identical
                // to the decoder output, so no separate decode pass is run.
                let (bs, recon) = crate::codec::encode_with_reconstruction(seq, &cfg)?;
                Ok((recon, bs.size_bits()))
            }
            CodecRun::External { profile, timeout } => {
                let out = run_profile(profile, seq, qp, *timeout)?;
                Ok((out.decoded, out.size_bits))
            }
        }
    }
}

fn codec_runs(choice: &CodecChoice, timeout_secs: u64) -> Vec<CodecRun> {
    match choice {
        CodecChoice::Builtin {
            modes,
            search_radius,
        } => modes
            .iter()
            .map(|&mode| CodecRun::Builtin {
                mode,
                search_radius: *search_radius,
            })
            .collect(),
        CodecChoice::External(profile) => vec![CodecRun::External {
            profile: profile.clone(),
            timeout: Duration::from_secs(timeout_secs),
        }],
    }
}

/// Which end of the processing chain the rectification sits at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chain {
    Postdcor,
    Predcor,
}

impl Chain {
    /// Lowercase file-name form.
    pub fn name(self) -> &'static str {
        match self {
            Chain::Postdcor => "postdcor",
            Chain::Predcor => "predcor",
        }
    }

    /// Mixed-case table form.
    pub fn label(self) -> &'static str {
        match self {
            Chain::Postdcor => "postDCOR",
            Chain::Predcor => "preDCOR",
        }
    }
}

/// Fixed per-zoom-factor state shared by every cell: the source, the camera
/// and the shared reference both chains are scored against.
pub struct ChainContext<'a> {
    original: &'a VideoSequence,
    camera: &'a CameraIntrinsics,
    sf: ZoomFactor,
    interp: Interp,
    reference: VideoSequence,
}

impl<'a> ChainContext<'a> {
    pub fn new(
        original: &'a VideoSequence,
        camera: &'a CameraIntrinsics,
        sf: f64,
        interp: Interp,
    ) -> Result<Self, PipelineError> {
        let sf = ZoomFactor::new(sf)?;
        let reference = rectify_sequence(original, camera, sf, None, interp)?;
        Ok(ChainContext {
            original,
            camera,
            sf,
            interp,
            reference,
        })
    }

    /// The rectified original both chains are compared against.
    pub fn reference(&self) -> &VideoSequence {
        &self.reference
    }
}

/// One measured sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub qp: i32,
    /// Bits per luma pixel of the chain's own coded raster.
    pub rate_bpp: f64,
    pub size_bits: u64,
    pub psnr_y_db: f64,
    /// True when at least one frame was lossless and hit the PSNR cap.
    pub psnr_capped: bool,
    pub ssim: f64,
}

impl CellResult {
    pub fn sweep_point(&self) -> SweepPoint {
        SweepPoint {
            qp: self.qp,
            rate_bpp: self.rate_bpp,
            psnr_y_db: self.psnr_y_db,
            ssim: self.ssim,
        }
    }
}

fn score(
    ctx: &ChainContext,
    qp: i32,
    size_bits: u64,
    coded: &VideoSequence,
    output: &VideoSequence,
) -> Result<CellResult, PipelineError> {
    let p = psnr_y(ctx.reference(), output)?;
    let s = ssim(ctx.reference(), output)?;
    Ok(CellResult {
        qp,
        rate_bpp: bpp(size_bits, coded.width(), coded.height(), coded.num_frames()),
        size_bits,
        psnr_y_db: p.mean_db,
        psnr_capped: p.capped,
        ssim: s,
    })
}

/// Conventional order: encode the distorted source, decode, then rectify.
/// Rate is accounted on the distorted raster.
pub fn run_postdcor(
    ctx: &ChainContext,
    codec: &CodecRun,
    qp: i32,
) -> Result<CellResult, PipelineError> {
    let (decoded, size_bits) = codec.code(ctx.original, qp)?;
    let rectified = rectify_sequence(&decoded, ctx.camera, ctx.sf, None, ctx.interp)?;
    score(ctx, qp, size_bits, ctx.original, &rectified)
}

/// Proposed order: rectify first, then encode the perspective video. The
/// encoder input is exactly the shared reference; rate is accounted on the
/// rectified raster.
pub fn run_predcor(
    ctx: &ChainContext,
    codec: &CodecRun,
    qp: i32,
) -> Result<CellResult, PipelineError> {
    let (decoded, size_bits) = codec.code(ctx.reference(), qp)?;
    score(ctx, qp, size_bits, ctx.reference(), &decoded)
}

/// Rate-quality points of one (chain, mode, zoom factor) combination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveRecord {
    pub chain: Chain,
    pub mode: String,
    pub sf: f64,
    pub points: Vec<CellResult>,
}

/// preDCOR-vs-postDCOR deltas for one (zoom factor, mode) cell. Positive
/// BD-PSNR and delta-SSIM favor preDCOR; negative BD-rate means preDCOR
/// spends fewer bits. Deltas are absent when either underlying curve is.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub sf: f64,
    pub mode: String,
    pub bd_psnr_db: Option<f64>,
    pub bd_rate_percent: Option<f64>,
    pub delta_ssim_x100: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A sweep cell that failed; the report keeps the gap visible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncompleteCell {
    pub chain: Chain,
    pub mode: String,
    pub sf: f64,
    pub qp: i32,
    pub error: String,
}

/// Everything the run measured, plus enough context to re-read the numbers
/// without the tool at hand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub comparisons: Vec<Comparison>,
    pub curves: Vec<CurveRecord>,
    pub incomplete: Vec<IncompleteCell>,
}

/// Conventions and identities the numbers depend on. Deliberately free of
/// timestamps and machine state so reruns are byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub input: String,
    pub camera: String,
    pub rectified_geometry: String,
    pub zoom_factors: Vec<f64>,
    pub zoom_semantics: String,
    pub qps: Vec<i32>,
    pub codec: String,
    pub interpolation: String,
    pub psnr_convention: String,
    pub bd_convention: String,
    pub sign_convention: String,
}

/// Sweeps (zoom factor x mode x chain x qp), computes the BD deltas with the
/// postDCOR curves as reference, and writes the report files when the spec
/// names an output directory.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, PipelineError> {
    spec.validate()?;
    let prep = prepare(spec)?;
    let report = run_prepared(spec, &prep)?;
    if let Some(dir) = &spec.output_dir {
        report::write_report(&report, dir)?;
    }
    Ok(report)
}

/// The sweep itself, without file output.
pub fn run_prepared(
    spec: &ExperimentSpec,
    prep: &PreparedExperiment,
) -> Result<ExperimentReport, PipelineError> {
    let runs = codec_runs(&spec.codec, spec.timeout_secs);
    let chains = [Chain::Postdcor, Chain::Predcor];

    let contexts: Vec<Result<ChainContext, String>> = spec
        .zoom_factors
        .iter()
        .map(|&sf| {
            ChainContext::new(&prep.original, &prep.camera, sf, spec.interpolation)
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut incomplete = Vec::new();
    let mut jobs = Vec::new();
    for (si, sf) in spec.zoom_factors.iter().enumerate() {
        match &contexts[si] {
            Ok(_) => {
                for (ri, _) in runs.iter().enumerate() {
                    for &chain in &chains {
                        for &qp in &spec.qps {
                            jobs.push((si, ri, chain, qp));
                        }
                    }
                }
            }
            Err(e) => {
                for run in &runs {
                    for &chain in &chains {
                        for &qp in &spec.qps {
                            incomplete.push(IncompleteCell {
                                chain,
                                mode: run.label(),
                                sf: *sf,
                                qp,
                                error: e.clone(),
                            });
                        }
                    }
                }
            }
        }
    }

    let outcomes: Vec<Result<CellResult, String>> = jobs
        .par_iter()
        .map(|&(si, ri, chain, qp)| {
            let ctx = contexts[si]
                .as_ref()
                .expect("jobs only cover built contexts");
            let run = &runs[ri];
            match chain {
                Chain::Postdcor => run_postdcor(ctx, run, qp),
                Chain::Predcor => run_predcor(ctx, run, qp),
            }
            .map_err(|e| e.to_string())
        })
        .collect();

    let mut cell_of = std::collections::HashMap::new();
    for (job, outcome) in jobs.iter().zip(outcomes) {
        cell_of.insert(*job, outcome);
    }

    let mut curves = Vec::new();
    let mut comparisons = Vec::new();
    for (si, &sf) in spec.zoom_factors.iter().enumerate() {
        if contexts[si].is_err() {
            for run in &runs {
                comparisons.push(Comparison {
                    sf,
                    mode: run.label(),
                    bd_psnr_db: None,
                    bd_rate_percent: None,
                    delta_ssim_x100: None,
                    note: Some("rectification context failed; see incomplete cells".into()),
                });
            }
            continue;
        }
        for (ri, run) in runs.iter().enumerate() {
            let mut per_chain: Vec<Vec<CellResult>> = vec![Vec::new(), Vec::new()];
            for (ci, &chain) in chains.iter().enumerate() {
                for &qp in &spec.qps {
                    match cell_of.get(&(si, ri, chain, qp)) {
                        Some(Ok(cell)) => per_chain[ci].push(cell.clone()),
                        Some(Err(e)) => incomplete.push(IncompleteCell {
                            chain,
                            mode: run.label(),
                            sf,
                            qp,
                            error: e.clone(),
                        }),
                        None => unreachable!("every job has an outcome"),
                    }
                }
                curves.push(CurveRecord {
                    chain,
                    mode: run.label(),
                    sf,
                    points: per_chain[ci].clone(),
                });
            }
            comparisons.push(compare(sf, run.label(), &per_chain[0], &per_chain[1]));
        }
    }

    let (rh, rw) = (prep.original.height(), prep.original.width());
    let provenance = Provenance {
        tool: "dcor".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        input: prep.input_desc.clone(),
        camera: format!(
            "{} (sensor {}x{})",
            prep.camera_desc,
            prep.camera.sensor_size().1,
            prep.camera.sensor_size().0
        ),
        rectified_geometry: format!("{rw}x{rh} per frame, same raster size as the input"),
        zoom_factors: spec.zoom_factors.clone(),
        zoom_semantics: "DCOR<sf> = rectification at zoom factor sf; the virtual perspective \
                         camera uses focal length (output width)/sf, so larger sf renders a \
                         wider view"
            .into(),
        qps: spec.qps.clone(),
        codec: match &spec.codec {
            CodecChoice::Builtin {
                modes,
                search_radius,
            } => format!(
                "built-in block codec, modes [{}], search radius {}",
                modes
                    .iter()
                    .map(|m| m.name())
                    .collect::<Vec<_>>()
                    .join(", "),
                search_radius
            ),
            CodecChoice::External(p) => format!("external profile `{}`", p.name),
        },
        interpolation: match spec.interpolation {
            Interp::Nearest => "nearest".into(),
            Interp::Bilinear => "bilinear".into(),
        },
        psnr_convention: "sequence PSNR-Y is the arithmetic mean of per-frame values, with \
                          lossless frames capped at 100 dB"
            .into(),
        bd_convention: "BD deltas integrate cubic fits over the overlapping range of both \
                        curves, with the postDCOR curve as reference; identical curves give \
                        exactly zero"
            .into(),
        sign_convention: "positive BD-PSNR and positive delta-SSIM favor preDCOR; negative \
                          BD-rate means preDCOR spends fewer bits"
            .into(),
    };

    Ok(ExperimentReport {
        provenance,
        comparisons,
        curves,
        incomplete,
    })
}

fn curve_from(points: &[CellResult], kind: QualityKind) -> Result<RdCurve, String> {
    let sweep: Vec<SweepPoint> = points.iter().map(CellResult::sweep_point).collect();
    RdCurve::from_sweep(&sweep, kind).map_err(|e| e.to_string())
}

fn compare(sf: f64, mode: String, post: &[CellResult], pre: &[CellResult]) -> Comparison {
    let mut notes = Vec::new();
    let mut bd_psnr_db = None;
    let mut bd_rate_percent = None;
    let mut delta_ssim_x100 = None;

    match (
        curve_from(post, QualityKind::Psnr),
        curve_from(pre, QualityKind::Psnr),
    ) {
        (Ok(post_c), Ok(pre_c)) => {
            match bd_quality(&post_c, &pre_c) {
                Ok(v) => bd_psnr_db = Some(v),
                Err(e) => notes.push(format!("bd-psnr: {e}")),
            }
            match bd_rate(&post_c, &pre_c) {
                Ok(v) => bd_rate_percent = Some(v),
                Err(e) => notes.push(format!("bd-rate: {e}")),
            }
        }
        (post_r, pre_r) => {
            if let Err(e) = post_r {
                notes.push(format!("postDCOR psnr curve: {e}"));
            }
            if let Err(e) = pre_r {
                notes.push(format!("preDCOR psnr curve: {e}"));
            }
        }
    }

    match (
        curve_from(post, QualityKind::Ssim),
        curve_from(pre, QualityKind::Ssim),
    ) {
        (Ok(post_c), Ok(pre_c)) => match bd_quality(&post_c, &pre_c) {
            Ok(v) => delta_ssim_x100 = Some(v * 100.0),
            Err(e) => notes.push(format!("delta-ssim: {e}")),
        },
        (post_r, pre_r) => {
            if let Err(e) = post_r {
                notes.push(format!("postDCOR ssim curve: {e}"));
            }
            if let Err(e) = pre_r {
                notes.push(format!("preDCOR ssim curve: {e}"));
            }
        }
    }

    Comparison {
        sf,
        mode,
        bd_psnr_db,
        bd_rate_percent,
        delta_ssim_x100,
        note: if notes.is_empty() {
            None
        } else {
            Some(notes.join("; "))
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_with_reconstruction, CodecConfig, CodecMode};
    use crate::metrics::PSNR_CAP_DB;
    use std::fs;
    use std::io::Write as _;
    #[cfg(unix)]
    use std::os::unix::fs::PermissionsExt;
    use std::path::Path;

    use crate::adapter::Template;

    /// 64x64 fisheye, monotone elevation out to the corners.
    fn small_camera() -> CameraIntrinsics {
        CameraIntrinsics::new(
            [-40.0, 0.0, 5.0e-3, 0.0, 0.0],
            (32.0, 32.0),
            [1.0, 0.0, 0.0],
            (64, 64),
        )
        .unwrap()
    }

    fn small_seq(camera: &CameraIntrinsics, frames: usize) -> VideoSequence {
        synthesize_fisheye_sequence(
            camera,
            SceneKind::TexturedNoise { seed: 11 },
            frames,
            (1.5, -0.5),
            SequenceFormat::LumaOnly,
        )
        .unwrap()
    }

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            input: InputSpec::Synthesize {
                width: 320,
                height: 240,
                frames: 2,
                scene: SceneKind::TexturedNoise { seed: 3 },
                motion: (1.0, 0.5),
                format: SequenceFormat::LumaOnly,
            },
            camera: CameraSpec::Fixture("wide_circular".into()),
            zoom_factors: vec![5.0],
            qps: vec![24, 28, 32, 36],
            codec: CodecChoice::Builtin {
                modes: vec![CodecMode::Intra],
                search_radius: 8,
            },
            interpolation: Interp::Bilinear,
            output_dir: None,
            timeout_secs: 3600,
        }
    }

    #[test]
    fn spec_json_fills_defaults() {
        let spec = ExperimentSpec::from_json(
            r#"{
                "input": {"synthesize": {"width": 320, "height": 240, "frames": 2}},
                "camera": {"fixture": "wide_circular"}
            }"#,
        )
        .unwrap();
        assert_eq!(spec.zoom_factors, vec![5.0, 7.0, 9.0]);
        assert_eq!(spec.qps, vec![24, 28, 32, 36, 40]);
        assert!(
            matches!(spec.codec, CodecChoice::Builtin { ref modes, search_radius: 8 }
            if modes == &[CodecMode::Intra, CodecMode::LowDelay])
        );
        assert_eq!(spec.interpolation, Interp::Bilinear);
        assert_eq!(spec.timeout_secs, 3600);
        assert!(spec.output_dir.is_none());
    }

    #[test]
    fn spec_validation_rejects_bad_lists() {
        let mut spec = small_spec();
        spec.zoom_factors.clear();
        assert!(matches!(spec.validate(), Err(PipelineError::Spec(_))));

        let mut spec = small_spec();
        spec.qps = vec![24, 28, 32];
        assert!(matches!(spec.validate(), Err(PipelineError::Spec(_))));

        let mut spec = small_spec();
        spec.qps = vec![24, 28, 28, 36];
        assert!(matches!(spec.validate(), Err(PipelineError::Spec(_))));

        let mut spec = small_spec();
        spec.qps = vec![24, 28, 32, 60];
        assert!(matches!(spec.validate(), Err(PipelineError::Spec(_))));
    }

    #[test]
    fn prepare_rejects_unknown_fixture_and_geometry_mismatch() {
        let mut spec = small_spec();
        spec.camera = CameraSpec::Fixture("no_such_camera".into());
        assert!(matches!(prepare(&spec), Err(PipelineError::Spec(_))));

        let mut spec = small_spec();
        if let InputSpec::Synthesize { width, .. } = &mut spec.input {
            *width = 300;
        }
        assert!(matches!(prepare(&spec), Err(PipelineError::Spec(_))));
    }

    #[test]
    fn postdcor_cell_matches_manual_composition() {
        let camera = small_camera();
        let seq = small_seq(&camera, 2);
        let ctx = ChainContext::new(&seq, &camera, 5.0, Interp::Bilinear).unwrap();
        let run = CodecRun::Builtin {
            mode: CodecMode::LowDelay,
            search_radius: 8,
        };
        let cell = run_postdcor(&ctx, &run, 30).unwrap();

        let cfg = CodecConfig::new(CodecMode::LowDelay, 30).unwrap();
        let (bs, recon) = encode_with_reconstruction(&seq, &cfg).unwrap();
        let rect = rectify_sequence(
            &recon,
            &camera,
            ZoomFactor::new(5.0).unwrap(),
            None,
            Interp::Bilinear,
        )
        .unwrap();
        let reference = rectify_sequence(
            &seq,
            &camera,
            ZoomFactor::new(5.0).unwrap(),
            None,
            Interp::Bilinear,
        )
        .unwrap();
        let p = psnr_y(&reference, &rect).unwrap();
        let s = ssim(&reference, &rect).unwrap();

        assert_eq!(cell.size_bits, bs.size_bits());
        assert_eq!(cell.rate_bpp, bpp(bs.size_bits(), 64, 64, 2));
        assert_eq!(cell.psnr_y_db, p.mean_db);
        assert_eq!(cell.ssim, s);
    }

    #[test]
    fn predcor_cell_matches_manual_composition() {
        let camera = small_camera();
        let seq = small_seq(&camera, 2);
        let ctx = ChainContext::new(&seq, &camera, 5.0, Interp::Bilinear).unwrap();
        let run = CodecRun::Builtin {
            mode: CodecMode::Intra,
            search_radius: 8,
        };
        let cell = run_predcor(&ctx, &run, 30).unwrap();

        let reference = rectify_sequence(
            &seq,
            &camera,
            ZoomFactor::new(5.0).unwrap(),
            None,
            Interp::Bilinear,
        )
        .unwrap();
        let cfg = CodecConfig::new(CodecMode::Intra, 30).unwrap();
        let (bs, recon) = encode_with_reconstruction(&reference, &cfg).unwrap();
        let p = psnr_y(&reference, &recon).unwrap();
        let s = ssim(&reference, &recon).unwrap();

        assert_eq!(cell.size_bits, bs.size_bits());
        assert_eq!(cell.psnr_y_db, p.mean_db);
        assert_eq!(cell.ssim, s);
    }

    #[test]
    fn rate_falls_as_qp_rises() {
        let camera = small_camera();
        let seq = small_seq(&camera, 1);
        let ctx = ChainContext::new(&seq, &camera, 5.0, Interp::Bilinear).unwrap();
        let run = CodecRun::Builtin {
            mode: CodecMode::Intra,
            search_radius: 8,
        };
        let lo = run_postdcor(&ctx, &run, 40).unwrap();
        let hi = run_postdcor(&ctx, &run, 24).unwrap();
        assert!(hi.rate_bpp > lo.rate_bpp);
    }

    fn write_shim(dir: &Path, name: &str, body: &str) -> String {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        writeln!(f, "#!/bin/sh").unwrap();
        writeln!(f, "{body}").unwrap();
        drop(f);
        #[cfg(unix)]
        fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
        path.display().to_string()
    }

    /// Identity pair whose coded size still falls with qp: the encoder
    /// copies the input and appends qp-dependent padding the decoder strips
    /// by cutting at the exact frame payload.
    fn identity_profile(dir: &Path, fail_at_qp: Option<i32>) -> CodecProfile {
        let guard = match fail_at_qp {
            Some(qp) => format!("[ \"$3\" = \"{qp}\" ] && exit 7\n"),
            None => String::new(),
        };
        let enc = write_shim(
            dir,
            "enc.sh",
            &format!("{guard}cp \"$1\" \"$2\"\nhead -c $(( (52 - $3) * 17 )) /dev/zero >> \"$2\""),
        );
        let dec = write_shim(dir, "dec.sh", "head -c $(( $2 * $3 * $4 )) \"$1\" > \"$5\"");
        CodecProfile {
            name: "identity".into(),
            encode: Template(vec![
                enc,
                "{input}".into(),
                "{output}".into(),
                "{qp}".into(),
            ]),
            decode: Template(vec![
                dec,
                "{input}".into(),
                "{width}".into(),
                "{height}".into(),
                "{frames}".into(),
                "{output}".into(),
            ]),
        }
    }

    #[test]
    #[cfg(unix)]
    fn identity_codec_caps_quality_and_zeroes_every_delta() {
        let shim_dir = tempfile::tempdir().unwrap();
        let out_dir = tempfile::tempdir().unwrap();
        let mut spec = small_spec();
        let camera = small_camera();
        let original = small_seq(&camera, 2);
        spec.codec = CodecChoice::External(identity_profile(shim_dir.path(), None));
        spec.output_dir = Some(out_dir.path().to_path_buf());
        let prep = PreparedExperiment {
            original,
            camera,
            input_desc: "synthetic".into(),
            camera_desc: "test camera".into(),
        };
        let report = run_prepared(&spec, &prep).unwrap();
        report::write_report(&report, out_dir.path()).unwrap();

        assert!(report.incomplete.is_empty());
        for curve in &report.curves {
            assert_eq!(curve.points.len(), 4);
            for p in &curve.points {
                assert_eq!(p.psnr_y_db, PSNR_CAP_DB);
                assert!(p.psnr_capped);
                assert_eq!(p.ssim, 1.0);
            }
        }
        for c in &report.comparisons {
            assert_eq!(c.bd_psnr_db, Some(0.0), "{:?}", c.note);
            assert_eq!(c.bd_rate_percent, Some(0.0));
            assert_eq!(c.delta_ssim_x100, Some(0.0));
        }
        assert!(out_dir.path().join("report.json").exists());
        assert!(out_dir.path().join("report.txt").exists());
        assert!(out_dir.path().join("postdcor_identity_DCOR5.csv").exists());
    }

    #[test]
    #[cfg(unix)]
    fn failing_cells_are_recorded_and_deltas_survive() {
        let shim_dir = tempfile::tempdir().unwrap();
        let camera = small_camera();
        let original = small_seq(&camera, 2);
        let mut spec = small_spec();
        spec.qps = vec![24, 28, 32, 36, 40];
        spec.codec = CodecChoice::External(identity_profile(shim_dir.path(), Some(32)));
        let prep = PreparedExperiment {
            original,
            camera,
            input_desc: "synthetic".into(),
            camera_desc: "test camera".into(),
        };
        let report = run_prepared(&spec, &prep).unwrap();

        assert_eq!(report.incomplete.len(), 2, "{:?}", report.incomplete);
        for cell in &report.incomplete {
            assert_eq!(cell.qp, 32);
        }
        for curve in &report.curves {
            assert_eq!(curve.points.len(), 4);
        }
        for c in &report.comparisons {
            assert_eq!(c.bd_psnr_db, Some(0.0), "{:?}", c.note);
            assert_eq!(c.bd_rate_percent, Some(0.0));
            assert_eq!(c.delta_ssim_x100, Some(0.0));
        }
    }

    #[test]
    fn reruns_write_identical_bytes() {
        let camera = small_camera();
        let original = small_seq(&camera, 2);
        let mut spec = small_spec();
        spec.qps = vec![24, 28, 32, 36];
        let prep = PreparedExperiment {
            original,
            camera,
            input_desc: "synthetic".into(),
            camera_desc: "test camera".into(),
        };
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let mut names = Vec::new();
        for dir in &dirs {
            let report = run_prepared(&spec, &prep).unwrap();
            let written = report::write_report(&report, dir.path()).unwrap();
            names = written
                .iter()
                .map(|p| p.file_name().unwrap().to_owned())
                .collect();
        }
        assert!(!names.is_empty());
        for name in names {
            let a = fs::read(dirs[0].path().join(&name)).unwrap();
            let b = fs::read(dirs[1].path().join(&name)).unwrap();
            assert_eq!(a, b, "{name:?} differs between reruns");
        }
    }
}
