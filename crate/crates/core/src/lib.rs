//! Fisheye-video rectification and coding-order benchmarking.
//!
//! The library models a radially distorted (fisheye) camera with a polynomial
//! imaging function, builds perspective rectification lookup tables from it,
//! and compares the two ways of combining rectification with a video codec:
//! correcting before encoding (*preDCOR*) versus after decoding (*postDCOR*).
//! Rate-distortion results are summarized with PSNR-Y, SSIM, bits per pixel,
//! and Bjøntegaard deltas.
//!
//! Module map:
//! - [`camera`]: polynomial camera model, forward and inverse projection
//! - [`rectify`]: rectification LUTs and frame resampling
//! - [`video`]: raw YUV I/O and synthetic fisheye sequence generation
//! - [`codec`]: built-in block-DCT hybrid codec (intra + low-delay)
//! - [`adapter`]: template-driven external encoder/decoder runner
//! - [`metrics`]: PSNR, SSIM, bpp, Bjøntegaard deltas
//! - [`pipeline`]: preDCOR/postDCOR experiment orchestration and reports

pub mod adapter;
pub mod camera;
pub mod codec;
pub mod fixtures;
pub mod metrics;
pub mod pipeline;
pub mod rectify;
pub mod video;

pub use adapter::{AdapterError, CodecProfile};
pub use camera::{parse_intrinsics, CameraError, CameraIntrinsics, IntrinsicsFormat, Ray3};
pub use codec::{Bitstream, CodecConfig, CodecError, CodecMode};
pub use metrics::{MetricError, QualityKind, RdCurve, RdPoint};
pub use pipeline::{run_experiment, ExperimentReport, ExperimentSpec, PipelineError};
pub use rectify::{Interp, RectifyError, RemapLut, ZoomFactor};
pub use video::{FramePlane, SequenceFormat, VideoError, VideoSequence};
