//! Built-in hybrid block codec: 8x8 DCT intra coding plus full-search
//! motion-compensated inter coding with a closed reconstruction loop.
//!
//! The codec operates on the luma plane only and produces self-contained
//! bitstreams: a fixed header followed by per-frame length-prefixed
//! payloads. Encoder and decoder share the reconstruction routines, so the
//! decoder output is bit-identical to the encoder's internal reference.

mod bitio;
mod transform;

use bitio::{se_len, ue_len, BitReader, BitWriter};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use transform::{dct8x8, idct8x8, ZIGZAG};

use crate::video::{FramePlane, SequenceFormat, VideoFrame, VideoSequence};

/// Fixed coding block size in samples.
pub const BLOCK_SIZE: usize = transform::BLOCK;

const MAGIC: &[u8; 4] = b"TYC1";
const HEADER_LEN: usize = 14;

#[derive(Debug, Error)]
pub enum CodecError {
    /// Caller-supplied arguments violate a precondition.
    #[error("contract error: {0}")]
    Contract(String),
    /// The bitstream cannot be decoded.
    #[error("corrupt bitstream at byte {offset}: {msg}")]
    Corrupt { offset: usize, msg: String },
}

/// Coding structure: all-intra or forward-predicted low delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecMode {
    Intra,
    LowDelay,
}

impl CodecMode {
    fn to_byte(self) -> u8 {
        match self {
            CodecMode::Intra => 0,
            CodecMode::LowDelay => 1,
        }
    }

    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(CodecMode::Intra),
            1 => Some(CodecMode::LowDelay),
            _ => None,
        }
    }

    /// Stable lowercase name used in reports and CLI arguments.
    pub fn name(self) -> &'static str {
        match self {
            CodecMode::Intra => "intra",
            CodecMode::LowDelay => "lowdelay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecConfig {
    mode: CodecMode,
    qp: u8,
    search_radius: u8,
}

impl CodecConfig {
    /// Config with the default +-8 px motion search radius.
    pub fn new(mode: CodecMode, qp: u8) -> Result<Self, CodecError> {
        if qp > 51 {
            return Err(CodecError::Contract(format!(
                "qp must lie in [0, 51], got {qp}"
            )));
        }
        Ok(CodecConfig {
            mode,
            qp,
            search_radius: 8,
        })
    }

    pub fn with_search_radius(mut self, radius: u8) -> Self {
        self.search_radius = radius;
        self
    }

    pub fn mode(&self) -> CodecMode {
        self.mode
    }

    pub fn qp(&self) -> u8 {
        self.qp
    }

    pub fn search_radius(&self) -> u8 {
        self.search_radius
    }
}

/// Quantizer step, doubling every six qp like the HEVC law.
fn q_step(qp: u8) -> f64 {
    2f64.powf((qp as f64 - 4.0) / 6.0)
}

/// An encoded sequence: header plus per-frame payloads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitstream {
    bytes: Vec<u8>,
}

impl Bitstream {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Bitstream { bytes }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn size_bits(&self) -> u64 {
        self.bytes.len() as u64 * 8
    }

    pub fn header(&self) -> Result<BitstreamHeader, CodecError> {
        parse_header(&self.bytes)
    }
}

/// Decoded view of the fixed-size bitstream header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitstreamHeader {
    /// Luma geometry before padding.
    pub width: usize,
    pub height: usize,
    pub mode: CodecMode,
    pub qp: u8,
    pub frame_count: usize,
    /// Edge-replication padding that was appended to reach multiples of 8.
    pub pad_rows: usize,
    pub pad_cols: usize,
}

impl BitstreamHeader {
    fn padded_size(&self) -> (usize, usize) {
        (self.height + self.pad_rows, self.width + self.pad_cols)
    }
}

fn parse_header(bytes: &[u8]) -> Result<BitstreamHeader, CodecError> {
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::Corrupt {
            offset: bytes.len(),
            msg: format!(
                "header needs {HEADER_LEN} bytes, stream has {}",
                bytes.len()
            ),
        });
    }
    if &bytes[0..4] != MAGIC {
        return Err(CodecError::Corrupt {
            offset: 0,
            msg: "bad magic, expected TYC1".into(),
        });
    }
    let width = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
    let height = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let mode = CodecMode::from_byte(bytes[8]).ok_or_else(|| CodecError::Corrupt {
        offset: 8,
        msg: format!("unknown mode byte {}", bytes[8]),
    })?;
    let qp = bytes[9];
    if qp > 51 {
        return Err(CodecError::Corrupt {
            offset: 9,
            msg: format!("qp {qp} out of range"),
        });
    }
    let frame_count = u16::from_le_bytes([bytes[10], bytes[11]]) as usize;
    let (pad_rows, pad_cols) = (bytes[12] as usize, bytes[13] as usize);
    if width == 0 || height == 0 || frame_count == 0 {
        return Err(CodecError::Corrupt {
            offset: 4,
            msg: "zero geometry or frame count".into(),
        });
    }
    if pad_rows >= BLOCK_SIZE
        || pad_cols >= BLOCK_SIZE
        || !(height + pad_rows).is_multiple_of(BLOCK_SIZE)
        || !(width + pad_cols).is_multiple_of(BLOCK_SIZE)
    {
        return Err(CodecError::Corrupt {
            offset: 12,
            msg: "inconsistent padding".into(),
        });
    }
    Ok(BitstreamHeader {
        width,
        height,
        mode,
        qp,
        frame_count,
        pad_rows,
        pad_cols,
    })
}

/// How one block was coded, as reported by [`inspect`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockCoding {
    Intra,
    Inter {
        mv: (i32, i32),
    },
    /// Zero motion and an all-zero residual, signalled in one bit.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockInfo {
    /// Top-left corner in the padded luma raster.
    pub row: usize,
    pub col: usize,
    pub coding: BlockCoding,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameInfo {
    pub index: usize,
    pub payload_bytes: usize,
    pub blocks: Vec<BlockInfo>,
}

/// Pads a plane to block-multiple geometry by edge replication.
fn pad_plane(src: &FramePlane, pw: usize, ph: usize) -> FramePlane {
    if src.width() == pw && src.height() == ph {
        return src.clone();
    }
    FramePlane::from_fn(pw, ph, |i, j| {
        src.get(i.min(src.height() - 1), j.min(src.width() - 1))
    })
}

fn crop_plane(src: &FramePlane, w: usize, h: usize) -> FramePlane {
    if src.width() == w && src.height() == h {
        return src.clone();
    }
    FramePlane::from_fn(w, h, |i, j| src.get(i, j))
}

/// Flat DC predictor: integer mean of the reconstructed samples directly
/// above and left of the block, 128 when no neighbors exist.
fn dc_pred(rec: &FramePlane, r0: usize, c0: usize) -> i32 {
    let mut sum = 0u32;
    let mut count = 0u32;
    if r0 > 0 {
        for j in c0..c0 + BLOCK_SIZE {
            sum += rec.get(r0 - 1, j) as u32;
            count += 1;
        }
    }
    if c0 > 0 {
        for i in r0..r0 + BLOCK_SIZE {
            sum += rec.get(i, c0 - 1) as u32;
            count += 1;
        }
    }
    (sum + count / 2)
        .checked_div(count)
        .map_or(128, |v| v as i32)
}

fn flat_pred(value: i32) -> [i32; 64] {
    [value; 64]
}

/// Predictor samples copied from the previous reconstruction at `mv`.
fn motion_pred(prev: &FramePlane, r0: usize, c0: usize, mv: (i32, i32)) -> [i32; 64] {
    let mut pred = [0i32; 64];
    for i in 0..BLOCK_SIZE {
        let row = (r0 as i32 + i as i32 + mv.0) as usize;
        for j in 0..BLOCK_SIZE {
            let col = (c0 as i32 + j as i32 + mv.1) as usize;
            pred[i * BLOCK_SIZE + j] = prev.get(row, col) as i32;
        }
    }
    pred
}

/// DCT and uniform quantization (round half away from zero) of the residual
/// between the original block and a predictor, in raster order.
fn transform_quantize(
    orig: &FramePlane,
    r0: usize,
    c0: usize,
    pred: &[i32; 64],
    q: f64,
) -> [i32; 64] {
    let mut res = [0f64; 64];
    for i in 0..BLOCK_SIZE {
        for j in 0..BLOCK_SIZE {
            let k = i * BLOCK_SIZE + j;
            res[k] = orig.get(r0 + i, c0 + j) as f64 - pred[k] as f64;
        }
    }
    let freq = dct8x8(&res);
    let mut qz = [0i32; 64];
    for (slot, &coef) in qz.iter_mut().zip(freq.iter()) {
        let r = coef / q;
        *slot = if r >= 0.0 {
            (r + 0.5).floor() as i32
        } else {
            (r - 0.5).ceil() as i32
        };
    }
    qz
}

/// Dequantizes, inverse transforms, adds the predictor, rounds half up, and
/// clamps into the reconstruction plane. Shared by encoder and decoder.
fn reconstruct(
    rec: &mut FramePlane,
    r0: usize,
    c0: usize,
    pred: &[i32; 64],
    qz: &[i32; 64],
    q: f64,
) {
    let mut freq = [0f64; 64];
    for (slot, &level) in freq.iter_mut().zip(qz.iter()) {
        *slot = level as f64 * q;
    }
    let res = idct8x8(&freq);
    for i in 0..BLOCK_SIZE {
        for j in 0..BLOCK_SIZE {
            let k = i * BLOCK_SIZE + j;
            let v = (pred[k] as f64 + res[k] + 0.5).floor();
            rec.set(r0 + i, c0 + j, v.clamp(0.0, 255.0) as u8);
        }
    }
}

/// Residual token stream: for each nonzero coefficient in zigzag order,
/// ue(zero run + 1) then se(level); ue(0) terminates unless the scan is
/// already complete at position 64.
fn write_tokens(bw: &mut BitWriter, qz: &[i32; 64]) {
    let mut run = 0u32;
    let mut consumed = 0usize;
    for (k, &zz) in ZIGZAG.iter().enumerate() {
        let v = qz[zz];
        if v == 0 {
            run += 1;
        } else {
            bw.ue(run + 1);
            bw.se(v);
            run = 0;
            consumed = k + 1;
        }
    }
    if consumed < 64 {
        bw.ue(0);
    }
}

fn token_bits(qz: &[i32; 64]) -> usize {
    let mut bits = 0;
    let mut run = 0u32;
    let mut consumed = 0usize;
    for (k, &zz) in ZIGZAG.iter().enumerate() {
        let v = qz[zz];
        if v == 0 {
            run += 1;
        } else {
            bits += ue_len(run + 1) + se_len(v);
            run = 0;
            consumed = k + 1;
        }
    }
    if consumed < 64 {
        bits += ue_len(0);
    }
    bits
}

fn read_tokens(br: &mut BitReader) -> Result<[i32; 64], CodecError> {
    let mut qz = [0i32; 64];
    let mut pos = 0usize;
    while pos < 64 {
        let code = br.ue()?;
        if code == 0 {
            break;
        }
        pos += (code - 1) as usize;
        if pos >= 64 {
            return Err(CodecError::Corrupt {
                offset: br.byte_offset(),
                msg: "coefficient run overflows the block".into(),
            });
        }
        let level = br.se()?;
        if level == 0 {
            return Err(CodecError::Corrupt {
                offset: br.byte_offset(),
                msg: "zero coefficient level".into(),
            });
        }
        qz[ZIGZAG[pos]] = level;
        pos += 1;
    }
    Ok(qz)
}

/// Full-search SAD motion estimation over displacements whose 8x8 window
/// lies entirely inside the previous frame. Ties break toward the smaller
/// displacement norm, then smaller row, then smaller column.
fn best_motion(
    orig: &FramePlane,
    prev: &FramePlane,
    r0: usize,
    c0: usize,
    radius: i32,
) -> (i32, i32) {
    let h = prev.height() as i32;
    let w = prev.width() as i32;
    let mut best: (u32, i64, i32, i32) = (u32::MAX, i64::MAX, i32::MAX, i32::MAX);
    for dr in -radius..=radius {
        let rr = r0 as i32 + dr;
        if rr < 0 || rr + BLOCK_SIZE as i32 > h {
            continue;
        }
        for dc in -radius..=radius {
            let cc = c0 as i32 + dc;
            if cc < 0 || cc + BLOCK_SIZE as i32 > w {
                continue;
            }
            let mut sad = 0u32;
            for i in 0..BLOCK_SIZE {
                let orow = &orig.row(r0 + i)[c0..c0 + BLOCK_SIZE];
                let prow =
                    &prev.row((rr + i as i32) as usize)[cc as usize..cc as usize + BLOCK_SIZE];
                for (a, b) in orow.iter().zip(prow) {
                    sad += (*a as i32 - *b as i32).unsigned_abs();
                }
                // A partial sum already worse than the best cannot win.
                if sad > best.0 {
                    break;
                }
            }
            let key = (sad, (dr * dr + dc * dc) as i64, dr, dc);
            if key < best {
                best = key;
            }
        }
    }
    (best.2, best.3)
}

fn encode_intra_frame(orig: &FramePlane, q: f64, bw: &mut BitWriter, rec: &mut FramePlane) {
    for r0 in (0..orig.height()).step_by(BLOCK_SIZE) {
        for c0 in (0..orig.width()).step_by(BLOCK_SIZE) {
            let pred = flat_pred(dc_pred(rec, r0, c0));
            let qz = transform_quantize(orig, r0, c0, &pred, q);
            write_tokens(bw, &qz);
            reconstruct(rec, r0, c0, &pred, &qz, q);
        }
    }
}

fn encode_inter_frame(
    orig: &FramePlane,
    prev: &FramePlane,
    radius: i32,
    q: f64,
    bw: &mut BitWriter,
    rec: &mut FramePlane,
) {
    for r0 in (0..orig.height()).step_by(BLOCK_SIZE) {
        for c0 in (0..orig.width()).step_by(BLOCK_SIZE) {
            // Skip probe first: zero motion with an all-zero residual costs
            // one bit and is never beaten on rate.
            let pred_zero = motion_pred(prev, r0, c0, (0, 0));
            let qz_zero = transform_quantize(orig, r0, c0, &pred_zero, q);
            if qz_zero.iter().all(|&v| v == 0) {
                bw.write_bit(true);
                reconstruct(rec, r0, c0, &pred_zero, &qz_zero, q);
                continue;
            }

            let mv = best_motion(orig, prev, r0, c0, radius);
            let (pred_inter, qz_inter) = if mv == (0, 0) {
                (pred_zero, qz_zero)
            } else {
                let pred = motion_pred(prev, r0, c0, mv);
                let qz = transform_quantize(orig, r0, c0, &pred, q);
                (pred, qz)
            };
            let bits_inter = 2 + se_len(mv.0) + se_len(mv.1) + token_bits(&qz_inter);

            let pred_intra = flat_pred(dc_pred(rec, r0, c0));
            let qz_intra = transform_quantize(orig, r0, c0, &pred_intra, q);
            let bits_intra = 2 + token_bits(&qz_intra);

            bw.write_bit(false); // not skip
            if bits_intra < bits_inter {
                bw.write_bit(true); // intra fallback
                write_tokens(bw, &qz_intra);
                reconstruct(rec, r0, c0, &pred_intra, &qz_intra, q);
            } else {
                bw.write_bit(false);
                bw.se(mv.0);
                bw.se(mv.1);
                write_tokens(bw, &qz_inter);
                reconstruct(rec, r0, c0, &pred_inter, &qz_inter, q);
            }
        }
    }
}

/// Encodes the luma plane of a sequence. Chroma planes are dropped; the
/// decoder reconstructs a luma-only sequence.
pub fn encode(seq: &VideoSequence, cfg: &CodecConfig) -> Result<Bitstream, CodecError> {
    Ok(encode_with_reconstruction(seq, cfg)?.0)
}

/// Like [`encode`], additionally returning the encoder's own closed-loop
/// reconstruction (cropped to the source geometry). [`decode`] of the
/// bitstream is bit-identical to it.
pub fn encode_with_reconstruction(
    seq: &VideoSequence,
    cfg: &CodecConfig,
) -> Result<(Bitstream, VideoSequence), CodecError> {
    if seq.is_empty() {
        return Err(CodecError::Contract(
            "cannot encode an empty sequence".into(),
        ));
    }
    let (w, h) = (seq.width(), seq.height());
    if w > u16::MAX as usize || h > u16::MAX as usize {
        return Err(CodecError::Contract(format!(
            "geometry {h}x{w} exceeds the 16-bit header fields"
        )));
    }
    if seq.num_frames() > u16::MAX as usize {
        return Err(CodecError::Contract(format!(
            "frame count {} exceeds the 16-bit header field",
            seq.num_frames()
        )));
    }
    let pad_cols = (BLOCK_SIZE - w % BLOCK_SIZE) % BLOCK_SIZE;
    let pad_rows = (BLOCK_SIZE - h % BLOCK_SIZE) % BLOCK_SIZE;
    let (pw, ph) = (w + pad_cols, h + pad_rows);
    let q = q_step(cfg.qp);

    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(w as u16).to_le_bytes());
    bytes.extend_from_slice(&(h as u16).to_le_bytes());
    bytes.push(cfg.mode.to_byte());
    bytes.push(cfg.qp);
    bytes.extend_from_slice(&(seq.num_frames() as u16).to_le_bytes());
    bytes.push(pad_rows as u8);
    bytes.push(pad_cols as u8);

    let mut recon = VideoSequence::new(SequenceFormat::LumaOnly, w, h).expect("validated geometry");
    let mut prev: Option<FramePlane> = None;
    for (idx, frame) in seq.frames().iter().enumerate() {
        let padded = pad_plane(&frame.y, pw, ph);
        let mut rec = FramePlane::new(pw, ph);
        let mut bw = BitWriter::new();
        if cfg.mode == CodecMode::Intra || idx == 0 {
            encode_intra_frame(&padded, q, &mut bw, &mut rec);
        } else {
            encode_inter_frame(
                &padded,
                prev.as_ref().expect("previous frame exists"),
                cfg.search_radius as i32,
                q,
                &mut bw,
                &mut rec,
            );
        }
        let payload = bw.finish();
        bytes.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&payload);
        recon
            .push_frame(VideoFrame::luma(crop_plane(&rec, w, h)))
            .expect("geometry matches");
        prev = Some(rec);
    }
    Ok((Bitstream { bytes }, recon))
}

/// Decodes a bitstream into a luma-only sequence at the original geometry.
pub fn decode(bs: &Bitstream) -> Result<VideoSequence, CodecError> {
    decode_internal(bs, None)
}

/// Walks the bitstream and reports how every block was coded, without
/// returning the pixels. Runs the full reconstruction loop internally.
pub fn inspect(bs: &Bitstream) -> Result<Vec<FrameInfo>, CodecError> {
    let mut info = Vec::new();
    decode_internal(bs, Some(&mut info))?;
    Ok(info)
}

fn decode_internal(
    bs: &Bitstream,
    mut log: Option<&mut Vec<FrameInfo>>,
) -> Result<VideoSequence, CodecError> {
    let hdr = parse_header(&bs.bytes)?;
    let (ph, pw) = hdr.padded_size();
    let q = q_step(hdr.qp);
    let bytes = &bs.bytes;
    let mut offset = HEADER_LEN;
    let mut out = VideoSequence::new(SequenceFormat::LumaOnly, hdr.width, hdr.height)
        .expect("header geometry validated");
    let mut prev: Option<FramePlane> = None;

    for fidx in 0..hdr.frame_count {
        if offset + 4 > bytes.len() {
            return Err(CodecError::Corrupt {
                offset,
                msg: format!("missing length prefix for frame {fidx}"),
            });
        }
        let plen = u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap()) as usize;
        offset += 4;
        if offset + plen > bytes.len() {
            return Err(CodecError::Corrupt {
                offset,
                msg: format!(
                    "frame {fidx} payload of {plen} bytes exceeds remaining {}",
                    bytes.len() - offset
                ),
            });
        }
        let mut br = BitReader::new(&bytes[offset..offset + plen]);
        let mut rec = FramePlane::new(pw, ph);
        let mut blocks = Vec::new();
        let intra_frame = hdr.mode == CodecMode::Intra || fidx == 0;
        for r0 in (0..ph).step_by(BLOCK_SIZE) {
            for c0 in (0..pw).step_by(BLOCK_SIZE) {
                let coding = if intra_frame {
                    let pred = flat_pred(dc_pred(&rec, r0, c0));
                    let qz = read_tokens(&mut br)?;
                    reconstruct(&mut rec, r0, c0, &pred, &qz, q);
                    BlockCoding::Intra
                } else {
                    let prev = prev.as_ref().expect("inter frame has a reference");
                    if br.read_bit()? {
                        let pred = motion_pred(prev, r0, c0, (0, 0));
                        reconstruct(&mut rec, r0, c0, &pred, &[0; 64], q);
                        BlockCoding::Skip
                    } else if br.read_bit()? {
                        let pred = flat_pred(dc_pred(&rec, r0, c0));
                        let qz = read_tokens(&mut br)?;
                        reconstruct(&mut rec, r0, c0, &pred, &qz, q);
                        BlockCoding::Intra
                    } else {
                        let mv = (br.se()?, br.se()?);
                        let max_r = (ph - BLOCK_SIZE) as i32;
                        let max_c = (pw - BLOCK_SIZE) as i32;
                        let rr = r0 as i32 + mv.0;
                        let cc = c0 as i32 + mv.1;
                        if rr < 0 || rr > max_r || cc < 0 || cc > max_c {
                            return Err(CodecError::Corrupt {
                                offset: offset + br.byte_offset(),
                                msg: format!("motion vector {mv:?} leaves the frame"),
                            });
                        }
                        let pred = motion_pred(prev, r0, c0, mv);
                        let qz = read_tokens(&mut br)?;
                        reconstruct(&mut rec, r0, c0, &pred, &qz, q);
                        BlockCoding::Inter { mv }
                    }
                };
                if log.is_some() {
                    blocks.push(BlockInfo {
                        row: r0,
                        col: c0,
                        coding,
                    });
                }
            }
        }
        offset += plen;
        if let Some(info) = log.as_deref_mut() {
            info.push(FrameInfo {
                index: fidx,
                payload_bytes: plen,
                blocks,
            });
        }
        out.push_frame(VideoFrame::luma(crop_plane(&rec, hdr.width, hdr.height)))
            .expect("geometry matches");
        prev = Some(rec);
    }
    if offset != bytes.len() {
        return Err(CodecError::Corrupt {
            offset,
            msg: format!(
                "{} trailing bytes after the last frame",
                bytes.len() - offset
            ),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{bpp, psnr_y};
    use crate::video::{synthesize_rectilinear_sequence, SceneKind};

    fn noise_seq(w: usize, h: usize, frames: usize, motion: (f64, f64)) -> VideoSequence {
        synthesize_rectilinear_sequence(w, h, SceneKind::TexturedNoise { seed: 21 }, frames, motion)
            .unwrap()
    }

    #[test]
    fn closed_loop_matches_decode() {
        let seq = noise_seq(48, 32, 3, (1.0, 2.0));
        for mode in [CodecMode::Intra, CodecMode::LowDelay] {
            for qp in [0u8, 24, 40] {
                let cfg = CodecConfig::new(mode, qp).unwrap();
                let (bs, recon) = encode_with_reconstruction(&seq, &cfg).unwrap();
                let decoded = decode(&bs).unwrap();
                assert_eq!(decoded, recon, "mode {mode:?} qp {qp}");
            }
        }
    }

    #[test]
    fn geometry_and_frame_count_survive_padding() {
        let seq = noise_seq(50, 34, 2, (0.0, 0.0));
        let cfg = CodecConfig::new(CodecMode::LowDelay, 30).unwrap();
        let bs = encode(&seq, &cfg).unwrap();
        let hdr = bs.header().unwrap();
        assert_eq!((hdr.width, hdr.height), (50, 34));
        assert_eq!((hdr.pad_cols, hdr.pad_rows), (6, 6));
        let decoded = decode(&bs).unwrap();
        assert_eq!((decoded.width(), decoded.height()), (50, 34));
        assert_eq!(decoded.num_frames(), 2);
    }

    #[test]
    fn constant_frame_codes_under_5_hundredths_bpp() {
        let mut seq = VideoSequence::new(SequenceFormat::LumaOnly, 128, 128).unwrap();
        seq.push_frame(VideoFrame::luma(FramePlane::filled(128, 128, 128)))
            .unwrap();
        for qp in [0u8, 16, 28, 40, 51] {
            let cfg = CodecConfig::new(CodecMode::Intra, qp).unwrap();
            let bs = encode(&seq, &cfg).unwrap();
            let rate = bpp(bs.size_bits(), 128, 128, 1);
            assert!(rate < 0.05, "qp {qp}: {rate} bpp");
            let decoded = decode(&bs).unwrap();
            assert_eq!(decoded.frames()[0].y, seq.frames()[0].y);
        }
    }

    #[test]
    fn identical_frames_become_all_skip() {
        // Holds when the first frame reconstructs exactly; lossy intra
        // reconstruction would otherwise feed small refinements into frame 2.
        let mut seq = VideoSequence::new(SequenceFormat::LumaOnly, 128, 128).unwrap();
        for _ in 0..2 {
            seq.push_frame(VideoFrame::luma(FramePlane::filled(128, 128, 128)))
                .unwrap();
        }
        let cfg = CodecConfig::new(CodecMode::LowDelay, 28).unwrap();
        let bs = encode(&seq, &cfg).unwrap();
        let info = inspect(&bs).unwrap();
        assert!(info[1].blocks.iter().all(|b| b.coding == BlockCoding::Skip));
        let frame2_bpp = info[1].payload_bytes as f64 * 8.0 / (128.0 * 128.0);
        assert!(frame2_bpp < 0.02, "{frame2_bpp} bpp");
    }

    #[test]
    fn qp0_reconstruction_above_45db() {
        let seq = noise_seq(64, 64, 1, (0.0, 0.0));
        let cfg = CodecConfig::new(CodecMode::Intra, 0).unwrap();
        let bs = encode(&seq, &cfg).unwrap();
        let decoded = decode(&bs).unwrap();
        let r = psnr_y(&seq, &decoded).unwrap();
        assert!(r.mean_db > 45.0, "{}", r.mean_db);
    }

    #[test]
    fn rate_and_quality_fall_with_qp() {
        let seq = noise_seq(96, 96, 4, (1.0, 1.0));
        for mode in [CodecMode::Intra, CodecMode::LowDelay] {
            let mut last_bits = u64::MAX;
            let mut last_psnr = f64::INFINITY;
            for qp in [24u8, 28, 32, 36, 40] {
                let cfg = CodecConfig::new(mode, qp).unwrap();
                let bs = encode(&seq, &cfg).unwrap();
                let decoded = decode(&bs).unwrap();
                let p = psnr_y(&seq, &decoded).unwrap().mean_db;
                assert!(
                    bs.size_bits() <= last_bits,
                    "mode {mode:?} qp {qp}: rate rose"
                );
                assert!(p <= last_psnr, "mode {mode:?} qp {qp}: psnr rose");
                last_bits = bs.size_bits();
                last_psnr = p;
            }
        }
    }

    #[test]
    fn motion_search_recovers_integer_translation() {
        let seq = noise_seq(96, 96, 4, (2.0, 1.0));
        let cfg = CodecConfig::new(CodecMode::LowDelay, 28).unwrap();
        let bs = encode(&seq, &cfg).unwrap();
        let info = inspect(&bs).unwrap();
        let mut total = 0;
        let mut correct = 0;
        for frame in &info[1..] {
            for b in &frame.blocks {
                let interior = b.row >= BLOCK_SIZE
                    && b.col >= BLOCK_SIZE
                    && b.row + 2 * BLOCK_SIZE <= 96
                    && b.col + 2 * BLOCK_SIZE <= 96;
                if !interior {
                    continue;
                }
                total += 1;
                if b.coding == (BlockCoding::Inter { mv: (2, 1) }) {
                    correct += 1;
                }
            }
        }
        assert!(total > 0);
        let share = correct as f64 / total as f64;
        assert!(share >= 0.9, "only {share:.3} of interior blocks matched");
    }

    #[test]
    fn truncated_stream_errors_without_panic() {
        let seq = noise_seq(32, 32, 2, (1.0, 0.0));
        let cfg = CodecConfig::new(CodecMode::LowDelay, 32).unwrap();
        let bs = encode(&seq, &cfg).unwrap();
        let full = bs.as_bytes();
        for cut in [0, 3, HEADER_LEN - 1, HEADER_LEN + 2, full.len() - 1] {
            let partial = Bitstream::from_bytes(full[..cut].to_vec());
            assert!(
                matches!(decode(&partial), Err(CodecError::Corrupt { .. })),
                "cut at {cut} did not error"
            );
        }
    }

    #[test]
    fn corrupt_magic_and_trailing_bytes_error() {
        let seq = noise_seq(16, 16, 1, (0.0, 0.0));
        let cfg = CodecConfig::new(CodecMode::Intra, 28).unwrap();
        let bs = encode(&seq, &cfg).unwrap();
        let mut bad = bs.as_bytes().to_vec();
        bad[0] = b'X';
        assert!(matches!(
            decode(&Bitstream::from_bytes(bad)),
            Err(CodecError::Corrupt { offset: 0, .. })
        ));
        let mut trailing = bs.as_bytes().to_vec();
        trailing.push(0);
        assert!(matches!(
            decode(&Bitstream::from_bytes(trailing)),
            Err(CodecError::Corrupt { .. })
        ));
    }

    #[test]
    fn empty_sequence_is_a_contract_error() {
        let seq = VideoSequence::new(SequenceFormat::LumaOnly, 16, 16).unwrap();
        let cfg = CodecConfig::new(CodecMode::Intra, 28).unwrap();
        assert!(matches!(encode(&seq, &cfg), Err(CodecError::Contract(_))));
    }

    #[test]
    fn qp_out_of_range_rejected() {
        assert!(matches!(
            CodecConfig::new(CodecMode::Intra, 52),
            Err(CodecError::Contract(_))
        ));
    }
}
