//! Image-sequence containers and every image-domain transform the pipelines use.

mod io;

use serde::{Deserialize, Serialize};

pub use io::{load_sequence, save_sequence, save_sequence_with};

use crate::error::{Error, Result};
use crate::extractors::RgbTrace;
use crate::nnkit::Tensor;
use crate::sigproc::Signal;

/// Floor on `I_t + I_{t+1}` in the normalized difference, in count units.
pub const DIFF_EPSILON: f64 = 1e-6;

/// POS projection plane: rows orthogonal to the skin-tone `[1, 1, 1]` direction.
pub const POS_PLANE: [[f64; 3]; 2] = [[0.0, 1.0, -1.0], [-2.0, 1.0, 1.0]];
/// CHROM chrominance plane.
pub const CHROM_PLANE: [[f64; 3]; 2] = [[3.0, -2.0, 0.0], [1.5, 1.0, -1.5]];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    File,
    Synthetic,
}

/// `T` frames of `H x W x C` in native count units.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Tensor>,
    fps: f64,
    provenance: Provenance,
    channel_tag: String,
}

impl FrameSequence {
    pub fn new(frames: Vec<Tensor>, fps: f64, provenance: Provenance) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("a frame sequence needs at least one frame"))?;
        if first.shape().len() != 3 {
            return Err(Error::shape(
                "FrameSequence::new",
                "frame rank",
                3,
                first.shape().len(),
            ));
        }
        let shape = first.shape().to_vec();
        for (i, f) in frames.iter().enumerate() {
            if f.shape() != shape.as_slice() {
                return Err(Error::shape(
                    "FrameSequence::new",
                    format!("frame {i} shape"),
                    format!("{shape:?}"),
                    format!("{:?}", f.shape()),
                ));
            }
            if provenance == Provenance::File && f.data().iter().any(|&v| v < 0.0) {
                return Err(Error::invalid(format!(
                    "frame {i} has negative pixel values"
                )));
            }
        }
        let channel_tag = match shape[2] {
            3 => "RGB".to_string(),
            c => format!("C{c}"),
        };
        Ok(Self {
            frames,
            fps,
            provenance,
            channel_tag,
        })
    }

    pub fn frames(&self) -> &[Tensor] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn channel_tag(&self) -> &str {
        &self.channel_tag
    }

    /// `(height, width, channels)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        let s = self.frames[0].shape();
        (s[0], s[1], s[2])
    }

    /// Applies `f` to every frame, keeping metadata.
    pub fn map_frames(&self, f: impl Fn(&Tensor) -> Tensor) -> Result<Self> {
        let frames = self.frames.iter().map(f).collect();
        let mut out = Self::new(frames, self.fps, self.provenance)?;
        out.channel_tag = self.channel_tag.clone();
        Ok(out)
    }

    pub(crate) fn set_channel_tag(&mut self, tag: String) {
        self.channel_tag = tag;
    }
}

/// Region of interest in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl RoiBox {
    pub fn full(seq: &FrameSequence) -> Self {
        let (h, w, _) = seq.dims();
        Self { x: 0, y: 0, w, h }
    }

    /// Parses `x,y,w,h`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<usize> = text
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("roi '{text}': {e}")))?;
        match parts.as_slice() {
            &[x, y, w, h] => Ok(Self { x, y, w, h }),
            _ => Err(Error::invalid(format!("roi '{text}' must be x,y,w,h"))),
        }
    }
}

pub fn crop(seq: &FrameSequence, roi: RoiBox) -> Result<FrameSequence> {
    let (h, w, c) = seq.dims();
    if roi.w == 0 || roi.h == 0 || roi.x + roi.w > w || roi.y + roi.h > h {
        return Err(Error::invalid(format!(
            "roi {roi:?} does not fit in a {w}x{h} frame"
        )));
    }
    seq.map_frames(|f| {
        let src = f.data();
        let mut out = Vec::with_capacity(roi.w * roi.h * c);
        for y in roi.y..roi.y + roi.h {
            let start = (y * w + roi.x) * c;
            out.extend_from_slice(&src[start..start + roi.w * c]);
        }
        Tensor::new(&[roi.h, roi.w, c], out).expect("crop shape")
    })
}

fn nearest_index(i: usize, n_in: usize, n_out: usize) -> usize {
    (((i as f64 + 0.5) * n_in as f64 / n_out as f64).floor() as usize).min(n_in - 1)
}

fn scale_frame(f: &Tensor, out_w: usize, out_h: usize) -> Tensor {
    let (h, w, c) = (f.shape()[0], f.shape()[1], f.shape()[2]);
    let xs: Vec<usize> = (0..out_w).map(|x| nearest_index(x, w, out_w)).collect();
    let src = f.data();
    let mut out = Vec::with_capacity(out_w * out_h * c);
    for y in 0..out_h {
        let sy = nearest_index(y, h, out_h);
        for &sx in &xs {
            let at = (sy * w + sx) * c;
            out.extend_from_slice(&src[at..at + c]);
        }
    }
    Tensor::new(&[out_h, out_w, c], out).expect("scale shape")
}

/// Nearest-neighbour rescale with source index `floor((i + 0.5) * in / out)`.
pub fn scale_nearest(seq: &FrameSequence, out_w: usize, out_h: usize) -> Result<FrameSequence> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid(format!(
            "target size {out_w}x{out_h} must be positive"
        )));
    }
    seq.map_frames(|f| scale_frame(f, out_w, out_h))
}

/// Down-scales to `n x n` and back to the original size, discarding detail.
pub fn resolution_degrade(seq: &FrameSequence, n: usize) -> Result<FrameSequence> {
    let (h, w, _) = seq.dims();
    if n == 0 || n > h.min(w) {
        return Err(Error::invalid(format!(
            "degraded resolution {n} must lie in 1..={}",
            h.min(w)
        )));
    }
    seq.map_frames(|f| scale_frame(&scale_frame(f, n, n), w, h))
}

/// Clockwise rotation by 90 or 180 degrees.
pub fn rotate(seq: &FrameSequence, degrees: u32) -> Result<FrameSequence> {
    let (h, w, c) = seq.dims();
    match degrees {
        90 => seq.map_frames(|f| {
            let src = f.data();
            let mut out = vec![0.0; h * w * c];
            // output is w x h; out(y', x') = in(h - 1 - x', y')
            for yo in 0..w {
                for xo in 0..h {
                    let (sy, sx) = (h - 1 - xo, yo);
                    let d = (yo * h + xo) * c;
                    let s = (sy * w + sx) * c;
                    out[d..d + c].copy_from_slice(&src[s..s + c]);
                }
            }
            Tensor::new(&[w, h, c], out).expect("rotate shape")
        }),
        180 => seq.map_frames(|f| {
            let src = f.data();
            let mut out = Vec::with_capacity(src.len());
            for px in src.chunks_exact(c).rev() {
                out.extend_from_slice(px);
            }
            Tensor::new(f.shape(), out).expect("rotate shape")
        }),
        other => Err(Error::invalid(format!(
            "unsupported rotation {other} degrees (use 90 or 180)"
        ))),
    }
}

/// Output channel `i` is input channel `map[i]`; duplication is allowed.
pub fn permute_channels(seq: &FrameSequence, map: [usize; 3]) -> Result<FrameSequence> {
    let (_, _, c) = seq.dims();
    if c != 3 {
        return Err(Error::shape("permute_channels", "channels", 3, c));
    }
    if let Some(bad) = map.iter().find(|&&m| m > 2) {
        return Err(Error::invalid(format!(
            "channel index {bad} is outside 0..=2"
        )));
    }
    let mut out = seq.map_frames(|f| {
        let mut data = Vec::with_capacity(f.len());
        for px in f.data().chunks_exact(3) {
            data.extend(map.iter().map(|&m| px[m]));
        }
        Tensor::new(f.shape(), data).expect("permute shape")
    })?;
    let tag: Vec<char> = seq.channel_tag().chars().collect();
    let new_tag = if tag.len() == 3 {
        map.iter().map(|&m| tag[m]).collect()
    } else {
        format!("{map:?}")
    };
    out.set_channel_tag(new_tag);
    Ok(out)
}

/// Parses a channel arrangement such as `RBG` or `GGG` into a source map.
pub fn channel_map(tag: &str) -> Result<[usize; 3]> {
    let idx = |ch: char| match ch.to_ascii_uppercase() {
        'R' => Ok(0),
        'G' => Ok(1),
        'B' => Ok(2),
        other => Err(Error::invalid(format!(
            "unknown channel '{other}' in '{tag}'"
        ))),
    };
    let chars: Vec<char> = tag.chars().collect();
    if chars.len() != 3 {
        return Err(Error::invalid(format!(
            "channel arrangement '{tag}' must have three letters"
        )));
    }
    Ok([idx(chars[0])?, idx(chars[1])?, idx(chars[2])?])
}

/// Normalized frame differences, stored divided by a per-clip scale.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffClip {
    shape: [usize; 3],
    diffs: Vec<Vec<f32>>,
    fps: f64,
    scale: f64,
}

impl DiffClip {
    /// Wraps raw (unscaled) difference frames and standardizes them.
    pub fn from_raw(shape: [usize; 3], raw: Vec<Vec<f64>>, fps: f64) -> Result<Self> {
        Self::from_raw_floored(shape, raw, fps, 0.0)
    }

    /// As [`DiffClip::from_raw`], dividing by `max(std, min_scale)`.
    pub fn from_raw_floored(
        shape: [usize; 3],
        raw: Vec<Vec<f64>>,
        fps: f64,
        min_scale: f64,
    ) -> Result<Self> {
        let n = shape.iter().product::<usize>();
        if raw.is_empty() {
            return Err(Error::invalid("a difference clip needs at least one frame"));
        }
        for (t, f) in raw.iter().enumerate() {
            if f.len() != n {
                return Err(Error::shape(
                    "DiffClip::from_raw",
                    format!("frame {t} length"),
                    n,
                    f.len(),
                ));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    op: "DiffClip::from_raw",
                    detail: format!("frame {t}"),
                });
            }
        }
        let sd = global_sd(&raw).max(min_scale);
        let scale = if sd > 0.0 { sd } else { 1.0 };
        let diffs = raw
            .into_iter()
            .map(|f| f.into_iter().map(|v| (v / scale) as f32).collect())
            .collect();
        Ok(Self {
            shape,
            diffs,
            fps,
            scale,
        })
    }

    pub fn len(&self) -> usize {
        self.diffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diffs.is_empty()
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape[2]
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    /// Standard deviation the raw differences were divided by.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Standardized frame `t` as stored (single precision).
    pub fn frame_f32(&self, t: usize) -> &[f32] {
        &self.diffs[t]
    }

    /// Standardized frame `t`.
    pub fn frame(&self, t: usize) -> Tensor {
        Tensor::from_f32(&self.shape, &self.diffs[t]).expect("clip shape")
    }

    /// Frame `t` before standardization.
    pub fn raw_frame(&self, t: usize) -> Tensor {
        let mut f = self.frame(t);
        f.scale(self.scale);
        f
    }
}

/// `(I_{t+1} - I_t) / max(I_{t+1} + I_t, eps)` per pixel and channel, then
/// divided by the clip's global standard deviation.
pub fn normalized_diff(seq: &FrameSequence) -> Result<DiffClip> {
    let (h, w, c) = seq.dims();
    DiffClip::from_raw([h, w, c], raw_diffs(seq)?, seq.fps())
}

fn raw_diffs(seq: &FrameSequence) -> Result<Vec<Vec<f64>>> {
    if seq.len() < 2 {
        return Err(Error::invalid(format!(
            "need >= 2 frames, got {}",
            seq.len()
        )));
    }
    Ok(seq
        .frames()
        .windows(2)
        .map(|pair| {
            pair[0]
                .data()
                .iter()
                .zip(pair[1].data())
                .map(|(&a, &b)| (b - a) / (a + b).max(DIFF_EPSILON))
                .collect()
        })
        .collect())
}

/// Per-frame spatial mean of each channel.
pub fn spatial_mean(seq: &FrameSequence) -> Result<RgbTrace> {
    let (h, w, c) = seq.dims();
    if c != 3 {
        return Err(Error::shape("spatial_mean", "channels", 3, c));
    }
    let n = (h * w) as f64;
    let mut chans = [Vec::new(), Vec::new(), Vec::new()];
    for f in seq.frames() {
        let mut acc = [0.0; 3];
        for px in f.data().chunks_exact(3) {
            acc[0] += px[0];
            acc[1] += px[1];
            acc[2] += px[2];
        }
        for k in 0..3 {
            chans[k].push(acc[k] / n);
        }
    }
    let [r, g, b] = chans;
    RgbTrace::new(
        Signal::new(r, seq.fps())?,
        Signal::new(g, seq.fps())?,
        Signal::new(b, seq.fps())?,
    )
}

/// Projected output whose spread is below this fraction of the input clip's
/// is rescaled by the input spread instead of its own, so rounding residue
/// of a plane-cancelled signal stays near zero.
pub const PROJECTION_FLOOR: f64 = 1e-4;

fn project_raw(raw: Vec<Vec<f64>>, plane: &[[f64; 3]; 2]) -> Vec<Vec<f64>> {
    raw.into_iter()
        .map(|f| {
            let mut out = Vec::with_capacity(f.len() / 3 * 2);
            for px in f.chunks_exact(3) {
                for row in plane {
                    out.push(row[0] * px[0] + row[1] * px[1] + row[2] * px[2]);
                }
            }
            out
        })
        .collect()
}

/// Per-pixel linear map of the three channels onto a two-channel plane,
/// applied to the stored differences and re-standardized.
pub fn project_plane(clip: &DiffClip, plane: &[[f64; 3]; 2]) -> Result<DiffClip> {
    if clip.channels() != 3 {
        return Err(Error::shape(
            "project_plane",
            "channels",
            3,
            clip.channels(),
        ));
    }
    let [h, w, _] = clip.shape();
    let raw = (0..clip.len())
        .map(|t| clip.raw_frame(t).into_data())
        .collect();
    DiffClip::from_raw_floored(
        [h, w, 2],
        project_raw(raw, plane),
        clip.fps(),
        PROJECTION_FLOOR * clip.scale(),
    )
}

/// Normalized differences projected onto `plane`, computed in double
/// precision straight from the frames.
pub fn normalized_diff_projected(seq: &FrameSequence, plane: &[[f64; 3]; 2]) -> Result<DiffClip> {
    let (h, w, c) = seq.dims();
    if c != 3 {
        return Err(Error::shape("normalized_diff_projected", "channels", 3, c));
    }
    let raw = raw_diffs(seq)?;
    let input_sd = global_sd(&raw);
    DiffClip::from_raw_floored(
        [h, w, 2],
        project_raw(raw, plane),
        seq.fps(),
        PROJECTION_FLOOR * input_sd,
    )
}

fn global_sd(raw: &[Vec<f64>]) -> f64 {
    let (mut sum, mut sq, mut n) = (0.0, 0.0, 0usize);
    for f in raw {
        for &v in f {
            sum += v;
            sq += v * v;
        }
        n += f.len();
    }
    let mean = sum / n.max(1) as f64;
    (sq / n.max(1) as f64 - mean * mean).max(0.0).sqrt()
}
