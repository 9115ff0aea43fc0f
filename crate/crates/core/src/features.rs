//! The 14-dimensional per-pixel action descriptor and gradient-magnitude
//! pixel selection.
//!
//! Each selected pixel contributes
//! `[x, y, |Jx|, |Jy|, |Jyy|, |Jxx|, mag, orient, u, v, du/dt, dv/dt, div, vort]`.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{d2_dx2, d2_dy2, d_dx, d_dy, ScalarField};
use crate::frame_io::{Frame, FrameSequence};
use crate::motion::{
    flow_divergence, flow_time_derivative, flow_vorticity, horn_schunck, FlowField,
    DEFAULT_HS_ALPHA, DEFAULT_HS_ITERS,
};

pub const FEATURE_DIM: usize = 14;

/// First frame that has two preceding flow fields.
pub const FIRST_RETAINED_FRAME: usize = 2;

/// Indices into a [`FeatureVector`].
pub mod idx {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const ABS_JX: usize = 2;
    pub const ABS_JY: usize = 3;
    pub const ABS_JYY: usize = 4;
    pub const ABS_JXX: usize = 5;
    pub const MAGNITUDE: usize = 6;
    pub const ORIENTATION: usize = 7;
    pub const U: usize = 8;
    pub const V: usize = 9;
    pub const DU_DT: usize = 10;
    pub const DV_DT: usize = 11;
    pub const DIVERGENCE: usize = 12;
    pub const VORTICITY: usize = 13;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn x(&self) -> f64 {
        self.0[idx::X]
    }

    pub fn y(&self) -> f64 {
        self.0[idx::Y]
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// The descriptors selected from one frame; `vectors` may be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatures {
    pub frame_index: usize,
    pub vectors: Vec<FeatureVector>,
}

impl FrameFeatures {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    /// Pixels with gradient magnitude strictly above this are kept.
    pub tau: f64,
    /// Keep every `frame_stride`-th frame starting at frame 2.
    pub frame_stride: usize,
    pub hs_alpha: f64,
    pub hs_iters: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            tau: 40.0,
            frame_stride: 2,
            hs_alpha: DEFAULT_HS_ALPHA,
            hs_iters: DEFAULT_HS_ITERS,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::InvalidInput(format!("tau must be >= 0, got {}", self.tau)));
        }
        if self.frame_stride == 0 {
            return Err(Error::InvalidInput("frame_stride must be >= 1".into()));
        }
        if !(self.hs_alpha.is_finite() && self.hs_alpha > 0.0) {
            return Err(Error::InvalidInput("hs_alpha must be > 0".into()));
        }
        if self.hs_iters == 0 {
            return Err(Error::InvalidInput("hs_iters must be >= 1".into()));
        }
        Ok(())
    }

    /// Frame indices that produce features in a video of `n_frames` frames.
    pub fn retained_frames(&self, n_frames: usize) -> Vec<usize> {
        (FIRST_RETAINED_FRAME..n_frames)
            .step_by(self.frame_stride.max(1))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientFields {
    pub jx: ScalarField,
    pub jy: ScalarField,
    pub jxx: ScalarField,
    pub jyy: ScalarField,
    pub magnitude: ScalarField,
    /// `atan(|Jy| / |Jx|)` in `[0, π/2]`; π/2 where only `Jx` vanishes, 0 where both do.
    pub orientation: ScalarField,
}

pub fn spatial_gradients(frame: &Frame) -> Result<GradientFields> {
    let img = ScalarField::new(frame.width(), frame.height(), frame.pixels().to_vec())?;
    let jx = d_dx(&img)?;
    let jy = d_dy(&img)?;
    let jxx = d2_dx2(&img)?;
    let jyy = d2_dy2(&img)?;
    let magnitude = jx.zip_with(&jy, |a, b| (a * a + b * b).sqrt())?;
    let orientation = jx.zip_with(&jy, |a, b| b.abs().atan2(a.abs()))?;
    Ok(GradientFields {
        jx,
        jy,
        jxx,
        jyy,
        magnitude,
        orientation,
    })
}

/// Flow-derived channels at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionFields {
    pub flow: FlowField,
    pub du_dt: ScalarField,
    pub dv_dt: ScalarField,
    pub divergence: ScalarField,
    pub vorticity: ScalarField,
}

impl MotionFields {
    /// Channels for the frame reached by `flow_curr`, given the flow that preceded it.
    pub fn compute(flow_prev: &FlowField, flow_curr: &FlowField) -> Result<Self> {
        let (du_dt, dv_dt) = flow_time_derivative(flow_prev, flow_curr)?;
        Ok(Self {
            divergence: flow_divergence(flow_curr)?,
            vorticity: flow_vorticity(flow_curr)?,
            flow: flow_curr.clone(),
            du_dt,
            dv_dt,
        })
    }

    fn fields(&self) -> [&ScalarField; 6] {
        [
            &self.flow.u,
            &self.flow.v,
            &self.du_dt,
            &self.dv_dt,
            &self.divergence,
            &self.vorticity,
        ]
    }
}

/// One descriptor per pixel whose gradient magnitude exceeds `tau`, in raster order.
pub fn extract_frame_features(
    frame: &Frame,
    grads: &GradientFields,
    motion: &MotionFields,
    tau: f64,
) -> Result<FrameFeatures> {
    let (w, h) = (frame.width(), frame.height());
    let reference = ScalarField::zeros(w, h);
    for f in [
        &grads.jx,
        &grads.jy,
        &grads.jxx,
        &grads.jyy,
        &grads.magnitude,
        &grads.orientation,
    ]
    .into_iter()
    .chain(motion.fields())
    {
        reference.check_same(f)?;
    }

    let mut vectors = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let mag = grads.magnitude.at(x, y);
            if mag <= tau {
                continue;
            }
            vectors.push(FeatureVector([
                x as f64,
                y as f64,
                grads.jx.at(x, y).abs(),
                grads.jy.at(x, y).abs(),
                grads.jyy.at(x, y).abs(),
                grads.jxx.at(x, y).abs(),
                mag,
                grads.orientation.at(x, y),
                motion.flow.u.at(x, y),
                motion.flow.v.at(x, y),
                motion.du_dt.at(x, y),
                motion.dv_dt.at(x, y),
                motion.divergence.at(x, y),
                motion.vorticity.at(x, y),
            ]));
        }
    }
    Ok(FrameFeatures {
        frame_index: frame.index(),
        vectors,
    })
}

/// Flow fields for every consecutive pair: entry `t - 1` maps frame `t - 1` to `t`.
pub fn consecutive_flows(seq: &FrameSequence, alpha: f64, iters: usize) -> Result<Vec<FlowField>> {
    let frames = seq.frames();
    (1..frames.len())
        .into_par_iter()
        .map(|t| horn_schunck(&frames[t - 1], &frames[t], alpha, iters))
        .collect()
}

/// Features for frames `2, 2 + stride, …`, each tagged with its original index.
pub fn extract_video_features(
    seq: &FrameSequence,
    cfg: &ExtractionConfig,
) -> Result<Vec<FrameFeatures>> {
    cfg.validate()?;
    if seq.len() < FIRST_RETAINED_FRAME + 1 {
        return Err(Error::TooShort {
            len: seq.len(),
            needed: FIRST_RETAINED_FRAME + 1,
        });
    }
    let flows = consecutive_flows(seq, cfg.hs_alpha, cfg.hs_iters)?;
    cfg.retained_frames(seq.len())
        .into_par_iter()
        .map(|t| {
            let frame = &seq.frames()[t];
            let grads = spatial_gradients(frame)?;
            let motion = MotionFields::compute(&flows[t - 2], &flows[t - 1])?;
            extract_frame_features(frame, &grads, &motion, cfg.tau)
        })
        .collect()
}

/// Binary feature dump: `u64 n_frames`, `u64 dim`, then per frame
/// `u64 frame_index`, `u64 k` and `k × dim` f64 values, all little-endian.
pub fn write_feature_dump<W: Write>(features: &[FrameFeatures], mut out: W) -> Result<()> {
    let io = |e| Error::io("<feature dump>", e);
    out.write_all(&(features.len() as u64).to_le_bytes()).map_err(io)?;
    out.write_all(&(FEATURE_DIM as u64).to_le_bytes()).map_err(io)?;
    for ff in features {
        out.write_all(&(ff.frame_index as u64).to_le_bytes()).map_err(io)?;
        out.write_all(&(ff.vectors.len() as u64).to_le_bytes()).map_err(io)?;
        for v in &ff.vectors {
            for x in v.0 {
                out.write_all(&x.to_le_bytes()).map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)
}

pub fn read_feature_dump<R: Read>(mut input: R) -> Result<Vec<FrameFeatures>> {
    let mut word = [0u8; 8];
    let mut next_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut word)
            .map_err(|_| Error::malformed("feature dump", "truncated"))?;
        Ok(u64::from_le_bytes(word))
    };
    let n_frames = next_u64(&mut input)? as usize;
    let dim = next_u64(&mut input)? as usize;
    if dim != FEATURE_DIM {
        return Err(Error::malformed(
            "feature dump",
            format!("dimension {dim}, expected {FEATURE_DIM}"),
        ));
    }
    let mut out = Vec::with_capacity(n_frames.min(1 << 16));
    for _ in 0..n_frames {
        let frame_index = next_u64(&mut input)? as usize;
        let k = next_u64(&mut input)? as usize;
        let mut vectors = Vec::with_capacity(k.min(1 << 20));
        for _ in 0..k {
            let mut v = [0.0; FEATURE_DIM];
            for x in v.iter_mut() {
                *x = f64::from_bits(next_u64(&mut input)?);
            }
            vectors.push(FeatureVector(v));
        }
        out.push(FrameFeatures {
            frame_index,
            vectors,
        });
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest).map_err(|e| Error::io("<feature dump>", e))? != 0 {
        return Err(Error::malformed("feature dump", "trailing bytes"));
    }
    Ok(out)
}
