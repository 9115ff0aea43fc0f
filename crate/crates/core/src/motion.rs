//! Dense optical flow (Horn–Schunck) and the flow-derived channels of the
//! descriptor: temporal derivatives, divergence and vorticity.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{d_dx, d_dy, ScalarField};
use crate::frame_io::Frame;

pub const DEFAULT_HS_ALPHA: f64 = 15.0;
pub const DEFAULT_HS_ITERS: usize = 200;

/// Per-pixel displacement in pixels per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub u: ScalarField,
    pub v: ScalarField,
}

impl FlowField {
    pub fn new(u: ScalarField, v: ScalarField) -> Result<Self> {
        u.check_same(&v)?;
        if u.values().iter().chain(v.values()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("flow contains non-finite values".into()));
        }
        Ok(Self { u, v })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            u: ScalarField::zeros(width, height),
            v: ScalarField::zeros(width, height),
        }
    }

    pub fn width(&self) -> usize {
        self.u.width()
    }

    pub fn height(&self) -> usize {
        self.u.height()
    }

    fn check_same(&self, other: &FlowField) -> Result<()> {
        self.u.check_same(&other.u)
    }
}

/// Horn–Schunck flow from `prev` to `next`, solved with `iters` Jacobi sweeps
/// starting from zero flow.
///
/// Derivatives are the original 2×2×2 cube averages; the smoothness term uses
/// the 1/6 (edge) and 1/12 (corner) neighbour weights. Borders replicate.
pub fn horn_schunck(prev: &Frame, next: &Frame, alpha: f64, iters: usize) -> Result<FlowField> {
    let (w, h) = (prev.width(), prev.height());
    if next.width() != w || next.height() != h {
        return Err(Error::dims(
            format!("{w}x{h}"),
            format!("{}x{}", next.width(), next.height()),
        ));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    if iters == 0 {
        return Err(Error::InvalidInput("iters must be at least 1".into()));
    }

    let n = w * h;
    let clamp_x = |x: usize| x.min(w - 1);
    let clamp_y = |y: usize| y.min(h - 1);
    let mut ex = vec![0.0; n];
    let mut ey = vec![0.0; n];
    let mut et = vec![0.0; n];
    for y in 0..h {
        let y1 = clamp_y(y + 1);
        for x in 0..w {
            let x1 = clamp_x(x + 1);
            let (a0, b0, c0, d0) = (prev.at(x, y), prev.at(x1, y), prev.at(x, y1), prev.at(x1, y1));
            let (a1, b1, c1, d1) = (next.at(x, y), next.at(x1, y), next.at(x, y1), next.at(x1, y1));
            let i = y * w + x;
            ex[i] = 0.25 * ((b0 - a0) + (d0 - c0) + (b1 - a1) + (d1 - c1));
            ey[i] = 0.25 * ((c0 - a0) + (d0 - b0) + (c1 - a1) + (d1 - b1));
            et[i] = 0.25 * ((a1 - a0) + (b1 - b0) + (c1 - c0) + (d1 - d0));
        }
    }
    let denom: Vec<f64> = ex
        .iter()
        .zip(&ey)
        .map(|(gx, gy)| alpha * alpha + gx * gx + gy * gy)
        .collect();

    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut u_next = vec![0.0; n];
    let mut v_next = vec![0.0; n];
    for _ in 0..iters {
        for y in 0..h {
            let ym = y.saturating_sub(1);
            let yp = clamp_y(y + 1);
            for x in 0..w {
                let xm = x.saturating_sub(1);
                let xp = clamp_x(x + 1);
                let avg = |f: &[f64]| {
                    (f[ym * w + x] + f[yp * w + x] + f[y * w + xm] + f[y * w + xp]) / 6.0
                        + (f[ym * w + xm] + f[ym * w + xp] + f[yp * w + xm] + f[yp * w + xp])
                            / 12.0
                };
                let ub = avg(&u);
                let vb = avg(&v);
                let i = y * w + x;
                let t = (ex[i] * ub + ey[i] * vb + et[i]) / denom[i];
                u_next[i] = ub - ex[i] * t;
                v_next[i] = vb - ey[i] * t;
            }
        }
        std::mem::swap(&mut u, &mut u_next);
        std::mem::swap(&mut v, &mut v_next);
    }
    FlowField::new(ScalarField::new(w, h, u)?, ScalarField::new(w, h, v)?)
}

/// Forward difference `curr − prev` of two consecutive flow fields.
pub fn flow_time_derivative(
    flow_prev: &FlowField,
    flow_curr: &FlowField,
) -> Result<(ScalarField, ScalarField)> {
    flow_prev.check_same(flow_curr)?;
    Ok((
        flow_curr.u.zip_with(&flow_prev.u, |a, b| a - b)?,
        flow_curr.v.zip_with(&flow_prev.v, |a, b| a - b)?,
    ))
}

/// ∂u/∂x + ∂v/∂y.
pub fn flow_divergence(flow: &FlowField) -> Result<ScalarField> {
    d_dx(&flow.u)?.zip_with(&d_dy(&flow.v)?, |a, b| a + b)
}

/// ∂v/∂x − ∂u/∂y.
pub fn flow_vorticity(flow: &FlowField) -> Result<ScalarField> {
    d_dx(&flow.v)?.zip_with(&d_dy(&flow.u)?, |a, b| a - b)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct FlowDumpHeader {
    pub width: usize,
    pub height: usize,
    pub order: String,
    pub dtype: String,
}

/// Writes `<base>.raw` (u plane then v plane, little-endian f64) and a
/// `<base>.json` sidecar describing it.
pub fn write_flow_dump(flow: &FlowField, base: &Path) -> Result<()> {
    let raw = base.with_extension("raw");
    let sidecar = base.with_extension("json");
    let mut bytes = Vec::with_capacity(16 * flow.u.values().len());
    for x in flow.u.values().iter().chain(flow.v.values()) {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(&raw, bytes).map_err(|e| Error::io(&raw, e))?;
    let header = FlowDumpHeader {
        width: flow.width(),
        height: flow.height(),
        order: "u,v".into(),
        dtype: "f64le".into(),
    };
    fs::write(&sidecar, serde_json::to_vec_pretty(&header)?).map_err(|e| Error::io(&sidecar, e))
}

pub fn read_flow_dump(base: &Path) -> Result<FlowField> {
    let raw = base.with_extension("raw");
    let sidecar = base.with_extension("json");
    let header: FlowDumpHeader = serde_json::from_slice(
        &fs::read(&sidecar).map_err(|e| Error::io(&sidecar, e))?,
    )?;
    if header.order != "u,v" || header.dtype != "f64le" {
        return Err(Error::malformed("flow dump", "unsupported plane order or dtype"));
    }
    let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    let n = header.width * header.height;
    if bytes.len() != 16 * n {
        return Err(Error::malformed(
            "flow dump",
            format!("expected {} bytes, found {}", 16 * n, bytes.len()),
        ));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FlowField::new(
        ScalarField::new(header.width, header.height, vals[..n].to_vec())?,
        ScalarField::new(header.width, header.height, vals[n..].to_vec())?,
    )
}
