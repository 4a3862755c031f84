//! Plain evaluation and evaluation along a line `x(z) = a + b z`.
//!
//! Along the line every unit is tracked as an affine function `intercept + slope * z`
//! of the scalar parameter. Fixing the selected piece of every nonlinearity keeps
//! that representation exact, and each choice is pinned by one or more 1-D
//! inequalities `intercept + slope * z <= 0`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::image::{ImageVector, SegmentationMask};

use super::layer::{Conv2d, Dense, LayerSpec, NetworkSpec, Shape};

/// A single inequality `intercept + slope * z <= 0` pinning a unit's selected piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineUnitConstraint {
    pub layer: usize,
    pub unit: usize,
    pub intercept: f64,
    pub slope: f64,
    pub piece: u32,
}

impl AffineUnitConstraint {
    pub fn value(&self, z: f64) -> f64 {
        self.intercept + self.slope * z
    }

    /// Where the inequality becomes tight, if the slope is non-zero.
    pub fn root(&self) -> Option<f64> {
        (self.slope != 0.0).then(|| -self.intercept / self.slope)
    }
}

/// Outcome of evaluating the network at one point of the line.
#[derive(Debug, Clone)]
pub struct LineEvaluation {
    pub mask: SegmentationMask,
    pub constraints: Vec<AffineUnitConstraint>,
    /// Selected piece of every nonlinear unit, in layer then unit order.
    pub signature: Vec<u32>,
    pub signature_hash: u64,
}

/// Per-layer outputs of a line evaluation, as `(intercepts, slopes)`.
pub type LineTrace = Vec<(Vec<f64>, Vec<f64>)>;

fn dense(d: &Dense, input: &[f64], with_bias: bool) -> Vec<f64> {
    d.weight
        .chunks_exact(d.in_features)
        .zip(&d.bias)
        .map(|(row, &bias)| {
            let dot: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum();
            if with_bias {
                dot + bias
            } else {
                dot
            }
        })
        .collect()
}

fn conv2d(c: &Conv2d, shape: Shape, input: &[f64], with_bias: bool) -> Vec<f64> {
    let (h, w) = (shape.height, shape.width);
    let top = (c.filter_height - 1) / 2;
    let left = (c.filter_width - 1) / 2;
    let mut out = vec![0.0; c.out_channels * h * w];
    for o in 0..c.out_channels {
        let plane = &mut out[o * h * w..(o + 1) * h * w];
        if with_bias {
            plane.iter_mut().for_each(|v| *v = c.bias[o]);
        }
        for ch in 0..c.in_channels {
            let src = &input[ch * h * w..(ch + 1) * h * w];
            for di in 0..c.filter_height {
                for dj in 0..c.filter_width {
                    let k = c.kernel_at(di, dj, ch, o);
                    if k == 0.0 {
                        continue;
                    }
                    for i in 0..h {
                        let si = i as isize + di as isize - top as isize;
                        if si < 0 || si >= h as isize {
                            continue;
                        }
                        let srow = &src[si as usize * w..(si as usize + 1) * w];
                        let drow = &mut plane[i * w..(i + 1) * w];
                        for (j, d) in drow.iter_mut().enumerate() {
                            let sj = j as isize + dj as isize - left as isize;
                            if sj >= 0 && sj < w as isize {
                                *d += k * srow[sj as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Flat indices of the 2x2 window feeding pooled unit `(c, i, j)`, row-major.
#[inline]
fn pool_window(shape: Shape, c: usize, i: usize, j: usize) -> [usize; 4] {
    let base = c * shape.height * shape.width;
    let r0 = base + 2 * i * shape.width + 2 * j;
    let r1 = r0 + shape.width;
    [r0, r0 + 1, r1, r1 + 1]
}

fn upsample(shape: Shape, input: &[f64]) -> Vec<f64> {
    let (h, w) = (shape.height, shape.width);
    let mut out = Vec::with_capacity(4 * input.len());
    for c in 0..shape.channels {
        for i in 0..2 * h {
            let row = &input[c * h * w + (i / 2) * w..c * h * w + (i / 2 + 1) * w];
            for &v in row {
                out.push(v);
                out.push(v);
            }
        }
    }
    out
}

fn check_finite(layer: usize, values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(unit) => Err(Error::Numeric(format!(
            "non-finite {what} at layer {layer}, unit {unit}"
        ))),
        None => Ok(()),
    }
}

fn check_input(net: &NetworkSpec, len: usize) -> Result<()> {
    if len != net.input_len() {
        return Err(Error::Argument(format!(
            "network expects {} inputs, got {len}",
            net.input_len()
        )));
    }
    Ok(())
}

/// Per-layer outputs of a plain evaluation; the last entry holds the final
/// pre-activations (the output layer passes its input through).
pub fn forward_trace(net: &NetworkSpec, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_input(net, x.len())?;
    let mut trace: Vec<Vec<f64>> = Vec::with_capacity(net.layers().len());
    for (l, layer) in net.layers().iter().enumerate() {
        let shape = net.input_shape_of(l);
        let input = trace.last().map(Vec::as_slice).unwrap_or(x);
        let out = match layer {
            LayerSpec::Dense(d) => dense(d, input, true),
            LayerSpec::Conv2d(c) => conv2d(c, shape, input, true),
            LayerSpec::MaxPool2x2 => {
                let out_shape = net.shapes()[l];
                let mut out = Vec::with_capacity(out_shape.len());
                for c in 0..out_shape.channels {
                    for i in 0..out_shape.height {
                        for j in 0..out_shape.width {
                            let win = pool_window(shape, c, i, j);
                            out.push(win.iter().map(|&k| input[k]).fold(f64::NEG_INFINITY, f64::max));
                        }
                    }
                }
                out
            }
            LayerSpec::UpsampleNearest2x => upsample(shape, input),
            LayerSpec::Activation(f) => input.iter().map(|&v| f.eval(v)).collect(),
            LayerSpec::OutputSign { .. } => input.to_vec(),
        };
        check_finite(l, &out, "value")?;
        trace.push(out);
    }
    Ok(trace)
}

/// Segments `x`: pixel is object iff its final pre-activation reaches the threshold.
pub fn forward(net: &NetworkSpec, x: &ImageVector) -> Result<SegmentationMask> {
    forward_values(net, x.values())
}

pub fn forward_values(net: &NetworkSpec, x: &[f64]) -> Result<SegmentationMask> {
    let trace = forward_trace(net, x)?;
    let threshold = output_threshold(net);
    let pre = trace.last().expect("validated network has layers");
    Ok(SegmentationMask::new(pre.iter().map(|&v| v >= threshold).collect()))
}

fn output_threshold(net: &NetworkSpec) -> f64 {
    match net.layers().last() {
        Some(LayerSpec::OutputSign { threshold }) => *threshold,
        _ => unreachable!("validated network ends in output_sign"),
    }
}

struct Collector {
    constraints: Vec<AffineUnitConstraint>,
    signature: Vec<u32>,
    hasher: DefaultHasher,
}

impl Collector {
    fn record(&mut self, layer: usize, unit: usize, piece: u32) {
        self.signature.push(piece);
        (layer, unit, piece).hash(&mut self.hasher);
    }

    fn push(&mut self, layer: usize, unit: usize, piece: u32, intercept: f64, slope: f64) {
        self.constraints.push(AffineUnitConstraint {
            layer,
            unit,
            intercept,
            slope,
            piece,
        });
    }
}

/// Evaluates the network at `a + b z`, returning the mask together with the
/// constraints that keep every unit on its currently selected piece.
pub fn forward_line(net: &NetworkSpec, a: &[f64], b: &[f64], z: f64) -> Result<LineEvaluation> {
    forward_line_impl(net, a, b, z, None)
}

/// Like [`forward_line`] but also returns every layer's `(intercepts, slopes)`.
pub fn forward_line_trace(
    net: &NetworkSpec,
    a: &[f64],
    b: &[f64],
    z: f64,
) -> Result<(LineEvaluation, LineTrace)> {
    let mut trace = Vec::new();
    let eval = forward_line_impl(net, a, b, z, Some(&mut trace))?;
    Ok((eval, trace))
}

fn forward_line_impl(
    net: &NetworkSpec,
    a: &[f64],
    b: &[f64],
    z: f64,
    mut trace: Option<&mut LineTrace>,
) -> Result<LineEvaluation> {
    check_input(net, a.len())?;
    check_input(net, b.len())?;
    if !z.is_finite() {
        return Err(Error::Numeric(format!("line parameter {z} is not finite")));
    }
    let mut col = Collector {
        constraints: Vec::new(),
        signature: Vec::new(),
        hasher: DefaultHasher::new(),
    };
    let mut icpt = a.to_vec();
    let mut slope = b.to_vec();
    let mut mask = None;

    for (l, layer) in net.layers().iter().enumerate() {
        let shape = net.input_shape_of(l);
        match layer {
            LayerSpec::Dense(d) => {
                icpt = dense(d, &icpt, true);
                slope = dense(d, &slope, false);
            }
            LayerSpec::Conv2d(c) => {
                icpt = conv2d(c, shape, &icpt, true);
                slope = conv2d(c, shape, &slope, false);
            }
            LayerSpec::UpsampleNearest2x => {
                icpt = upsample(shape, &icpt);
                slope = upsample(shape, &slope);
            }
            LayerSpec::MaxPool2x2 => {
                let out_shape = net.shapes()[l];
                let mut new_i = Vec::with_capacity(out_shape.len());
                let mut new_s = Vec::with_capacity(out_shape.len());
                for c in 0..out_shape.channels {
                    for i in 0..out_shape.height {
                        for j in 0..out_shape.width {
                            let unit = new_i.len();
                            let win = pool_window(shape, c, i, j);
                            // first strict maximum wins, so ties go to the smallest index
                            let mut best = 0;
                            let mut best_v = icpt[win[0]] + slope[win[0]] * z;
                            for (p, &k) in win.iter().enumerate().skip(1) {
                                let v = icpt[k] + slope[k] * z;
                                if v > best_v {
                                    best = p;
                                    best_v = v;
                                }
                            }
                            let w = win[best];
                            col.record(l, unit, best as u32);
                            for (p, &k) in win.iter().enumerate() {
                                if p != best {
                                    col.push(l, unit, best as u32, icpt[k] - icpt[w], slope[k] - slope[w]);
                                }
                            }
                            new_i.push(icpt[w]);
                            new_s.push(slope[w]);
                        }
                    }
                }
                icpt = new_i;
                slope = new_s;
            }
            LayerSpec::Activation(f) => {
                for unit in 0..icpt.len() {
                    let (ci, si) = (icpt[unit], slope[unit]);
                    let k = f.piece(ci + si * z);
                    col.record(l, unit, k as u32);
                    let (lo, hi) = f.piece_bounds(k);
                    if let Some(lo) = lo {
                        col.push(l, unit, k as u32, lo - ci, -si);
                    }
                    if let Some(hi) = hi {
                        col.push(l, unit, k as u32, ci - hi, si);
                    }
                    icpt[unit] = f.slopes()[k] * ci + f.intercepts()[k];
                    slope[unit] = f.slopes()[k] * si;
                }
            }
            LayerSpec::OutputSign { threshold } => {
                let labels: Vec<bool> = (0..icpt.len())
                    .map(|unit| {
                        let (ci, si) = (icpt[unit], slope[unit]);
                        let object = ci + si * z >= *threshold;
                        col.record(l, unit, object as u32);
                        if object {
                            col.push(l, unit, 1, threshold - ci, -si);
                        } else {
                            col.push(l, unit, 0, ci - threshold, si);
                        }
                        object
                    })
                    .collect();
                mask = Some(SegmentationMask::new(labels));
            }
        }
        check_finite(l, &icpt, "intercept")?;
        check_finite(l, &slope, "slope")?;
        if let Some(t) = trace.as_deref_mut() {
            t.push((icpt.clone(), slope.clone()));
        }
    }

    Ok(LineEvaluation {
        mask: mask.expect("validated network ends in output_sign"),
        constraints: col.constraints,
        signature: col.signature,
        signature_hash: col.hasher.finish(),
    })
}
