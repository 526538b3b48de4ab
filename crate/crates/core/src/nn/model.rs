use super::config::{LayerShape, ModelConfig};
use super::params::ModelParams;
use crate::error::{Error, Result};

pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockTrace {
    /// Pre-activation `conv(x) + b`, `[channel][position]`.
    pub pre: Vec<f64>,
    /// Block output after rectifier and optional identity path.
    pub out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub blocks: Vec<BlockTrace>,
    pub pooled: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    feature_len: usize,
}

impl ForwardTrace {
    /// Last feature maps, `filters_last x feature_len`, row-major.
    pub fn last_feature_maps(&self) -> &[f64] {
        &self.blocks.last().expect("at least one block").out
    }

    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    pub fn feature_map(&self, filter: usize) -> &[f64] {
        let n = self.feature_len;
        &self.last_feature_maps()[filter * n..(filter + 1) * n]
    }
}

/// Positions `p` whose tap `j` reads a valid input index `p*stride + j - pad`.
#[inline]
fn valid_positions(j: usize, pad: usize, stride: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    let lo = if j >= pad { 0 } else { (pad - j).div_ceil(stride) };
    let last_in = in_len + pad - 1; // p*stride + j <= in_len - 1 + pad
    if j > last_in {
        return (0, 0);
    }
    let hi = ((last_in - j) / stride + 1).min(out_len);
    (lo, hi.max(lo))
}

fn conv_forward(shape: &LayerShape, x: &[f64], w: &[f64], b: &[f64], z: &mut [f64]) {
    let (k, s) = (shape.kernel, shape.stride);
    let pad = k / 2;
    let (in_len, out_len) = (shape.in_len, shape.out_len);
    for o in 0..shape.out_channels {
        let zo = &mut z[o * out_len..(o + 1) * out_len];
        zo.fill(b[o]);
        for i in 0..shape.in_channels {
            let xi = &x[i * in_len..(i + 1) * in_len];
            let wo = &w[(o * shape.in_channels + i) * k..(o * shape.in_channels + i + 1) * k];
            for (j, &wv) in wo.iter().enumerate() {
                let (p0, p1) = valid_positions(j, pad, s, in_len, out_len);
                if p0 >= p1 {
                    continue;
                }
                let start = p0 * s + j - pad;
                if s == 1 {
                    for (zz, xx) in zo[p0..p1].iter_mut().zip(&xi[start..start + (p1 - p0)]) {
                        *zz += wv * xx;
                    }
                } else {
                    for (zz, xx) in zo[p0..p1].iter_mut().zip(xi[start..].iter().step_by(s)) {
                        *zz += wv * xx;
                    }
                }
            }
        }
    }
}

/// Accumulate kernel/bias gradients and, when `dx` is given, the input gradient.
fn conv_backward(
    shape: &LayerShape,
    x: &[f64],
    w: &[f64],
    dz: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    mut dx: Option<&mut [f64]>,
) {
    let (k, s) = (shape.kernel, shape.stride);
    let pad = k / 2;
    let (in_len, out_len) = (shape.in_len, shape.out_len);
    for o in 0..shape.out_channels {
        let dzo = &dz[o * out_len..(o + 1) * out_len];
        db[o] += dzo.iter().sum::<f64>();
        for i in 0..shape.in_channels {
            let base = (o * shape.in_channels + i) * k;
            let xi = &x[i * in_len..(i + 1) * in_len];
            for j in 0..k {
                let (p0, p1) = valid_positions(j, pad, s, in_len, out_len);
                if p0 >= p1 {
                    continue;
                }
                let start = p0 * s + j - pad;
                let g = &dzo[p0..p1];
                let wv = w[base + j];
                if s == 1 {
                    let xs = &xi[start..start + (p1 - p0)];
                    dw[base + j] += g.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>();
                    if let Some(dx) = dx.as_deref_mut() {
                        let dxi = &mut dx[i * in_len + start..i * in_len + start + (p1 - p0)];
                        for (d, gg) in dxi.iter_mut().zip(g) {
                            *d += wv * gg;
                        }
                    }
                } else {
                    dw[base + j] += g
                        .iter()
                        .zip(xi[start..].iter().step_by(s))
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
                    if let Some(dx) = dx.as_deref_mut() {
                        let dxi = &mut dx[i * in_len..(i + 1) * in_len];
                        for (d, gg) in dxi[start..].iter_mut().step_by(s).zip(g) {
                            *d += wv * gg;
                        }
                    }
                }
            }
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn forward(params: &ModelParams, config: &ModelConfig, input: &[f64]) -> Result<ForwardTrace> {
    if input.len() != config.input_width {
        return Err(Error::Shape {
            expected: config.input_width,
            actual: input.len(),
        });
    }
    if !params.matches(config) {
        return Err(Error::validation("parameters do not match model config"));
    }
    if let Some(i) = input.iter().position(|v| !v.is_finite()) {
        return Err(Error::validation(format!("non-finite input at position {i}")));
    }

    let shapes = config.layer_shapes();
    let mut blocks: Vec<BlockTrace> = Vec::with_capacity(shapes.len());
    for (b, shape) in shapes.iter().enumerate() {
        let x: &[f64] = if b == 0 { input } else { &blocks[b - 1].out };
        let mut pre = vec![0.0; shape.out_channels * shape.out_len];
        conv_forward(shape, x, params.kernel(b), params.bias(b), &mut pre);
        let mut out: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
        if shape.residual {
            for (o, xv) in out.iter_mut().zip(x) {
                *o += xv;
            }
        }
        blocks.push(BlockTrace { pre, out });
    }

    let feature_len = shapes.last().expect("validated").out_len;
    let filters = config.last_filters();
    let features = &blocks.last().expect("validated").out;
    let pooled: Vec<f64> = (0..filters)
        .map(|f| features[f * feature_len..(f + 1) * feature_len].iter().sum::<f64>() / feature_len as f64)
        .collect();
    let logits: Vec<f64> = (0..config.n_classes)
        .map(|c| {
            params.head_bias()[c]
                + (0..filters).map(|f| params.head_weight(c, f) * pooled[f]).sum::<f64>()
        })
        .collect();
    let probs = softmax(&logits);
    Ok(ForwardTrace {
        input: input.to_vec(),
        blocks,
        pooled,
        logits,
        probs,
        feature_len,
    })
}

/// `-ln(probs[label])` with probabilities floored at 1e-12.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or(Error::Index {
        index: label,
        len: probs.len(),
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Exact gradient of `cross_entropy(forward(input), label)` w.r.t. all parameters.
pub fn backward(
    trace: &ForwardTrace,
    params: &ModelParams,
    config: &ModelConfig,
    label: usize,
) -> Result<ModelParams> {
    let mut grad = params.zeros_like();
    backward_into(trace, params, config, label, &mut grad)?;
    Ok(grad)
}

fn backward_into(
    trace: &ForwardTrace,
    params: &ModelParams,
    config: &ModelConfig,
    label: usize,
    grad: &mut ModelParams,
) -> Result<()> {
    if !params.matches(config) || !grad.same_shape(params) {
        return Err(Error::validation("parameters do not match model config"));
    }
    let shapes = config.layer_shapes();
    if trace.blocks.len() != shapes.len()
        || trace.probs.len() != config.n_classes
        || trace.input.len() != config.input_width
        || trace
            .blocks
            .iter()
            .zip(&shapes)
            .any(|(t, s)| t.out.len() != s.out_channels * s.out_len || t.pre.len() != t.out.len())
    {
        return Err(Error::validation("forward trace does not match model parameters"));
    }
    if label >= config.n_classes {
        return Err(Error::Index {
            index: label,
            len: config.n_classes,
        });
    }

    // softmax + cross-entropy; the floor clamps the loss, so its gradient
    // vanishes when the true-class probability sits below it.
    let mut dlogits = trace.probs.clone();
    if trace.probs[label] >= PROB_FLOOR {
        dlogits[label] -= 1.0;
    } else {
        dlogits.iter_mut().for_each(|d| *d = 0.0);
    }

    let filters = config.last_filters();
    let feature_len = trace.feature_len;
    let mut dpooled = vec![0.0; filters];
    {
        let hb = grad.head_bias_mut();
        for (g, d) in hb.iter_mut().zip(&dlogits) {
            *g += d;
        }
    }
    {
        let hw = grad.head_weights_mut();
        for c in 0..config.n_classes {
            for f in 0..filters {
                hw[c * filters + f] += dlogits[c] * trace.pooled[f];
            }
        }
    }
    for (f, dp) in dpooled.iter_mut().enumerate() {
        *dp = (0..config.n_classes)
            .map(|c| params.head_weight(c, f) * dlogits[c])
            .sum();
    }

    // d(block output) of the last block from the average pool
    let mut dout: Vec<f64> = (0..filters)
        .flat_map(|f| std::iter::repeat_n(dpooled[f] / feature_len as f64, feature_len))
        .collect();

    for b in (0..shapes.len()).rev() {
        let shape = &shapes[b];
        let bt = &trace.blocks[b];
        let x: &[f64] = if b == 0 { &trace.input } else { &trace.blocks[b - 1].out };
        let dz: Vec<f64> = dout
            .iter()
            .zip(&bt.pre)
            .map(|(d, &z)| if z > 0.0 { *d } else { 0.0 })
            .collect();
        let mut dx = if b > 0 {
            if shape.residual {
                Some(dout.clone())
            } else {
                Some(vec![0.0; shape.in_channels * shape.in_len])
            }
        } else {
            None
        };
        let mut dw = vec![0.0; shape.kernel_len()];
        let mut db = vec![0.0; shape.out_channels];
        conv_backward(shape, x, params.kernel(b), &dz, &mut dw, &mut db, dx.as_deref_mut());
        for (g, d) in grad.kernel_mut(b).iter_mut().zip(&dw) {
            *g += d;
        }
        for (g, d) in grad.bias_mut(b).iter_mut().zip(&db) {
            *g += d;
        }
        if let Some(dx) = dx {
            dout = dx;
        }
    }
    Ok(())
}

/// Mean loss and mean gradient over a set of samples.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    pub loss: f64,
    pub gradient: ModelParams,
    pub correct: usize,
}

/// `inputs` is row-major `labels.len() x input_width`.
pub fn batch_gradient(
    params: &ModelParams,
    config: &ModelConfig,
    inputs: &[f64],
    labels: &[usize],
) -> Result<BatchGradient> {
    let width = config.input_width;
    if inputs.len() != labels.len() * width {
        return Err(Error::Shape {
            expected: labels.len() * width,
            actual: inputs.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::validation("empty batch"));
    }
    let mut gradient = params.zeros_like();
    let mut loss = 0.0;
    let mut correct = 0;
    for (row, &label) in inputs.chunks_exact(width).zip(labels) {
        let trace = forward(params, config, row)?;
        loss += cross_entropy(&trace.probs, label)?;
        if argmax(&trace.probs) == label {
            correct += 1;
        }
        backward_into(&trace, params, config, label, &mut gradient)?;
    }
    let n = labels.len() as f64;
    gradient.scale(1.0 / n);
    Ok(BatchGradient {
        loss: loss / n,
        gradient,
        correct,
    })
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn predict(params: &ModelParams, config: &ModelConfig, sample: &[f64]) -> Result<(usize, Vec<f64>)> {
    let trace = forward(params, config, sample)?;
    Ok((argmax(&trace.probs), trace.probs))
}
