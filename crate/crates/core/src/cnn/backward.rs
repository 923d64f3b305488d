use super::forward::{axpy, Activations};
use super::{CnnParams, Layout, Tensor, FEATURE_MAPS, KERNEL, OUTPUTS};
use crate::error::{Error, Result};
use crate::tau::Tau16;

/// Gradient of the batch-mean loss, laid out exactly like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    layout: Layout,
    values: Vec<f64>,
}

impl Gradients {
    pub fn from_values(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total() {
            return Err(Error::ShapeMismatch(format!(
                "{} gradient values for {} parameters",
                values.len(),
                layout.total()
            )));
        }
        Ok(Self { layout, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tensor(&self, t: Tensor) -> &[f64] {
        &self.values[self.layout.range(t)]
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }
}

/// Gradients for one cached forward pass.
pub fn backward(params: &CnnParams, cache: &Activations, target: &Tau16) -> Result<Gradients> {
    backward_batch(
        params,
        std::slice::from_ref(cache),
        std::slice::from_ref(target),
    )
}

/// Gradients of the mean of the per-sample losses over a batch.
pub fn backward_batch(
    params: &CnnParams,
    caches: &[Activations],
    targets: &[Tau16],
) -> Result<Gradients> {
    if caches.is_empty() || caches.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} caches for {} targets",
            caches.len(),
            targets.len()
        )));
    }
    let n_in = params.architecture().input_len();
    if caches.iter().any(|c| c.input.len() != n_in) {
        return Err(Error::ShapeMismatch(
            "cache from a different network".into(),
        ));
    }
    let mut sink = Accumulate {
        params,
        grads: vec![0.0; params.len()],
    };
    backward_into(&mut sink, caches, targets);
    Ok(Gradients {
        layout: params.layout().clone(),
        values: sink.grads,
    })
}

/// Receives the gradient of each parameter block exactly once. A block is
/// committed only after the backward pass has finished reading its weights,
/// so a sink may update the parameters in place.
pub(super) trait GradSink {
    fn params(&self) -> &CnnParams;
    /// Gradient for the flat parameter range starting at `at`.
    fn commit(&mut self, at: usize, grad: &[f64]);
}

struct Accumulate<'a> {
    params: &'a CnnParams,
    grads: Vec<f64>,
}

impl GradSink for Accumulate<'_> {
    fn params(&self) -> &CnnParams {
        self.params
    }

    fn commit(&mut self, at: usize, grad: &[f64]) {
        self.grads[at..at + grad.len()].copy_from_slice(grad);
    }
}

/// Backpropagates a batch, committing every block whose gradient can be
/// nonzero; skipped blocks have exactly zero gradient. Returns the batch loss.
pub(super) fn backward_into<S: GradSink>(
    sink: &mut S,
    caches: &[Activations],
    targets: &[Tau16],
) -> f64 {
    let batch = caches.len();
    let scale = 2.0 / (OUTPUTS * batch) as f64;

    let mut loss = 0.0;
    let d_out: Vec<Vec<f64>> = caches
        .iter()
        .zip(targets)
        .map(|(c, t)| {
            loss += super::loss_mse(&c.tau(), t);
            c.output
                .iter()
                .zip(&t.0)
                .map(|(p, q)| scale * (p - q))
                .collect()
        })
        .collect();
    loss /= batch as f64;

    let fc2_in: Vec<&[f64]> = caches.iter().map(|c| c.fc2.as_slice()).collect();
    let fc1_in: Vec<&[f64]> = caches.iter().map(|c| c.fc1.as_slice()).collect();
    let flat_in: Vec<&[f64]> = caches.iter().map(|c| c.conv2.as_slice()).collect();
    let fc2_masks: Vec<Option<&[f64]>> = caches
        .iter()
        .map(|c| c.masks.as_ref().map(|m| m.fc2.as_slice()))
        .collect();
    let fc1_masks: Vec<Option<&[f64]>> = caches
        .iter()
        .map(|c| c.masks.as_ref().map(|m| m.fc1.as_slice()))
        .collect();
    let no_masks = vec![None; batch];

    let d_fc2 = dense_layer(
        sink,
        Tensor::OutW,
        Tensor::OutB,
        &fc2_in,
        &d_out,
        &fc2_masks,
    );
    let d_fc1 = dense_layer(
        sink,
        Tensor::Fc2W,
        Tensor::Fc2B,
        &fc1_in,
        &d_fc2,
        &fc1_masks,
    );
    let d_conv2 = dense_layer(
        sink,
        Tensor::Fc1W,
        Tensor::Fc1B,
        &flat_in,
        &d_fc1,
        &no_masks,
    );

    let p = sink.params();
    let arch = *p.architecture();
    let (pr, pc) = (arch.pooled_rows(), arch.pooled_cols());
    let (rows, cols) = (arch.input_rows, arch.input_cols);
    let ch = FEATURE_MAPS;
    let w2 = p.tensor(Tensor::Conv2W);
    let mut gw2 = vec![0.0; w2.len()];
    let mut gb2 = vec![0.0; ch];
    let mut gw1 = vec![0.0; p.tensor(Tensor::Conv1W).len()];
    let mut gb1 = vec![0.0; ch];

    for (cache, g2) in caches.iter().zip(&d_conv2) {
        let mut d_pool = vec![0.0; pr * pc * ch];
        conv_backward(
            &cache.pool,
            g2,
            (pr, pc, ch),
            &mut gw2,
            &mut gb2,
            Some((w2, &mut d_pool)),
        );

        let mut g1 = vec![0.0; rows * cols * ch];
        for (o, &at) in cache.pool_argmax.iter().enumerate() {
            if cache.pool[o] > 0.0 {
                g1[at as usize] = d_pool[o];
            }
        }
        conv_backward(&cache.input, &g1, (rows, cols, 1), &mut gw1, &mut gb1, None);
    }
    let layout = p.layout().clone();
    sink.commit(layout.range(Tensor::Conv2W).start, &gw2);
    sink.commit(layout.range(Tensor::Conv2B).start, &gb2);
    sink.commit(layout.range(Tensor::Conv1W).start, &gw1);
    sink.commit(layout.range(Tensor::Conv1B).start, &gb1);
    loss
}

/// Backward through `z = b + x W` for a batch given `dz`. Commits weight rows
/// (reading each row before committing it) and the bias, and returns `dz` of
/// the previous layer: the incoming gradient gated by that layer's
/// post-activation being nonzero and scaled by its dropout multiplier.
fn dense_layer<S: GradSink>(
    sink: &mut S,
    wt: Tensor,
    bt: Tensor,
    xs: &[&[f64]],
    dz: &[Vec<f64>],
    masks: &[Option<&[f64]>],
) -> Vec<Vec<f64>> {
    let n_out = dz[0].len();
    let n_in = xs[0].len();
    let layout = sink.params().layout();
    let w_at = layout.range(wt).start;
    let b_at = layout.range(bt).start;

    let mut dx = vec![vec![0.0; n_in]; xs.len()];
    let mut row = vec![0.0; n_out];
    for i in 0..n_in {
        if xs.iter().all(|x| x[i] == 0.0) {
            continue;
        }
        let w = &sink.params().values()[w_at + i * n_out..w_at + (i + 1) * n_out];
        for b in 0..xs.len() {
            if xs[b][i] != 0.0 {
                let m = masks[b].map_or(1.0, |m| m[i]);
                dx[b][i] = m * dot(w, &dz[b]);
            }
        }
        let mut first = true;
        for (x, d) in xs.iter().zip(dz) {
            if x[i] == 0.0 {
                continue;
            }
            if first {
                for (r, v) in row.iter_mut().zip(d) {
                    *r = x[i] * v;
                }
                first = false;
            } else {
                axpy(&mut row, x[i], d);
            }
        }
        sink.commit(w_at + i * n_out, &row);
    }

    row.fill(0.0);
    for d in dz {
        for (g, v) in row.iter_mut().zip(d) {
            *g += v;
        }
    }
    sink.commit(b_at, &row);
    dx
}

/// Backward through a same-padded 2×2 convolution with ReLU already folded
/// into `g` (gradient w.r.t. the pre-activation). When `input_grad` is given,
/// also accumulates the gradient w.r.t. the nonzero input entries.
fn conv_backward(
    x: &[f64],
    g: &[f64],
    (rows, cols, cin): (usize, usize, usize),
    gw: &mut [f64],
    gb: &mut [f64],
    mut input_grad: Option<(&[f64], &mut Vec<f64>)>,
) {
    let cout = FEATURE_MAPS;
    for r in 0..rows {
        for c in 0..cols {
            let gp = &g[(r * cols + c) * cout..(r * cols + c + 1) * cout];
            if gp.iter().all(|&v| v == 0.0) {
                continue;
            }
            for (db, v) in gb.iter_mut().zip(gp) {
                *db += v;
            }
            for dr in 0..KERNEL {
                for dc in 0..KERNEL {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr >= rows || cc >= cols {
                        continue;
                    }
                    for ci in 0..cin {
                        let xi = (rr * cols + cc) * cin + ci;
                        let v = x[xi];
                        if v == 0.0 {
                            continue;
                        }
                        let k = ((dr * KERNEL + dc) * cin + ci) * cout;
                        axpy(&mut gw[k..k + cout], v, gp);
                        if let Some((w, dx)) = input_grad.as_mut() {
                            dx[xi] += dot(&w[k..k + cout], gp);
                        }
                    }
                }
            }
        }
    }
}

/// Dot product with eight independent partial sums.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}
