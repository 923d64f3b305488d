use super::{CnnParams, Tensor, FC1_UNITS, FC2_UNITS, FEATURE_MAPS, KERNEL, OUTPUTS};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tau::Tau16;
use crate::tomography::MeasurementGrid;

/// Per-unit dropout multipliers for the two hidden dense layers: `0` for a
/// dropped unit, `1/(1 - rate)` for a kept one.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks {
    pub fc1: Vec<f64>,
    pub fc2: Vec<f64>,
}

impl DropoutMasks {
    pub fn identity() -> Self {
        Self {
            fc1: vec![1.0; FC1_UNITS],
            fc2: vec![1.0; FC2_UNITS],
        }
    }

    /// Draws 720 then 450 uniforms; a unit is kept when `u < 1 - rate`.
    pub fn sample(rng: &mut SeededRng, rate: f64) -> Self {
        let keep = 1.0 - rate;
        let scale = 1.0 / keep;
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| if rng.uniform() < keep { scale } else { 0.0 })
                .collect()
        };
        let fc1 = draw(FC1_UNITS);
        let fc2 = draw(FC2_UNITS);
        Self { fc1, fc2 }
    }
}

pub enum Mode<'a> {
    Eval,
    Train { rng: &'a mut SeededRng, rate: f64 },
    Masked(&'a DropoutMasks),
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Clone, Debug)]
pub struct Activations {
    pub input: Vec<f64>,
    /// After ReLU, `R×C×25`.
    pub conv1: Vec<f64>,
    /// Index into `conv1` of each pooled maximum.
    pub pool_argmax: Vec<u32>,
    pub pool: Vec<f64>,
    /// After ReLU; this is also the flattened dense input.
    pub conv2: Vec<f64>,
    /// After ReLU and dropout.
    pub fc1: Vec<f64>,
    pub fc2: Vec<f64>,
    pub masks: Option<DropoutMasks>,
    pub output: [f64; OUTPUTS],
}

impl Activations {
    pub fn tau(&self) -> Tau16 {
        Tau16(self.output)
    }
}

pub fn forward(
    params: &CnnParams,
    grid: &MeasurementGrid,
    mode: Mode<'_>,
) -> Result<(Tau16, Activations)> {
    let input = params.encoding().encode(grid);
    let acts = forward_input(params, &input, mode)?;
    Ok((acts.tau(), acts))
}

/// Forward pass on an already encoded input.
pub fn forward_input(params: &CnnParams, input: &[f64], mode: Mode<'_>) -> Result<Activations> {
    let arch = params.architecture();
    if input.len() != arch.input_len() {
        return Err(Error::ShapeMismatch(format!(
            "network expects {} inputs, got {}",
            arch.input_len(),
            input.len()
        )));
    }
    let masks = match mode {
        Mode::Eval => None,
        Mode::Train { rng, rate } => Some(DropoutMasks::sample(rng, rate)),
        Mode::Masked(m) => {
            if m.fc1.len() != FC1_UNITS || m.fc2.len() != FC2_UNITS {
                return Err(Error::ShapeMismatch("dropout mask size".into()));
            }
            Some(m.clone())
        }
    };
    Ok(forward_unchecked(params, input, masks))
}

pub(super) fn forward_unchecked(
    params: &CnnParams,
    input: &[f64],
    masks: Option<DropoutMasks>,
) -> Activations {
    forward_batch(params, &[input], vec![masks]).pop().unwrap()
}

/// Forward pass over a batch. Dense layers walk each weight row once for the
/// whole batch; every sample's arithmetic is the same as on its own.
pub(super) fn forward_batch(
    params: &CnnParams,
    inputs: &[&[f64]],
    masks: Vec<Option<DropoutMasks>>,
) -> Vec<Activations> {
    let arch = params.architecture();
    let (rows, cols) = (arch.input_rows, arch.input_cols);
    let (pr, pc) = (arch.pooled_rows(), arch.pooled_cols());

    let mut convs: Vec<_> = inputs
        .iter()
        .map(|input| {
            let mut conv1 = conv_same(
                input,
                rows,
                cols,
                1,
                params.tensor(Tensor::Conv1W),
                params.tensor(Tensor::Conv1B),
            );
            relu(&mut conv1);
            let (pool, pool_argmax) = max_pool(&conv1, rows, cols);
            let mut conv2 = conv_same(
                &pool,
                pr,
                pc,
                FEATURE_MAPS,
                params.tensor(Tensor::Conv2W),
                params.tensor(Tensor::Conv2B),
            );
            relu(&mut conv2);
            (conv1, pool, pool_argmax, conv2)
        })
        .collect();

    let flat: Vec<&[f64]> = convs.iter().map(|c| c.3.as_slice()).collect();
    let mut fc1 = dense_batch(
        &flat,
        params.tensor(Tensor::Fc1W),
        params.tensor(Tensor::Fc1B),
    );
    for (h, m) in fc1.iter_mut().zip(&masks) {
        relu(h);
        if let Some(m) = m {
            apply_mask(h, &m.fc1);
        }
    }
    let h1: Vec<&[f64]> = fc1.iter().map(|h| h.as_slice()).collect();
    let mut fc2 = dense_batch(
        &h1,
        params.tensor(Tensor::Fc2W),
        params.tensor(Tensor::Fc2B),
    );
    for (h, m) in fc2.iter_mut().zip(&masks) {
        relu(h);
        if let Some(m) = m {
            apply_mask(h, &m.fc2);
        }
    }
    let h2: Vec<&[f64]> = fc2.iter().map(|h| h.as_slice()).collect();
    let out = dense_batch(
        &h2,
        params.tensor(Tensor::OutW),
        params.tensor(Tensor::OutB),
    );

    let mut acts = Vec::with_capacity(inputs.len());
    for (k, ((((conv1, pool, pool_argmax, conv2), fc1), fc2), masks)) in
        convs.drain(..).zip(fc1).zip(fc2).zip(masks).enumerate()
    {
        let mut output = [0.0; OUTPUTS];
        output.copy_from_slice(&out[k]);
        acts.push(Activations {
            input: inputs[k].to_vec(),
            conv1,
            pool_argmax,
            pool,
            conv2,
            fc1,
            fc2,
            masks,
            output,
        });
    }
    acts
}

fn relu(xs: &mut [f64]) {
    for x in xs {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn apply_mask(xs: &mut [f64], mask: &[f64]) {
    for (x, m) in xs.iter_mut().zip(mask) {
        *x *= m;
    }
}

#[inline]
pub(super) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `y = b + Σ_i x_i W[i, :]` per sample, skipping zero inputs.
fn dense_batch(xs: &[&[f64]], w: &[f64], b: &[f64]) -> Vec<Vec<f64>> {
    let n_out = b.len();
    let n_in = xs[0].len();
    let mut ys: Vec<Vec<f64>> = xs.iter().map(|_| b.to_vec()).collect();
    for i in 0..n_in {
        let row = &w[i * n_out..(i + 1) * n_out];
        for (x, y) in xs.iter().zip(ys.iter_mut()) {
            if x[i] != 0.0 {
                axpy(y, x[i], row);
            }
        }
    }
    ys
}

/// 2×2 stride-1 convolution, output the same size as the input, with the
/// padding row/column at the bottom/right.
fn conv_same(x: &[f64], rows: usize, cols: usize, cin: usize, w: &[f64], b: &[f64]) -> Vec<f64> {
    let cout = b.len();
    let mut y = vec![0.0; rows * cols * cout];
    for r in 0..rows {
        for c in 0..cols {
            let out = &mut y[(r * cols + c) * cout..(r * cols + c + 1) * cout];
            out.copy_from_slice(b);
            for dr in 0..KERNEL {
                for dc in 0..KERNEL {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr >= rows || cc >= cols {
                        continue;
                    }
                    let px = &x[(rr * cols + cc) * cin..(rr * cols + cc + 1) * cin];
                    for (ci, &v) in px.iter().enumerate() {
                        if v != 0.0 {
                            let k = ((dr * KERNEL + dc) * cin + ci) * cout;
                            axpy(out, v, &w[k..k + cout]);
                        }
                    }
                }
            }
        }
    }
    y
}

/// 2×2 stride-2 max pool over `R×C×ch`; edge windows are clipped. Ties go to
/// the first element in row-major window order.
fn max_pool(x: &[f64], rows: usize, cols: usize) -> (Vec<f64>, Vec<u32>) {
    let ch = FEATURE_MAPS;
    let (pr, pc) = (rows.div_ceil(2), cols.div_ceil(2));
    let mut out = vec![0.0; pr * pc * ch];
    let mut arg = vec![0u32; pr * pc * ch];
    for r in 0..pr {
        for c in 0..pc {
            for k in 0..ch {
                let mut best = f64::NEG_INFINITY;
                let mut best_at = 0;
                for dr in 0..2 {
                    for dc in 0..2 {
                        let (rr, cc) = (2 * r + dr, 2 * c + dc);
                        if rr >= rows || cc >= cols {
                            continue;
                        }
                        let at = (rr * cols + cc) * ch + k;
                        if x[at] > best {
                            best = x[at];
                            best_at = at;
                        }
                    }
                }
                let o = (r * pc + c) * ch + k;
                out[o] = best;
                arg[o] = best_at as u32;
            }
        }
    }
    (out, arg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::GridEncoding;

    fn input(seed: u64) -> Vec<f64> {
        let mut rng = SeededRng::new(seed);
        (0..36).map(|_| rng.uniform()).collect()
    }

    #[test]
    fn eval_is_deterministic_and_finite() {
        let p = CnnParams::initialize(GridEncoding::ZeroPadded, 3);
        let x = input(1);
        let a = forward_input(&p, &x, Mode::Eval).unwrap();
        let b = forward_input(&p, &x, Mode::Eval).unwrap();
        assert_eq!(a.output, b.output);
        assert!(a.output.iter().all(|v| v.is_finite()));
        assert_eq!(a.conv2.len(), 225);
    }

    #[test]
    fn eval_equals_identity_masks() {
        let p = CnnParams::initialize(GridEncoding::ZeroPadded, 3);
        let x = input(2);
        let a = forward_input(&p, &x, Mode::Eval).unwrap();
        let b = forward_input(&p, &x, Mode::Masked(&DropoutMasks::identity())).unwrap();
        assert_eq!(a.output, b.output);
    }

    #[test]
    fn train_mode_uses_inverted_dropout() {
        let p = CnnParams::initialize(GridEncoding::ZeroPadded, 3);
        let x = input(3);
        let mut rng = SeededRng::new(9);
        let a = forward_input(
            &p,
            &x,
            Mode::Train {
                rng: &mut rng,
                rate: 0.5,
            },
        )
        .unwrap();
        let m = a.masks.as_ref().unwrap();
        assert!(m.fc1.iter().all(|&v| v == 0.0 || v == 2.0));
        let kept = m.fc1.iter().filter(|&&v| v > 0.0).count();
        assert!((300..420).contains(&kept), "{kept}");
        let b = forward_input(&p, &x, Mode::Masked(m)).unwrap();
        assert_eq!(a.output, b.output);
    }

    #[test]
    fn same_padding_is_bottom_right() {
        // A single one at the top-left cell reaches only output (0,0) through
        // the kernel tap (0,0); at the bottom-right it reaches four outputs.
        let mut w = vec![0.0; 4];
        w[0] = 1.0;
        w[3] = 10.0;
        let mut x = vec![0.0; 9];
        x[0] = 1.0;
        let y = conv_same(&x, 3, 3, 1, &w, &[0.0]);
        assert_eq!(y, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let mut x = vec![0.0; 9];
        x[8] = 1.0;
        let y = conv_same(&x, 3, 3, 1, &w, &[0.0]);
        assert_eq!(y, vec![0.0, 0.0, 0.0, 0.0, 10.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn pool_clips_odd_edges() {
        let x: Vec<f64> = (0..3 * 3 * FEATURE_MAPS)
            .map(|k| (k / FEATURE_MAPS) as f64)
            .collect();
        let (out, arg) = max_pool(&x, 3, 3);
        let firsts: Vec<f64> = out.chunks(FEATURE_MAPS).map(|c| c[0]).collect();
        assert_eq!(firsts, vec![4.0, 5.0, 7.0, 8.0]);
        assert_eq!(arg[0] as usize, 4 * FEATURE_MAPS);
    }

    #[test]
    fn wrong_input_size() {
        let p = CnnParams::zeros(GridEncoding::ZeroPadded);
        assert!(matches!(
            forward_input(&p, &[0.0; 35], Mode::Eval),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
