//! Convolutional regressor from a measurement grid to the 16 τ parameters.
//!
//! ```text
//! input   R×C×1
//! conv1   2×2, stride 1, same padding, 25 maps, ReLU     R×C×25
//! pool    2×2, stride 2                                   ⌈R/2⌉×⌈C/2⌉×25
//! conv2   2×2, stride 1, same padding, 25 maps, ReLU     ⌈R/2⌉×⌈C/2⌉×25
//! flatten (row, col, channel) row-major
//! fc1     720, ReLU, dropout
//! fc2     450, ReLU, dropout
//! out     16, linear
//! ```
//!
//! For the standard 6×6 grid the flattened width is 225. Same padding adds the
//! single padding row/column at the bottom/right. Dropout is inverted: kept
//! units are scaled by `1/(1 - rate)` during training and evaluation is the
//! identity.
//!
//! All parameters live in one flat `Vec<f64>` in the tensor order of
//! [`Tensor::ALL`]; convolution kernels are `[kh][kw][in][out]` and dense
//! kernels `[in][out]`, both row-major.

mod adagrad;
mod backward;
pub mod checkpoint;
mod forward;
mod train;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{tag, SeededRng};
use crate::tomography::{MeasurementGrid, GRID_CELLS, GRID_SIDE};

pub use adagrad::{adagrad_step, ADAGRAD_DELTA};
pub use backward::{backward, backward_batch, Gradients};
pub use forward::{forward, forward_input, Activations, DropoutMasks, Mode};
pub use train::{
    evaluate, loss_mse, predict_density, predict_tau, train, train_samples, EpochRecord,
    Evaluation, TrainConfig, TrainHistory, Trainer,
};

pub const KERNEL: usize = 2;
pub const FEATURE_MAPS: usize = 25;
pub const FC1_UNITS: usize = 720;
pub const FC2_UNITS: usize = 450;
pub const OUTPUTS: usize = 16;

/// How a measurement grid is laid out as network input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridEncoding {
    /// The full 6×6 grid; missing cells are zeros.
    ZeroPadded,
    /// Only the first `keep` measured values, row-major, packed into the
    /// smallest rectangle of area ≥ `keep` (most square, rows ≤ cols) with the
    /// remainder zero.
    Compact { keep: usize },
}

impl GridEncoding {
    pub fn compact(keep: usize) -> Result<Self> {
        if !(1..=GRID_CELLS).contains(&keep) {
            return Err(Error::BadCount(keep));
        }
        Ok(GridEncoding::Compact { keep })
    }

    pub fn input_shape(&self) -> (usize, usize) {
        match *self {
            GridEncoding::ZeroPadded => (GRID_SIDE, GRID_SIDE),
            GridEncoding::Compact { keep } => compact_shape(keep),
        }
    }

    pub fn encode(&self, grid: &MeasurementGrid) -> Vec<f64> {
        match *self {
            GridEncoding::ZeroPadded => grid.values().to_vec(),
            GridEncoding::Compact { keep } => {
                let (r, c) = compact_shape(keep);
                let mut out = vec![0.0; r * c];
                for (slot, v) in out.iter_mut().zip(grid.measured_values().take(keep)) {
                    *slot = v;
                }
                out
            }
        }
    }
}

/// Smallest rectangle holding `keep` values. A `1 × keep` strip always fits
/// exactly, so the area is `keep` and the most square factorization wins,
/// `rows ≤ cols`.
pub fn compact_shape(keep: usize) -> (usize, usize) {
    let keep = keep.max(1);
    let rows = (1..=keep)
        .take_while(|r| r * r <= keep)
        .filter(|r| keep % r == 0)
        .last()
        .unwrap_or(1);
    (rows, keep / rows)
}

/// Spatial sizes derived from the input shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub input_rows: usize,
    pub input_cols: usize,
}

impl Architecture {
    pub fn new(input_rows: usize, input_cols: usize) -> Self {
        Self {
            input_rows,
            input_cols,
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_rows * self.input_cols
    }

    pub fn pooled_rows(&self) -> usize {
        self.input_rows.div_ceil(2)
    }

    pub fn pooled_cols(&self) -> usize {
        self.input_cols.div_ceil(2)
    }

    pub fn flat_len(&self) -> usize {
        self.pooled_rows() * self.pooled_cols() * FEATURE_MAPS
    }

    pub fn tensor_shape(&self, t: Tensor) -> Vec<usize> {
        match t {
            Tensor::Conv1W => vec![KERNEL, KERNEL, 1, FEATURE_MAPS],
            Tensor::Conv1B => vec![FEATURE_MAPS],
            Tensor::Conv2W => vec![KERNEL, KERNEL, FEATURE_MAPS, FEATURE_MAPS],
            Tensor::Conv2B => vec![FEATURE_MAPS],
            Tensor::Fc1W => vec![self.flat_len(), FC1_UNITS],
            Tensor::Fc1B => vec![FC1_UNITS],
            Tensor::Fc2W => vec![FC1_UNITS, FC2_UNITS],
            Tensor::Fc2B => vec![FC2_UNITS],
            Tensor::OutW => vec![FC2_UNITS, OUTPUTS],
            Tensor::OutB => vec![OUTPUTS],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tensor {
    Conv1W,
    Conv1B,
    Conv2W,
    Conv2B,
    Fc1W,
    Fc1B,
    Fc2W,
    Fc2B,
    OutW,
    OutB,
}

impl Tensor {
    pub const ALL: [Tensor; 10] = [
        Tensor::Conv1W,
        Tensor::Conv1B,
        Tensor::Conv2W,
        Tensor::Conv2B,
        Tensor::Fc1W,
        Tensor::Fc1B,
        Tensor::Fc2W,
        Tensor::Fc2B,
        Tensor::OutW,
        Tensor::OutB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tensor::Conv1W => "conv1.weight",
            Tensor::Conv1B => "conv1.bias",
            Tensor::Conv2W => "conv2.weight",
            Tensor::Conv2B => "conv2.bias",
            Tensor::Fc1W => "fc1.weight",
            Tensor::Fc1B => "fc1.bias",
            Tensor::Fc2W => "fc2.weight",
            Tensor::Fc2B => "fc2.bias",
            Tensor::OutW => "out.weight",
            Tensor::OutB => "out.bias",
        }
    }

    pub fn is_bias(self) -> bool {
        matches!(
            self,
            Tensor::Conv1B | Tensor::Conv2B | Tensor::Fc1B | Tensor::Fc2B | Tensor::OutB
        )
    }

    fn index(self) -> usize {
        Tensor::ALL.iter().position(|&t| t == self).unwrap()
    }
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    ranges: [Range<usize>; 10],
}

impl Layout {
    pub fn new(arch: &Architecture) -> Self {
        let mut offset = 0;
        let ranges = Tensor::ALL.map(|t| {
            let len: usize = arch.tensor_shape(t).iter().product();
            let r = offset..offset + len;
            offset += len;
            r
        });
        Self { ranges }
    }

    pub fn range(&self, t: Tensor) -> Range<usize> {
        self.ranges[t.index()].clone()
    }

    pub fn total(&self) -> usize {
        self.ranges[9].end
    }
}

/// Weights, biases and Adagrad state of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct CnnParams {
    encoding: GridEncoding,
    arch: Architecture,
    layout: Layout,
    values: Vec<f64>,
    accum: Vec<f64>,
    step: u64,
}

impl CnnParams {
    /// Glorot-uniform weights in `±√(6/(fan_in + fan_out))`, zero biases.
    /// Convolution fans count the kernel area: `fan_in = 2·2·in`,
    /// `fan_out = 2·2·out`. Tensors are filled in layer order from the stream
    /// `(seed, "init", 0, 0)`.
    pub fn initialize(encoding: GridEncoding, seed: u64) -> Self {
        let mut p = Self::zeros(encoding);
        let mut rng = SeededRng::derived(seed, tag("init"), 0, 0);
        for t in Tensor::ALL {
            if t.is_bias() {
                continue;
            }
            let shape = p.arch.tensor_shape(t);
            let (fan_in, fan_out) = match shape.as_slice() {
                [kh, kw, cin, cout] => (kh * kw * cin, kh * kw * cout),
                [n_in, n_out] => (*n_in, *n_out),
                _ => unreachable!("weights are rank 2 or 4"),
            };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let range = p.layout.range(t);
            for w in &mut p.values[range] {
                *w = (2.0 * rng.uniform() - 1.0) * limit;
            }
        }
        p
    }

    pub fn zeros(encoding: GridEncoding) -> Self {
        let (r, c) = encoding.input_shape();
        let arch = Architecture::new(r, c);
        let layout = Layout::new(&arch);
        let n = layout.total();
        Self {
            encoding,
            arch,
            layout,
            values: vec![0.0; n],
            accum: vec![0.0; n],
            step: 0,
        }
    }

    pub fn from_parts(
        encoding: GridEncoding,
        values: Vec<f64>,
        accum: Vec<f64>,
        step: u64,
    ) -> Result<Self> {
        let mut p = Self::zeros(encoding);
        let n = p.layout.total();
        if values.len() != n || accum.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "expected {n} parameters and accumulators, got {} and {}",
                values.len(),
                accum.len()
            )));
        }
        if values.iter().chain(&accum).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite network parameter".into()));
        }
        if accum.iter().any(|&a| a < 0.0) {
            return Err(Error::InvalidInput("negative Adagrad accumulator".into()));
        }
        p.values = values;
        p.accum = accum;
        p.step = step;
        Ok(p)
    }

    pub fn encoding(&self) -> GridEncoding {
        self.encoding
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn accumulators(&self) -> &[f64] {
        &self.accum
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn tensor(&self, t: Tensor) -> &[f64] {
        &self.values[self.layout.range(t)]
    }

    pub fn tensor_mut(&mut self, t: Tensor) -> &mut [f64] {
        let r = self.layout.range(t);
        &mut self.values[r]
    }

    /// Which tensor a flat index belongs to.
    pub fn tensor_of(&self, index: usize) -> Option<Tensor> {
        Tensor::ALL
            .into_iter()
            .find(|&t| self.layout.range(t).contains(&index))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_layout_sizes() {
        let p = CnnParams::zeros(GridEncoding::ZeroPadded);
        let arch = p.architecture();
        assert_eq!((arch.pooled_rows(), arch.pooled_cols()), (3, 3));
        assert_eq!(arch.flat_len(), 225);
        let sizes: Vec<usize> = Tensor::ALL.iter().map(|&t| p.tensor(t).len()).collect();
        assert_eq!(
            sizes,
            vec![
                100,
                25,
                2500,
                25,
                225 * 720,
                720,
                720 * 450,
                450,
                450 * 16,
                16
            ]
        );
        assert_eq!(p.len(), sizes.iter().sum::<usize>());
    }

    #[test]
    fn compact_shapes() {
        let shapes: Vec<_> = [4, 8, 12, 16, 20, 24, 28, 32, 36, 5]
            .iter()
            .map(|&k| compact_shape(k))
            .collect();
        assert_eq!(
            shapes,
            vec![
                (2, 2),
                (2, 4),
                (3, 4),
                (4, 4),
                (4, 5),
                (4, 6),
                (4, 7),
                (4, 8),
                (6, 6),
                (1, 5)
            ]
        );
    }

    #[test]
    fn compact_encoding_packs_measured_values() {
        let values: [f64; 36] = std::array::from_fn(|k| k as f64 + 1.0);
        let g = crate::tomography::mask_measurements(&MeasurementGrid::full(values), 8).unwrap();
        let enc = GridEncoding::compact(8).unwrap();
        assert_eq!(enc.encode(&g), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(GridEncoding::ZeroPadded.encode(&g)[8..], [0.0; 28]);
    }

    #[test]
    fn glorot_bounds_and_zero_biases() {
        let p = CnnParams::initialize(GridEncoding::ZeroPadded, 1);
        for t in Tensor::ALL {
            let xs = p.tensor(t);
            if t.is_bias() {
                assert!(xs.iter().all(|&x| x == 0.0));
            } else {
                let shape = p.architecture().tensor_shape(t);
                let (fi, fo) = if shape.len() == 4 {
                    (4 * shape[2], 4 * shape[3])
                } else {
                    (shape[0], shape[1])
                };
                let limit = (6.0 / (fi + fo) as f64).sqrt();
                assert!(xs.iter().all(|x| x.abs() <= limit));
                assert!(xs.iter().any(|&x| x != 0.0));
            }
        }
        assert_eq!(p, CnnParams::initialize(GridEncoding::ZeroPadded, 1));
        assert_ne!(p, CnnParams::initialize(GridEncoding::ZeroPadded, 2));
    }
}
