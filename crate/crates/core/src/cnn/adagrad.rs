use super::backward::GradSink;
use super::{CnnParams, Gradients};
use crate::error::{Error, Result};

pub const ADAGRAD_DELTA: f64 = 1e-8;

/// `acc += g²; w -= lr·g/(√acc + δ)` on every coordinate.
pub fn adagrad_step(params: &mut CnnParams, grads: &Gradients, lr: f64) -> Result<()> {
    if grads.values().len() != params.len() || grads.layout() != params.layout() {
        return Err(Error::ShapeMismatch(
            "gradient layout differs from parameters".into(),
        ));
    }
    update(&mut params.values, &mut params.accum, grads.values(), lr);
    params.step += 1;
    Ok(())
}

/// Applies Adagrad to each block as backpropagation commits it.
pub(super) struct FusedAdagrad<'a> {
    pub params: &'a mut CnnParams,
    pub lr: f64,
}

impl GradSink for FusedAdagrad<'_> {
    fn params(&self) -> &CnnParams {
        self.params
    }

    fn commit(&mut self, at: usize, grad: &[f64]) {
        let r = at..at + grad.len();
        update(
            &mut self.params.values[r.clone()],
            &mut self.params.accum[r],
            grad,
            self.lr,
        );
    }
}

#[inline]
fn update(w: &mut [f64], acc: &mut [f64], g: &[f64], lr: f64) {
    for ((w, a), &g) in w.iter_mut().zip(acc.iter_mut()).zip(g) {
        *a += g * g;
        *w -= lr * g / (a.sqrt() + ADAGRAD_DELTA);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::GridEncoding;

    fn filled(p: &CnnParams, v: f64) -> Gradients {
        Gradients::from_values(p.layout().clone(), vec![v; p.len()]).unwrap()
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut p = CnnParams::initialize(GridEncoding::ZeroPadded, 1);
        let before = p.values().to_vec();
        let g = filled(&p, 0.0);
        adagrad_step(&mut p, &g, 0.008).unwrap();
        assert_eq!(p.values(), &before[..]);
        assert_eq!(p.step(), 1);
    }

    #[test]
    fn first_and_second_steps() {
        let mut p = CnnParams::zeros(GridEncoding::ZeroPadded);
        let g = filled(&p, 1.0);
        adagrad_step(&mut p, &g, 0.008).unwrap();
        let first = p.values()[0];
        assert!((first + 0.008 / (1.0 + 1e-8)).abs() < 1e-18);
        adagrad_step(&mut p, &g, 0.008).unwrap();
        let second = p.values()[0] - first;
        assert!(second.abs() < first.abs());
        assert!(p.accumulators().iter().all(|&a| a == 2.0));
    }

    #[test]
    fn layout_mismatch() {
        let mut p = CnnParams::zeros(GridEncoding::ZeroPadded);
        let q = CnnParams::zeros(GridEncoding::Compact { keep: 8 });
        let g = filled(&q, 1.0);
        assert!(adagrad_step(&mut p, &g, 0.1).is_err());
    }
}
