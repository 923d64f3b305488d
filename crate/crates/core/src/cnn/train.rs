use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adagrad::FusedAdagrad;
use super::backward::backward_into;
use super::forward::{forward_batch, forward_unchecked, DropoutMasks};
use super::{CnnParams, GridEncoding, OUTPUTS};
use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::fidelity::fidelity;
use crate::rng::{tag, SeededRng};
use crate::state::DensityMatrix;
use crate::tau::{density_from_tau, unpack_tau16, Tau16};
use crate::tomography::MeasurementGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    pub encoding: GridEncoding,
    /// Evaluate the test split after every epoch.
    pub evaluate_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.008,
            batch_size: 4,
            epochs: 0,
            dropout_rate: 0.5,
            seed: 0,
            encoding: GridEncoding::ZeroPadded,
            evaluate_each_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidInput(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub test_fidelity: Option<f64>,
    /// Test predictions whose τ had vanishing trace.
    pub degenerate: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub fidelities: Vec<f64>,
    pub degenerate: usize,
}

impl Evaluation {
    pub fn mean(&self) -> f64 {
        if self.fidelities.is_empty() {
            return f64::NAN;
        }
        self.fidelities.iter().sum::<f64>() / self.fidelities.len() as f64
    }
}

pub fn loss_mse(pred: &Tau16, target: &Tau16) -> f64 {
    pred.0
        .iter()
        .zip(&target.0)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / OUTPUTS as f64
}

pub fn predict_tau(params: &CnnParams, grid: &MeasurementGrid) -> Tau16 {
    let input = params.encoding().encode(grid);
    forward_unchecked(params, &input, None).tau()
}

pub fn predict_density(params: &CnnParams, grid: &MeasurementGrid) -> Result<DensityMatrix> {
    density_from_tau(&unpack_tau16(&predict_tau(params, grid)))
}

/// Fidelity of every prediction against its reference. A degenerate τ scores
/// zero and is counted.
pub fn evaluate(params: &CnnParams, samples: &[Sample]) -> Result<Evaluation> {
    let scored: Vec<Result<Option<f64>>> = samples
        .par_iter()
        .map(|s| match predict_density(params, &s.grid) {
            Ok(rho) => fidelity(&rho, &s.reference).map(Some),
            Err(Error::DegenerateTau { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut fidelities = Vec::with_capacity(samples.len());
    let mut degenerate = 0;
    for s in scored {
        match s? {
            Some(f) => fidelities.push(f),
            None => {
                fidelities.push(0.0);
                degenerate += 1;
            }
        }
    }
    Ok(Evaluation {
        fidelities,
        degenerate,
    })
}

pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<(CnnParams, TrainHistory)> {
    train_samples(&dataset.train, &dataset.test, cfg)
}

pub fn train_samples(
    train: &[Sample],
    test: &[Sample],
    cfg: &TrainConfig,
) -> Result<(CnnParams, TrainHistory)> {
    let mut t = Trainer::new(train, test, cfg.clone())?;
    for _ in 0..cfg.epochs {
        t.run_epoch()?;
    }
    Ok(t.finish())
}

/// Epoch-at-a-time training. Shuffling and dropout for epoch `e` come from the
/// streams `(seed, "shuffle", e)` and `(seed, "dropout", e)`, so a run resumed
/// from a checkpoint taken between epochs continues identically.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    params: CnnParams,
    inputs: Vec<Vec<f64>>,
    targets: Vec<Tau16>,
    test: &'a [Sample],
    history: TrainHistory,
}

impl<'a> Trainer<'a> {
    pub fn new(train: &[Sample], test: &'a [Sample], cfg: TrainConfig) -> Result<Self> {
        let params = CnnParams::initialize(cfg.encoding, cfg.seed);
        Self::resume(params, TrainHistory::default(), train, test, cfg)
    }

    pub fn resume(
        params: CnnParams,
        history: TrainHistory,
        train: &[Sample],
        test: &'a [Sample],
        cfg: TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if params.encoding() != cfg.encoding {
            return Err(Error::ShapeMismatch(
                "checkpoint encoding differs from the training configuration".into(),
            ));
        }
        let inputs = train
            .iter()
            .map(|s| params.encoding().encode(&s.grid))
            .collect();
        let targets = train.iter().map(|s| s.target).collect();
        Ok(Self {
            cfg,
            params,
            inputs,
            targets,
            test,
            history,
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.history.records.len()
    }

    pub fn params(&self) -> &CnnParams {
        &self.params
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    pub fn finish(self) -> (CnnParams, TrainHistory) {
        (self.params, self.history)
    }

    pub fn run_epoch(&mut self) -> Result<&EpochRecord> {
        let epoch = self.epochs_done();
        let seed = self.cfg.seed;
        let mut shuffle = SeededRng::derived(seed, tag("shuffle"), epoch as u64, 0);
        let mut dropout = SeededRng::derived(seed, tag("dropout"), epoch as u64, 0);
        let mut order: Vec<usize> = (0..self.inputs.len()).collect();
        shuffle.shuffle(&mut order);

        let rate = self.cfg.dropout_rate;
        let mut total = 0.0;
        for batch in order.chunks(self.cfg.batch_size) {
            let inputs: Vec<&[f64]> = batch.iter().map(|&i| self.inputs[i].as_slice()).collect();
            let masks = batch
                .iter()
                .map(|_| (rate > 0.0).then(|| DropoutMasks::sample(&mut dropout, rate)))
                .collect();
            let caches = forward_batch(&self.params, &inputs, masks);
            let targets: Vec<Tau16> = batch.iter().map(|&i| self.targets[i]).collect();
            let mut sink = FusedAdagrad {
                params: &mut self.params,
                lr: self.cfg.learning_rate,
            };
            let loss = backward_into(&mut sink, &caches, &targets);
            self.params.step += 1;
            if !loss.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "training loss became {loss} in epoch {epoch}"
                )));
            }
            total += loss * batch.len() as f64;
        }
        if !self.params.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "non-finite weights after epoch {epoch}"
            )));
        }

        let (test_fidelity, degenerate) = if self.cfg.evaluate_each_epoch && !self.test.is_empty() {
            let ev = evaluate(&self.params, self.test)?;
            (Some(ev.mean()), ev.degenerate)
        } else {
            (None, 0)
        };
        self.history.records.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: total / self.inputs.len() as f64,
            test_fidelity,
            degenerate,
        });
        Ok(self.history.records.last().unwrap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::{adagrad_step, backward_batch, forward_input, Mode};
    use crate::state::random_mixed_state;
    use crate::tau::{pack_tau16, tau_from_density};
    use crate::tomography::{measure, projector_grid};

    fn samples(n: usize, seed: u64) -> Vec<Sample> {
        let mut rng = SeededRng::new(seed);
        (0..n)
            .map(|i| {
                let rho = random_mixed_state(&mut rng);
                Sample {
                    state_index: i as u64,
                    grid: measure(&rho, &projector_grid()).unwrap(),
                    target: pack_tau16(&tau_from_density(&rho).unwrap()),
                    reference: rho,
                }
            })
            .collect()
    }

    #[test]
    fn loss_examples() {
        let t = Tau16([0.3; 16]);
        assert_eq!(loss_mse(&t, &t), 0.0);
        let mut p = t;
        p.0[0] += 1.0;
        assert!((loss_mse(&p, &t) - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn zero_epochs_leaves_initialization() {
        let train = samples(3, 1);
        let cfg = TrainConfig {
            seed: 4,
            ..TrainConfig::default()
        };
        let (p, h) = train_samples(&train, &[], &cfg).unwrap();
        assert_eq!(p, CnnParams::initialize(GridEncoding::ZeroPadded, 4));
        assert!(h.records.is_empty());
    }

    #[test]
    fn empty_train_split() {
        let cfg = TrainConfig::default();
        assert!(matches!(
            train_samples(&[], &[], &cfg),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn invalid_config() {
        let train = samples(1, 1);
        for cfg in [
            TrainConfig {
                learning_rate: 0.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                dropout_rate: 1.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                batch_size: 0,
                ..TrainConfig::default()
            },
        ] {
            assert!(matches!(
                train_samples(&train, &[], &cfg),
                Err(Error::InvalidInput(_))
            ));
        }
    }

    #[test]
    fn fast_path_matches_reference_update() {
        let train = samples(7, 2);
        let cfg = TrainConfig {
            epochs: 2,
            seed: 11,
            batch_size: 3,
            evaluate_each_epoch: false,
            ..TrainConfig::default()
        };
        let (fast, _) = train_samples(&train, &[], &cfg).unwrap();

        let mut p = CnnParams::initialize(cfg.encoding, cfg.seed);
        for epoch in 0..2u64 {
            let mut shuffle = SeededRng::derived(cfg.seed, tag("shuffle"), epoch, 0);
            let mut dropout = SeededRng::derived(cfg.seed, tag("dropout"), epoch, 0);
            let mut order: Vec<usize> = (0..train.len()).collect();
            shuffle.shuffle(&mut order);
            for batch in order.chunks(cfg.batch_size) {
                let caches: Vec<_> = batch
                    .iter()
                    .map(|&i| {
                        let x = p.encoding().encode(&train[i].grid);
                        let mode = Mode::Train {
                            rng: &mut dropout,
                            rate: cfg.dropout_rate,
                        };
                        forward_input(&p, &x, mode).unwrap()
                    })
                    .collect();
                let targets: Vec<Tau16> = batch.iter().map(|&i| train[i].target).collect();
                let g = backward_batch(&p, &caches, &targets).unwrap();
                adagrad_step(&mut p, &g, cfg.learning_rate).unwrap();
            }
        }
        assert_eq!(fast, p);
    }

    #[test]
    fn memorizes_one_sample() {
        let train = samples(1, 3);
        for rate in [0.0, 0.5] {
            let cfg = TrainConfig {
                epochs: 200,
                seed: 1,
                dropout_rate: rate,
                evaluate_each_epoch: false,
                ..TrainConfig::default()
            };
            let (p, h) = train_samples(&train, &[], &cfg).unwrap();
            let eval = loss_mse(&predict_tau(&p, &train[0].grid), &train[0].target);
            assert!(eval < 1e-4, "dropout {rate}: {eval}");
            if rate == 0.0 {
                assert!(h.records.last().unwrap().train_loss < 1e-4);
            }
        }
    }

    #[test]
    fn deterministic_history() {
        let train = samples(6, 4);
        let test = samples(2, 5);
        let cfg = TrainConfig {
            epochs: 3,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train_samples(&train, &test, &cfg).unwrap();
        let b = train_samples(&train, &test, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.records.len(), 3);
    }

    #[test]
    fn zero_params_predict_degenerate() {
        let p = CnnParams::zeros(GridEncoding::ZeroPadded);
        let g = MeasurementGrid::full([0.25; 36]);
        assert!(matches!(
            predict_density(&p, &g),
            Err(Error::DegenerateTau { .. })
        ));
        let ev = evaluate(&p, &samples(2, 6)).unwrap();
        assert_eq!(ev.degenerate, 2);
    }
}
