use std::time::Instant;

use qst_core::cnn::{TrainConfig, Trainer};
use qst_core::dataset::{generate, DatasetConfig};

fn main() {
    let states: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20);
    let epochs: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let t0 = Instant::now();
    let ds = generate(&DatasetConfig {
        n_states: states,
        master_seed: 1,
        ..DatasetConfig::default()
    })
    .unwrap();
    println!("generate {} samples: {:.2?}", ds.train.len(), t0.elapsed());
    let cfg = TrainConfig {
        seed: 1,
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(&ds.train, &ds.test, cfg).unwrap();
    for _ in 0..epochs {
        let t1 = Instant::now();
        let r = t.run_epoch().unwrap().clone();
        println!(
            "epoch {} loss {:.3e} fidelity {:.4} in {:.2?}",
            r.epoch,
            r.train_loss,
            r.test_fidelity.unwrap(),
            t1.elapsed()
        );
    }
}
