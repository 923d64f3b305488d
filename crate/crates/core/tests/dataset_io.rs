use std::fs;

use qst_core::dataset::{
    generate, generate_noiseless_random, load, save, DatasetConfig, MANIFEST_FILE, PAYLOAD_FILE,
};
use qst_core::stokes::stokes_reconstruct;
use qst_core::tau::{density_from_tau, unpack_tau16};
use qst_core::{Error, StateKind};

fn small() -> DatasetConfig {
    DatasetConfig {
        n_states: 5,
        noisy_per_state: 20,
        train_per_state: 16,
        master_seed: 11,
        ..DatasetConfig::default()
    }
}

#[test]
fn hundred_sample_round_trip() {
    let ds = generate(&small()).unwrap();
    assert_eq!(ds.train.len() + ds.test.len(), 100);
    let dir = tempfile::tempdir().unwrap();
    save(&ds, dir.path()).unwrap();
    assert_eq!(load(dir.path()).unwrap(), ds);
}

#[test]
fn truncated_payload_is_a_checksum_error() {
    let ds = generate(&small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save(&ds, dir.path()).unwrap();
    let path = dir.path().join(PAYLOAD_FILE);
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 100]).unwrap();
    assert!(matches!(load(dir.path()), Err(Error::ChecksumMismatch(_))));

    let mut flipped = bytes.clone();
    flipped[200] ^= 1;
    fs::write(&path, flipped).unwrap();
    assert!(matches!(load(dir.path()), Err(Error::ChecksumMismatch(_))));
}

#[test]
fn bumped_manifest_version_is_rejected() {
    let ds = generate(&small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save(&ds, dir.path()).unwrap();
    let path = dir.path().join(MANIFEST_FILE);
    let mut json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    json["format_version"] = 2.into();
    fs::write(&path, json.to_string()).unwrap();
    assert!(matches!(
        load(dir.path()),
        Err(Error::FormatVersionMismatch {
            found: 2,
            expected: 1,
            ..
        })
    ));
}

#[test]
fn labels_match_references() {
    for kind in [StateKind::Pure, StateKind::Mixed] {
        let ds = generate(&DatasetConfig {
            state_kind: kind,
            ..small()
        })
        .unwrap();
        for s in ds.train.iter().chain(&ds.test) {
            let rho = density_from_tau(&unpack_tau16(&s.target)).unwrap();
            assert!(rho.matrix().max_abs_diff(s.reference.matrix()) < 1e-8);
        }
    }
}

#[test]
fn every_state_in_both_splits_and_no_shared_grids() {
    let ds = generate(&small()).unwrap();
    for i in 0..5u64 {
        assert_eq!(ds.train.iter().filter(|s| s.state_index == i).count(), 16);
        assert_eq!(ds.test.iter().filter(|s| s.state_index == i).count(), 4);
    }
    for t in &ds.test {
        assert!(ds.train.iter().all(|s| s.grid.values() != t.grid.values()));
    }
}

#[test]
fn noiseless_corpus_inverts_exactly() {
    let ds = generate_noiseless_random(120, 3, StateKind::Mixed).unwrap();
    assert_eq!((ds.train.len(), ds.test.len()), (110, 10));
    for s in ds.train.iter().chain(&ds.test) {
        assert!(stokes_reconstruct(&s.grid).max_abs_diff(s.reference.matrix()) < 1e-10);
    }
    let tiny = generate_noiseless_random(2, 3, StateKind::Pure).unwrap();
    assert_eq!((tiny.train.len(), tiny.test.len()), (1, 1));
    assert!(generate_noiseless_random(1, 3, StateKind::Pure).is_err());
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    save(&generate(&small()).unwrap(), a.path()).unwrap();
    save(&generate(&small()).unwrap(), b.path()).unwrap();
    for f in [MANIFEST_FILE, PAYLOAD_FILE] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap()
        );
    }
}
