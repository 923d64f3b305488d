//! Seeded corpora of (measurement grid, τ target, reference state) samples and
//! their on-disk form.
//!
//! Randomness is split per state and per draw: state `i` comes from the stream
//! `(seed, "state", i, attempt)`, its `j`-th training grid from
//! `(seed, "train", i, j)` and its `j`-th test grid from `(seed, "test", i, j)`.
//! Test grids therefore do not move when the number of training grids per
//! state changes, and no state's draws depend on any other state.
//!
//! A saved dataset is a directory holding `manifest.json` and `payload.bin`.
//! The payload is the magic `QSTDATA\0`, then one 688-byte record per sample
//! (training split first), then the SHA-256 of everything before it. Record
//! layout, little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8 | state index `u64` |
//! | 288 | 36 grid values `f64`, row-major |
//! | 8 | mask `u64`, bit `k` set when cell `k` was measured |
//! | 128 | 16 τ targets `f64` |
//! | 256 | reference ρ, 16 entries row-major as `(re, im)` `f64` pairs |

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{tag, SeededRng};
use crate::state::{random_state, DensityMatrix, StateKind};
use crate::tau::{pack_tau16, tau_from_density, Tau16};
use crate::tomography::{
    mask_measurements, measure, noisy_projector_grid, projector_grid, MeasurementGrid, NoiseParams,
    GRID_CELLS,
};

pub const FORMAT_VERSION: u32 = 1;
pub const PAYLOAD_MAGIC: &[u8; 8] = b"QSTDATA\0";
pub const RECORD_BYTES: usize = 8 + 8 * GRID_CELLS + 8 + 8 * 16 + 8 * 32;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PAYLOAD_FILE: &str = "payload.bin";
/// Draws of a random state before a singular one is reported.
pub const STATE_ATTEMPTS: u64 = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_states: usize,
    pub state_kind: StateKind,
    pub noisy_per_state: usize,
    pub train_per_state: usize,
    pub sigma: f64,
    pub keep_projectors: usize,
    pub master_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_states: 20,
            state_kind: StateKind::Mixed,
            noisy_per_state: 200,
            train_per_state: 195,
            sigma: std::f64::consts::PI / 6.0,
            keep_projectors: GRID_CELLS,
            master_seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 {
            return Err(Error::InvalidInput("at least one state is required".into()));
        }
        if self.train_per_state == 0 || self.train_per_state >= self.noisy_per_state {
            return Err(Error::InvalidInput(format!(
                "need 0 < train_per_state < noisy_per_state, got {} and {}",
                self.train_per_state, self.noisy_per_state
            )));
        }
        if !(1..=GRID_CELLS).contains(&self.keep_projectors) {
            return Err(Error::BadCount(self.keep_projectors));
        }
        NoiseParams::new(self.sigma)?;
        Ok(())
    }

    pub fn test_per_state(&self) -> usize {
        self.noisy_per_state - self.train_per_state
    }
}

/// One noiseless grid per random state, split `n − t / t` with
/// `t = max(1, ⌊n/12⌋)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiselessConfig {
    pub n_samples: usize,
    pub state_kind: StateKind,
    pub master_seed: u64,
}

impl NoiselessConfig {
    pub fn test_count(&self) -> usize {
        (self.n_samples / 12).max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DatasetSpec {
    Noisy(DatasetConfig),
    Noiseless(NoiselessConfig),
}

impl DatasetSpec {
    pub fn seed(&self) -> u64 {
        match self {
            DatasetSpec::Noisy(c) => c.master_seed,
            DatasetSpec::Noiseless(c) => c.master_seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub state_index: u64,
    pub grid: MeasurementGrid,
    pub target: Tau16,
    pub reference: DensityMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// A random state with a factorizable τ, redrawn from fresh streams when the
/// draw is singular.
pub fn draw_state(
    seed: u64,
    stream: u64,
    index: u64,
    kind: StateKind,
) -> Result<(DensityMatrix, Tau16)> {
    let mut last = None;
    for attempt in 0..STATE_ATTEMPTS {
        let mut rng = SeededRng::derived(seed, stream, index, attempt);
        let rho = random_state(&mut rng, kind);
        match tau_from_density(&rho) {
            Ok(tau) => return Ok((rho, pack_tau16(&tau))),
            Err(e @ Error::SingularState { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

pub fn generate(cfg: &DatasetConfig) -> Result<Dataset> {
    cfg.validate()?;
    let noise = NoiseParams::new(cfg.sigma)?;
    let per_state: Vec<(Vec<Sample>, Vec<Sample>)> = (0..cfg.n_states as u64)
        .into_par_iter()
        .map(|i| {
            let (reference, target) = draw_state(cfg.master_seed, tag("state"), i, cfg.state_kind)?;
            let draw = |split: &str, j: usize| -> Result<Sample> {
                let mut rng = SeededRng::derived(cfg.master_seed, tag(split), i, j as u64);
                let projectors = noisy_projector_grid(&mut rng, noise);
                let grid =
                    mask_measurements(&measure(&reference, &projectors)?, cfg.keep_projectors)?;
                Ok(Sample {
                    state_index: i,
                    grid,
                    target,
                    reference: reference.clone(),
                })
            };
            let train = (0..cfg.train_per_state)
                .map(|j| draw("train", j))
                .collect::<Result<Vec<_>>>()?;
            let test = (0..cfg.test_per_state())
                .map(|j| draw("test", j))
                .collect::<Result<Vec<_>>>()?;
            Ok((train, test))
        })
        .collect::<Result<_>>()?;

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (tr, te) in per_state {
        train.extend(tr);
        test.extend(te);
    }
    Ok(Dataset {
        spec: DatasetSpec::Noisy(cfg.clone()),
        train,
        test,
    })
}

pub fn generate_noiseless_random(n: usize, seed: u64, kind: StateKind) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "a noiseless corpus needs at least 2 samples, got {n}"
        )));
    }
    let cfg = NoiselessConfig {
        n_samples: n,
        state_kind: kind,
        master_seed: seed,
    };
    let projectors = projector_grid();
    let mut samples: Vec<Sample> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let (reference, target) = draw_state(seed, tag("noiseless"), i, kind)?;
            Ok(Sample {
                state_index: i,
                grid: measure(&reference, &projectors)?,
                target,
                reference,
            })
        })
        .collect::<Result<_>>()?;
    let test = samples.split_off(n - cfg.test_count());
    Ok(Dataset {
        spec: DatasetSpec::Noiseless(cfg),
        train: samples,
        test,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub spec: DatasetSpec,
    pub train_samples: usize,
    pub test_samples: usize,
    pub seed: u64,
    pub payload: String,
    pub record_bytes: usize,
    pub payload_sha256: String,
}

fn encode_payload(ds: &Dataset) -> Vec<u8> {
    let n = ds.train.len() + ds.test.len();
    let mut out = Vec::with_capacity(8 + n * RECORD_BYTES + 32);
    out.extend_from_slice(PAYLOAD_MAGIC);
    for s in ds.train.iter().chain(&ds.test) {
        out.extend_from_slice(&s.state_index.to_le_bytes());
        for v in s.grid.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&s.grid.mask_bits().to_le_bytes());
        for v in s.target.0.iter().chain(&s.reference.to_interleaved()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `manifest.json` and `payload.bin` into `dir`, creating it.
pub fn save(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let payload = encode_payload(ds);
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        spec: ds.spec.clone(),
        train_samples: ds.train.len(),
        test_samples: ds.test.len(),
        seed: ds.spec.seed(),
        payload: PAYLOAD_FILE.into(),
        record_bytes: RECORD_BYTES,
        payload_sha256: hex(&payload[payload.len() - 32..]),
    };
    fs::write(dir.join(PAYLOAD_FILE), &payload)?;
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

pub fn load(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path)?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let found = raw
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Malformed {
            path: manifest_path.clone(),
            reason: "missing format_version".into(),
        })?;
    if found != FORMAT_VERSION as u64 {
        return Err(Error::FormatVersionMismatch {
            path: manifest_path,
            found: found.min(u32::MAX as u64) as u32,
            expected: FORMAT_VERSION,
        });
    }
    let manifest: Manifest = serde_json::from_value(raw)?;
    let payload_path: PathBuf = dir.join(&manifest.payload);
    let bytes = fs::read(&payload_path)?;
    let n = manifest.train_samples + manifest.test_samples;
    let expected_len = 8 + n * RECORD_BYTES + 32;
    if bytes.len() != expected_len {
        return Err(Error::ChecksumMismatch(payload_path));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    let digest = Sha256::digest(body);
    if digest.as_slice() != trailer || hex(trailer) != manifest.payload_sha256 {
        return Err(Error::ChecksumMismatch(payload_path));
    }
    if &body[..8] != PAYLOAD_MAGIC {
        return Err(Error::Malformed {
            path: payload_path,
            reason: "bad payload magic".into(),
        });
    }

    let mut samples = Vec::with_capacity(n);
    for rec in body[8..].chunks_exact(RECORD_BYTES) {
        let f = |k: usize| f64::from_le_bytes(rec[k..k + 8].try_into().unwrap());
        let u = |k: usize| u64::from_le_bytes(rec[k..k + 8].try_into().unwrap());
        let state_index = u(0);
        let values: [f64; GRID_CELLS] = std::array::from_fn(|k| f(8 + 8 * k));
        let mask_at = 8 + 8 * GRID_CELLS;
        let mask = MeasurementGrid::mask_from_bits(u(mask_at));
        let target = Tau16(std::array::from_fn(|k| f(mask_at + 8 + 8 * k)));
        let rho_at = mask_at + 8 + 128;
        let interleaved: Vec<f64> = (0..32).map(|k| f(rho_at + 8 * k)).collect();
        let reference = DensityMatrix::from_interleaved(&interleaved)?;
        samples.push(Sample {
            state_index,
            grid: MeasurementGrid::with_mask(values, mask),
            target,
            reference,
        });
    }
    let test = samples.split_off(manifest.train_samples);
    Ok(Dataset {
        spec: manifest.spec,
        train: samples,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> DatasetConfig {
        DatasetConfig {
            n_states: 3,
            noisy_per_state: 6,
            train_per_state: 4,
            master_seed: seed,
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn split_sizes_and_membership() {
        let cfg = small(1);
        let ds = generate(&cfg).unwrap();
        assert_eq!(ds.train.len(), 12);
        assert_eq!(ds.test.len(), 6);
        for i in 0..3 {
            assert!(ds.train.iter().any(|s| s.state_index == i));
            assert!(ds.test.iter().any(|s| s.state_index == i));
        }
        assert_eq!(ds, generate(&cfg).unwrap());
    }

    #[test]
    fn paper_scale_counts() {
        let cfg = DatasetConfig {
            n_states: 80,
            ..DatasetConfig::default()
        };
        assert_eq!(cfg.n_states * cfg.train_per_state, 15_600);
        assert_eq!(cfg.n_states * cfg.test_per_state(), 400);
    }

    #[test]
    fn sigma_zero_grids_are_noiseless() {
        let cfg = DatasetConfig {
            sigma: 0.0,
            ..small(2)
        };
        let ds = generate(&cfg).unwrap();
        for s in ds.train.iter().chain(&ds.test) {
            let clean = measure(&s.reference, &projector_grid()).unwrap();
            assert_eq!(s.grid, clean);
        }
    }

    #[test]
    fn test_grids_do_not_depend_on_train_count() {
        let a = generate(&small(3)).unwrap();
        let b = generate(&DatasetConfig {
            noisy_per_state: 4,
            train_per_state: 2,
            ..small(3)
        })
        .unwrap();
        assert_eq!(a.test, b.test);
    }

    #[test]
    fn states_are_isolated() {
        let a = generate(&small(4)).unwrap();
        let b = generate(&DatasetConfig {
            n_states: 2,
            ..small(4)
        })
        .unwrap();
        assert_eq!(&a.train[..8], &b.train[..]);
    }

    #[test]
    fn noiseless_split() {
        let ds = generate_noiseless_random(2, 1, StateKind::Mixed).unwrap();
        assert_eq!((ds.train.len(), ds.test.len()), (1, 1));
        let ds = generate_noiseless_random(60, 1, StateKind::Mixed).unwrap();
        assert_eq!((ds.train.len(), ds.test.len()), (55, 5));
        assert!(generate_noiseless_random(1, 1, StateKind::Mixed).is_err());
        assert_eq!(
            NoiselessConfig {
                n_samples: 60_000,
                state_kind: StateKind::Mixed,
                master_seed: 0
            }
            .test_count(),
            5_000
        );
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            DatasetConfig {
                train_per_state: 6,
                ..small(0)
            },
            DatasetConfig {
                keep_projectors: 0,
                ..small(0)
            },
            DatasetConfig {
                sigma: -1.0,
                ..small(0)
            },
        ] {
            assert!(generate(&cfg).is_err());
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = generate(&DatasetConfig {
            keep_projectors: 20,
            ..small(5)
        })
        .unwrap();
        save(&ds, dir.path()).unwrap();
        assert_eq!(load(dir.path()).unwrap(), ds);
    }
}
