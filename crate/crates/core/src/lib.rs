//! Two-qubit quantum state tomography under measurement-basis noise.
//!
//! The crate simulates the 36 projective measurements of a polarization
//! tomography setup, reconstructs density matrices by linear Stokes inversion,
//! and trains a small convolutional network that regresses the 16 real
//! parameters of the lower-triangular τ-matrix, from which a physical state
//! `ρ = τ†τ / Tr(τ†τ)` is recovered.
//!
//! Module map:
//!
//! * [`linalg`], [`state`], [`tau`], [`fidelity`]: complex 4×4 algebra,
//!   random states, τ-matrix factorization and Uhlmann fidelity.
//! * [`tomography`]: projector grid, rotation noise, measurement and masking.
//! * [`stokes`]: the closed-form baseline.
//! * [`cnn`]: the regressor, its manual backpropagation and Adagrad training.
//! * [`dataset`]: seeded corpus generation and on-disk format.
//! * [`experiment`]: sweep runners, CSV and SVG output.

pub mod cnn;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod fidelity;
pub mod linalg;
pub mod rng;
pub mod state;
pub mod stokes;
pub mod tau;
pub mod tomography;

pub use error::{Error, Result};
pub use fidelity::fidelity;
pub use linalg::{CMatrix, C64};
pub use rng::SeededRng;
pub use state::{DensityMatrix, StateKind, StateVector};
pub use tau::{Tau16, TauMatrix};
pub use tomography::{MeasurementGrid, NoiseParams, ProjectorGrid};
