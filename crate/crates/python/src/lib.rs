use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;

use qst_core::cnn::{self, checkpoint, GridEncoding, TrainConfig};
use qst_core::dataset::{self, DatasetConfig};
use qst_core::experiment::{self, ExperimentKind, ExperimentSpec, Profile, RunOptions};
use qst_core::state::{random_state, DIM};
use qst_core::stokes;
use qst_core::tau::{density_from_tau, pack_tau16, tau_from_density, unpack_tau16};
use qst_core::tomography::{self, MeasurementGrid, NoiseParams, GRID_CELLS};
use qst_core::{CMatrix, Error, SeededRng, StateKind, Tau16, C64};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::NumericalFailure(_) | Error::DegenerateTau { .. } | Error::SingularState { .. } => {
            PyArithmeticError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn kind(s: &str) -> PyResult<StateKind> {
    s.parse().map_err(err)
}

fn to_rows(m: &CMatrix) -> Vec<Vec<C64>> {
    (0..DIM)
        .map(|i| (0..DIM).map(|j| m[(i, j)]).collect())
        .collect()
}

fn from_rows(rows: Vec<Vec<C64>>) -> PyResult<CMatrix> {
    if rows.len() != DIM || rows.iter().any(|r| r.len() != DIM) {
        return Err(PyValueError::new_err("expected a 4x4 matrix"));
    }
    let mut m = CMatrix::zeros(DIM, DIM);
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}

fn grid(values: Vec<f64>) -> PyResult<MeasurementGrid> {
    let arr: [f64; GRID_CELLS] = values.try_into().map_err(|v: Vec<f64>| {
        PyValueError::new_err(format!("expected 36 values, got {}", v.len()))
    })?;
    Ok(MeasurementGrid::full(arr))
}

/// Two-qubit density matrix.
#[pyclass(name = "DensityMatrix", module = "qst", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDensity(qst_core::DensityMatrix);

#[pymethods]
impl PyDensity {
    #[new]
    fn new(rows: Vec<Vec<C64>>) -> PyResult<Self> {
        qst_core::DensityMatrix::new(from_rows(rows)?)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (seed, kind = "mixed"))]
    fn random(seed: u64, kind: &str) -> PyResult<Self> {
        Ok(Self(random_state(
            &mut SeededRng::new(seed),
            self::kind(kind)?,
        )))
    }

    #[staticmethod]
    fn from_tau(tau: [f64; 16]) -> PyResult<Self> {
        density_from_tau(&unpack_tau16(&Tau16(tau)))
            .map(Self)
            .map_err(err)
    }

    fn matrix(&self) -> Vec<Vec<C64>> {
        to_rows(self.0.matrix())
    }

    fn tau(&self) -> PyResult<[f64; 16]> {
        tau_from_density(&self.0)
            .map(|t| pack_tau16(&t).0)
            .map_err(err)
    }

    fn purity(&self) -> f64 {
        self.0.purity()
    }

    fn eigenvalues(&self) -> PyResult<Vec<f64>> {
        self.0.eigenvalues().map_err(err)
    }

    /// Ideal (or noisy, for `sigma > 0`) 6×6 measurement grid, row-major.
    #[pyo3(signature = (sigma = 0.0, seed = 0))]
    fn measure(&self, sigma: f64, seed: u64) -> PyResult<Vec<f64>> {
        let projectors = if sigma == 0.0 {
            tomography::projector_grid()
        } else {
            let noise = NoiseParams::new(sigma).map_err(err)?;
            tomography::noisy_projector_grid(&mut SeededRng::new(seed), noise)
        };
        let g = tomography::measure(&self.0, &projectors).map_err(err)?;
        Ok(g.values().to_vec())
    }

    fn fidelity(&self, other: &PyDensity) -> PyResult<f64> {
        qst_core::fidelity(&self.0, &other.0).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix(purity={:.6})", self.0.purity())
    }
}

/// Raw Stokes inversion; the result may be unphysical.
#[pyfunction]
fn stokes_reconstruct(values: Vec<f64>) -> PyResult<Vec<Vec<C64>>> {
    Ok(to_rows(&stokes::stokes_reconstruct(&grid(values)?)))
}

/// Stokes inversion followed by projection onto the physical states.
#[pyfunction]
fn stokes_state(values: Vec<f64>) -> PyResult<PyDensity> {
    stokes::physicalize(&stokes::stokes_reconstruct(&grid(values)?))
        .map(PyDensity)
        .map_err(err)
}

#[pyfunction]
fn fidelity(a: &PyDensity, b: &PyDensity) -> PyResult<f64> {
    a.fidelity(b)
}

#[pyclass(name = "Dataset", module = "qst", frozen)]
struct PyDataset(dataset::Dataset);

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (seed = 0, states = 20, kind = "mixed", sigma = std::f64::consts::PI / 6.0, keep = 36, noisy = 200, train = 195))]
    fn generate(
        py: Python<'_>,
        seed: u64,
        states: usize,
        kind: &str,
        sigma: f64,
        keep: usize,
        noisy: usize,
        train: usize,
    ) -> PyResult<Self> {
        let cfg = DatasetConfig {
            n_states: states,
            state_kind: self::kind(kind)?,
            noisy_per_state: noisy,
            train_per_state: train,
            sigma,
            keep_projectors: keep,
            master_seed: seed,
        };
        py.detach(|| dataset::generate(&cfg)).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, seed = 0, kind = "mixed"))]
    fn noiseless(py: Python<'_>, n: usize, seed: u64, kind: &str) -> PyResult<Self> {
        let kind = self::kind(kind)?;
        py.detach(|| dataset::generate_noiseless_random(n, seed, kind))
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        dataset::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        dataset::save(&self.0, &path).map_err(err)
    }

    #[getter]
    fn train_len(&self) -> usize {
        self.0.train.len()
    }

    #[getter]
    fn test_len(&self) -> usize {
        self.0.test.len()
    }

    /// `(state_index, grid, reference)` of one sample.
    #[pyo3(signature = (index, split = "test"))]
    fn sample(&self, index: usize, split: &str) -> PyResult<(u64, Vec<f64>, PyDensity)> {
        let samples = match split {
            "train" => &self.0.train,
            "test" => &self.0.test,
            other => return Err(PyValueError::new_err(format!("unknown split {other:?}"))),
        };
        let s = samples
            .get(index)
            .ok_or_else(|| PyValueError::new_err(format!("index {index} out of range")))?;
        Ok((
            s.state_index,
            s.grid.values().to_vec(),
            PyDensity(s.reference.clone()),
        ))
    }

    /// Per-sample fidelity of the physicalized Stokes estimate on the test split.
    fn stokes_fidelities(&self, py: Python<'_>) -> PyResult<Vec<f64>> {
        let scores = py
            .detach(|| experiment::stokes_scores(&self.0.test))
            .map_err(err)?;
        Ok(scores.into_iter().map(|s| s.fidelity).collect())
    }
}

#[pyclass(name = "Model", module = "qst", frozen)]
struct PyModel {
    params: cnn::CnnParams,
    #[pyo3(get)]
    history: Vec<(usize, f64, Option<f64>)>,
}

#[pymethods]
impl PyModel {
    /// Train a fresh network on `data.train`, evaluating on `data.test` each epoch.
    #[staticmethod]
    #[pyo3(signature = (data, epochs, seed = 0, compact = false))]
    fn train(
        py: Python<'_>,
        data: &PyDataset,
        epochs: usize,
        seed: u64,
        compact: bool,
    ) -> PyResult<Self> {
        let encoding = if compact {
            let keep = match &data.0.spec {
                dataset::DatasetSpec::Noisy(c) => c.keep_projectors,
                dataset::DatasetSpec::Noiseless(_) => GRID_CELLS,
            };
            GridEncoding::compact(keep).map_err(err)?
        } else {
            GridEncoding::ZeroPadded
        };
        let cfg = TrainConfig {
            epochs,
            seed,
            encoding,
            ..TrainConfig::default()
        };
        let (params, hist) = py.detach(|| cnn::train(&data.0, &cfg)).map_err(err)?;
        let history = hist
            .records
            .iter()
            .map(|r| (r.epoch, r.train_loss, r.test_fidelity))
            .collect();
        Ok(Self { params, history })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let params = checkpoint::load(&path).map_err(err)?;
        Ok(Self {
            params,
            history: Vec::new(),
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        checkpoint::save(&self.params, &path).map_err(err)
    }

    #[getter]
    fn input_shape(&self) -> (usize, usize) {
        self.params.encoding().input_shape()
    }

    fn predict(&self, values: Vec<f64>) -> PyResult<PyDensity> {
        cnn::predict_density(&self.params, &grid(values)?)
            .map(PyDensity)
            .map_err(err)
    }

    fn evaluate(&self, py: Python<'_>, data: &PyDataset) -> PyResult<Vec<f64>> {
        py.detach(|| cnn::evaluate(&self.params, &data.0.test))
            .map(|e| e.fidelities)
            .map_err(err)
    }
}

/// Run a preset sweep and return `{series: [(swept, cnn_mean, cnn_std, stokes_mean, stokes_std)]}`.
#[pyfunction]
#[pyo3(signature = (kind, out, profile = "smoke", seed = 0, workers = 1))]
fn run_experiment(
    py: Python<'_>,
    kind: &str,
    out: PathBuf,
    profile: &str,
    seed: u64,
    workers: usize,
) -> PyResult<Vec<(String, Vec<(f64, f64, f64, f64, f64)>)>> {
    let kind = ExperimentKind::ALL
        .into_iter()
        .find(|k| k.name() == kind)
        .ok_or_else(|| PyValueError::new_err(format!("unknown experiment {kind:?}")))?;
    let profile = [Profile::Smoke, Profile::Desk, Profile::Paper]
        .into_iter()
        .find(|p| p.name() == profile)
        .ok_or_else(|| PyValueError::new_err(format!("unknown profile {profile:?}")))?;
    let mut spec = ExperimentSpec::preset(kind, profile);
    spec.seed = seed;
    let opts = RunOptions {
        workers: workers.max(1),
        ..RunOptions::new(out)
    };
    let outcomes = py.detach(|| experiment::run(&spec, &opts)).map_err(err)?;
    Ok(outcomes
        .into_iter()
        .map(|o| {
            let rows = o
                .rows
                .iter()
                .map(|r| (r.swept, r.cnn_mean, r.cnn_std, r.stokes_mean, r.stokes_std))
                .collect();
            (o.name, rows)
        })
        .collect())
}

#[pymodule]
fn qst(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensity>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(stokes_reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(stokes_state, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("GRID_CELLS", GRID_CELLS)?;
    Ok(())
}
