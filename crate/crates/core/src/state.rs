//! Two-qubit states and their random ensembles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, householder_qr, CMatrix, C64};
use crate::rng::SeededRng;

/// Hilbert-space dimension of two qubits.
pub const DIM: usize = 4;

/// Mixing weight that lifts pure states off the rank-deficient boundary so the
/// τ factorization exists.
pub const PURE_STATE_EPSILON: f64 = 1e-7;

pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
pub const TRACE_TOLERANCE: f64 = 1e-12;
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Pure,
    Mixed,
}

impl StateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StateKind::Pure => "pure",
            StateKind::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for StateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure" => Ok(StateKind::Pure),
            "mixed" => Ok(StateKind::Mixed),
            other => Err(Error::InvalidInput(format!("unknown state kind {other:?}"))),
        }
    }
}

/// Normalized amplitudes over `|HH⟩, |HV⟩, |VH⟩, |VV⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector([C64; DIM]);

impl StateVector {
    pub fn new(amplitudes: [C64; DIM]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "state vector has squared norm {norm}"
            )));
        }
        Ok(Self(amplitudes))
    }

    /// Rescales to unit norm.
    pub fn normalized(amplitudes: [C64; DIM]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        Ok(Self(amplitudes.map(|a| a / norm)))
    }

    pub fn amplitudes(&self) -> &[C64; DIM] {
        &self.0
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn projector(&self) -> CMatrix {
        CMatrix::outer(&self.0)
    }
}

/// Hermitian, unit-trace, positive-semidefinite 4×4 matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates every invariant, including positivity via an eigensolve.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.rows() != DIM || m.cols() != DIM {
            return Err(Error::ShapeMismatch(format!(
                "density matrix must be {DIM}x{DIM}, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if !m.is_finite() {
            return Err(Error::InvalidInput(
                "density matrix has non-finite entries".into(),
            ));
        }
        let defect = m.hermitian_defect();
        if defect > HERMITIAN_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "density matrix is not Hermitian (defect {defect:e})"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "density matrix has trace {tr}"
            )));
        }
        let min = hermitian_eig(&m)?.values[0];
        if min < -PSD_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "density matrix is not positive semidefinite (min eigenvalue {min:e})"
            )));
        }
        Ok(Self(m.hermitian_part()))
    }

    /// For matrices that are physical by construction.
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        debug_assert_eq!((m.rows(), m.cols()), (DIM, DIM));
        Self(m.hermitian_part())
    }

    pub fn maximally_mixed() -> Self {
        Self(CMatrix::identity(DIM).scale(1.0 / DIM as f64))
    }

    /// `|ψ⟩⟨ψ|` with no regularization.
    pub fn from_pure(psi: &StateVector) -> Self {
        Self::from_trusted(psi.projector())
    }

    /// `(1 - ε)|ψ⟩⟨ψ| + (ε/4) I`
    pub fn regularized_pure(psi: &StateVector, epsilon: f64) -> Self {
        let p = psi.projector().scale(1.0 - epsilon);
        let floor = CMatrix::identity(DIM).scale(epsilon / DIM as f64);
        Self::from_trusted(&p + &floor)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    /// `Tr(ρ²)`
    pub fn purity(&self) -> f64 {
        self.0.trace_of_product(&self.0).re
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(hermitian_eig(&self.0)?.values)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    /// Row-major `(re, im)` pairs, 32 numbers.
    pub fn to_interleaved(&self) -> [f64; 2 * DIM * DIM] {
        let mut out = [0.0; 2 * DIM * DIM];
        for (k, z) in self.0.as_slice().iter().enumerate() {
            out[2 * k] = z.re;
            out[2 * k + 1] = z.im;
        }
        out
    }

    pub fn from_interleaved(values: &[f64]) -> Result<Self> {
        if values.len() != 2 * DIM * DIM {
            return Err(Error::ShapeMismatch(format!(
                "expected {} interleaved values, got {}",
                2 * DIM * DIM,
                values.len()
            )));
        }
        let entries = values
            .chunks_exact(2)
            .map(|c| C64::new(c[0], c[1]))
            .collect();
        Self::new(CMatrix::from_vec(DIM, DIM, entries))
    }

    /// Convex combination `w·a + (1 - w)·b`.
    pub fn mix(a: &DensityMatrix, b: &DensityMatrix, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidInput(format!(
                "mixing weight {w} outside [0, 1]"
            )));
        }
        Ok(Self::from_trusted(&a.0.scale(w) + &b.0.scale(1.0 - w)))
    }
}

/// Complex Ginibre matrix: the full real part is drawn first (row-major), then
/// the full imaginary part.
pub fn ginibre(rng: &mut SeededRng, dim: usize) -> CMatrix {
    let re: Vec<f64> = (0..dim * dim).map(|_| rng.standard_normal()).collect();
    let im: Vec<f64> = (0..dim * dim).map(|_| rng.standard_normal()).collect();
    CMatrix::from_vec(
        dim,
        dim,
        re.into_iter()
            .zip(im)
            .map(|(r, i)| C64::new(r, i))
            .collect(),
    )
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix.
///
/// Column `k` of `Q` is multiplied by the phase of `R[k][k]`, which makes the
/// factorization unique (positive `R` diagonal) and the law of `Q` Haar.
pub fn haar_random_unitary(rng: &mut SeededRng, dim: usize) -> Result<CMatrix> {
    if dim != 2 && dim != 4 {
        return Err(Error::InvalidInput(format!(
            "Haar sampling supports dimension 2 or 4, got {dim}"
        )));
    }
    let g = ginibre(rng, dim);
    let (mut q, r) = householder_qr(&g);
    for k in 0..dim {
        let d = r[(k, k)];
        let norm = d.norm();
        if norm == 0.0 {
            continue;
        }
        let phase = d / norm;
        for i in 0..dim {
            q[(i, k)] *= phase;
        }
    }
    Ok(q)
}

/// First column of a Haar unitary.
pub fn random_state_vector(rng: &mut SeededRng) -> StateVector {
    let u = haar_random_unitary(rng, DIM).expect("dimension 4 is supported");
    let col = u.column(0);
    StateVector::normalized([col[0], col[1], col[2], col[3]]).expect("unitary column is nonzero")
}

/// ε-regularized random pure state.
pub fn random_pure_state(rng: &mut SeededRng) -> DensityMatrix {
    DensityMatrix::regularized_pure(&random_state_vector(rng), PURE_STATE_EPSILON)
}

/// Hilbert–Schmidt random mixed state `G G† / Tr(G G†)`.
pub fn random_mixed_state(rng: &mut SeededRng) -> DensityMatrix {
    let g = ginibre(rng, DIM);
    let ggd = &g * &g.adjoint();
    let tr = ggd.trace().re;
    DensityMatrix::from_trusted(ggd.scale(1.0 / tr))
}

pub fn random_state(rng: &mut SeededRng, kind: StateKind) -> DensityMatrix {
    match kind {
        StateKind::Pure => random_pure_state(rng),
        StateKind::Mixed => random_mixed_state(rng),
    }
}

/// Computational basis product states, indexed `HH, HV, VH, VV`.
pub fn basis_state(index: usize) -> StateVector {
    let mut a = [C64::new(0.0, 0.0); DIM];
    a[index] = C64::new(1.0, 0.0);
    StateVector(a)
}

/// `(|HH⟩ + |VV⟩)/√2`
pub fn bell_phi_plus() -> StateVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    StateVector([
        C64::new(s, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(s, 0.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_unitary_is_unitary_and_deterministic() {
        for seed in 0..200 {
            let u = haar_random_unitary(&mut SeededRng::new(seed), 4).unwrap();
            assert!(u.unitarity_defect() < 1e-12);
            let again = haar_random_unitary(&mut SeededRng::new(seed), 4).unwrap();
            assert_eq!(u, again);
        }
    }

    #[test]
    fn haar_rejects_other_dimensions() {
        assert!(haar_random_unitary(&mut SeededRng::new(0), 3).is_err());
    }

    #[test]
    fn haar_first_moment_dim2() {
        // E|U00|^2 = 1/dim and E|U00|^4 = 2/(dim(dim+1)) for Haar measure.
        let mut rng = SeededRng::new(2024);
        let n = 10_000;
        let (mut m2, mut m4) = (0.0, 0.0);
        for _ in 0..n {
            let u = haar_random_unitary(&mut rng, 2).unwrap();
            let p = u[(0, 0)].norm_sqr();
            m2 += p;
            m4 += p * p;
        }
        assert!((m2 / n as f64 - 0.5).abs() < 0.02);
        assert!((m4 / n as f64 - 1.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn haar_phase_of_diagonal_is_uniform() {
        // Without the R-phase correction the diagonal phase of Householder Q is
        // biased; with it, E[U00 / |U00|] vanishes.
        let mut rng = SeededRng::new(77);
        let n = 10_000;
        let mut acc = C64::new(0.0, 0.0);
        for _ in 0..n {
            let u = haar_random_unitary(&mut rng, 4).unwrap();
            acc += u[(0, 0)] / u[(0, 0)].norm();
        }
        assert!((acc / n as f64).norm() < 0.03);
    }

    #[test]
    fn pure_states_are_regularized() {
        let mut rng = SeededRng::new(5);
        let mut purity = 0.0;
        let n = 1000;
        for _ in 0..n {
            let rho = random_pure_state(&mut rng);
            assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
            let min = rho.min_eigenvalue().unwrap();
            assert!(min >= PURE_STATE_EPSILON / 4.0 - 1e-12, "min {min}");
            purity += rho.purity();
            assert!(rho.purity() >= 1.0 - 3.0 * PURE_STATE_EPSILON);
        }
        assert!(purity / n as f64 > 0.9999996);
    }

    #[test]
    fn mixed_states_are_physical_and_full_rank() {
        let mut rng = SeededRng::new(8);
        let n = 10_000;
        let mut full_rank = 0;
        let mut purity = 0.0;
        for _ in 0..n {
            let rho = random_mixed_state(&mut rng);
            assert!(rho.matrix().hermitian_defect() < 1e-12);
            assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
            if rho.min_eigenvalue().unwrap() > 1e-12 {
                full_rank += 1;
            }
            purity += rho.purity();
        }
        assert!(full_rank as f64 >= 0.999 * n as f64);
        // Hilbert–Schmidt ensemble with N = K = 4: E Tr ρ² = (N + K)/(NK + 1).
        let expected = 8.0 / 17.0;
        assert!(
            (purity / n as f64 - expected).abs() < 0.02,
            "{}",
            purity / n as f64
        );
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(CMatrix::identity(4)).is_err());
        assert!(DensityMatrix::new(CMatrix::identity(4).scale(0.25)).is_ok());
        assert!(DensityMatrix::new(CMatrix::from_real_diagonal(&[1.2, 0.0, 0.0, -0.2])).is_err());
        assert!(DensityMatrix::new(CMatrix::identity(2).scale(0.5)).is_err());
    }

    #[test]
    fn interleaved_round_trip() {
        let rho = random_mixed_state(&mut SeededRng::new(1));
        let back = DensityMatrix::from_interleaved(&rho.to_interleaved()).unwrap();
        assert_eq!(back, rho);
    }
}
