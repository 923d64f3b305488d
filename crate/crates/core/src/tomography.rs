//! Simulated two-qubit polarization tomography.
//!
//! Thirty-six product projectors are arranged in the 6×6 order of the Nucrypt
//! coincidence measurements. Noise is modelled as an unknown rotation of the
//! second analyser: every cell gets its own random SU(2) rotation `U` and its
//! second tensor factor `q` becomes `U q U†`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::rng::SeededRng;
use crate::state::DensityMatrix;

pub const GRID_SIDE: usize = 6;
pub const GRID_CELLS: usize = GRID_SIDE * GRID_SIDE;

/// A measured `Tr(ρP)` may carry at most this much imaginary residue.
pub const IMAGINARY_RESIDUE_LIMIT: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarization {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Polarization {
    pub const ALL: [Polarization; 6] = [
        Polarization::H,
        Polarization::V,
        Polarization::D,
        Polarization::A,
        Polarization::R,
        Polarization::L,
    ];

    pub fn label(self) -> char {
        match self {
            Polarization::H => 'h',
            Polarization::V => 'v',
            Polarization::D => 'd',
            Polarization::A => 'a',
            Polarization::R => 'r',
            Polarization::L => 'l',
        }
    }

    /// Jones vector in the `(H, V)` basis.
    pub fn ket(self) -> [C64; 2] {
        let s = FRAC_1_SQRT_2;
        let c = C64::new;
        match self {
            Polarization::H => [c(1.0, 0.0), c(0.0, 0.0)],
            Polarization::V => [c(0.0, 0.0), c(1.0, 0.0)],
            Polarization::D => [c(s, 0.0), c(s, 0.0)],
            Polarization::A => [c(s, 0.0), c(-s, 0.0)],
            Polarization::R => [c(s, 0.0), c(0.0, s)],
            Polarization::L => [c(s, 0.0), c(0.0, -s)],
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

use Polarization::{A, D, H, L, R, V};

/// `(first qubit, second qubit)` analyser settings, row-major.
pub const NUCRYPT_ORDER: [[(Polarization, Polarization); GRID_SIDE]; GRID_SIDE] = [
    [(H, H), (H, V), (V, V), (V, H), (V, R), (V, L)],
    [(H, L), (H, R), (H, D), (H, A), (V, A), (V, D)],
    [(A, D), (A, A), (D, A), (D, D), (D, R), (D, L)],
    [(A, L), (A, R), (A, H), (A, V), (D, V), (D, H)],
    [(R, H), (R, V), (L, V), (L, H), (L, R), (L, L)],
    [(R, L), (R, R), (R, D), (R, A), (L, A), (L, D)],
];

#[derive(Clone, Debug, PartialEq)]
pub struct SingleQubitProjector {
    pub label: Polarization,
    pub matrix: CMatrix,
}

impl SingleQubitProjector {
    pub fn new(label: Polarization) -> Self {
        Self {
            label,
            matrix: CMatrix::outer(&label.ket()),
        }
    }
}

/// The six projectors `h, v, d, a, r, l`.
pub fn basis_projectors() -> [SingleQubitProjector; 6] {
    Polarization::ALL.map(SingleQubitProjector::new)
}

/// 6×6 grid of two-qubit projectors, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorGrid {
    cells: Vec<CMatrix>,
}

impl ProjectorGrid {
    pub fn get(&self, row: usize, col: usize) -> &CMatrix {
        &self.cells[row * GRID_SIDE + col]
    }

    pub fn cells(&self) -> &[CMatrix] {
        &self.cells
    }
}

/// Noiseless grid in Nucrypt order.
pub fn projector_grid() -> ProjectorGrid {
    let cells = NUCRYPT_ORDER
        .iter()
        .flatten()
        .map(|&(a, b)| {
            SingleQubitProjector::new(a)
                .matrix
                .kron(&SingleQubitProjector::new(b).matrix)
        })
        .collect();
    ProjectorGrid { cells }
}

/// Standard deviation of the three rotation angles, in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub sigma: f64,
}

impl NoiseParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidInput(format!(
                "noise sigma must be finite and nonnegative, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn noiseless() -> Self {
        Self { sigma: 0.0 }
    }
}

/// Rotation angles `(ϑ, φ, ξ)`, drawn in that order as `σ·z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationAngles {
    pub theta: f64,
    pub phi: f64,
    pub xi: f64,
}

impl RotationAngles {
    pub fn sample(rng: &mut SeededRng, noise: NoiseParams) -> Self {
        let theta = noise.sigma * rng.standard_normal();
        let phi = noise.sigma * rng.standard_normal();
        let xi = noise.sigma * rng.standard_normal();
        Self { theta, phi, xi }
    }

    /// `[[e^{iφ/2} cos ϑ, −i e^{iξ} sin ϑ], [−i e^{−iξ} sin ϑ, e^{−iφ/2} cos ϑ]]`
    pub fn unitary(&self) -> CMatrix {
        let (st, ct) = (libm::sin(self.theta), libm::cos(self.theta));
        let half = self.phi / 2.0;
        let e_half = C64::new(libm::cos(half), libm::sin(half));
        let e_xi = C64::new(libm::cos(self.xi), libm::sin(self.xi));
        let minus_i = C64::new(0.0, -1.0);
        CMatrix::from_vec(
            2,
            2,
            vec![
                e_half * ct,
                minus_i * e_xi * st,
                minus_i * e_xi.conj() * st,
                e_half.conj() * ct,
            ],
        )
    }
}

pub fn random_rotation(rng: &mut SeededRng, noise: NoiseParams) -> CMatrix {
    RotationAngles::sample(rng, noise).unitary()
}

/// Grid with an independent rotation on the second factor of every cell.
///
/// `σ = 0` returns the noiseless grid exactly and consumes no randomness.
pub fn noisy_projector_grid(rng: &mut SeededRng, noise: NoiseParams) -> ProjectorGrid {
    if noise.sigma == 0.0 {
        return projector_grid();
    }
    let cells = NUCRYPT_ORDER
        .iter()
        .flatten()
        .map(|&(a, b)| {
            let u = random_rotation(rng, noise);
            let q = SingleQubitProjector::new(b).matrix;
            let rotated = (&(&u * &q) * &u.adjoint()).hermitian_part();
            SingleQubitProjector::new(a).matrix.kron(&rotated)
        })
        .collect();
    ProjectorGrid { cells }
}

/// 36 expectation values plus a presence mask, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementGrid {
    values: [f64; GRID_CELLS],
    mask: [bool; GRID_CELLS],
}

impl MeasurementGrid {
    /// A fully measured grid.
    pub fn full(values: [f64; GRID_CELLS]) -> Self {
        Self {
            values,
            mask: [true; GRID_CELLS],
        }
    }

    /// Unmeasured cells are forced to exactly zero.
    pub fn with_mask(mut values: [f64; GRID_CELLS], mask: [bool; GRID_CELLS]) -> Self {
        for (v, &m) in values.iter_mut().zip(&mask) {
            if !m {
                *v = 0.0;
            }
        }
        Self { values, mask }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * GRID_SIDE + col]
    }

    pub fn is_measured(&self, row: usize, col: usize) -> bool {
        self.mask[row * GRID_SIDE + col]
    }

    pub fn values(&self) -> &[f64; GRID_CELLS] {
        &self.values
    }

    pub fn mask(&self) -> &[bool; GRID_CELLS] {
        &self.mask
    }

    pub fn measured_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Values of measured cells in row-major order.
    pub fn measured_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
    }

    /// Mask packed into the low 36 bits, bit `k` = cell `k`.
    pub fn mask_bits(&self) -> u64 {
        self.mask
            .iter()
            .enumerate()
            .fold(0u64, |acc, (k, &m)| acc | ((m as u64) << k))
    }

    pub fn mask_from_bits(bits: u64) -> [bool; GRID_CELLS] {
        std::array::from_fn(|k| bits >> k & 1 == 1)
    }
}

/// `m[i][j] = Re Tr(ρ · P[i][j])` for every cell.
pub fn measure(rho: &DensityMatrix, grid: &ProjectorGrid) -> Result<MeasurementGrid> {
    let mut values = [0.0; GRID_CELLS];
    for (k, p) in grid.cells.iter().enumerate() {
        let z = rho.matrix().trace_of_product(p);
        if z.im.abs() > IMAGINARY_RESIDUE_LIMIT {
            return Err(Error::Consistency(format!(
                "Tr(rho P) at cell {k} has imaginary part {:e}",
                z.im
            )));
        }
        values[k] = z.re;
    }
    Ok(MeasurementGrid::full(values))
}

/// Keep the first `keep` cells in row-major order and zero the rest.
pub fn mask_measurements(grid: &MeasurementGrid, keep: usize) -> Result<MeasurementGrid> {
    if !(1..=GRID_CELLS).contains(&keep) {
        return Err(Error::BadCount(keep));
    }
    let indices: Vec<usize> = (0..keep).collect();
    mask_to_indices(grid, &indices)
}

/// Keep only the listed row-major cell indices.
pub fn mask_to_indices(grid: &MeasurementGrid, kept: &[usize]) -> Result<MeasurementGrid> {
    if kept.is_empty() || kept.len() > GRID_CELLS {
        return Err(Error::BadCount(kept.len()));
    }
    let mut mask = [false; GRID_CELLS];
    for &k in kept {
        if k >= GRID_CELLS {
            return Err(Error::InvalidInput(format!(
                "cell index {k} outside the 6x6 grid"
            )));
        }
        mask[k] = grid.mask[k];
    }
    Ok(MeasurementGrid::with_mask(grid.values, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{basis_state, bell_phi_plus, random_mixed_state, PURE_STATE_EPSILON};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_qubit_projectors() {
        let p = basis_projectors();
        assert_eq!(
            p[0].matrix,
            CMatrix::from_vec(
                2,
                2,
                vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]
            )
        );
        let d = CMatrix::from_vec(2, 2, vec![c(0.5, 0.0); 4]);
        assert!(p[2].matrix.max_abs_diff(&d) < 1e-15);
        let r = CMatrix::from_vec(
            2,
            2,
            vec![c(0.5, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.5, 0.0)],
        );
        assert!(p[4].matrix.max_abs_diff(&r) < 1e-15);
        for q in &p {
            assert!((&q.matrix * &q.matrix).max_abs_diff(&q.matrix) < 1e-12);
            assert!(q.matrix.hermitian_defect() == 0.0);
            assert!((q.matrix.trace().re - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_corner_cells() {
        let g = projector_grid();
        let single = |k: usize| {
            let mut m = CMatrix::zeros(4, 4);
            m[(k, k)] = c(1.0, 0.0);
            m
        };
        assert_eq!(*g.get(0, 0), single(0));
        assert_eq!(*g.get(0, 1), single(1));
        assert_eq!(*g.get(0, 2), single(3));
        assert_eq!(*g.get(0, 3), single(2));
    }

    #[test]
    fn grid_cells_are_rank_one_projectors() {
        for p in projector_grid().cells() {
            assert!((p.trace().re - 1.0).abs() < 1e-14);
            assert!((p * p).max_abs_diff(p) < 1e-12);
            assert!(p.hermitian_defect() < 1e-15);
        }
    }

    #[test]
    fn zero_sigma_rotation_is_identity() {
        let mut rng = SeededRng::new(0);
        let u = random_rotation(&mut rng, NoiseParams::noiseless());
        assert_eq!(u, CMatrix::identity(2));
        assert_eq!(
            noisy_projector_grid(&mut rng, NoiseParams::noiseless()),
            projector_grid()
        );
    }

    #[test]
    fn rotations_are_unitary() {
        let mut rng = SeededRng::new(1);
        for _ in 0..1000 {
            let u = random_rotation(&mut rng, NoiseParams::new(std::f64::consts::PI).unwrap());
            assert!(u.unitarity_defect() < 1e-12);
        }
    }

    #[test]
    fn rotation_angle_spread() {
        let sigma = std::f64::consts::PI / 6.0;
        let mut rng = SeededRng::new(2);
        let n = 10_000;
        let thetas: Vec<f64> = (0..n)
            .map(|_| RotationAngles::sample(&mut rng, NoiseParams { sigma }).theta)
            .collect();
        let mean = thetas.iter().sum::<f64>() / n as f64;
        let var = thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var.sqrt() - sigma).abs() < 0.05 * sigma);
    }

    #[test]
    fn strong_noise_perturbs_most_cells() {
        let clean = projector_grid();
        let mut rng = SeededRng::new(3);
        let noise = NoiseParams::new(std::f64::consts::PI).unwrap();
        let (mut moved, mut total) = (0, 0);
        for _ in 0..100 {
            let g = noisy_projector_grid(&mut rng, noise);
            for (a, b) in g.cells().iter().zip(clean.cells()) {
                total += 1;
                if (a - b).frobenius_norm() > 0.1 {
                    moved += 1;
                }
                assert!(a.hermitian_defect() < 1e-12);
                assert!((a.trace().re - 1.0).abs() < 1e-12);
                assert!((a * a).max_abs_diff(a) < 1e-12);
            }
        }
        assert!(moved as f64 >= 0.9 * total as f64, "{moved}/{total}");
    }

    #[test]
    fn maximally_mixed_measures_a_quarter() {
        let m = measure(&DensityMatrix::maximally_mixed(), &projector_grid()).unwrap();
        assert!(m.values().iter().all(|v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn bell_state_row_zero() {
        let rho = DensityMatrix::from_pure(&bell_phi_plus());
        let m = measure(&rho, &projector_grid()).unwrap();
        assert!((m.get(0, 0) - 0.5).abs() < 1e-12);
        assert!(m.get(0, 1).abs() < 1e-12);
        assert!((m.get(0, 2) - 0.5).abs() < 1e-12);
        assert!(m.get(0, 3).abs() < 1e-12);
    }

    #[test]
    fn product_state_hits_its_own_projector() {
        let rho = DensityMatrix::regularized_pure(&basis_state(0), PURE_STATE_EPSILON);
        let m = measure(&rho, &projector_grid()).unwrap();
        assert!((m.get(0, 0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn masking_prefixes() {
        let rho = random_mixed_state(&mut SeededRng::new(9));
        let g = measure(&rho, &projector_grid()).unwrap();
        assert_eq!(mask_measurements(&g, 36).unwrap(), g);
        let four = mask_measurements(&g, 4).unwrap();
        assert_eq!(four.measured_count(), 4);
        for k in 0..36 {
            if k < 4 {
                assert_eq!(four.values()[k], g.values()[k]);
            } else {
                assert_eq!(four.values()[k], 0.0);
                assert!(!four.mask()[k]);
            }
        }
        let t = mask_measurements(&g, 28).unwrap();
        let zeroed: Vec<usize> = (0..36).filter(|&k| !t.mask()[k]).collect();
        assert_eq!(zeroed.len(), 8);
        assert!(zeroed.iter().all(|&k| k / 6 >= 4));
        assert!(matches!(mask_measurements(&g, 0), Err(Error::BadCount(0))));
        assert!(matches!(
            mask_measurements(&g, 37),
            Err(Error::BadCount(37))
        ));
    }

    #[test]
    fn mask_bits_round_trip() {
        let g = mask_measurements(&MeasurementGrid::full([0.5; 36]), 13).unwrap();
        assert_eq!(MeasurementGrid::mask_from_bits(g.mask_bits()), *g.mask());
        assert_eq!(g.mask_bits(), (1u64 << 13) - 1);
    }
}
