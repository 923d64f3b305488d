//! Uhlmann fidelity `F = |Tr √(√ρ σ √ρ)|²`.

use crate::error::Result;
use crate::linalg::{hermitian_eig, psd_sqrt, CMatrix};
use crate::state::DensityMatrix;

/// Fidelity between two states, clamped to `[0, 1]`.
///
/// The product `√ρ σ √ρ` is evaluated in the eigenbasis of ρ, which keeps
/// rank-deficient (pure) arguments accurate: directions with zero weight in
/// ρ contribute exact zeros instead of rounding noise. Eigenvalues of ρ below
/// [`NOISE_FLOOR`] times the largest are below the solver's resolution and
/// are zeroed before square roots amplify them. The purer argument serves as
/// ρ, which makes the result independent of argument order.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let (rho, sigma) = if sigma.purity() > rho.purity() {
        (sigma, rho)
    } else {
        (rho, sigma)
    };
    let eig = hermitian_eig(rho.matrix())?;
    let n = eig.values.len();
    let v = &eig.vectors;
    let roots = floored_roots(&eig.values);
    // σ in ρ's eigenbasis, scaled on both sides by √λ.
    let s = &(&v.adjoint() * sigma.matrix()) * v;
    let inner = CMatrix::from_fn(n, n, |i, j| s[(i, j)] * (roots[i] * roots[j])).hermitian_part();
    let mu = hermitian_eig(&inner)?;
    let tr: f64 = mu.values.iter().map(|&m| m.max(0.0).sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

pub const NOISE_FLOOR: f64 = 8.0 * f64::EPSILON;

fn floored_roots(values: &[f64]) -> Vec<f64> {
    let top = values.iter().fold(0.0f64, |a, &b| a.max(b));
    values
        .iter()
        .map(|&l| if l > NOISE_FLOOR * top { l.sqrt() } else { 0.0 })
        .collect()
}

/// `√ρ` of a density matrix.
pub fn state_sqrt(rho: &DensityMatrix) -> Result<CMatrix> {
    psd_sqrt(rho.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::state::{
        basis_state, random_mixed_state, random_pure_state, random_state_vector, PURE_STATE_EPSILON,
    };

    #[test]
    fn self_fidelity_is_one() {
        let mut rng = SeededRng::new(1);
        for _ in 0..500 {
            let rho = random_mixed_state(&mut rng);
            assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-9);
            let pure = random_pure_state(&mut rng);
            assert!((fidelity(&pure, &pure).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric() {
        let mut rng = SeededRng::new(2);
        for _ in 0..500 {
            let a = random_mixed_state(&mut rng);
            let b = random_mixed_state(&mut rng);
            let f_ab = fidelity(&a, &b).unwrap();
            let f_ba = fidelity(&b, &a).unwrap();
            assert!((f_ab - f_ba).abs() < 1e-9);
            assert!((0.0..=1.0).contains(&f_ab));
        }
    }

    #[test]
    fn pure_states_reduce_to_overlap() {
        let mut rng = SeededRng::new(3);
        for _ in 0..500 {
            let a = random_state_vector(&mut rng);
            let b = random_state_vector(&mut rng);
            let f = fidelity(&DensityMatrix::from_pure(&a), &DensityMatrix::from_pure(&b)).unwrap();
            assert!((f - a.inner(&b).norm_sqr()).abs() < 1e-8);
        }
    }

    #[test]
    fn orthogonal_regularized_states() {
        let hh = DensityMatrix::regularized_pure(&basis_state(0), PURE_STATE_EPSILON);
        let vv = DensityMatrix::regularized_pure(&basis_state(3), PURE_STATE_EPSILON);
        assert!(fidelity(&hh, &vv).unwrap() < 1e-6);
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = SeededRng::new(4);
        for _ in 0..200 {
            let rho = random_mixed_state(&mut rng);
            let s = state_sqrt(&rho).unwrap();
            assert!(s.hermitian_defect() < 1e-12);
            assert!((&s * &s).max_abs_diff(rho.matrix()) < 1e-9);
        }
    }
}
