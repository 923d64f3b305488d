//! Linear (Stokes) reconstruction from a measurement grid.
//!
//! Each two-qubit Stokes parameter `s_lk = Tr(ρ σ_l ⊗ σ_k)` is a signed sum of
//! four grid entries, and `ρ = ¼ Σ s_lk σ_l ⊗ σ_k`. Missing cells simply
//! contribute zero.

use crate::error::Result;
use crate::linalg::{hermitian_eig, CMatrix, C64};
use crate::state::{DensityMatrix, DIM};
use crate::tomography::MeasurementGrid;

/// `s[l][k]` for `l, k ∈ {0 = I, 1 = X, 2 = Y, 3 = Z}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StokesParams {
    pub s: [[f64; 4]; 4],
}

pub fn stokes_params(g: &MeasurementGrid) -> StokesParams {
    let m = |i: usize, j: usize| g.get(i, j);
    let mut s = [[0.0; 4]; 4];
    s[0][0] = m(0, 0) + m(0, 1) + m(0, 3) + m(0, 2);
    s[1][1] = m(2, 3) - m(2, 2) - m(2, 0) + m(2, 1);
    // X⊗Y pairs d⊗r, d⊗l, a⊗r, a⊗l.
    s[1][2] = m(2, 4) - m(2, 5) - m(3, 1) + m(3, 0);
    s[1][3] = m(3, 5) - m(3, 4) - m(3, 2) + m(3, 3);
    s[2][1] = m(5, 2) - m(5, 3) - m(5, 5) + m(5, 4);
    s[2][2] = m(5, 1) - m(5, 0) - m(4, 4) + m(4, 5);
    s[2][3] = m(4, 0) - m(4, 1) - m(4, 3) + m(4, 2);
    s[3][1] = m(1, 2) - m(1, 3) - m(1, 5) + m(1, 4);
    s[3][2] = m(1, 1) - m(1, 0) - m(0, 4) + m(0, 5);
    s[3][3] = m(0, 0) - m(0, 1) - m(0, 3) + m(0, 2);
    s[0][1] = m(2, 3) - m(2, 2) + m(2, 0) - m(2, 1);
    s[0][2] = m(5, 1) + m(4, 4) - m(5, 0) - m(4, 5);
    s[0][3] = m(0, 0) - m(0, 1) + m(0, 3) - m(0, 2);
    s[1][0] = m(2, 3) + m(2, 2) - m(2, 0) - m(2, 1);
    s[2][0] = m(5, 1) - m(4, 4) + m(5, 0) - m(4, 5);
    s[3][0] = m(0, 0) + m(0, 1) - m(0, 3) - m(0, 2);
    StokesParams { s }
}

/// `I, X, Y, Z`
pub fn pauli(index: usize) -> CMatrix {
    let c = C64::new;
    let z = c(0.0, 0.0);
    match index {
        0 => CMatrix::identity(2),
        1 => CMatrix::from_vec(2, 2, vec![z, c(1.0, 0.0), c(1.0, 0.0), z]),
        2 => CMatrix::from_vec(2, 2, vec![z, c(0.0, -1.0), c(0.0, 1.0), z]),
        3 => CMatrix::from_vec(2, 2, vec![c(1.0, 0.0), z, z, c(-1.0, 0.0)]),
        _ => panic!("Pauli index {index} outside 0..4"),
    }
}

/// `¼ Σ s_lk σ_l ⊗ σ_k`; Hermitian with trace `s_00`, not necessarily positive.
pub fn stokes_reconstruct(g: &MeasurementGrid) -> CMatrix {
    reconstruct_from_params(&stokes_params(g))
}

pub fn reconstruct_from_params(p: &StokesParams) -> CMatrix {
    let mut rho = CMatrix::zeros(DIM, DIM);
    for l in 0..4 {
        for k in 0..4 {
            let w = p.s[l][k];
            if w == 0.0 {
                continue;
            }
            let basis = pauli(l).kron(&pauli(k));
            rho = &rho + &basis.scale(w / 4.0);
        }
    }
    rho.hermitian_part()
}

/// Result of projecting a Hermitian matrix onto the state space.
#[derive(Clone, Debug)]
pub struct Physicalized {
    pub state: DensityMatrix,
    /// Smallest eigenvalue before clamping; negative values flag an
    /// unphysical reconstruction.
    pub min_eigenvalue: f64,
}

/// Clamp negative eigenvalues to zero and renormalize the trace; a matrix with
/// no positive spectrum maps to `I/4`.
pub fn physicalize(h: &CMatrix) -> Result<DensityMatrix> {
    Ok(physicalize_with_report(h)?.state)
}

pub fn physicalize_with_report(h: &CMatrix) -> Result<Physicalized> {
    let eig = hermitian_eig(h)?;
    let min_eigenvalue = eig.values[0];
    let clamped: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    let state = if total <= 0.0 {
        DensityMatrix::maximally_mixed()
    } else {
        let weights: Vec<f64> = clamped.iter().map(|l| l / total).collect();
        DensityMatrix::from_trusted(renormalize_trace(eig.with_spectrum(&weights)))
    };
    Ok(Physicalized {
        state,
        min_eigenvalue,
    })
}

fn renormalize_trace(m: CMatrix) -> CMatrix {
    let tr = m.trace().re;
    m.scale(1.0 / tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::state::{bell_phi_plus, random_mixed_state};
    use crate::tomography::{mask_measurements, measure, projector_grid};

    #[test]
    fn maximally_mixed_params() {
        let g = MeasurementGrid::full([0.25; 36]);
        let p = stokes_params(&g);
        for l in 0..4 {
            for k in 0..4 {
                let want = if (l, k) == (0, 0) { 1.0 } else { 0.0 };
                assert!((p.s[l][k] - want).abs() < 1e-15);
            }
        }
        let rho = stokes_reconstruct(&g);
        assert!(rho.max_abs_diff(DensityMatrix::maximally_mixed().matrix()) < 1e-14);
    }

    #[test]
    fn bell_params() {
        let rho = DensityMatrix::from_pure(&bell_phi_plus());
        let p = stokes_params(&measure(&rho, &projector_grid()).unwrap());
        assert!((p.s[0][0] - 1.0).abs() < 1e-12);
        assert!((p.s[1][1] - 1.0).abs() < 1e-12);
        assert!((p.s[2][2] + 1.0).abs() < 1e-12);
        assert!((p.s[3][3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn params_match_pauli_expectations() {
        let mut rng = SeededRng::new(10);
        for _ in 0..200 {
            let rho = random_mixed_state(&mut rng);
            let p = stokes_params(&measure(&rho, &projector_grid()).unwrap());
            for l in 0..4 {
                for k in 0..4 {
                    let op = pauli(l).kron(&pauli(k));
                    let want = rho.matrix().trace_of_product(&op).re;
                    assert!((p.s[l][k] - want).abs() < 1e-12, "s{l}{k}");
                }
            }
        }
    }

    #[test]
    fn all_zero_grid() {
        let g = mask_measurements(&MeasurementGrid::full([0.0; 36]), 4).unwrap();
        assert!(stokes_params(&g).s.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn masked_grid_is_hermitian_but_not_normalized() {
        let rho = random_mixed_state(&mut SeededRng::new(2));
        let g = mask_measurements(&measure(&rho, &projector_grid()).unwrap(), 4).unwrap();
        let r = stokes_reconstruct(&g);
        assert!(r.hermitian_defect() < 1e-15);
        assert!((r.trace().re - stokes_params(&g).s[0][0]).abs() < 1e-15);
    }

    #[test]
    fn physicalize_is_identity_on_states() {
        let rho = random_mixed_state(&mut SeededRng::new(3));
        let p = physicalize(rho.matrix()).unwrap();
        assert!(p.matrix().max_abs_diff(rho.matrix()) < 1e-10);
    }

    #[test]
    fn physicalize_clamps_and_renormalizes() {
        let h = CMatrix::from_real_diagonal(&[1.2, 0.2, -0.2, -0.2]);
        let r = physicalize_with_report(&h).unwrap();
        let want = CMatrix::from_real_diagonal(&[1.2 / 1.4, 0.2 / 1.4, 0.0, 0.0]);
        assert!(r.state.matrix().max_abs_diff(&want) < 1e-12);
        assert!((r.min_eigenvalue + 0.2).abs() < 1e-15);
    }

    #[test]
    fn physicalize_zero_matrix() {
        let p = physicalize(&CMatrix::zeros(4, 4)).unwrap();
        assert_eq!(p, DensityMatrix::maximally_mixed());
    }
}
