//! The τ-matrix parametrization `ρ = τ†τ / Tr(τ†τ)`.
//!
//! τ is lower triangular with a real diagonal. For a positive-definite ρ the
//! factor with nonnegative diagonal is unique; it is computed here by a
//! Cholesky recursion that runs from the bottom-right corner upwards, and
//! independently by the closed-form minor expression in [`tau_from_minors`].
//!
//! Any lower-triangular τ maps back to a valid state, which is what lets a
//! network regress τ freely and still always produce a physical prediction.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::state::{DensityMatrix, DIM};

/// Below this minimum eigenvalue the factorization is refused.
pub const SINGULAR_THRESHOLD: f64 = 1e-10;
/// `Tr(τ†τ)` at or below this cannot be normalized.
pub const DEGENERATE_TRACE: f64 = 1e-30;

/// Where each of the 16 packed reals lives in τ: `(row, col, imaginary?)`.
pub const TAU16_LAYOUT: [(usize, usize, bool); 16] = [
    (0, 0, false),
    (1, 1, false),
    (2, 2, false),
    (3, 3, false),
    (1, 0, false),
    (1, 0, true),
    (2, 1, false),
    (2, 1, true),
    (3, 2, false),
    (3, 2, true),
    (2, 0, false),
    (2, 0, true),
    (3, 1, false),
    (3, 1, true),
    (3, 0, false),
    (3, 0, true),
];

/// Lower-triangular 4×4 complex matrix with a real diagonal.
///
/// The diagonal may be negative when the matrix comes from unconstrained
/// regression output; [`tau_from_density`] always returns a nonnegative one.
#[derive(Clone, Debug, PartialEq)]
pub struct TauMatrix(CMatrix);

impl TauMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.rows() != DIM || m.cols() != DIM {
            return Err(Error::ShapeMismatch(format!(
                "tau matrix must be {DIM}x{DIM}, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        for i in 0..DIM {
            if m[(i, i)].im != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "tau diagonal entry {i} is not real"
                )));
            }
            for j in i + 1..DIM {
                if m[(i, j)] != C64::new(0.0, 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "tau entry ({i}, {j}) above the diagonal is nonzero"
                    )));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    /// `Tr(τ†τ)`, the squared Frobenius norm.
    pub fn norm_sqr(&self) -> f64 {
        self.0.as_slice().iter().map(|z| z.norm_sqr()).sum()
    }
}

/// The 16 real network outputs `[τ0 … τ15]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tau16(pub [f64; 16]);

impl Tau16 {
    pub fn as_array(&self) -> &[f64; 16] {
        &self.0
    }
}

impl From<[f64; 16]> for Tau16 {
    fn from(v: [f64; 16]) -> Self {
        Self(v)
    }
}

pub fn pack_tau16(tau: &TauMatrix) -> Tau16 {
    let mut v = [0.0; 16];
    for (k, &(i, j, imag)) in TAU16_LAYOUT.iter().enumerate() {
        let z = tau.get(i, j);
        v[k] = if imag { z.im } else { z.re };
    }
    Tau16(v)
}

pub fn unpack_tau16(v: &Tau16) -> TauMatrix {
    let mut m = CMatrix::zeros(DIM, DIM);
    for (k, &(i, j, imag)) in TAU16_LAYOUT.iter().enumerate() {
        if imag {
            m[(i, j)].im = v.0[k];
        } else {
            m[(i, j)].re = v.0[k];
        }
    }
    TauMatrix(m)
}

/// Factor ρ as `τ†τ` with τ lower triangular and a nonnegative real diagonal.
///
/// Rows are solved from the last one up:
/// `τ_ii = sqrt(ρ_ii − Σ_{k>i} |τ_ki|²)` and
/// `τ_ij = (ρ_ij − Σ_{k>i} conj(τ_ki) τ_kj) / τ_ii` for `j < i`.
pub fn tau_from_density(rho: &DensityMatrix) -> Result<TauMatrix> {
    let min = rho.min_eigenvalue()?;
    if min <= SINGULAR_THRESHOLD {
        return Err(Error::SingularState {
            min_eigenvalue: min,
        });
    }
    let r = rho.matrix();
    let mut t = CMatrix::zeros(DIM, DIM);
    for i in (0..DIM).rev() {
        let mut d = r[(i, i)].re;
        for k in i + 1..DIM {
            d -= t[(k, i)].norm_sqr();
        }
        if d <= 0.0 {
            return Err(Error::SingularState {
                min_eigenvalue: min,
            });
        }
        let diag = d.sqrt();
        t[(i, i)] = C64::new(diag, 0.0);
        for j in 0..i {
            let mut s = r[(i, j)];
            for k in i + 1..DIM {
                s -= t[(k, i)].conj() * t[(k, j)];
            }
            t[(i, j)] = s / diag;
        }
    }
    Ok(TauMatrix(t))
}

/// `ρ = τ†τ / Tr(τ†τ)`; physical for every nonzero τ.
pub fn density_from_tau(tau: &TauMatrix) -> Result<DensityMatrix> {
    let trace = tau.norm_sqr();
    if !(trace > DEGENERATE_TRACE) || !trace.is_finite() {
        return Err(Error::DegenerateTau { trace });
    }
    let t = tau.matrix();
    let rho = CMatrix::from_fn(DIM, DIM, |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for k in i.max(j)..DIM {
            acc += t[(k, i)].conj() * t[(k, j)];
        }
        acc / trace
    });
    Ok(DensityMatrix::from_trusted(rho))
}

/// Determinant of the submatrix that keeps `rows` and `cols`.
fn sub_det(m: &CMatrix, rows: &[usize], cols: &[usize]) -> C64 {
    match rows.len() {
        0 => C64::new(1.0, 0.0),
        1 => m[(rows[0], cols[0])],
        _ => {
            // Laplace expansion along the first kept row.
            let mut acc = C64::new(0.0, 0.0);
            let sub_rows = &rows[1..];
            for (c_idx, &c) in cols.iter().enumerate() {
                let sub_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
                let term = m[(rows[0], c)] * sub_det(m, sub_rows, &sub_cols);
                if c_idx % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            acc
        }
    }
}

fn without(removed: &[usize]) -> Vec<usize> {
    (0..DIM).filter(|x| !removed.contains(x)).collect()
}

/// First minor: delete row `i`, column `j`.
fn first_minor(m: &CMatrix, i: usize, j: usize) -> C64 {
    sub_det(m, &without(&[i]), &without(&[j]))
}

/// Second minor: delete rows `p, r` and columns `q, s`.
fn second_minor(m: &CMatrix, p: usize, q: usize, r: usize, s: usize) -> C64 {
    sub_det(m, &without(&[p, r]), &without(&[q, s]))
}

/// τ from determinants and minors of ρ, entry by entry.
///
/// This is an independent route to the same factor as [`tau_from_density`]
/// and exists to cross-check it; it is less stable for ill-conditioned states.
pub fn tau_from_minors(rho: &DensityMatrix) -> Result<TauMatrix> {
    let min = rho.min_eigenvalue()?;
    if min <= SINGULAR_THRESHOLD {
        return Err(Error::SingularState {
            min_eigenvalue: min,
        });
    }
    let r = rho.matrix();
    let all: Vec<usize> = (0..DIM).collect();
    let det = sub_det(r, &all, &all).re;
    let m1_00 = first_minor(r, 0, 0).re;
    let m1_01 = first_minor(r, 0, 1);
    let m2_00_11 = second_minor(r, 0, 0, 1, 1).re;
    let m2_01_12 = second_minor(r, 0, 1, 1, 2);
    let m2_00_12 = second_minor(r, 0, 0, 1, 2);
    let r33 = r[(3, 3)].re;
    let sqrt_r33 = r33.sqrt();

    let mut t = CMatrix::zeros(DIM, DIM);
    t[(0, 0)] = C64::new((det / m1_00).sqrt(), 0.0);
    t[(1, 0)] = m1_01 / (m1_00 * m2_00_11).sqrt();
    t[(1, 1)] = C64::new((m1_00 / m2_00_11).sqrt(), 0.0);
    t[(2, 0)] = m2_01_12 / (sqrt_r33 * m2_00_11.sqrt());
    t[(2, 1)] = m2_00_12 / (sqrt_r33 * m2_00_11.sqrt());
    t[(2, 2)] = C64::new((m2_00_11 / r33).sqrt(), 0.0);
    for j in 0..3 {
        t[(3, j)] = r[(3, j)] / sqrt_r33;
    }
    t[(3, 3)] = C64::new(sqrt_r33, 0.0);
    if !t.is_finite() {
        return Err(Error::NumericalFailure(
            "minor expression produced non-finite tau".into(),
        ));
    }
    Ok(TauMatrix(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::state::{random_mixed_state, random_pure_state};

    #[test]
    fn maximally_mixed_factor_is_half_identity() {
        let tau = tau_from_density(&DensityMatrix::maximally_mixed()).unwrap();
        assert!(tau.matrix().max_abs_diff(&CMatrix::identity(4).scale(0.5)) < 1e-15);
        assert_eq!(pack_tau16(&tau).0[..4], [0.5; 4]);
        assert!(pack_tau16(&tau).0[4..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn half_identity_maps_to_maximally_mixed() {
        let tau = TauMatrix::new(CMatrix::identity(4).scale(0.5)).unwrap();
        let rho = density_from_tau(&tau).unwrap();
        assert!(
            rho.matrix()
                .max_abs_diff(DensityMatrix::maximally_mixed().matrix())
                < 1e-15
        );
    }

    #[test]
    fn unit_vector_unpacks_to_corner() {
        let mut v = [0.0; 16];
        v[0] = 1.0;
        let tau = unpack_tau16(&Tau16(v));
        for i in 0..4 {
            for j in 0..4 {
                let want = if (i, j) == (0, 0) { 1.0 } else { 0.0 };
                assert_eq!(tau.get(i, j), C64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn layout_matches_lower_triangle() {
        let v: [f64; 16] = std::array::from_fn(|k| k as f64 + 1.0);
        let t = unpack_tau16(&Tau16(v));
        let c = |re: f64, im: f64| C64::new(re, im);
        assert_eq!(t.get(0, 0), c(1.0, 0.0));
        assert_eq!(t.get(1, 1), c(2.0, 0.0));
        assert_eq!(t.get(2, 2), c(3.0, 0.0));
        assert_eq!(t.get(3, 3), c(4.0, 0.0));
        assert_eq!(t.get(1, 0), c(5.0, 6.0));
        assert_eq!(t.get(2, 1), c(7.0, 8.0));
        assert_eq!(t.get(3, 2), c(9.0, 10.0));
        assert_eq!(t.get(2, 0), c(11.0, 12.0));
        assert_eq!(t.get(3, 1), c(13.0, 14.0));
        assert_eq!(t.get(3, 0), c(15.0, 16.0));
        assert_eq!(pack_tau16(&t).0, v);
    }

    #[test]
    fn factor_round_trips_and_matches_minor_route() {
        let mut rng = SeededRng::new(3);
        for _ in 0..500 {
            let rho = random_mixed_state(&mut rng);
            let tau = tau_from_density(&rho).unwrap();
            assert!((tau.norm_sqr() - 1.0).abs() < 1e-10);
            for i in 0..4 {
                assert!(tau.get(i, i).re >= 0.0);
            }
            let back = density_from_tau(&tau).unwrap();
            assert!(back.matrix().max_abs_diff(rho.matrix()) < 1e-8);
            let minors = tau_from_minors(&rho).unwrap();
            assert!(minors.matrix().max_abs_diff(tau.matrix()) < 1e-8);
        }
    }

    #[test]
    fn pure_states_factor_after_regularization() {
        let mut rng = SeededRng::new(4);
        for _ in 0..200 {
            let rho = random_pure_state(&mut rng);
            let tau = tau_from_density(&rho).unwrap();
            let back = density_from_tau(&tau).unwrap();
            assert!(back.matrix().max_abs_diff(rho.matrix()) < 1e-8);
        }
    }

    #[test]
    fn singular_state_is_refused() {
        let rho = DensityMatrix::from_pure(&crate::state::basis_state(0));
        assert!(matches!(
            tau_from_density(&rho),
            Err(Error::SingularState { .. })
        ));
        assert!(matches!(
            tau_from_minors(&rho),
            Err(Error::SingularState { .. })
        ));
    }

    #[test]
    fn zero_tau_is_degenerate() {
        let tau = unpack_tau16(&Tau16([0.0; 16]));
        assert!(matches!(
            density_from_tau(&tau),
            Err(Error::DegenerateTau { .. })
        ));
    }

    #[test]
    fn rejects_upper_entries() {
        let mut m = CMatrix::identity(4);
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert!(TauMatrix::new(m).is_err());
    }
}
