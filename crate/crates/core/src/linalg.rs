//! Small dense complex matrices.
//!
//! Everything here is sized for two-qubit work (2×2 and 4×4), so storage is a
//! plain row-major `Vec` and products are the textbook triple loop.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Off-diagonal Frobenius norm below which a Jacobi sweep stops.
pub const JACOBI_TOLERANCE: f64 = 1e-13;
/// Sweep cap for the Jacobi eigensolver.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Largest Hermiticity defect `max|H - H†|` accepted by [`hermitian_eig`].
pub const HERMITIAN_INPUT_TOLERANCE: f64 = 1e-9;
/// Negative eigenvalues down to this are treated as rounding and clamped to 0.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Row-major construction; panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count does not match shape");
        Self { rows, cols, data }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// `|v⟩⟨v|`
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * k).collect(),
        }
    }

    pub fn scale_complex(&self, k: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * k).collect(),
        }
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CMatrix) -> Self {
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        Self::from_fn(r, c, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_of_product(&self, other: &CMatrix) -> C64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max|M - M†|` elementwise; infinite for non-square input.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(M + M†) / 2`
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| {
            if i == j {
                C64::new(self[(i, i)].re, 0.0)
            } else {
                (self[(i, j)] + self[(j, i)].conj()) * 0.5
            }
        })
    }

    /// `max|M†M - I|`
    pub fn unitarity_defect(&self) -> f64 {
        (&self.adjoint() * self).max_abs_diff(&CMatrix::identity(self.cols))
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Householder QR of a square matrix: `a = q · r`, `q` unitary, `r` upper
/// triangular. The diagonal of `r` carries whatever phase the reflections
/// produce; callers that need a unique factorization fix it themselves.
pub fn householder_qr(a: &CMatrix) -> (CMatrix, CMatrix) {
    assert!(a.is_square());
    let n = a.rows();
    let mut r = a.clone();
    let mut q = CMatrix::identity(n);
    for k in 0..n.saturating_sub(1) {
        let norm_x = (k..n).map(|i| r[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            continue;
        }
        let x0 = r[(k, k)];
        let phase = if x0.norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        // v = x + e^{i arg x0} |x| e_k avoids cancellation.
        let mut v: Vec<C64> = (k..n).map(|i| r[(i, k)]).collect();
        v[0] += phase * norm_x;
        let v_norm_sqr: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if v_norm_sqr == 0.0 {
            continue;
        }
        // r <- (I - 2 v v† / v†v) r
        for j in 0..n {
            let dot: C64 = v
                .iter()
                .enumerate()
                .map(|(t, vt)| vt.conj() * r[(k + t, j)])
                .sum();
            let f = dot * (2.0 / v_norm_sqr);
            for (t, vt) in v.iter().enumerate() {
                r[(k + t, j)] -= vt * f;
            }
        }
        // q <- q (I - 2 v v† / v†v)
        for i in 0..n {
            let dot: C64 = v.iter().enumerate().map(|(t, vt)| q[(i, k + t)] * vt).sum();
            let f = dot * (2.0 / v_norm_sqr);
            for (t, vt) in v.iter().enumerate() {
                q[(i, k + t)] -= f * vt.conj();
            }
        }
        for i in k + 1..n {
            r[(i, k)] = C64::new(0.0, 0.0);
        }
    }
    (q, r)
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// `V diag(f(λ)) V†`
    pub fn reassemble(&self, mut f: impl FnMut(f64) -> f64) -> CMatrix {
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        self.with_spectrum(&mapped)
    }

    /// `V diag(values) V†`
    pub fn with_spectrum(&self, mapped: &[f64]) -> CMatrix {
        let n = self.values.len();
        assert_eq!(mapped.len(), n);
        let v = &self.vectors;
        CMatrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| v[(i, k)] * v[(j, k)].conj() * mapped[k])
                .sum()
        })
    }
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
///
/// Each rotation first removes the phase of `h_pq` and then applies the real
/// symmetric Jacobi rotation, so one unitary `J` zeroes the pair exactly.
pub fn hermitian_eig(h: &CMatrix) -> Result<HermitianEigen> {
    if !h.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "eigensolver needs a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    if !h.is_finite() {
        return Err(Error::NumericalFailure("non-finite matrix entry".into()));
    }
    let defect = h.hermitian_defect();
    if defect > HERMITIAN_INPUT_TOLERANCE {
        return Err(Error::InvalidInput(format!(
            "matrix is not Hermitian (defect {defect:e})"
        )));
    }

    let n = h.rows();
    let mut a = h.hermitian_part();
    let mut v = CMatrix::identity(n);
    let tol = JACOBI_TOLERANCE * h.frobenius_norm().max(1.0);

    let off_norm = |a: &CMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_norm(&a) < tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_norm(&a) >= tol {
        return Err(Error::NumericalFailure(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(HermitianEigen { values, vectors })
}

fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let n = a.rows();
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // e^{-iφ} where h_pq = r e^{iφ}
    let unphase = apq.conj() / r;
    let zeta = (aqq - app) / (2.0 * r);
    let t = if zeta == 0.0 {
        1.0
    } else {
        zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // J restricted to (p, q):  [[c, s], [-s e^{-iφ}, c e^{-iφ}]]
    let j_pp = C64::new(c, 0.0);
    let j_pq = C64::new(s, 0.0);
    let j_qp = unphase * -s;
    let j_qq = unphase * c;

    // a <- a J
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * j_pp + akq * j_qp;
        a[(k, q)] = akp * j_pq + akq * j_qq;
    }
    // a <- J† a
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = j_pp.conj() * apk + j_qp.conj() * aqk;
        a[(q, k)] = j_pq.conj() * apk + j_qq.conj() * aqk;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    // v <- v J
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * j_pp + vkq * j_qp;
        v[(k, q)] = vkp * j_pq + vkq * j_qq;
    }
}

/// Principal square root of a positive-semidefinite Hermitian matrix.
///
/// Eigenvalues in `[-PSD_TOLERANCE, 0)` are clamped to zero; anything more
/// negative is rejected.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let eig = hermitian_eig(m)?;
    let min = eig.values[0];
    if min < -PSD_TOLERANCE {
        return Err(Error::InvalidInput(format!(
            "matrix is not positive semidefinite (min eigenvalue {min:e})"
        )));
    }
    Ok(eig.reassemble(|l| l.max(0.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_hermitian(rng: &mut SeededRng, n: usize) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.standard_normal(), rng.standard_normal())
        });
        (&g + &g.adjoint()).scale(0.5)
    }

    #[test]
    fn identity_eigenvalues() {
        let e = hermitian_eig(&CMatrix::identity(4)).unwrap();
        assert_eq!(e.values, vec![1.0; 4]);
    }

    #[test]
    fn diagonal_is_sorted_with_permutation_vectors() {
        let h = CMatrix::from_real_diagonal(&[4.0, 3.0, 2.0, 1.0]);
        let e = hermitian_eig(&h).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0, 4.0]);
        for k in 0..4 {
            // eigenvalue k+1 lives at diagonal slot 3-k
            for i in 0..4 {
                let expected = if i == 3 - k { 1.0 } else { 0.0 };
                assert_eq!(e.vectors[(i, k)], C64::new(expected, 0.0));
            }
        }
    }

    #[test]
    fn random_hermitian_reconstructs() {
        let mut rng = SeededRng::new(11);
        for _ in 0..500 {
            let h = random_hermitian(&mut rng, 4);
            let e = hermitian_eig(&h).unwrap();
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            assert!(e.vectors.unitarity_defect() < 1e-10);
            let hv = &h * &e.vectors;
            let vl = CMatrix::from_fn(4, 4, |i, j| e.vectors[(i, j)] * e.values[j]);
            assert!(hv.max_abs_diff(&vl) < 1e-10);
            assert!(e.reassemble(|l| l).max_abs_diff(&h) < 1e-10);
        }
    }

    #[test]
    fn degenerate_spectrum_still_converges() {
        // A unitary conjugate of diag(1, 1, 2, 2).
        let mut rng = SeededRng::new(5);
        let g = CMatrix::from_fn(4, 4, |_, _| {
            C64::new(rng.standard_normal(), rng.standard_normal())
        });
        let (q, _) = householder_qr(&g);
        let d = CMatrix::from_real_diagonal(&[1.0, 1.0, 2.0, 2.0]);
        let h = &(&q * &d) * &q.adjoint();
        let e = hermitian_eig(&h.hermitian_part()).unwrap();
        for (got, want) in e.values.iter().zip([1.0, 1.0, 2.0, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::identity(2);
        m[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(hermitian_eig(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn qr_factors_and_is_unitary() {
        let mut rng = SeededRng::new(9);
        for _ in 0..200 {
            let g = CMatrix::from_fn(4, 4, |_, _| {
                C64::new(rng.standard_normal(), rng.standard_normal())
            });
            let (q, r) = householder_qr(&g);
            assert!(q.unitarity_defect() < 1e-13);
            assert!((&q * &r).max_abs_diff(&g) < 1e-12);
            for i in 0..4 {
                for j in 0..i {
                    assert_eq!(r[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn sqrt_of_scalar_and_diagonal() {
        let s = psd_sqrt(&CMatrix::identity(4).scale(0.25)).unwrap();
        assert!(s.max_abs_diff(&CMatrix::identity(4).scale(0.5)) < 1e-15);
        let d = [0.4, 0.3, 0.2, 0.1];
        let s = psd_sqrt(&CMatrix::from_real_diagonal(&d)).unwrap();
        let want: Vec<f64> = d.iter().map(|x: &f64| x.sqrt()).collect();
        assert!(s.max_abs_diff(&CMatrix::from_real_diagonal(&want)) < 1e-15);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let m = CMatrix::from_real_diagonal(&[1.0, -0.1]);
        assert!(psd_sqrt(&m).is_err());
    }

    #[test]
    fn kron_of_basis_vectors() {
        let h = CMatrix::from_real_diagonal(&[1.0, 0.0]);
        let v = CMatrix::from_real_diagonal(&[0.0, 1.0]);
        let hv = h.kron(&v);
        assert_eq!(hv[(1, 1)], C64::new(1.0, 0.0));
        assert!((hv.trace() - C64::new(1.0, 0.0)).norm() == 0.0);
    }
}
