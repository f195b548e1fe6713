//! Dense complex matrices and biorthogonal eigensystems.
//!
//! Right eigenvectors are stored with unit Euclidean norm and left
//! eigenvectors carry the whole biorthogonal normalisation, so that
//! `<L_i|R_j> = delta_ij`. Energies are real and sorted ascending; index 0 is
//! the ground band.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 16;

/// Relative tolerance on the imaginary part of accepted eigenvalues.
pub const IMAG_TOL_REL: f64 = 1e-10;

/// Default degeneracy tolerance, relative to the spectral scale.
pub const GAP_TOL_REL: f64 = 1e-9;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `<a|b>`, antilinear in the first argument.
#[inline]
pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.dotc(b)
}

/// Square complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn new(inner: DMatrix<C64>) -> Result<Self> {
        let (rows, cols) = inner.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 || rows > MAX_DIM {
            return Err(Error::UnsupportedDimension(rows));
        }
        for j in 0..cols {
            for i in 0..rows {
                let z = inner[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::NonFiniteEntry { row: i, col: j });
                }
            }
        }
        Ok(Self(inner))
    }

    /// Builds an `n x n` matrix from row-major entries.
    pub fn from_rows(n: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, entries))
    }

    pub fn from_diagonal(diag: &[C64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&CVector::from_column_slice(diag)))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.0 * v
    }

    /// `<a|M|b>`.
    pub fn sandwich(&self, a: &CVector, b: &CVector) -> C64 {
        a.dotc(&(&self.0 * b))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn inverse(&self) -> Result<Self> {
        self.0
            .clone()
            .try_inverse()
            .map(Self)
            .ok_or(Error::InvalidArgument("matrix is singular".into()))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }

    /// `||M - M^dagger||_F`.
    pub fn hermiticity_residual(&self) -> f64 {
        (&self.0 - self.0.adjoint()).norm()
    }

    /// `||M^dagger - eta M eta^{-1}||_F`.
    pub fn pseudo_hermiticity_residual(&self, eta: &ComplexMatrix) -> Result<f64> {
        let eta_inv = eta.inverse()?;
        Ok((self.0.adjoint() - &eta.0 * &self.0 * &eta_inv.0).norm())
    }

    /// Matrix exponential. Two-dimensional inputs use the closed form
    /// `exp(m I + N) = e^m (cosh s I + sinh(s)/s N)` with `s^2 = -det N`.
    pub fn exp(&self) -> Self {
        if self.dim() == 2 {
            return Self(expm_2x2(&self.0));
        }
        Self(self.0.clone().exp())
    }
}

pub(crate) fn expm_2x2(m: &DMatrix<C64>) -> DMatrix<C64> {
    let half_trace = (m[(0, 0)] + m[(1, 1)]) * 0.5;
    let n00 = m[(0, 0)] - half_trace;
    let n11 = m[(1, 1)] - half_trace;
    let n01 = m[(0, 1)];
    let n10 = m[(1, 0)];
    let s2 = -(n00 * n11 - n01 * n10);
    let s = s2.sqrt();
    let (cosh, sinhc) = if s.norm() < 1e-4 {
        // series to O(s^8)
        let s4 = s2 * s2;
        (
            1.0 + s2 / 2.0 + s4 / 24.0 + s4 * s2 / 720.0,
            1.0 + s2 / 6.0 + s4 / 120.0 + s4 * s2 / 5040.0,
        )
    } else {
        (s.cosh(), s.sinh() / s)
    };
    let pre = half_trace.exp();
    DMatrix::from_row_slice(
        2,
        2,
        &[
            pre * (cosh + sinhc * n00),
            pre * sinhc * n01,
            pre * sinhc * n10,
            pre * (cosh + sinhc * n11),
        ],
    )
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Mul<f64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: f64) -> ComplexMatrix {
        ComplexMatrix(&self.0 * C64::from(rhs))
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

/// Which component of an eigenvector is made real and positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaugeConvention {
    #[default]
    LargestComponent,
    FirstNonzeroComponent,
}

impl GaugeConvention {
    fn pivot(self, v: &CVector) -> Option<usize> {
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        match self {
            GaugeConvention::LargestComponent => {
                let mut best = 0;
                let mut best_abs = -1.0;
                for (i, z) in v.iter().enumerate() {
                    // strict comparison keeps the first of tied components
                    if z.norm() > best_abs * (1.0 + 1e-12) {
                        best = i;
                        best_abs = z.norm();
                    }
                }
                Some(best)
            }
            GaugeConvention::FirstNonzeroComponent => {
                v.iter().position(|z| z.norm() > 1e-14 * norm)
            }
        }
    }
}

/// Unit-modulus phase that rotates the pivot component onto the positive
/// real axis.
fn gauge_phase(v: &CVector, pivot: usize) -> C64 {
    let z = v[pivot];
    z.conj() / z.norm()
}

/// Multiplies each vector by the phase that makes its designated component
/// real and positive. Norms are unchanged.
pub fn gauge_fix(vectors: &[CVector], convention: GaugeConvention) -> Result<Vec<CVector>> {
    vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let pivot = convention.pivot(v).ok_or(Error::ZeroVector(i))?;
            Ok(v * gauge_phase(v, pivot))
        })
        .collect()
}

/// Left/right eigenpairs of a diagonalisable matrix with real spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct BiorthogonalEigensystem {
    pub energies: Vec<f64>,
    pub right: Vec<CVector>,
    pub left: Vec<CVector>,
    /// `max_ij |<L_i|R_j> - delta_ij|`.
    pub residual: f64,
    /// Largest discarded imaginary part of an eigenvalue relative to the
    /// largest eigenvalue modulus.
    pub imag_residual: f64,
}

impl BiorthogonalEigensystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn ground_right(&self) -> &CVector {
        &self.right[0]
    }

    pub fn ground_left(&self) -> &CVector {
        &self.left[0]
    }

    pub fn biorthonormality_residual(&self) -> f64 {
        biorthonormality_residual(&self.left, &self.right)
    }

    /// Rescales pair `n` by `R -> alpha R`, `L -> L / conj(alpha)`.
    pub fn rescale_pair(&mut self, n: usize, alpha: C64) {
        self.right[n] *= alpha;
        self.left[n] /= alpha.conj();
    }

    /// Applies `convention` to every right vector, rotating the left partner
    /// by the same phase.
    pub fn gauge_fix(&mut self, convention: GaugeConvention) -> Result<()> {
        for n in 0..self.dim() {
            let pivot = convention
                .pivot(&self.right[n])
                .ok_or(Error::ZeroVector(n))?;
            let phase = gauge_phase(&self.right[n], pivot);
            self.rescale_pair(n, phase);
        }
        self.residual = self.biorthonormality_residual();
        Ok(())
    }

    /// Largest eigen-residual `||H R_n - E_n R_n||` over all bands.
    pub fn eigen_residual(&self, h: &ComplexMatrix) -> f64 {
        self.right
            .iter()
            .zip(&self.energies)
            .map(|(r, &e)| (h.apply(r) - r * C64::from(e)).norm())
            .fold(0.0, f64::max)
    }

    /// Same as [`eigen_residual`](Self::eigen_residual) for the left vectors
    /// against `H^dagger`.
    pub fn left_eigen_residual(&self, h: &ComplexMatrix) -> f64 {
        let hd = h.adjoint();
        self.left
            .iter()
            .zip(&self.energies)
            .map(|(l, &e)| (hd.apply(l) - l * C64::from(e)).norm() / l.norm())
            .fold(0.0, f64::max)
    }
}

pub fn biorthonormality_residual(left: &[CVector], right: &[CVector]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, l) in left.iter().enumerate() {
        for (j, r) in right.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((inner(l, r) - target).norm());
        }
    }
    worst
}

/// Biorthogonal eigendecomposition with real-spectrum and nondegeneracy
/// checks. `gap_tol` defaults to `1e-9` times the spectral scale.
///
/// The output is gauge fixed with [`GaugeConvention::LargestComponent`].
pub fn eig_biorthogonal(
    h: &ComplexMatrix,
    gap_tol: Option<f64>,
) -> Result<BiorthogonalEigensystem> {
    let n = h.dim();
    let (values, vectors) = if n == 2 {
        eig_2x2(h.as_dmatrix())
    } else {
        eig_schur(h.as_dmatrix())?
    };

    let max_abs = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let imag_tol = IMAG_TOL_REL * max_abs.max(f64::MIN_POSITIVE);
    let worst_imag = values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst_imag > imag_tol {
        return Err(Error::ComplexSpectrum {
            imag: worst_imag,
            tol: imag_tol,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re));
    let energies: Vec<f64> = order.iter().map(|&i| values[i].re).collect();

    if n > 1 {
        let range = energies[n - 1] - energies[0];
        let tol = gap_tol.unwrap_or(GAP_TOL_REL * range.max(h.norm()));
        let gap = energies
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        if gap <= tol {
            return Err(Error::DegenerateSpectrum { gap, tol });
        }
    }

    let right: Vec<CVector> = order
        .iter()
        .map(|&i| {
            let v = &vectors[i];
            v / C64::from(v.norm())
        })
        .collect();
    let left = dual_basis(&right)?;

    let mut sys = BiorthogonalEigensystem {
        energies,
        right,
        left,
        residual: 0.0,
        imag_residual: worst_imag / max_abs.max(f64::MIN_POSITIVE),
    };
    sys.gauge_fix(GaugeConvention::LargestComponent)?;
    Ok(sys)
}

/// Left vectors as the conjugated rows of the inverse right-eigenvector
/// matrix, so that `<L_i|R_j> = delta_ij` holds to rounding.
fn dual_basis(right: &[CVector]) -> Result<Vec<CVector>> {
    let n = right.len();
    let r = DMatrix::from_columns(right);
    let inv = r
        .try_inverse()
        .ok_or(Error::DegenerateSpectrum { gap: 0.0, tol: 0.0 })?;
    Ok((0..n).map(|i| inv.row(i).adjoint()).collect())
}

fn eig_2x2(m: &DMatrix<C64>) -> (Vec<C64>, Vec<CVector>) {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let mean = (a + d) * 0.5;
    let half_diff = (a - d) * 0.5;
    let s = (half_diff * half_diff + b * c).sqrt();
    // the root of larger modulus avoids cancellation; the other follows from det
    let (plus, minus) = (mean + s, mean - s);
    let big = if plus.norm() >= minus.norm() {
        plus
    } else {
        minus
    };
    let small = if big.norm() > 0.0 {
        (a * d - b * c) / big
    } else {
        big
    };
    let values = vec![big, small];
    let vectors = values
        .iter()
        .map(|&e| {
            let first = CVector::from_column_slice(&[b, e - a]);
            let second = CVector::from_column_slice(&[e - d, c]);
            let cand = if first.norm() >= second.norm() {
                first
            } else {
                second
            };
            if cand.norm() == 0.0 {
                // only reachable for a multiple of the identity
                CVector::from_column_slice(&[C64::from(1.0), C64::from(0.0)])
            } else {
                cand
            }
        })
        .collect();
    (values, vectors)
}

/// Eigenpairs from the complex Schur form `H = Q T Q^dagger` by
/// back-substitution on the upper-triangular factor.
fn eig_schur(m: &DMatrix<C64>) -> Result<(Vec<C64>, Vec<CVector>)> {
    let n = m.nrows();
    if n == 1 {
        return Ok((
            vec![m[(0, 0)]],
            vec![CVector::from_element(1, C64::from(1.0))],
        ));
    }
    let schur = m.clone().schur();
    let (q, t) = schur.unpack();
    let scale = t
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let values: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();
    let mut vectors = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = CVector::zeros(n);
        y[k] = C64::from(1.0);
        for i in (0..k).rev() {
            let mut acc = C64::from(0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[j];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < f64::EPSILON * scale {
                denom = C64::from(f64::EPSILON * scale);
            }
            y[i] = -acc / denom;
        }
        vectors.push(&q * y);
    }
    Ok((values, vectors))
}

/// Left eigenvectors from right ones through the metric: `L_n ∝ eta R_n`,
/// rescaled so that `<L_n|R_n> = 1`. When `h` is supplied the relation
/// `H^dagger = eta H eta^{-1}` is validated first.
pub fn left_from_right(
    right: &[CVector],
    eta: &ComplexMatrix,
    h: Option<&ComplexMatrix>,
) -> Result<Vec<CVector>> {
    validate_metric(eta)?;
    if let Some(h) = h {
        if h.dim() != eta.dim() {
            return Err(Error::DimensionMismatch {
                expected: eta.dim(),
                found: h.dim(),
            });
        }
        let residual = h.pseudo_hermiticity_residual(eta)?;
        if residual > 1e-10 * h.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::NotPseudoHermitian { residual });
        }
    }
    right
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.len() != eta.dim() {
                return Err(Error::DimensionMismatch {
                    expected: eta.dim(),
                    found: r.len(),
                });
            }
            let l = eta.apply(r);
            let overlap = inner(&l, r);
            if overlap.norm() <= 1e-14 * l.norm() * r.norm() {
                return Err(Error::ZeroVector(i));
            }
            Ok(l / overlap.conj())
        })
        .collect()
}

fn validate_metric(eta: &ComplexMatrix) -> Result<()> {
    let scale = eta.norm();
    if eta.hermiticity_residual() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidEta("not Hermitian"));
    }
    let sv = eta.as_dmatrix().clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smax == 0.0 || smin <= 1e-12 * smax {
        return Err(Error::InvalidEta("singular"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(a: f64, b: f64) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&[c64(a, 0.0), c64(b, 0.0)]).unwrap()
    }

    fn q_sigma_x(q: f64) -> ComplexMatrix {
        let a = ((1.0 + q * q) / 2.0).sqrt();
        let b = ((1.0 + 1.0 / (q * q)) / 2.0).sqrt();
        ComplexMatrix::from_rows(2, &[c64(0.0, 0.0), c64(a, 0.0), c64(b, 0.0), c64(0.0, 0.0)])
            .unwrap()
    }

    #[test]
    fn rejects_non_finite_and_non_square() {
        let m = DMatrix::from_element(2, 2, c64(f64::NAN, 0.0));
        assert!(matches!(
            ComplexMatrix::new(m),
            Err(Error::NonFiniteEntry { row: 0, col: 0 })
        ));
        let m = DMatrix::from_element(2, 3, c64(0.0, 0.0));
        assert!(matches!(
            ComplexMatrix::new(m),
            Err(Error::NotSquare { .. })
        ));
        let m = DMatrix::from_element(17, 17, c64(0.0, 0.0));
        assert!(matches!(
            ComplexMatrix::new(m),
            Err(Error::UnsupportedDimension(17))
        ));
    }

    #[test]
    fn diagonal_q_sigma_z() {
        let sys = eig_biorthogonal(&diag(1.0 / 3.0, -3.0), None).unwrap();
        assert_eq!(sys.energies, vec![-3.0, 1.0 / 3.0]);
        assert!((sys.right[0][1] - 1.0).norm() < 1e-15);
        assert!(sys.right[0][0].norm() < 1e-15);
        assert!((sys.right[1][0] - 1.0).norm() < 1e-15);
        assert!(sys.residual < 1e-12);
    }

    #[test]
    fn hermitian_left_equals_right() {
        let sys = eig_biorthogonal(&diag(1.0, -1.0), None).unwrap();
        for (l, r) in sys.left.iter().zip(&sys.right) {
            assert!((l - r).norm() < 1e-12);
        }
    }

    #[test]
    fn q_deformed_sigma_x_spectrum() {
        let h = q_sigma_x(3.0);
        let sys = eig_biorthogonal(&h, None).unwrap();
        let expected = (5.0f64 / 3.0).sqrt();
        assert!((sys.energies[0] + expected).abs() < 1e-12);
        assert!((sys.energies[1] - expected).abs() < 1e-12);
        assert!(sys.residual < 1e-12);
        assert!(sys.eigen_residual(&h) < 1e-10 * h.norm());
        assert!(sys.left_eigen_residual(&h) < 1e-10 * h.norm());
    }

    #[test]
    fn schur_path_matches_closed_form() {
        // 2x2 through the generic path, embedded block-diagonally with a
        // distant third level
        let h2 = q_sigma_x(3.0);
        let mut m = DMatrix::zeros(3, 3);
        m.view_mut((0, 0), (2, 2)).copy_from(h2.as_dmatrix());
        m[(2, 2)] = c64(7.0, 0.0);
        let h3 = ComplexMatrix::new(m).unwrap();
        let sys = eig_biorthogonal(&h3, None).unwrap();
        let expected = (5.0f64 / 3.0).sqrt();
        assert!((sys.energies[0] + expected).abs() < 1e-12);
        assert!((sys.energies[1] - expected).abs() < 1e-12);
        assert!((sys.energies[2] - 7.0).abs() < 1e-12);
        assert!(sys.residual < 1e-12);
        assert!(sys.eigen_residual(&h3) < 1e-10 * h3.norm());
    }

    #[test]
    fn degenerate_and_complex_spectra_rejected() {
        assert!(matches!(
            eig_biorthogonal(&diag(1.0, 1.0), None),
            Err(Error::DegenerateSpectrum { .. })
        ));
        // [[0, 1], [-1, 0]] has eigenvalues +-i
        let rot = ComplexMatrix::from_rows(
            2,
            &[c64(0.0, 0.0), c64(1.0, 0.0), c64(-1.0, 0.0), c64(0.0, 0.0)],
        )
        .unwrap();
        assert!(matches!(
            eig_biorthogonal(&rot, None),
            Err(Error::ComplexSpectrum { .. })
        ));
        // exceptional point: Jordan block
        let jordan = ComplexMatrix::from_rows(
            2,
            &[c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)],
        )
        .unwrap();
        assert!(eig_biorthogonal(&jordan, None).is_err());
    }

    #[test]
    fn left_from_right_matches_eigensolver() {
        let q: f64 = 3.0;
        let eta = diag(q.powf(-0.5), q.sqrt());
        let h = diag(1.0 / q, -q);
        let sys = eig_biorthogonal(&h, None).unwrap();
        let left = left_from_right(&sys.right, &eta, Some(&h)).unwrap();
        for (a, b) in left.iter().zip(&sys.left) {
            assert!((a - b).norm() < 1e-12);
        }
        let hx = q_sigma_x(q);
        let sys = eig_biorthogonal(&hx, None).unwrap();
        let left = left_from_right(&sys.right, &eta, Some(&hx)).unwrap();
        for (a, b) in left.iter().zip(&sys.left) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn left_from_right_identity_metric() {
        let sys = eig_biorthogonal(&diag(2.0, -1.0), None).unwrap();
        let left = left_from_right(&sys.right, &ComplexMatrix::identity(2), None).unwrap();
        for (l, r) in left.iter().zip(&sys.right) {
            assert!((l - r).norm() < 1e-15);
        }
    }

    #[test]
    fn left_from_right_rejects_bad_metric() {
        let sys = eig_biorthogonal(&diag(2.0, -1.0), None).unwrap();
        assert!(matches!(
            left_from_right(&sys.right, &diag(1.0, 0.0), None),
            Err(Error::InvalidEta("singular"))
        ));
        // sigma_x of q = 3 is not pseudo-Hermitian for eta = identity
        assert!(matches!(
            left_from_right(
                &sys.right,
                &ComplexMatrix::identity(2),
                Some(&q_sigma_x(3.0))
            ),
            Err(Error::NotPseudoHermitian { .. })
        ));
    }

    #[test]
    fn gauge_fix_examples() {
        let v = CVector::from_column_slice(&[c64(0.0, 1.0), c64(0.0, 0.0)]);
        let fixed = gauge_fix(&[v], GaugeConvention::LargestComponent).unwrap();
        assert!((fixed[0][0] - 1.0).norm() < 1e-15);
        let again = gauge_fix(&fixed, GaugeConvention::LargestComponent).unwrap();
        assert_eq!(fixed, again);
        let zero = CVector::zeros(2);
        assert!(matches!(
            gauge_fix(&[zero], GaugeConvention::FirstNonzeroComponent),
            Err(Error::ZeroVector(0))
        ));
        let v = CVector::from_column_slice(&[c64(0.1, 0.1), c64(0.0, -2.0)]);
        let f = gauge_fix(&[v], GaugeConvention::FirstNonzeroComponent).unwrap();
        assert!(f[0][0].im.abs() < 1e-16 && f[0][0].re > 0.0);
    }

    #[test]
    fn expm_2x2_matches_generic() {
        let m = ComplexMatrix::from_rows(
            2,
            &[
                c64(0.3, -1.2),
                c64(0.7, 0.1),
                c64(-0.4, 0.5),
                c64(-0.2, 0.9),
            ],
        )
        .unwrap();
        let closed = m.exp();
        let generic = m.as_dmatrix().clone().exp();
        assert!((closed.as_dmatrix() - generic).norm() < 1e-13);
        // tiny-s branch
        let small = &ComplexMatrix::identity(2) * 0.5;
        let e = small.exp();
        assert!((e.get(0, 0) - 0.5f64.exp()).norm() < 1e-15);
        assert!(e.get(0, 1).norm() < 1e-15);
    }
}
