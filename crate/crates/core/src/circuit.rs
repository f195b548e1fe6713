//! State-vector simulation of the ancilla-assisted swap circuit that reads a
//! generalized expectation value.
//!
//! Register layout: one ancilla followed by two `n`-qubit registers, with
//! basis index `ancilla * d^2 + r1 * d + r2`, `d = 2^n`. The input
//! `|0> (x) |psi1> (x) |psi2>` passes a Hadamard on the ancilla and a
//! controlled swap of the registers, giving
//! `(|0>|psi1>|psi2> + |1>|psi2>|psi1>) / sqrt(2)`.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{CVector, ComplexMatrix, C64};
use crate::measurement::NEAR_ORTHOGONAL_TOL;

const UNIT_NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub num_qubits: usize,
    pub amplitudes: CVector,
}

impl StateVector {
    /// Register dimension `d = 2^n`.
    pub fn register_dim(&self) -> usize {
        1 << ((self.num_qubits - 1) / 2)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    fn index(&self, ancilla: usize, r1: usize, r2: usize) -> usize {
        let d = self.register_dim();
        ancilla * d * d + r1 * d + r2
    }

    /// Hadamard on the ancilla.
    pub fn apply_hadamard(&mut self) {
        let half = self.amplitudes.len() / 2;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..half {
            let (a, b) = (self.amplitudes[i], self.amplitudes[i + half]);
            self.amplitudes[i] = (a + b) * s;
            self.amplitudes[i + half] = (a - b) * s;
        }
    }

    /// Phase gate adjoint `diag(1, -i)` on the ancilla.
    fn apply_s_dagger(&mut self) {
        let half = self.amplitudes.len() / 2;
        for i in half..2 * half {
            self.amplitudes[i] *= C64::new(0.0, -1.0);
        }
    }

    /// Swaps the two registers where the ancilla is `|1>`.
    pub fn apply_controlled_swap(&mut self) {
        let d = self.register_dim();
        for r1 in 0..d {
            for r2 in (r1 + 1)..d {
                let (i, j) = (self.index(1, r1, r2), self.index(1, r2, r1));
                self.amplitudes.swap_rows(i, j);
            }
        }
    }
}

/// Qubits per register for a state of dimension `dim`.
fn register_qubits(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::UnsupportedDimension(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianObservable {
    matrix: ComplexMatrix,
}

impl HermitianObservable {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let residual = matrix.hermiticity_residual();
        if residual > HERMITIAN_TOL * matrix.norm().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "observable is not Hermitian (residual {residual:e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

/// `A = A_plus + i A_minus` with `A_plus = (A + A^dagger) / 2` and
/// `A_minus = (A - A^dagger) / 2i`.
pub fn hermitian_split(a: &ComplexMatrix) -> (HermitianObservable, HermitianObservable) {
    let adj = a.adjoint();
    let plus = (a + &adj).scale(C64::from(0.5));
    let minus = (a - &adj).scale(C64::new(0.0, -0.5));
    // both are Hermitian by construction; symmetrise away rounding
    let sym = |m: ComplexMatrix| {
        let avg = (&m + &m.adjoint()).scale(C64::from(0.5));
        HermitianObservable { matrix: avg }
    };
    (sym(plus), sym(minus))
}

pub fn build_output_state(psi1: &CVector, psi2: &CVector) -> Result<StateVector> {
    if psi1.len() != psi2.len() {
        return Err(Error::DimensionMismatch {
            expected: psi1.len(),
            found: psi2.len(),
        });
    }
    let n = register_qubits(psi1.len())?;
    for (k, psi) in [psi1, psi2].into_iter().enumerate() {
        if (psi.norm() - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::InvalidArgument(format!(
                "input state {k} is not unit norm"
            )));
        }
    }
    let d = psi1.len();
    let mut amplitudes = CVector::zeros(2 * d * d);
    for r1 in 0..d {
        for r2 in 0..d {
            amplitudes[r1 * d + r2] = psi1[r1] * psi2[r2];
        }
    }
    let mut state = StateVector {
        num_qubits: 2 * n + 1,
        amplitudes,
    };
    state.apply_hadamard();
    state.apply_controlled_swap();
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    X,
    Y,
}

/// `sigma (x) O (x) I` applied to the state.
fn apply_observable(state: &StateVector, o: &HermitianObservable, pauli: Pauli) -> Result<CVector> {
    let d = state.register_dim();
    if o.matrix.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: o.matrix.dim(),
        });
    }
    let m = o.matrix.as_dmatrix();
    let mut out = CVector::zeros(state.amplitudes.len());
    for a in 0..2 {
        // sigma maps ancilla a to 1 - a with this factor
        let factor = match (pauli, a) {
            (Pauli::X, _) => C64::from(1.0),
            (Pauli::Y, 0) => C64::new(0.0, 1.0),
            (Pauli::Y, _) => C64::new(0.0, -1.0),
        };
        for r1 in 0..d {
            for r2 in 0..d {
                let amp = state.amplitudes[state.index(a, r1, r2)] * factor;
                if amp == C64::from(0.0) {
                    continue;
                }
                for s1 in 0..d {
                    out[state.index(1 - a, s1, r2)] += m[(s1, r1)] * amp;
                }
            }
        }
    }
    Ok(out)
}

/// `<Psi| sigma (x) O (x) I |Psi>`, which equals `Re` (`X`) or `Im` (`Y`) of
/// `<psi1|O|psi2> <psi2|psi1>`.
pub fn readout(state: &StateVector, o: &HermitianObservable, pauli: Pauli) -> Result<f64> {
    let applied = apply_observable(state, o, pauli)?;
    Ok(state.amplitudes.dotc(&applied).re)
}

/// Generalized expectation value assembled from circuit readouts of the
/// Hermitian parts of `a`. Inputs are normalised first.
pub fn gev_via_circuit(psi1: &CVector, psi2: &CVector, a: &ComplexMatrix) -> Result<C64> {
    let state = normalized_output(psi1, psi2)?;
    let d = state.register_dim();
    let denominator = readout(&state, &HermitianObservable::identity(d), Pauli::X)?;
    if !(denominator.max(0.0).sqrt() >= NEAR_ORTHOGONAL_TOL) {
        return Err(Error::NearOrthogonal(denominator.max(0.0).sqrt()));
    }
    let (plus, minus) = hermitian_split(a);
    let part = |o: &HermitianObservable| -> Result<C64> {
        let re = readout(&state, o, Pauli::X)?;
        let im = readout(&state, o, Pauli::Y)?;
        Ok(C64::new(re, im) / denominator)
    };
    Ok(part(&plus)? + C64::i() * part(&minus)?)
}

fn normalized_output(psi1: &CVector, psi2: &CVector) -> Result<StateVector> {
    let (n1, n2) = (psi1.norm(), psi2.norm());
    if !(n1 > 0.0) {
        return Err(Error::ZeroVector(0));
    }
    if !(n2 > 0.0) {
        return Err(Error::ZeroVector(1));
    }
    build_output_state(&(psi1 / C64::from(n1)), &(psi2 / C64::from(n2)))
}

/// Shot-sampled estimate of a readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledReadout {
    pub mean: f64,
    pub std_error: f64,
    pub shots: usize,
}

/// Samples the joint outcome of `sigma` on the ancilla and `O` on the first
/// register. Each shot yields `(+-1) * o_k`.
pub fn sample_readout(
    state: &StateVector,
    o: &HermitianObservable,
    pauli: Pauli,
    shots: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SampledReadout> {
    if shots == 0 {
        return Err(Error::InvalidArgument("need at least one shot".into()));
    }
    let d = state.register_dim();
    if o.matrix.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: o.matrix.dim(),
        });
    }
    // rotate the ancilla so that sigma becomes sigma_z
    let mut rotated = state.clone();
    if pauli == Pauli::Y {
        rotated.apply_s_dagger();
    }
    rotated.apply_hadamard();
    let eigen = o.matrix.as_dmatrix().clone().symmetric_eigen();
    let basis: DMatrix<C64> = eigen.eigenvectors;
    let mut outcomes = Vec::with_capacity(2 * d);
    let mut weights = Vec::with_capacity(2 * d);
    for a in 0..2 {
        let sign = if a == 0 { 1.0 } else { -1.0 };
        for k in 0..d {
            let mut p = 0.0;
            for r2 in 0..d {
                let mut amp = C64::from(0.0);
                for r1 in 0..d {
                    amp += basis[(r1, k)].conj() * rotated.amplitudes[rotated.index(a, r1, r2)];
                }
                p += amp.norm_sqr();
            }
            outcomes.push(sign * eigen.eigenvalues[k]);
            weights.push(p);
        }
    }
    let dist = WeightedIndex::new(&weights)
        .map_err(|e| Error::InvalidArgument(format!("outcome distribution: {e}")))?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..shots {
        let x = outcomes[dist.sample(rng)];
        sum += x;
        sum_sq += x * x;
    }
    let mean = sum / shots as f64;
    let var = (sum_sq / shots as f64 - mean * mean).max(0.0);
    Ok(SampledReadout {
        mean,
        std_error: (var / shots as f64).sqrt(),
        shots,
    })
}

/// Shot-sampled counterpart of [`gev_via_circuit`]; every readout uses
/// `shots` samples from a generator seeded with `seed`.
pub fn gev_via_circuit_sampled(
    psi1: &CVector,
    psi2: &CVector,
    a: &ComplexMatrix,
    shots: usize,
    seed: u64,
) -> Result<C64> {
    let state = normalized_output(psi1, psi2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = state.register_dim();
    let denominator = sample_readout(
        &state,
        &HermitianObservable::identity(d),
        Pauli::X,
        shots,
        &mut rng,
    )?
    .mean;
    if !(denominator.abs() > 0.0) {
        return Err(Error::NearOrthogonal(0.0));
    }
    let (plus, minus) = hermitian_split(a);
    let mut part = |o: &HermitianObservable| -> Result<C64> {
        let re = sample_readout(&state, o, Pauli::X, shots, &mut rng)?.mean;
        let im = sample_readout(&state, o, Pauli::Y, shots, &mut rng)?.mean;
        Ok(C64::new(re, im) / denominator)
    };
    let p = part(&plus)?;
    let m = part(&minus)?;
    Ok(p + C64::i() * m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use crate::measurement::gev;
    use crate::models::{Axis, HamiltonianFamily, ModelSpec, ParamPoint};

    fn ket(a: C64, b: C64) -> CVector {
        CVector::from_column_slice(&[a, b])
    }

    fn zero() -> CVector {
        ket(c64(1.0, 0.0), c64(0.0, 0.0))
    }

    fn one() -> CVector {
        ket(c64(0.0, 0.0), c64(1.0, 0.0))
    }

    fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&[c64(1.0, 0.0), c64(-1.0, 0.0)]).unwrap()
    }

    #[test]
    fn split_examples() {
        let (p, m) = hermitian_split(&sigma_z());
        assert_eq!(p.matrix(), &sigma_z());
        assert_eq!(m.matrix().max_abs(), 0.0);
        let (p, m) = hermitian_split(&sigma_z().scale(C64::i()));
        assert_eq!(p.matrix().max_abs(), 0.0);
        assert!((m.matrix() - &sigma_z()).max_abs() < 1e-15);

        let fam = HamiltonianFamily::new(ModelSpec::model_i(3.0, 10.0, 15.0, 0.0)).unwrap();
        let f = fam.generalized_force(ParamPoint::new(1.0, 0.3), Axis::First);
        assert!(f.hermiticity_residual() > 1.0);
        let (p, m) = hermitian_split(&f);
        let back = p.matrix() + &m.matrix().scale(C64::i());
        assert!((&back - &f).max_abs() <= 1e-14 * f.max_abs().max(1.0));
    }

    #[test]
    fn output_state_examples() {
        let s = build_output_state(&zero(), &zero()).unwrap();
        assert_eq!(s.num_qubits, 3);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut expected = CVector::zeros(8);
        expected[0] = c64(r, 0.0);
        expected[4] = c64(r, 0.0);
        assert!((&s.amplitudes - &expected).norm() < 1e-15);

        let s = build_output_state(&zero(), &one()).unwrap();
        let mut expected = CVector::zeros(8);
        expected[0b001] = c64(r, 0.0);
        expected[0b110] = c64(r, 0.0);
        assert!((&s.amplitudes - &expected).norm() < 1e-15);

        let three = CVector::from_element(3, c64(1.0 / 3f64.sqrt(), 0.0));
        assert!(matches!(
            build_output_state(&three, &three),
            Err(Error::UnsupportedDimension(3))
        ));
        assert!(matches!(
            build_output_state(&zero(), &three),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(build_output_state(&(zero() * C64::from(2.0)), &zero()).is_err());
    }

    #[test]
    fn readout_examples() {
        let s = build_output_state(&zero(), &zero()).unwrap();
        let z = HermitianObservable::new(sigma_z()).unwrap();
        assert!((readout(&s, &z, Pauli::X).unwrap() - 1.0).abs() < 1e-15);
        let s = build_output_state(&zero(), &one()).unwrap();
        assert!(
            readout(&s, &HermitianObservable::identity(2), Pauli::X)
                .unwrap()
                .abs()
                < 1e-15
        );
        assert!(HermitianObservable::new(sigma_z().scale(C64::i())).is_err());
    }

    #[test]
    fn readout_matches_direct_formula() {
        let p1 = ket(c64(0.6, 0.0), c64(0.0, 0.8));
        let p2 = ket(c64(0.28, -0.96), c64(0.0, 0.0));
        let o = ComplexMatrix::from_rows(
            2,
            &[c64(0.5, 0.0), c64(0.2, -0.7), c64(0.2, 0.7), c64(-1.3, 0.0)],
        )
        .unwrap();
        let obs = HermitianObservable::new(o.clone()).unwrap();
        let s = build_output_state(&p1, &p2).unwrap();
        let direct = o.sandwich(&p1, &p2) * p2.dotc(&p1);
        assert!((readout(&s, &obs, Pauli::X).unwrap() - direct.re).abs() < 1e-12);
        assert!((readout(&s, &obs, Pauli::Y).unwrap() - direct.im).abs() < 1e-12);
        let id = HermitianObservable::identity(2);
        assert!((readout(&s, &id, Pauli::X).unwrap() - p1.dotc(&p2).norm_sqr()).abs() < 1e-12);
        assert!(readout(&s, &id, Pauli::Y).unwrap().abs() < 1e-12);
    }

    #[test]
    fn circuit_gev_examples() {
        let p1 = ket(c64(0.6, 0.0), c64(0.0, 0.8));
        let p2 = ket(c64(0.28, -0.96), c64(0.3, 0.1));
        let id = ComplexMatrix::identity(2);
        assert!((gev_via_circuit(&p1, &p2, &id).unwrap() - C64::from(1.0)).norm() < 1e-15);
        let a = ComplexMatrix::from_rows(
            2,
            &[c64(0.3, -1.0), c64(2.0, 0.5), c64(-0.7, 0.1), c64(1.1, 0.9)],
        )
        .unwrap();
        let circuit = gev_via_circuit(&p1, &p2, &a).unwrap();
        let direct = gev(&p1, &p2, &a).unwrap().value;
        assert!((circuit - direct).norm() < 1e-12);
        assert!(matches!(
            gev_via_circuit(&zero(), &one(), &a),
            Err(Error::NearOrthogonal(_))
        ));
    }

    #[test]
    fn four_level_registers() {
        let p1 = CVector::from_column_slice(&[
            c64(0.5, 0.0),
            c64(0.1, 0.5),
            c64(-0.3, 0.2),
            c64(0.0, -0.6),
        ]);
        let p2 = CVector::from_column_slice(&[
            c64(0.2, 0.2),
            c64(0.4, 0.0),
            c64(0.0, 0.7),
            c64(-0.5, 0.1),
        ]);
        let a = ComplexMatrix::from_rows(
            4,
            &(0..16)
                .map(|k| c64((k as f64).sin(), (k as f64 * 0.7).cos()))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let circuit = gev_via_circuit(&p1, &p2, &a).unwrap();
        let direct = gev(&p1, &p2, &a).unwrap().value;
        assert!((circuit - direct).norm() < 1e-12 * direct.norm().max(1.0));
        assert_eq!(normalized_output(&p1, &p2).unwrap().num_qubits, 5);
    }

    #[test]
    fn sampling_converges_and_is_seeded() {
        let p1 = ket(c64(0.6, 0.0), c64(0.0, 0.8));
        let p2 = ket(c64(0.28, -0.96), c64(0.3, 0.1));
        let a = sigma_z();
        let exact = gev(&p1, &p2, &a).unwrap().value;
        let x = gev_via_circuit_sampled(&p1, &p2, &a, 200_000, 7).unwrap();
        let y = gev_via_circuit_sampled(&p1, &p2, &a, 200_000, 7).unwrap();
        assert_eq!(x, y);
        assert!(
            (x - exact).norm() < 0.05 * exact.norm().max(1.0),
            "{x} vs {exact}"
        );
    }
}
