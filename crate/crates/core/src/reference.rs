//! Reference values of the biorthogonal QGT
//!
//! `Q^n_{mu nu} = sum_{m != n} <d_mu L_n|R_m><L_m|d_nu R_n>`
//!
//! evaluated through the force-operator identity
//! `<L_m|d_nu R_n> = <L_m|d_nu H|R_n> / (E_n - E_m)`, which needs no
//! eigenvector derivatives and is therefore gauge independent. The
//! finite-difference route in [`qgt_fd`] differentiates gauge-fixed
//! eigenvectors instead and exists only as an independent oracle.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{inner, BiorthogonalEigensystem, CVector, ComplexMatrix, C64};
use crate::models::{Axis, HamiltonianFamily, ModelVariant, ParamPoint};

/// One QGT component `Q^band_{mu nu}(point)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QgtComponent {
    pub value: C64,
    pub band: usize,
    pub mu: Axis,
    pub nu: Axis,
    pub point: ParamPoint,
}

/// Spectral sum for one band given the eigensystem and both parameter
/// derivatives of the Hamiltonian.
pub fn qgt_from_eigensystem(
    sys: &BiorthogonalEigensystem,
    d_mu: &ComplexMatrix,
    d_nu: &ComplexMatrix,
    band: usize,
) -> C64 {
    let e_n = sys.energies[band];
    let mut total = C64::new(0.0, 0.0);
    for m in (0..sys.dim()).filter(|&m| m != band) {
        let gap = e_n - sys.energies[m];
        let bra = d_mu.sandwich(&sys.left[band], &sys.right[m]);
        let ket = d_nu.sandwich(&sys.left[m], &sys.right[band]);
        total += bra * ket / (gap * gap);
    }
    total
}

pub fn qgt_spectral(
    family: &HamiltonianFamily,
    point: ParamPoint,
    mu: Axis,
    nu: Axis,
    band: usize,
) -> Result<QgtComponent> {
    let sys = family.eigensystem(point)?;
    check_band(&sys, band)?;
    let d_mu = family.d_hamiltonian(point, mu);
    let d_nu = family.d_hamiltonian(point, nu);
    Ok(QgtComponent {
        value: qgt_from_eigensystem(&sys, &d_mu, &d_nu, band),
        band,
        mu,
        nu,
        point,
    })
}

/// All four components `[[Q_11, Q_12], [Q_21, Q_22]]` from one eigensolve.
pub fn qgt_tensor(
    family: &HamiltonianFamily,
    point: ParamPoint,
    band: usize,
) -> Result<[[C64; 2]; 2]> {
    let sys = family.eigensystem(point)?;
    check_band(&sys, band)?;
    let d = [
        family.d_hamiltonian(point, Axis::First),
        family.d_hamiltonian(point, Axis::Second),
    ];
    let mut q = [[C64::new(0.0, 0.0); 2]; 2];
    for (i, row) in q.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = qgt_from_eigensystem(&sys, &d[i], &d[j], band);
        }
    }
    Ok(q)
}

fn check_band(sys: &BiorthogonalEigensystem, band: usize) -> Result<()> {
    if band >= sys.dim() {
        return Err(Error::InvalidArgument(format!(
            "band {band} out of range for a {}-level system",
            sys.dim()
        )));
    }
    Ok(())
}

/// Ratio `h ||d H|| / gap` above which [`qgt_fd`] refuses to run.
const FD_PERTURBATION_LIMIT: f64 = 0.1;

/// Finite-difference oracle: central differences of gauge-fixed eigenvectors
/// inserted into
/// `<d_mu L|d_nu R> - <d_mu L|R><L|d_nu R>`.
///
/// The gauge pivot is chosen at `point` and reused at the displaced points,
/// so the gauge is smooth across the stencil.
pub fn qgt_fd(
    family: &HamiltonianFamily,
    point: ParamPoint,
    mu: Axis,
    nu: Axis,
    band: usize,
    h: f64,
) -> Result<QgtComponent> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::StepTooLarge(format!(
            "step must be positive, got {h}"
        )));
    }
    let center = family.eigensystem(point)?;
    check_band(&center, band)?;
    let gap = min_gap_to(&center, band);
    for axis in [mu, nu] {
        let push = h * family.d_hamiltonian(point, axis).norm();
        if push > FD_PERTURBATION_LIMIT * gap {
            return Err(Error::StepTooLarge(format!(
                "h ||dH|| = {push:e} is not small against the gap {gap:e}"
            )));
        }
    }
    let pivot = largest_component(&center.right[band]);
    let pair = |p: ParamPoint| -> Result<(CVector, CVector)> {
        let sys = family.eigensystem(p)?;
        let r = &sys.right[band];
        let phase = r[pivot].conj() / r[pivot].norm();
        Ok((r * phase, &sys.left[band] * phase))
    };
    let (r0, l0) = pair(point)?;
    let (_, l_mu_plus) = pair(point.shifted(mu, h))?;
    let (_, l_mu_minus) = pair(point.shifted(mu, -h))?;
    let (r_nu_plus, _) = pair(point.shifted(nu, h))?;
    let (r_nu_minus, _) = pair(point.shifted(nu, -h))?;
    let scale = C64::from(0.5 / h);
    let dl = (l_mu_plus - l_mu_minus) * scale;
    let dr = (r_nu_plus - r_nu_minus) * scale;
    let value = inner(&dl, &dr) - inner(&dl, &r0) * inner(&l0, &dr);
    Ok(QgtComponent {
        value,
        band,
        mu,
        nu,
        point,
    })
}

/// Richardson-extrapolated [`qgt_fd`]: `(4 Q(h/2) - Q(h)) / 3`.
pub fn qgt_fd_richardson(
    family: &HamiltonianFamily,
    point: ParamPoint,
    mu: Axis,
    nu: Axis,
    band: usize,
    h: f64,
) -> Result<QgtComponent> {
    let coarse = qgt_fd(family, point, mu, nu, band, h)?;
    let fine = qgt_fd(family, point, mu, nu, band, h / 2.0)?;
    Ok(QgtComponent {
        value: (fine.value * 4.0 - coarse.value) / 3.0,
        ..fine
    })
}

fn min_gap_to(sys: &BiorthogonalEigensystem, band: usize) -> f64 {
    let e = sys.energies[band];
    sys.energies
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != band)
        .map(|(_, &em)| (em - e).abs())
        .fold(f64::INFINITY, f64::min)
}

fn largest_component(v: &CVector) -> usize {
    let mut best = 0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > v[best].norm() {
            best = i;
        }
    }
    best
}

/// Quantum metric and Berry curvature of one index pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricCurvature {
    pub g: f64,
    pub f: f64,
}

/// Splits the swapped pair `(Q_{mu nu}, Q_{nu mu})` into
/// `g_{mu nu} = (Q_{mu nu} + Q_{nu mu}) / 2` and
/// `F_{mu nu} = i (Q_{mu nu} - Q_{nu mu})`.
///
/// For a Hermitian QGT these are `Re Q_{mu nu}` and `-2 Im Q_{mu nu}`.
pub fn metric_curvature(q_munu: &QgtComponent, q_numu: &QgtComponent) -> Result<MetricCurvature> {
    if q_munu.band != q_numu.band {
        return Err(Error::IndexMismatch("bands differ"));
    }
    if q_munu.point != q_numu.point {
        return Err(Error::IndexMismatch("parameter points differ"));
    }
    if q_munu.mu != q_numu.nu || q_munu.nu != q_numu.mu {
        return Err(Error::IndexMismatch("indices are not swapped"));
    }
    Ok(split_pair(q_munu.value, q_numu.value))
}

pub fn split_pair(q_munu: C64, q_numu: C64) -> MetricCurvature {
    let g = (q_munu + q_numu) * 0.5;
    let f = C64::i() * (q_munu - q_numu);
    MetricCurvature { g: g.re, f: f.re }
}

/// Berry curvature `F_{12} = i (Q_12 - Q_21)` of `band` at `point`.
pub fn berry_curvature(family: &HamiltonianFamily, point: ParamPoint, band: usize) -> Result<f64> {
    let q = qgt_tensor(family, point, band)?;
    Ok(split_pair(q[0][1], q[1][0]).f)
}

/// Chern number from curvature integrated over the first parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernResult {
    pub chern: f64,
    pub grid_points: usize,
    /// `Delta2 / Delta1` for Model I families.
    pub delta2_over_delta1: Option<f64>,
    /// Largest change of the curvature when the second parameter is moved
    /// off `second_fixed`.
    pub uniformity_deviation: f64,
}

/// Uniform grid of `n` points over `[0, pi]`.
pub fn theta_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| PI * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Composite trapezoid rule over uniformly spaced samples.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => step * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

pub fn delta_ratio(family: &HamiltonianFamily) -> Option<f64> {
    match family.spec.variant {
        ModelVariant::ModelI { delta1, delta2, .. } => Some(delta2 / delta1),
        _ => None,
    }
}

/// `C = int_0^pi F_{12}(l1, second_fixed) d l1` by composite trapezoid over
/// `n` points. The curvature is required to be independent of the second
/// parameter; this is checked at every grid point against a shifted value.
pub fn chern_number(
    family: &HamiltonianFamily,
    second_fixed: f64,
    n: usize,
) -> Result<ChernResult> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 grid points, got {n}"
        )));
    }
    let grid = theta_grid(n);
    let mut values = Vec::with_capacity(n);
    let mut deviation: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for &t in &grid {
        let f = berry_curvature(family, ParamPoint::new(t, second_fixed), 0)?;
        let shifted = berry_curvature(family, ParamPoint::new(t, second_fixed + 1.0), 0)?;
        deviation = deviation.max((f - shifted).abs());
        peak = peak.max(f.abs());
        values.push(f);
    }
    if deviation > 1e-8 * peak.max(1.0) {
        return Err(Error::CurvatureNotUniform(deviation));
    }
    Ok(ChernResult {
        chern: trapezoid(&values, grid[1] - grid[0]),
        grid_points: n,
        delta2_over_delta1: delta_ratio(family),
        uniformity_deviation: deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;

    fn isotropic() -> HamiltonianFamily {
        HamiltonianFamily::new(ModelSpec::model_i(1.0, 10.0, 10.0, 0.0)).unwrap()
    }

    fn fig1() -> HamiltonianFamily {
        HamiltonianFamily::new(ModelSpec::model_i(3.0, 10.0, 15.0, 0.0)).unwrap()
    }

    #[test]
    fn isotropic_spin_half_values() {
        let fam = isotropic();
        for &(t, p) in &[(0.4, 0.0), (1.3, 2.1), (2.9, -0.5)] {
            let q = qgt_tensor(&fam, ParamPoint::new(t, p), 0).unwrap();
            let s = f64::sin(t);
            assert!((q[0][0] - 0.25).norm() < 1e-12);
            assert!((q[1][1] - s * s / 4.0).norm() < 1e-12);
            assert!(q[1][0].re.abs() < 1e-12);
            assert!((q[1][0].im - s / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn model_i_off_diagonal_metric_vanishes() {
        let fam = HamiltonianFamily::new(ModelSpec::model_i(3.0, 10.0, 15.0, 7.0)).unwrap();
        for k in 1..20 {
            let t = PI * k as f64 / 20.0;
            let q = qgt_tensor(&fam, ParamPoint::new(t, 0.3 * k as f64), 0).unwrap();
            assert!(q[1][0].re.abs() < 1e-12 * q[0][0].norm().max(1.0));
        }
    }

    #[test]
    fn band_out_of_range() {
        assert!(qgt_spectral(
            &fig1(),
            ParamPoint::new(1.0, 0.0),
            Axis::First,
            Axis::First,
            2
        )
        .is_err());
    }

    #[test]
    fn fd_rejects_large_step() {
        let err = qgt_fd(
            &fig1(),
            ParamPoint::new(1.0, 0.0),
            Axis::First,
            Axis::First,
            0,
            0.5,
        );
        assert!(matches!(err, Err(Error::StepTooLarge(_))));
        let err = qgt_fd(
            &fig1(),
            ParamPoint::new(1.0, 0.0),
            Axis::First,
            Axis::First,
            0,
            -1.0,
        );
        assert!(matches!(err, Err(Error::StepTooLarge(_))));
    }

    #[test]
    fn fd_hermitian_diagonal_nonnegative() {
        let fam = isotropic();
        for axis in Axis::BOTH {
            let q = qgt_fd(&fam, ParamPoint::new(0.8, 0.2), axis, axis, 0, 1e-4).unwrap();
            assert!(q.value.im.abs() < 1e-8);
            assert!(q.value.re >= 0.0);
        }
    }

    #[test]
    fn metric_curvature_examples() {
        let p = ParamPoint::new(1.0, 0.0);
        let mk = |value, mu, nu| QgtComponent {
            value,
            band: 0,
            mu,
            nu,
            point: p,
        };
        let pair = metric_curvature(
            &mk(C64::new(0.25, 0.0), Axis::First, Axis::Second),
            &mk(C64::new(0.25, 0.0), Axis::Second, Axis::First),
        )
        .unwrap();
        assert_eq!(pair, MetricCurvature { g: 0.25, f: 0.0 });

        // spin-1/2 monopole: Q_{phi theta} = +i s/4, Q_{theta phi} = -i s/4
        let s = f64::sin(1.0);
        let q_tp = mk(C64::new(0.0, -s / 4.0), Axis::First, Axis::Second);
        let q_pt = mk(C64::new(0.0, s / 4.0), Axis::Second, Axis::First);
        let tp = metric_curvature(&q_tp, &q_pt).unwrap();
        let pt = metric_curvature(&q_pt, &q_tp).unwrap();
        assert!((tp.f - s / 2.0).abs() < 1e-15);
        assert_eq!(tp.f, -pt.f);
        assert_eq!(tp.g, pt.g);

        let bad = mk(C64::new(0.0, 0.0), Axis::First, Axis::Second);
        assert!(matches!(
            metric_curvature(&bad, &bad),
            Err(Error::IndexMismatch(_))
        ));
        let other_band = QgtComponent { band: 1, ..q_pt };
        assert!(matches!(
            metric_curvature(&q_tp, &other_band),
            Err(Error::IndexMismatch(_))
        ));
    }

    #[test]
    fn trapezoid_basics() {
        assert_eq!(trapezoid(&[], 1.0), 0.0);
        assert_eq!(trapezoid(&[1.0, 1.0, 1.0], 0.5), 1.0);
        assert_eq!(theta_grid(3), vec![0.0, PI / 2.0, PI]);
    }

    #[test]
    fn chern_isotropic_is_one() {
        let c = chern_number(&isotropic(), 0.0, 201).unwrap();
        assert!((c.chern - 1.0).abs() < 1e-3, "{}", c.chern);
        assert_eq!(c.delta2_over_delta1, Some(0.0));
    }

    #[test]
    fn chern_rejects_phi_dependent_curvature() {
        let fam = HamiltonianFamily::new(ModelSpec::model_ii(3.0, 15.0)).unwrap();
        assert!(matches!(
            chern_number(&fam, PI / 2.0, 21),
            Err(Error::CurvatureNotUniform(_))
        ));
    }
}
