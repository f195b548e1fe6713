//! Generalized expectation values and the two response schemes.
//!
//! Scheme 1 divides `<psi'_mu|(H - E_0)^2|psi_nu> / <psi'_mu|psi_nu>` by
//! `v^2`. Scheme 2 evaluates the force `f_mu = -d_mu H` on the pairs
//! `(psi'_nu, psi_nu)` and `(psi''_nu, psi_nu)`, subtracts the instantaneous
//! value and reads the curvature from the real part and the metric from the
//! imaginary part of the remainder.

use rayon::prelude::*;

use crate::dynamics::{prepare_triple, GroundStatePrep, IntegratorConfig, StateTriple};
use crate::error::{Error, Result};
use crate::linalg::{inner, CVector, ComplexMatrix, C64};
use crate::models::{per_two_pi, Axis, HamiltonianFamily, ModelSpec, ModelVariant, ParamPoint};
use crate::reference::{chern_number, qgt_tensor, theta_grid, trapezoid, ChernResult};

/// `|<psi1|psi2>|` below this fraction of `|psi1| |psi2|` is rejected.
pub const NEAR_ORTHOGONAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedExpectation {
    pub value: C64,
    pub numerator: C64,
    pub denominator: C64,
}

/// `<psi1|A|psi2> / <psi1|psi2>`.
pub fn gev(psi1: &CVector, psi2: &CVector, a: &ComplexMatrix) -> Result<GeneralizedExpectation> {
    if psi1.len() != a.dim() || psi2.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: if psi1.len() != a.dim() {
                psi1.len()
            } else {
                psi2.len()
            },
        });
    }
    let scale = psi1.norm() * psi2.norm();
    if !(scale > 0.0) {
        return Err(Error::ZeroVector(if psi1.norm() > 0.0 { 1 } else { 0 }));
    }
    let denominator = inner(psi1, psi2);
    let overlap = denominator.norm() / scale;
    if !(overlap >= NEAR_ORTHOGONAL_TOL) {
        return Err(Error::NearOrthogonal(overlap));
    }
    let numerator = a.sandwich(psi1, psi2);
    Ok(GeneralizedExpectation {
        value: numerator / denominator,
        numerator,
        denominator,
    })
}

/// Normalised overlap `|<a|b>| / (|a| |b|)`.
pub fn overlap_ratio(a: &CVector, b: &CVector) -> f64 {
    inner(a, b).norm() / (a.norm() * b.norm())
}

/// Instantaneous force expectation `<L_0|f_mu|R_0> / <L_0|R_0>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantTerm {
    pub f_mu_expect: C64,
}

pub fn force_constant(
    family: &HamiltonianFamily,
    point: ParamPoint,
    mu: Axis,
) -> Result<ConstantTerm> {
    let sys = family.eigensystem(point)?;
    let f = family.generalized_force(point, mu);
    let value = gev(&sys.left[0], &sys.right[0], &f)?;
    Ok(ConstantTerm {
        f_mu_expect: value.value,
    })
}

/// `(H - E_0)^2` at `point`, with `E_0` from the closed form.
pub fn energy_fluctuation_operator(
    family: &HamiltonianFamily,
    point: ParamPoint,
) -> Result<ComplexMatrix> {
    let h = family.hamiltonian(point);
    let e0 = family.eigenvalues_closed_form(point)?.0;
    let shifted = &h - &ComplexMatrix::identity(h.dim()).scale(C64::from(e0));
    Ok(&shifted * &shifted)
}

/// Ramp and integrator settings shared by every evolution of a measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementConfig {
    /// Preset offset `dl`.
    pub offset: f64,
    /// Final ramp speed `v`.
    pub speed: f64,
    pub integrator: IntegratorConfig,
    pub prep: GroundStatePrep,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            offset: std::f64::consts::FRAC_PI_2,
            speed: 1.0,
            integrator: IntegratorConfig::default(),
            prep: GroundStatePrep::Direct,
        }
    }
}

impl MeasurementConfig {
    pub fn final_time(&self) -> f64 {
        2.0 * self.offset / self.speed
    }
}

/// What an estimate measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimateKind {
    /// Scheme 1: complex `Q_{mu nu}`.
    EnergyFluctuation,
    /// Scheme 2, `(psi'_nu, psi_nu)` pair: `F_{mu nu}`.
    ForceCurvature,
    /// Scheme 2, `(psi''_nu, psi_nu)` pair: `g_{mu nu}`.
    ForceMetric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QgtEstimate {
    pub kind: EstimateKind,
    /// Complex `Q` for Scheme 1; the real `g` or `F` in `value.re` otherwise.
    pub value: C64,
    pub target: ParamPoint,
    pub mu: Axis,
    pub nu: Axis,
    pub speed: f64,
    pub offset: f64,
    /// Measurement time, always the ramp end `t_f`.
    pub time: f64,
    pub raw: GeneralizedExpectation,
    /// `|<psi1|psi2>| / (|psi1| |psi2|)` of the measured pair.
    pub overlap: f64,
}

impl QgtEstimate {
    /// Metric part: `Re Q` for Scheme 1, `g` for the force metric.
    pub fn metric(&self) -> f64 {
        self.value.re
    }

    /// Curvature `F_{mu nu}`: `-2 Im Q` for Scheme 1, the value itself for the
    /// force curvature.
    pub fn curvature(&self) -> f64 {
        match self.kind {
            EstimateKind::EnergyFluctuation => -2.0 * self.value.im,
            _ => self.value.re,
        }
    }
}

/// Evolved triples for both ramp directions into one target point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointStates {
    pub target: ParamPoint,
    pub config: MeasurementConfig,
    triples: [Option<StateTriple>; 2],
}

impl PointStates {
    /// Evolves the triples along the requested axes.
    pub fn prepare(
        family: &HamiltonianFamily,
        target: ParamPoint,
        axes: &[Axis],
        config: &MeasurementConfig,
    ) -> Result<Self> {
        let mut triples = [None, None];
        for &axis in axes {
            if triples[axis.index()].is_none() {
                triples[axis.index()] = Some(prepare_triple(
                    family,
                    target,
                    axis,
                    config.offset,
                    config.speed,
                    &config.integrator,
                    config.prep,
                )?);
            }
        }
        Ok(Self {
            target,
            config: *config,
            triples,
        })
    }

    pub fn triple(&self, axis: Axis) -> Result<&StateTriple> {
        self.triples[axis.index()].as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("no states prepared along axis {}", axis.index()))
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn estimate(
        &self,
        kind: EstimateKind,
        mu: Axis,
        nu: Axis,
        psi1: &CVector,
        psi2: &CVector,
        op: &ComplexMatrix,
        finish: impl FnOnce(C64) -> C64,
    ) -> Result<QgtEstimate> {
        let raw = gev(psi1, psi2, op)?;
        Ok(QgtEstimate {
            kind,
            value: finish(raw.value),
            target: self.target,
            mu,
            nu,
            speed: self.config.speed,
            offset: self.config.offset,
            time: self.config.final_time(),
            raw,
            overlap: overlap_ratio(psi1, psi2),
        })
    }

    /// Scheme 1 on the pair `(psi'_mu, psi_nu)`.
    pub fn scheme1(&self, family: &HamiltonianFamily, mu: Axis, nu: Axis) -> Result<QgtEstimate> {
        let op = energy_fluctuation_operator(family, self.target)?;
        let psi1 = &self.triple(mu)?.adjoint.vector;
        let psi2 = &self.triple(nu)?.right.vector;
        let v2 = self.config.speed * self.config.speed;
        self.estimate(
            EstimateKind::EnergyFluctuation,
            mu,
            nu,
            psi1,
            psi2,
            &op,
            |z| z / v2,
        )
    }

    /// Scheme 2 curvature `F_{mu nu}` on the pair `(psi'_nu, psi_nu)`.
    pub fn scheme2_curvature(
        &self,
        family: &HamiltonianFamily,
        mu: Axis,
        nu: Axis,
    ) -> Result<QgtEstimate> {
        let triple = self.triple(nu)?;
        let f = family.generalized_force(self.target, mu);
        let constant = force_constant(family, self.target, mu)?.f_mu_expect;
        let v = self.config.speed;
        self.estimate(
            EstimateKind::ForceCurvature,
            mu,
            nu,
            &triple.adjoint.vector,
            &triple.right.vector,
            &f,
            |z| C64::from((z - constant).re / v),
        )
    }

    /// Scheme 2 metric `g_{mu nu}` on the pair `(psi''_nu, psi_nu)`.
    pub fn scheme2_metric(
        &self,
        family: &HamiltonianFamily,
        mu: Axis,
        nu: Axis,
    ) -> Result<QgtEstimate> {
        let triple = self.triple(nu)?;
        let f = family.generalized_force(self.target, mu);
        let constant = force_constant(family, self.target, mu)?.f_mu_expect;
        let v = self.config.speed;
        self.estimate(
            EstimateKind::ForceMetric,
            mu,
            nu,
            &triple.negative_adjoint.vector,
            &triple.right.vector,
            &f,
            |z| C64::from((z - constant).im / (2.0 * v)),
        )
    }
}

pub fn scheme1_qgt(
    family: &HamiltonianFamily,
    target: ParamPoint,
    mu: Axis,
    nu: Axis,
    config: &MeasurementConfig,
) -> Result<QgtEstimate> {
    PointStates::prepare(family, target, &[mu, nu], config)?.scheme1(family, mu, nu)
}

pub fn scheme2_curvature(
    family: &HamiltonianFamily,
    target: ParamPoint,
    mu: Axis,
    nu: Axis,
    config: &MeasurementConfig,
) -> Result<QgtEstimate> {
    PointStates::prepare(family, target, &[nu], config)?.scheme2_curvature(family, mu, nu)
}

pub fn scheme2_metric(
    family: &HamiltonianFamily,
    target: ParamPoint,
    mu: Axis,
    nu: Axis,
    config: &MeasurementConfig,
) -> Result<QgtEstimate> {
    PointStates::prepare(family, target, &[nu], config)?.scheme2_metric(family, mu, nu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    EnergyFluctuation,
    GeneralizedForce,
}

impl Scheme {
    pub const BOTH: [Scheme; 2] = [Scheme::EnergyFluctuation, Scheme::GeneralizedForce];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::EnergyFluctuation => "scheme1",
            Scheme::GeneralizedForce => "scheme2",
        }
    }
}

/// The four reported components for the ordered axis pair `(mu, nu)`:
/// `Q_{mu mu}`, `Q_{nu nu}`, `Re Q_{nu mu}`, `Im Q_{nu mu}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentSet(pub [f64; 4]);

impl ComponentSet {
    pub fn from_tensor(q: &[[C64; 2]; 2], mu: Axis, nu: Axis) -> Self {
        let (m, n) = (mu.index(), nu.index());
        let q_numu = q[n][m];
        Self([q[m][m].re, q[n][n].re, q_numu.re, q_numu.im])
    }

    /// Column names for the parameter names of a model.
    pub fn labels(names: [&str; 2], mu: Axis, nu: Axis) -> [String; 4] {
        let (m, n) = (names[mu.index()], names[nu.index()]);
        [
            format!("Q_{m}{m}"),
            format!("Q_{n}{n}"),
            format!("ReQ_{n}{m}"),
            format!("ImQ_{n}{m}"),
        ]
    }
}

/// Measures the four components of `(mu, nu)` with one scheme.
pub fn measure_components(
    family: &HamiltonianFamily,
    states: &PointStates,
    scheme: Scheme,
    mu: Axis,
    nu: Axis,
) -> Result<(ComponentSet, f64)> {
    let estimates = match scheme {
        Scheme::EnergyFluctuation => {
            let q_mm = states.scheme1(family, mu, mu)?;
            let q_nn = states.scheme1(family, nu, nu)?;
            let q_nm = states.scheme1(family, nu, mu)?;
            [
                q_mm.value.re,
                q_nn.value.re,
                q_nm.value.re,
                q_nm.value.im,
                q_mm.overlap,
                q_nn.overlap,
                q_nm.overlap,
            ]
        }
        Scheme::GeneralizedForce => {
            let g_mm = states.scheme2_metric(family, mu, mu)?;
            let g_nn = states.scheme2_metric(family, nu, nu)?;
            let g_nm = states.scheme2_metric(family, nu, mu)?;
            // Im Q_{nu mu} = F_{mu nu} / 2
            let f_mn = states.scheme2_curvature(family, mu, nu)?;
            [
                g_mm.value.re,
                g_nn.value.re,
                g_nm.value.re,
                0.5 * f_mn.value.re,
                g_mm.overlap,
                g_nn.overlap,
                g_nm.overlap.min(f_mn.overlap),
            ]
        }
    };
    let min_overlap = estimates[4..].iter().copied().fold(f64::INFINITY, f64::min);
    Ok((
        ComponentSet([estimates[0], estimates[1], estimates[2], estimates[3]]),
        min_overlap,
    ))
}

/// One grid point of a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub index: usize,
    pub point: ParamPoint,
    pub reference: Result<ComponentSet>,
    /// Per scheme, in the order the scan was asked for.
    pub estimates: Vec<(Scheme, Result<ComponentSet>)>,
    pub min_overlap: f64,
}

/// Measures every grid point with each scheme. A failing point is recorded
/// in its row and the scan continues. Rows come back in grid order.
pub fn qgt_scan(
    family: &HamiltonianFamily,
    grid: &[ParamPoint],
    schemes: &[Scheme],
    mu: Axis,
    nu: Axis,
    config: &MeasurementConfig,
) -> Result<Vec<ScanRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("scan grid is empty".into()));
    }
    if mu == nu {
        return Err(Error::InvalidArgument(
            "scan needs two distinct axes".into(),
        ));
    }
    Ok(grid
        .par_iter()
        .enumerate()
        .map(|(index, &point)| scan_point(family, index, point, schemes, mu, nu, config))
        .collect())
}

fn scan_point(
    family: &HamiltonianFamily,
    index: usize,
    point: ParamPoint,
    schemes: &[Scheme],
    mu: Axis,
    nu: Axis,
    config: &MeasurementConfig,
) -> ScanRow {
    let reference = qgt_tensor(family, point, 0).map(|q| ComponentSet::from_tensor(&q, mu, nu));
    let mut min_overlap = f64::INFINITY;
    let estimates = match PointStates::prepare(family, point, &[mu, nu], config) {
        Ok(states) => schemes
            .iter()
            .map(|&scheme| {
                let result =
                    measure_components(family, &states, scheme, mu, nu).map(|(set, overlap)| {
                        min_overlap = min_overlap.min(overlap);
                        set
                    });
                (scheme, result)
            })
            .collect(),
        Err(e) => schemes.iter().map(|&s| (s, Err(e.clone()))).collect(),
    };
    ScanRow {
        index,
        point,
        reference,
        estimates,
        min_overlap,
    }
}

/// Tolerance rule for comparing a scanned component with its reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBudget {
    /// Allowed error as a fraction of the largest `|reference|` on the scan.
    pub relative: f64,
    /// Allowed absolute error for a component that vanishes on the scan.
    pub absolute_floor: f64,
    /// A component whose scan maximum is below this counts as vanishing.
    pub vanishing_threshold: f64,
}

impl Default for ErrorBudget {
    fn default() -> Self {
        Self {
            relative: 0.05,
            absolute_floor: 0.02,
            vanishing_threshold: 1e-8,
        }
    }
}

impl ErrorBudget {
    pub fn tolerance(&self, scan_max: f64) -> f64 {
        if scan_max <= self.vanishing_threshold {
            self.absolute_floor
        } else {
            self.relative * scan_max
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSummary {
    pub name: String,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    pub reference_max: f64,
    pub tolerance: f64,
    /// Points that failed to produce an estimate.
    pub failed_points: usize,
    pub pass: bool,
}

/// Per-component error summary of one scheme over a scan.
pub fn summarize(
    rows: &[ScanRow],
    scheme: Scheme,
    labels: &[String; 4],
    budget: &ErrorBudget,
) -> Vec<ComponentSummary> {
    (0..4)
        .map(|c| {
            let mut reference_max: f64 = 0.0;
            let mut max_err: f64 = 0.0;
            let mut sum = 0.0;
            let mut count = 0usize;
            let mut failed = 0usize;
            for row in rows {
                let estimate = row
                    .estimates
                    .iter()
                    .find(|(s, _)| *s == scheme)
                    .map(|(_, e)| e);
                match (&row.reference, estimate) {
                    (Ok(r), Some(Ok(e))) => {
                        reference_max = reference_max.max(r.0[c].abs());
                        let err = (e.0[c] - r.0[c]).abs();
                        max_err = max_err.max(err);
                        sum += err;
                        count += 1;
                    }
                    _ => failed += 1,
                }
            }
            let tolerance = budget.tolerance(reference_max);
            ComponentSummary {
                name: labels[c].clone(),
                max_abs_error: max_err,
                mean_abs_error: if count > 0 {
                    sum / count as f64
                } else {
                    f64::NAN
                },
                reference_max,
                tolerance,
                failed_points: failed,
                pass: failed == 0 && max_err <= tolerance,
            }
        })
        .collect()
}

/// `|Delta2 / Delta1 - 1|` below this marks a scan point as near-critical.
pub const NEAR_CRITICAL_BAND: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ChernScanRow {
    pub delta2_per_2pi: f64,
    pub ratio: f64,
    /// Per scheme, curvature trapezoid-integrated over the theta grid.
    pub measured: Vec<(Scheme, Result<f64>)>,
    pub analytic: Result<ChernResult>,
    pub near_critical: bool,
}

/// Model I copy of `template` with `Delta2 / 2pi` replaced.
pub fn with_delta2(template: &ModelSpec, delta2_per_2pi: f64) -> Result<ModelSpec> {
    match template.variant {
        ModelVariant::ModelI { omega1, delta1, .. } => Ok(ModelSpec {
            variant: ModelVariant::ModelI {
                omega1,
                delta1,
                delta2: per_two_pi(delta2_per_2pi),
            },
            q: template.q,
        }),
        _ => Err(Error::InvalidArgument(
            "Chern scans need a Model I template".into(),
        )),
    }
}

/// Measured and analytic Chern numbers over `Delta2 / 2pi` values, with
/// curvature measured at `phi = phi_fixed` on `n_theta` points.
pub fn chern_scan(
    template: &ModelSpec,
    delta2_per_2pi: &[f64],
    n_theta: usize,
    phi_fixed: f64,
    schemes: &[Scheme],
    config: &MeasurementConfig,
) -> Result<Vec<ChernScanRow>> {
    if n_theta < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 theta points, got {n_theta}"
        )));
    }
    let families = delta2_per_2pi
        .iter()
        .map(|&d2| HamiltonianFamily::new(with_delta2(template, d2)?))
        .collect::<Result<Vec<_>>>()?;
    let grid = theta_grid(n_theta);
    let step = grid[1] - grid[0];
    // (family, theta) jobs flattened so that workers stay busy
    let jobs: Vec<(usize, usize)> = (0..families.len())
        .flat_map(|f| (0..n_theta).map(move |k| (f, k)))
        .collect();
    let curvature: Vec<Vec<(Scheme, Result<f64>)>> = jobs
        .par_iter()
        .map(|&(f, k)| {
            let family = &families[f];
            let point = ParamPoint::new(grid[k], phi_fixed);
            measured_curvature(family, point, schemes, config)
        })
        .collect();
    let mut rows = Vec::with_capacity(families.len());
    for (f, family) in families.iter().enumerate() {
        let per_theta = &curvature[f * n_theta..(f + 1) * n_theta];
        let measured = schemes
            .iter()
            .enumerate()
            .map(|(s, &scheme)| {
                let values = per_theta
                    .iter()
                    .map(|row| row[s].1.clone())
                    .collect::<Result<Vec<f64>>>();
                (scheme, values.map(|v| trapezoid(&v, step)))
            })
            .collect();
        let ratio = match family.spec.variant {
            ModelVariant::ModelI { delta1, delta2, .. } => delta2 / delta1,
            _ => unreachable!("families are built from a Model I template"),
        };
        rows.push(ChernScanRow {
            delta2_per_2pi: delta2_per_2pi[f],
            ratio,
            measured,
            analytic: chern_number(family, phi_fixed, n_theta),
            near_critical: (ratio - 1.0).abs() < NEAR_CRITICAL_BAND,
        });
    }
    Ok(rows)
}

/// `F_{theta phi}` at one point by each scheme.
fn measured_curvature(
    family: &HamiltonianFamily,
    point: ParamPoint,
    schemes: &[Scheme],
    config: &MeasurementConfig,
) -> Vec<(Scheme, Result<f64>)> {
    if schemes.is_empty() {
        return Vec::new();
    }
    let (theta, phi) = (Axis::First, Axis::Second);
    let needs_theta = schemes.contains(&Scheme::EnergyFluctuation);
    let axes: &[Axis] = if needs_theta { &[theta, phi] } else { &[phi] };
    match PointStates::prepare(family, point, axes, config) {
        Ok(states) => schemes
            .iter()
            .map(|&scheme| {
                let value = match scheme {
                    // F_{theta phi} = 2 Im Q_{phi theta}
                    Scheme::EnergyFluctuation => {
                        states.scheme1(family, phi, theta).map(|q| 2.0 * q.value.im)
                    }
                    Scheme::GeneralizedForce => states
                        .scheme2_curvature(family, theta, phi)
                        .map(|q| q.value.re),
                };
                (scheme, value)
            })
            .collect(),
        Err(e) => schemes.iter().map(|&s| (s, Err(e.clone()))).collect(),
    }
}

/// Linear interpolation of the first `C = level` crossing in `(ratio, C)`
/// pairs sorted by ratio.
pub fn crossing(points: &[(f64, f64)], level: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if (y0 - level) * (y1 - level) <= 0.0 && y0 != y1 {
            Some(x0 + (level - y0) * (x1 - x0) / (y1 - y0))
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use crate::models::ModelSpec;
    use crate::reference::qgt_spectral;
    use std::f64::consts::PI;

    fn fig1() -> HamiltonianFamily {
        HamiltonianFamily::new(ModelSpec::model_i(3.0, 10.0, 15.0, 0.0)).unwrap()
    }

    fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&[c64(1.0, 0.0), c64(-1.0, 0.0)]).unwrap()
    }

    #[test]
    fn gev_trivial_cases() {
        let up = CVector::from_column_slice(&[c64(1.0, 0.0), c64(0.0, 0.0)]);
        let down = CVector::from_column_slice(&[c64(0.0, 0.0), c64(1.0, 0.0)]);
        assert_eq!(gev(&up, &up, &sigma_z()).unwrap().value, c64(1.0, 0.0));
        assert!(matches!(
            gev(&up, &down, &sigma_z()),
            Err(Error::NearOrthogonal(_))
        ));
        assert!(matches!(
            gev(&CVector::zeros(2), &up, &sigma_z()),
            Err(Error::ZeroVector(_))
        ));
        let three = CVector::zeros(3);
        assert!(matches!(
            gev(&three, &up, &sigma_z()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gev_scale_invariance_example() {
        let a = ComplexMatrix::from_rows(
            2,
            &[c64(0.3, -1.0), c64(2.0, 0.5), c64(-0.7, 0.1), c64(1.1, 0.9)],
        )
        .unwrap();
        let p1 = CVector::from_column_slice(&[c64(0.2, 0.9), c64(-0.4, 0.3)]);
        let p2 = CVector::from_column_slice(&[c64(0.5, -0.1), c64(0.8, 0.6)]);
        let base = gev(&p1, &p2, &a).unwrap().value;
        let scaled = &p2 * C64::from_polar(3.0, PI / 5.0);
        assert!((gev(&p1, &scaled, &a).unwrap().value - base).norm() <= 1e-12 * base.norm());
    }

    #[test]
    fn force_constant_examples() {
        let fam = fig1();
        let c = force_constant(&fam, ParamPoint::new(PI / 2.0, 0.0), Axis::Second).unwrap();
        assert!(c.f_mu_expect.norm() < 1e-12);

        // Hellmann-Feynman: <f_mu> = -d_mu E_0
        let p = ParamPoint::new(1.1, 0.4);
        let h = 1e-4;
        for axis in Axis::BOTH {
            let c = force_constant(&fam, p, axis).unwrap().f_mu_expect;
            let e = |s: f64| fam.eigenvalues_closed_form(p.shifted(axis, s)).unwrap().0;
            let fd = -(e(h) - e(-h)) / (2.0 * h);
            assert!((c - C64::from(fd)).norm() <= 1e-6, "{axis:?} {c} {fd}");
            assert!(c.im.abs() <= 1e-8 * c.norm().max(1.0));
        }

        // q = 1: ordinary expectation value
        let herm = HamiltonianFamily::new(ModelSpec::model_i(1.0, 10.0, 15.0, 3.0)).unwrap();
        let sys = herm.eigensystem(p).unwrap();
        let f = herm.generalized_force(p, Axis::First);
        let direct = f.sandwich(&sys.right[0], &sys.right[0]);
        let c = force_constant(&herm, p, Axis::First).unwrap().f_mu_expect;
        assert!((c - direct).norm() < 1e-12);
    }

    #[test]
    fn scheme1_tracks_diagonal_reference() {
        let fam = fig1();
        let p = ParamPoint::new(PI / 2.0, 0.0);
        let cfg = MeasurementConfig::default();
        let est = scheme1_qgt(&fam, p, Axis::First, Axis::First, &cfg).unwrap();
        let reference = qgt_spectral(&fam, p, Axis::First, Axis::First, 0)
            .unwrap()
            .value
            .re;
        assert!(
            (est.value.re - reference).abs() <= 0.05 * reference,
            "{} vs {reference}",
            est.value.re
        );
        assert_eq!(est.time, PI);
        assert_eq!(est.kind, EstimateKind::EnergyFluctuation);
    }

    #[test]
    fn scheme2_examples() {
        let fam = fig1();
        let p = ParamPoint::new(PI / 2.0, 0.0);
        let cfg = MeasurementConfig::default();
        let states = PointStates::prepare(&fam, p, &Axis::BOTH, &cfg).unwrap();
        let g = states
            .scheme2_metric(&fam, Axis::First, Axis::First)
            .unwrap();
        let reference = qgt_spectral(&fam, p, Axis::First, Axis::First, 0)
            .unwrap()
            .value
            .re;
        assert!(
            (g.value.re - reference).abs() <= 0.05 * reference,
            "{} vs {reference}",
            g.value.re
        );
        // antisymmetry: F_mu mu vanishes
        let f = states
            .scheme2_curvature(&fam, Axis::First, Axis::First)
            .unwrap();
        assert!(f.value.re.abs() <= 0.02, "{}", f.value.re);

        let herm = HamiltonianFamily::new(ModelSpec::model_i(1.0, 10.0, 10.0, 0.0)).unwrap();
        let f = scheme2_curvature(&herm, p, Axis::First, Axis::Second, &cfg).unwrap();
        assert!((f.curvature() - 0.5).abs() <= 0.025, "{}", f.curvature());
    }

    #[test]
    fn missing_axis_is_reported() {
        let fam = fig1();
        let cfg = MeasurementConfig::default();
        let states =
            PointStates::prepare(&fam, ParamPoint::new(1.0, 0.0), &[Axis::First], &cfg).unwrap();
        assert!(states.scheme1(&fam, Axis::Second, Axis::First).is_err());
    }

    #[test]
    fn single_point_scan_equals_pointwise() {
        let fam = fig1();
        let cfg = MeasurementConfig::default();
        let p = ParamPoint::new(1.0, 0.0);
        let rows = qgt_scan(
            &fam,
            &[p],
            &[Scheme::EnergyFluctuation],
            Axis::First,
            Axis::Second,
            &cfg,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        let set = rows[0].estimates[0].1.as_ref().unwrap();
        let direct = scheme1_qgt(&fam, p, Axis::Second, Axis::First, &cfg).unwrap();
        assert_eq!(set.0[2], direct.value.re);
        assert_eq!(set.0[3], direct.value.im);
        assert!(qgt_scan(
            &fam,
            &[],
            &[Scheme::EnergyFluctuation],
            Axis::First,
            Axis::Second,
            &cfg
        )
        .is_err());
    }

    #[test]
    fn budget_rule() {
        let b = ErrorBudget::default();
        assert_eq!(b.tolerance(0.0), 0.02);
        assert!((b.tolerance(2.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn crossing_interpolates() {
        let pts = [(0.8, 1.0), (0.9, 0.9), (1.1, 0.1), (1.2, 0.0)];
        assert!((crossing(&pts, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(crossing(&[(0.0, 1.0), (1.0, 0.9)], 0.5), None);
    }

    #[test]
    fn chern_scan_requires_model_i() {
        let spec = ModelSpec::model_ii(3.0, 15.0);
        let cfg = MeasurementConfig::default();
        assert!(chern_scan(&spec, &[0.0], 21, 0.0, &Scheme::BOTH, &cfg).is_err());
    }
}
