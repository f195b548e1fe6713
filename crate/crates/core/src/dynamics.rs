//! Nonunitary evolution along the quadratic parameter ramp
//!
//! `lambda(t) = lambda_tar - dl e_mu + (v^2 t^2 / 4 dl) e_mu`, `t in [0, 2 dl / v]`,
//!
//! which starts at rest and arrives at `lambda_tar` with speed `v`. States
//! are renormalised after every step; the discarded positive factor is
//! accumulated in [`EvolvedState::log_scale`]. Generalized expectation values
//! are ratios and do not see this factor.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::linalg::{inner, CVector, ComplexMatrix, C64};
use crate::models::{Axis, HamiltonianFamily, ParamPoint};

/// Quadratic ramp into `target` along `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampSchedule {
    pub target: ParamPoint,
    pub axis: Axis,
    /// Preset offset `dl > 0`; the ramp starts at `target - dl e_axis`.
    pub offset: f64,
    /// Final speed `v > 0`.
    pub speed: f64,
}

impl RampSchedule {
    pub fn new(target: ParamPoint, axis: Axis, offset: f64, speed: f64) -> Result<Self> {
        if !(offset > 0.0 && offset.is_finite()) {
            return Err(Error::InvalidSchedule("offset must be positive and finite"));
        }
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::InvalidSchedule("speed must be positive and finite"));
        }
        if !(target.0[0].is_finite() && target.0[1].is_finite()) {
            return Err(Error::InvalidSchedule("target must be finite"));
        }
        Ok(Self {
            target,
            axis,
            offset,
            speed,
        })
    }

    /// `t_f = 2 dl / v`.
    pub fn final_time(&self) -> f64 {
        2.0 * self.offset / self.speed
    }

    pub fn start(&self) -> ParamPoint {
        self.target.shifted(self.axis, -self.offset)
    }

    pub fn value(&self, t: f64) -> Result<ParamPoint> {
        let t_final = self.final_time();
        let slack = 1e-12 * t_final;
        if !(t >= -slack && t <= t_final + slack) {
            return Err(Error::TimeOutOfRange { t, t_final });
        }
        Ok(self.value_unchecked(t.clamp(0.0, t_final)))
    }

    fn value_unchecked(&self, t: f64) -> ParamPoint {
        if t >= self.final_time() {
            return self.target;
        }
        let drift = self.speed * self.speed * t * t / (4.0 * self.offset);
        self.target.shifted(self.axis, drift - self.offset)
    }

    /// `d lambda / dt = v^2 t / (2 dl)`.
    pub fn velocity(&self, t: f64) -> f64 {
        self.speed * self.speed * t / (2.0 * self.offset)
    }
}

/// A parameter path over `[0, duration]` with a direction of motion.
trait ParamPath {
    fn duration(&self) -> f64;
    fn at(&self, t: f64) -> ParamPoint;
}

impl ParamPath for RampSchedule {
    fn duration(&self) -> f64 {
        self.final_time()
    }

    fn at(&self, t: f64) -> ParamPoint {
        self.value_unchecked(t)
    }
}

/// Straight sweep `from -> to` with the smoothstep profile `3s^2 - 2s^3`,
/// at rest at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Sweep {
    from: ParamPoint,
    to: ParamPoint,
    duration: f64,
}

impl Sweep {
    fn fraction(&self, t: f64) -> f64 {
        let s = (t / self.duration).clamp(0.0, 1.0);
        s * s * (3.0 - 2.0 * s)
    }

    fn length(&self) -> f64 {
        let dx = self.to.0[0] - self.from.0[0];
        let dy = self.to.0[1] - self.from.0[1];
        dx.hypot(dy)
    }

    /// Peak parameter speed, reached at mid-sweep.
    fn peak_speed(&self) -> f64 {
        1.5 * self.length() / self.duration
    }
}

impl ParamPath for Sweep {
    fn duration(&self) -> f64 {
        self.duration
    }

    fn at(&self, t: f64) -> ParamPoint {
        let s = self.fraction(t);
        ParamPoint::new(
            self.from.0[0] + s * (self.to.0[0] - self.from.0[0]),
            self.from.0[1] + s * (self.to.0[1] - self.from.0[1]),
        )
    }
}

/// The operator generating `i d psi / dt = G psi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Generator {
    Hamiltonian,
    Adjoint,
    NegativeAdjoint,
}

impl Generator {
    pub fn matrix(self, family: &HamiltonianFamily, p: ParamPoint) -> ComplexMatrix {
        let h = family.hamiltonian(p);
        match self {
            Generator::Hamiltonian => h,
            Generator::Adjoint => h.adjoint(),
            Generator::NegativeAdjoint => -&h.adjoint(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntegratorMethod {
    /// Fourth-order Magnus step with two Gauss-Legendre nodes,
    /// `exp(h/2 (A1 + A2) + sqrt(3) h^2 / 12 [A2, A1])`.
    #[default]
    Magnus4,
    /// `exp(-i G(t + h/2) h)`, second order.
    ExponentialMidpoint,
    /// Classical fixed-step Runge-Kutta.
    RungeKutta4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: IntegratorMethod,
    /// Minimum number of equal steps over the ramp.
    pub steps: usize,
    /// Upper bound on the step length; long ramps use more than `steps`.
    pub max_dt: Option<f64>,
    /// A step whose norm change `|ln(|psi'|/|psi|)|` exceeds this is rejected.
    pub max_log_growth: f64,
    /// Record the state every `n` steps (plus both endpoints).
    pub sample_every: Option<usize>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: IntegratorMethod::Magnus4,
            steps: 4000,
            max_dt: Some(1e-3),
            max_log_growth: 5.0,
            sample_every: None,
        }
    }
}

impl IntegratorConfig {
    pub fn with_steps(self, steps: usize) -> Self {
        Self { steps, ..self }
    }

    pub fn with_method(self, method: IntegratorMethod) -> Self {
        Self { method, ..self }
    }

    /// Step count used for a path of length `duration`.
    pub fn steps_for(&self, duration: f64) -> usize {
        match self.max_dt {
            Some(dt) => self.steps.max((duration / dt).ceil() as usize),
            None => self.steps,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(dt) = self.max_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidArgument("max_dt must be positive".into()));
            }
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument(
                "integrator needs at least one step".into(),
            ));
        }
        if !(self.max_log_growth > 0.0) {
            return Err(Error::InvalidArgument(
                "max_log_growth must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub vector: CVector,
    pub log_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolvedState {
    /// Unit-norm final state.
    pub vector: CVector,
    /// `ln` of the accumulated norm factor removed during evolution.
    pub log_scale: f64,
    pub samples: Option<Vec<TrajectorySample>>,
    pub schedule: RampSchedule,
    pub generator: Generator,
}

impl EvolvedState {
    /// Writes the recorded trajectory as CSV:
    /// `t,re_0,im_0,...,log_scale`.
    pub fn write_trajectory_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let Some(samples) = &self.samples else {
            return Ok(());
        };
        let n = self.vector.len();
        write!(out, "t")?;
        for i in 0..n {
            write!(out, ",re_{i},im_{i}")?;
        }
        writeln!(out, ",log_scale")?;
        for s in samples {
            write!(out, "{:.11e}", s.t)?;
            for z in s.vector.iter() {
                write!(out, ",{:.11e},{:.11e}", z.re, z.im)?;
            }
            writeln!(out, ",{:.11e}", s.log_scale)?;
        }
        Ok(())
    }
}

/// Propagator over `[t, t + h]` for the chosen method.
fn step_matrix(
    family: &HamiltonianFamily,
    path: &impl ParamPath,
    generator: Generator,
    method: IntegratorMethod,
    t: f64,
    h: f64,
) -> Option<ComplexMatrix> {
    let minus_i = C64::new(0.0, -1.0);
    let a = |s: f64| generator.matrix(family, path.at(s)).scale(minus_i);
    match method {
        IntegratorMethod::Magnus4 => {
            let c = 3f64.sqrt() / 6.0;
            let a1 = a(t + (0.5 - c) * h);
            let a2 = a(t + (0.5 + c) * h);
            let sum = (&a1 + &a2).scale(C64::from(0.5 * h));
            let comm = a2
                .commutator(&a1)
                .scale(C64::from(3f64.sqrt() * h * h / 12.0));
            Some((&sum + &comm).exp())
        }
        IntegratorMethod::ExponentialMidpoint => Some(a(t + 0.5 * h).scale(C64::from(h)).exp()),
        IntegratorMethod::RungeKutta4 => None,
    }
}

fn rk4_step(
    family: &HamiltonianFamily,
    path: &impl ParamPath,
    generator: Generator,
    psi: &CVector,
    t: f64,
    h: f64,
) -> CVector {
    let minus_i = C64::new(0.0, -1.0);
    let f = |s: f64, y: &CVector| generator.matrix(family, path.at(s)).apply(y) * minus_i;
    let hc = C64::from(h);
    let k1 = f(t, psi);
    let k2 = f(t + 0.5 * h, &(psi + &k1 * (hc * 0.5)));
    let k3 = f(t + 0.5 * h, &(psi + &k2 * (hc * 0.5)));
    let k4 = f(t + h, &(psi + &k3 * hc));
    psi + (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * (hc / 6.0)
}

struct RawEvolution {
    vector: CVector,
    log_scale: f64,
    samples: Option<Vec<TrajectorySample>>,
}

fn evolve_along(
    initial: &CVector,
    family: &HamiltonianFamily,
    path: &impl ParamPath,
    generator: Generator,
    config: &IntegratorConfig,
) -> Result<RawEvolution> {
    config.validate()?;
    if initial.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: initial.len(),
        });
    }
    let norm0 = initial.norm();
    if !(norm0 > 0.0 && norm0.is_finite()) {
        return Err(Error::ZeroVector(0));
    }
    let mut psi = initial / C64::from(norm0);
    let mut log_scale = norm0.ln();
    let total = path.duration();
    let steps = config.steps_for(total);
    let h = total / steps as f64;
    let mut samples = config.sample_every.map(|_| {
        vec![TrajectorySample {
            t: 0.0,
            vector: psi.clone(),
            log_scale,
        }]
    });
    for k in 0..steps {
        let t = k as f64 * h;
        let next = match step_matrix(family, path, generator, config.method, t, h) {
            Some(u) => u.apply(&psi),
            None => rk4_step(family, path, generator, &psi, t, h),
        };
        let norm = next.norm();
        let growth = norm.ln();
        if !(growth.abs() <= config.max_log_growth) {
            return Err(Error::StepRejected {
                step: k,
                factor: norm,
            });
        }
        psi = next / C64::from(norm);
        log_scale += growth;
        if let (Some(samples), Some(every)) = (samples.as_mut(), config.sample_every) {
            if (k + 1) % every.max(1) == 0 || k + 1 == steps {
                samples.push(TrajectorySample {
                    t: (k + 1) as f64 * h,
                    vector: psi.clone(),
                    log_scale,
                });
            }
        }
    }
    Ok(RawEvolution {
        vector: psi,
        log_scale,
        samples,
    })
}

/// Integrates `i d psi / dt = G(lambda(t)) psi` over the whole ramp.
pub fn evolve(
    initial: &CVector,
    family: &HamiltonianFamily,
    schedule: &RampSchedule,
    generator: Generator,
    config: &IntegratorConfig,
) -> Result<EvolvedState> {
    let raw = evolve_along(initial, family, schedule, generator, config)?;
    Ok(EvolvedState {
        vector: raw.vector,
        log_scale: raw.log_scale,
        samples: raw.samples,
        schedule: *schedule,
        generator,
    })
}

/// How the ground states at the ramp start are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GroundStatePrep {
    /// Direct eigensolve at the start point.
    #[default]
    Direct,
    /// Adiabatic sweep from the ground states at `reference`, lasting
    /// `duration`.
    AdiabaticSweep {
        reference: ParamPoint,
        duration: f64,
    },
}

/// Diagnostics of an adiabatic preparation sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticReport {
    /// `max_t |v(t)| |<L_1|d_u H|R_0>| / (E_1 - E_0)` along the sweep; the
    /// adiabatic condition asks for this to be much less than one.
    pub max_ratio: f64,
    /// Projective distance of the prepared right state from `R_0`.
    pub right_distance: f64,
    /// Projective distance of the prepared left state from `L_0`.
    pub left_distance: f64,
}

/// Right and left ground states at `point`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedGround {
    pub right: CVector,
    pub left: CVector,
    pub report: Option<AdiabaticReport>,
}

pub fn prepare_ground(
    family: &HamiltonianFamily,
    point: ParamPoint,
    prep: GroundStatePrep,
    config: &IntegratorConfig,
) -> Result<PreparedGround> {
    match prep {
        GroundStatePrep::Direct => {
            let sys = family.eigensystem(point)?;
            Ok(PreparedGround {
                right: sys.right[0].clone(),
                left: sys.left[0].clone(),
                report: None,
            })
        }
        GroundStatePrep::AdiabaticSweep {
            reference,
            duration,
        } => {
            if !(duration > 0.0 && duration.is_finite()) {
                return Err(Error::InvalidArgument(
                    "sweep duration must be positive".into(),
                ));
            }
            let sweep = Sweep {
                from: reference,
                to: point,
                duration,
            };
            let start = family.eigensystem(reference)?;
            let right = evolve_along(
                &start.right[0],
                family,
                &sweep,
                Generator::Hamiltonian,
                config,
            )?;
            let left = evolve_along(&start.left[0], family, &sweep, Generator::Adjoint, config)?;
            let max_ratio = sweep_adiabaticity(family, &sweep)?;
            let target = family.eigensystem(point)?;
            let report = AdiabaticReport {
                max_ratio,
                right_distance: projective_distance(&target.right[0], &right.vector),
                left_distance: projective_distance(&target.left[0], &left.vector),
            };
            Ok(PreparedGround {
                right: right.vector,
                left: left.vector,
                report: Some(report),
            })
        }
    }
}

fn sweep_adiabaticity(family: &HamiltonianFamily, sweep: &Sweep) -> Result<f64> {
    let length = sweep.length();
    if length == 0.0 {
        return Ok(0.0);
    }
    let ux = (sweep.to.0[0] - sweep.from.0[0]) / length;
    let uy = (sweep.to.0[1] - sweep.from.0[1]) / length;
    let samples = 64;
    let mut worst: f64 = 0.0;
    for k in 0..=samples {
        let p = sweep.at(sweep.duration * k as f64 / samples as f64);
        let sys = family.eigensystem(p)?;
        let dh = &(&family.d_hamiltonian(p, Axis::First) * ux)
            + &(&family.d_hamiltonian(p, Axis::Second) * uy);
        let coupling = dh.sandwich(&sys.left[1], &sys.right[0]).norm();
        let gap = sys.energies[1] - sys.energies[0];
        worst = worst.max(sweep.peak_speed() * coupling / gap);
    }
    Ok(worst)
}

/// `psi` (right ground state under `H`), `psi'` (left ground state under
/// `H^dagger`) and `psi''` (left ground state under `-H^dagger`), all driven
/// by the same ramp.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTriple {
    pub right: EvolvedState,
    pub adjoint: EvolvedState,
    pub negative_adjoint: EvolvedState,
    pub report: Option<AdiabaticReport>,
}

pub fn prepare_triple(
    family: &HamiltonianFamily,
    target: ParamPoint,
    axis: Axis,
    offset: f64,
    speed: f64,
    config: &IntegratorConfig,
    prep: GroundStatePrep,
) -> Result<StateTriple> {
    let schedule = RampSchedule::new(target, axis, offset, speed)?;
    let ground = prepare_ground(family, schedule.start(), prep, config)?;
    Ok(StateTriple {
        right: evolve(
            &ground.right,
            family,
            &schedule,
            Generator::Hamiltonian,
            config,
        )?,
        adjoint: evolve(&ground.left, family, &schedule, Generator::Adjoint, config)?,
        negative_adjoint: evolve(
            &ground.left,
            family,
            &schedule,
            Generator::NegativeAdjoint,
            config,
        )?,
        report: ground.report,
    })
}

/// First-order adiabatic perturbation theory along a ramp.
#[derive(Debug, Clone, PartialEq)]
pub struct AptExpansion {
    pub t: f64,
    /// `a_m(t)` for bands `m = 1, 2, ...` (index `m - 1`).
    pub coefficients: Vec<C64>,
    /// `Theta_n(t) = int_0^t E_n dt'`.
    pub dynamical_phases: Vec<f64>,
    /// `Phi_n(t) = -i int_0^t <L_n|d_t R_n> dt'` in the eta-normalised gauge.
    pub geometric_phases: Vec<f64>,
    /// Largest imaginary part met while integrating the phases.
    pub phase_imag_residual: f64,
    /// `R_0 + sum_m a_m R_m` at `lambda(t)`.
    pub state: CVector,
}

/// Number of Simpson intervals used for the phase integrals.
const APT_QUADRATURE_INTERVALS: usize = 200;
/// Step of the five-point stencil for the Berry connection.
const CONNECTION_STEP: f64 = 1e-3;

pub fn apt_coefficients(
    family: &HamiltonianFamily,
    schedule: &RampSchedule,
    t: f64,
) -> Result<AptExpansion> {
    let p = schedule.value(t)?;
    let v = schedule.velocity(t);
    let sys = family.eigensystem(p)?;
    let dh = family.d_hamiltonian(p, schedule.axis);
    let n = sys.dim();
    let mut state = sys.right[0].clone();
    let mut coefficients = Vec::with_capacity(n - 1);
    for m in 1..n {
        let de = sys.energies[m] - sys.energies[0];
        // <L_m|d R_0> = <L_m|dH|R_0> / (E_0 - E_m)
        let overlap = dh.sandwich(&sys.left[m], &sys.right[0]) / -de;
        let a = C64::new(0.0, v) * overlap / de;
        state += &sys.right[m] * a;
        coefficients.push(a);
    }

    let intervals = APT_QUADRATURE_INTERVALS;
    let h = t / intervals as f64;
    let mut theta = vec![0.0; n];
    let mut phi = vec![C64::new(0.0, 0.0); n];
    if t > 0.0 {
        for k in 0..=intervals {
            let w = if k == 0 || k == intervals {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            } * h
                / 3.0;
            let tk = k as f64 * h;
            let pk = schedule.value(tk)?;
            let sys_k = family.eigensystem(pk)?;
            let vk = schedule.velocity(tk);
            for band in 0..n {
                theta[band] += w * sys_k.energies[band];
                if vk != 0.0 {
                    let conn = eta_connection(family, pk, schedule.axis, band)?;
                    phi[band] += C64::new(0.0, -1.0) * conn * (w * vk);
                }
            }
        }
    }
    let phase_imag_residual = phi.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if phase_imag_residual > 1e-10 {
        return Err(Error::ComplexSpectrum {
            imag: phase_imag_residual,
            tol: 1e-10,
        });
    }
    Ok(AptExpansion {
        t,
        coefficients,
        dynamical_phases: theta,
        geometric_phases: phi.iter().map(|z| z.re).collect(),
        phase_imag_residual,
        state,
    })
}

/// `<L_n|d R_n>` with `R_n` gauge fixed at its largest component and scaled
/// to `R^dagger eta R = 1`, `L_n = eta R_n`.
fn eta_connection(
    family: &HamiltonianFamily,
    p: ParamPoint,
    axis: Axis,
    band: usize,
) -> Result<C64> {
    let eta = family.eta();
    let center = family.eigensystem(p)?;
    let r0 = &center.right[band];
    let mut pivot = 0;
    for i in 1..r0.len() {
        if r0[i].norm() > r0[pivot].norm() {
            pivot = i;
        }
    }
    let normalized = |q: ParamPoint| -> Result<CVector> {
        let sys = family.eigensystem(q)?;
        let r = &sys.right[band];
        let phase = r[pivot].conj() / r[pivot].norm();
        let r = r * phase;
        let weight = eta.sandwich(&r, &r).re;
        if !(weight > 0.0) {
            return Err(Error::InvalidEta("eigenvector has non-positive eta norm"));
        }
        Ok(r / C64::from(weight.sqrt()))
    };
    let h = CONNECTION_STEP;
    let at = |k: f64| normalized(p.shifted(axis, k * h));
    let derivative =
        (at(-2.0)? - at(2.0)? + (at(1.0)? - at(-1.0)?) * C64::from(8.0)) / C64::from(12.0 * h);
    let r = normalized(p)?;
    Ok(eta.sandwich(&r, &derivative))
}

/// Phase-insensitive distance `min_chi || b/|b| - e^{i chi} a/|a| ||`.
pub fn projective_distance(a: &CVector, b: &CVector) -> f64 {
    let a = a / C64::from(a.norm());
    let b = b / C64::from(b.norm());
    let overlap = inner(&a, &b);
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    (b - a * phase).norm()
}
