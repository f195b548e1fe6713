//! q-deformed two-band Hamiltonians `H(lambda) = d(lambda) . sigma~`.
//!
//! All frequencies are stored as angular frequencies (`hbar = 1`); use
//! [`per_two_pi`] to convert values quoted as `Omega/2pi`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::{c64, eig_biorthogonal, BiorthogonalEigensystem, ComplexMatrix};

/// Converts a frequency quoted in units of `2 pi` into an angular frequency.
pub fn per_two_pi(value: f64) -> f64 {
    TAU * value
}

/// One of the two coordinates of the parameter manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    First,
    Second,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::First, Axis::Second];

    pub fn index(self) -> usize {
        match self {
            Axis::First => 0,
            Axis::Second => 1,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Axis::First),
            1 => Ok(Axis::Second),
            _ => Err(Error::UnknownDirection(i.to_string())),
        }
    }

    pub fn other(self) -> Self {
        match self {
            Axis::First => Axis::Second,
            Axis::Second => Axis::First,
        }
    }
}

/// A point `(lambda_1, lambda_2)` on the parameter manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamPoint(pub [f64; 2]);

impl ParamPoint {
    pub fn new(first: f64, second: f64) -> Self {
        Self([first, second])
    }

    pub fn get(&self, axis: Axis) -> f64 {
        self.0[axis.index()]
    }

    pub fn with(mut self, axis: Axis, value: f64) -> Self {
        self.0[axis.index()] = value;
        self
    }

    pub fn shifted(self, axis: Axis, delta: f64) -> Self {
        let v = self.get(axis);
        self.with(axis, v + delta)
    }
}

/// Real Bloch vector `(d_x, d_y, d_z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    fn scaled(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

/// q-deformed Pauli matrices together with the metric `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct QDeformedBasis {
    pub q: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub sigma_x: ComplexMatrix,
    pub sigma_y: ComplexMatrix,
    pub sigma_z: ComplexMatrix,
    pub eta: ComplexMatrix,
}

impl QDeformedBasis {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::NonPositiveQ(q));
        }
        let a = ((1.0 + q * q) / 2.0).sqrt();
        let b = ((1.0 + 1.0 / (q * q)) / 2.0).sqrt();
        let c = (1.0 + q * q) / (2.0 * q);
        let d = (1.0 - q * q) / (2.0 * q);
        let zero = c64(0.0, 0.0);
        let sigma_x = ComplexMatrix::from_rows(2, &[zero, c64(a, 0.0), c64(b, 0.0), zero])?;
        let sigma_y = ComplexMatrix::from_rows(2, &[zero, c64(0.0, -a), c64(0.0, b), zero])?;
        let sigma_z = ComplexMatrix::from_diagonal(&[c64(1.0 / q, 0.0), c64(-q, 0.0)])?;
        let eta = ComplexMatrix::from_diagonal(&[c64(q.powf(-0.5), 0.0), c64(q.sqrt(), 0.0)])?;
        Ok(Self {
            q,
            a,
            b,
            c,
            d,
            sigma_x,
            sigma_y,
            sigma_z,
            eta,
        })
    }

    /// `d . sigma~`.
    pub fn combine(&self, d: BlochVector) -> ComplexMatrix {
        let x = &self.sigma_x * d.x;
        let y = &self.sigma_y * d.y;
        let z = &self.sigma_z * d.z;
        &(&x + &y) + &z
    }

    /// Closed-form eigenvalues `(E_-, E_+)` of `d . sigma~`.
    pub fn eigenvalues(&self, d: BlochVector) -> Result<(f64, f64)> {
        let radicand = self.a * self.b * (d.x * d.x + d.y * d.y) + self.c * self.c * d.z * d.z;
        if !(radicand >= 0.0) {
            return Err(Error::ComplexEigenvalues(radicand));
        }
        let root = radicand.sqrt();
        let shift = self.d * d.z;
        Ok((shift - root, shift + root))
    }
}

/// Bloch vector given by three expressions in two named parameters.
/// Expressions are read in `per 2 pi` units; derivatives are taken by a
/// fourth-order central difference.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomBloch {
    pub names: [String; 2],
    pub components: [Expr; 3],
}

impl CustomBloch {
    pub fn parse(names: [&str; 2], dx: &str, dy: &str, dz: &str) -> Result<Self> {
        if names[0] == names[1] {
            return Err(Error::InvalidArgument(format!(
                "parameter names must differ, both are `{}`",
                names[0]
            )));
        }
        let vars = [names[0], names[1]];
        Ok(Self {
            names: [names[0].to_string(), names[1].to_string()],
            components: [
                Expr::parse(dx, &vars)?,
                Expr::parse(dy, &vars)?,
                Expr::parse(dz, &vars)?,
            ],
        })
    }

    fn eval(&self, p: ParamPoint) -> BlochVector {
        let v = p.0;
        BlochVector::new(
            per_two_pi(self.components[0].eval(&v)),
            per_two_pi(self.components[1].eval(&v)),
            per_two_pi(self.components[2].eval(&v)),
        )
    }
}

/// Step of the fourth-order difference used for custom models.
const CUSTOM_FD_STEP: f64 = 1e-3;

/// The Bloch-vector family.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelVariant {
    /// `d = (Omega1 sin t cos p, Omega1 sin t sin p, Delta1 cos t + Delta2) / 2`
    /// over `(theta, phi)`.
    ModelI {
        omega1: f64,
        delta1: f64,
        delta2: f64,
    },
    /// `d = B (sin(x+y) cos(xy), sin(x+y) sin(xy), cos(x+y))` over `(x, y)`.
    ModelII {
        b: f64,
    },
    Custom(Arc<CustomBloch>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub variant: ModelVariant,
    pub q: f64,
}

impl ModelSpec {
    /// Model I with frequencies quoted per `2 pi`.
    pub fn model_i(q: f64, omega1_per_2pi: f64, delta1_per_2pi: f64, delta2_per_2pi: f64) -> Self {
        Self {
            variant: ModelVariant::ModelI {
                omega1: per_two_pi(omega1_per_2pi),
                delta1: per_two_pi(delta1_per_2pi),
                delta2: per_two_pi(delta2_per_2pi),
            },
            q,
        }
    }

    /// Model II with `B` quoted per `2 pi`.
    pub fn model_ii(q: f64, b_per_2pi: f64) -> Self {
        Self {
            variant: ModelVariant::ModelII {
                b: per_two_pi(b_per_2pi),
            },
            q,
        }
    }

    pub fn custom(q: f64, bloch: CustomBloch) -> Self {
        Self {
            variant: ModelVariant::Custom(Arc::new(bloch)),
            q,
        }
    }

    pub fn parameter_names(&self) -> [&str; 2] {
        match &self.variant {
            ModelVariant::ModelI { .. } => ["theta", "phi"],
            ModelVariant::ModelII { .. } => ["x", "y"],
            ModelVariant::Custom(c) => [&c.names[0], &c.names[1]],
        }
    }

    pub fn axis_by_name(&self, name: &str) -> Result<Axis> {
        let names = self.parameter_names();
        names
            .iter()
            .position(|n| *n == name)
            .map(|i| Axis::BOTH[i])
            .ok_or_else(|| Error::UnknownDirection(name.to_string()))
    }

    pub fn bloch(&self, p: ParamPoint) -> BlochVector {
        let [l1, l2] = p.0;
        match &self.variant {
            ModelVariant::ModelI {
                omega1,
                delta1,
                delta2,
            } => BlochVector::new(
                0.5 * omega1 * l1.sin() * l2.cos(),
                0.5 * omega1 * l1.sin() * l2.sin(),
                0.5 * (delta1 * l1.cos() + delta2),
            ),
            ModelVariant::ModelII { b } => {
                let (s, m) = (l1 + l2, l1 * l2);
                BlochVector::new(b * s.sin() * m.cos(), b * s.sin() * m.sin(), b * s.cos())
            }
            ModelVariant::Custom(c) => c.eval(p),
        }
    }

    /// `d_mu d` at `p`.
    pub fn bloch_derivative(&self, p: ParamPoint, axis: Axis) -> BlochVector {
        let [l1, l2] = p.0;
        match &self.variant {
            ModelVariant::ModelI { omega1, delta1, .. } => match axis {
                Axis::First => BlochVector::new(
                    0.5 * omega1 * l1.cos() * l2.cos(),
                    0.5 * omega1 * l1.cos() * l2.sin(),
                    -0.5 * delta1 * l1.sin(),
                ),
                Axis::Second => BlochVector::new(
                    -0.5 * omega1 * l1.sin() * l2.sin(),
                    0.5 * omega1 * l1.sin() * l2.cos(),
                    0.0,
                ),
            },
            ModelVariant::ModelII { b } => {
                // s = x + y and m = x y: d_x m = y, d_y m = x
                let (s, m) = (l1 + l2, l1 * l2);
                let dm = match axis {
                    Axis::First => l2,
                    Axis::Second => l1,
                };
                BlochVector::new(
                    b * (s.cos() * m.cos() - s.sin() * m.sin() * dm),
                    b * (s.cos() * m.sin() + s.sin() * m.cos() * dm),
                    -b * s.sin(),
                )
            }
            ModelVariant::Custom(c) => {
                let h = CUSTOM_FD_STEP;
                let at = |k: f64| c.eval(p.shifted(axis, k * h));
                let d1 = at(1.0).sub(at(-1.0)).scaled(8.0);
                let d2 = at(2.0).sub(at(-2.0));
                d1.sub(d2).scaled(1.0 / (12.0 * h))
            }
        }
    }
}

/// `x / 2pi` rounded to twelve significant digits.
fn per_turn(x: f64) -> f64 {
    let v = x / TAU;
    format!("{v:.11e}").parse().unwrap_or(v)
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.variant {
            ModelVariant::ModelI {
                omega1,
                delta1,
                delta2,
            } => write!(
                f,
                "model-i(q={}, omega1/2pi={}, delta1/2pi={}, delta2/2pi={})",
                self.q,
                per_turn(*omega1),
                per_turn(*delta1),
                per_turn(*delta2)
            ),
            ModelVariant::ModelII { b } => {
                write!(f, "model-ii(q={}, b/2pi={})", self.q, per_turn(*b))
            }
            ModelVariant::Custom(c) => write!(
                f,
                "custom(q={}, d=({}, {}, {}))",
                self.q, c.components[0], c.components[1], c.components[2]
            ),
        }
    }
}

/// A model together with its q-deformed basis: every operator the
/// measurement schemes need at a parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianFamily {
    pub spec: ModelSpec,
    pub basis: QDeformedBasis,
}

impl HamiltonianFamily {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let basis = QDeformedBasis::new(spec.q)?;
        Ok(Self { spec, basis })
    }

    pub fn bloch(&self, p: ParamPoint) -> BlochVector {
        self.spec.bloch(p)
    }

    pub fn hamiltonian(&self, p: ParamPoint) -> ComplexMatrix {
        self.basis.combine(self.spec.bloch(p))
    }

    /// `d_mu H = (d_mu d) . sigma~`.
    pub fn d_hamiltonian(&self, p: ParamPoint, axis: Axis) -> ComplexMatrix {
        self.basis.combine(self.spec.bloch_derivative(p, axis))
    }

    /// Generalized force `f_mu = -d_mu H`.
    pub fn generalized_force(&self, p: ParamPoint, axis: Axis) -> ComplexMatrix {
        -&self.d_hamiltonian(p, axis)
    }

    pub fn eta(&self) -> &ComplexMatrix {
        &self.basis.eta
    }

    pub fn eigenvalues_closed_form(&self, p: ParamPoint) -> Result<(f64, f64)> {
        self.basis.eigenvalues(self.spec.bloch(p))
    }

    /// Biorthogonal eigensystem of `H(p)`; rejects non-finite Bloch vectors.
    pub fn eigensystem(&self, p: ParamPoint) -> Result<BiorthogonalEigensystem> {
        let d = self.spec.bloch(p);
        if !d.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Bloch vector is not finite at ({}, {})",
                p.0[0], p.0[1]
            )));
        }
        eig_biorthogonal(&self.basis.combine(d), None)
    }

    pub fn ground_energy(&self, p: ParamPoint) -> Result<f64> {
        Ok(self.eigenvalues_closed_form(p)?.0)
    }

    /// Central difference of `H` along `axis`, for oracle checks.
    pub fn d_hamiltonian_fd(&self, p: ParamPoint, axis: Axis, h: f64) -> ComplexMatrix {
        let plus = self.spec.bloch(p.shifted(axis, h));
        let minus = self.spec.bloch(p.shifted(axis, -h));
        self.basis
            .combine(plus.add(minus.scaled(-1.0)).scaled(0.5 / h))
    }
}
