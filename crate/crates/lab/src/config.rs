//! Experiment configuration.
//!
//! A TOML document with the blocks `model`, `scheme`, `scan`, `point`,
//! `dynamics`, `chern`, `circuit`, `budget` and `output`. Only `model` is
//! required; every other block falls back to the defaults of the subcommand.
//! Unknown keys are rejected. Any number may be written as an arithmetic
//! expression string such as `"pi/2"`.

use std::fmt;

use biqgt_core::dynamics::{GroundStatePrep, IntegratorConfig, IntegratorMethod};
use biqgt_core::expr::Expr;
use biqgt_core::measurement::{ErrorBudget, MeasurementConfig, Scheme};
use biqgt_core::models::CustomBloch;
use biqgt_core::{Axis, ModelSpec, ParamPoint};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// A literal number or an expression in `pi`, `tau`, `e` and the usual
/// elementary functions.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Value(f64),
    Expr(String),
}

impl Number {
    pub fn eval(&self, key: &str) -> Result<f64, ConfigError> {
        let value = match self {
            Number::Value(v) => *v,
            Number::Expr(src) => {
                Expr::constant(src).map_err(|e| invalid(format!("`{key}`: {e}")))?
            }
        };
        if !value.is_finite() {
            return Err(invalid(format!("`{key}` is not finite")));
        }
        Ok(value)
    }
}

impl From<f64> for Number {
    fn from(v: f64) -> Self {
        Number::Value(v)
    }
}

impl From<&str> for Number {
    fn from(s: &str) -> Self {
        Number::Expr(s.to_string())
    }
}

/// Model block; frequencies are given per `2 pi`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    ModelI {
        q: Number,
        omega1: Number,
        delta1: Number,
        delta2: Number,
    },
    ModelIi {
        q: Number,
        b: Number,
    },
    Custom {
        q: Number,
        parameters: [String; 2],
        dx: String,
        dy: String,
        dz: String,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec, ConfigError> {
        let spec = match self {
            ModelConfig::ModelI {
                q,
                omega1,
                delta1,
                delta2,
            } => ModelSpec::model_i(
                q.eval("model.q")?,
                omega1.eval("model.omega1")?,
                delta1.eval("model.delta1")?,
                delta2.eval("model.delta2")?,
            ),
            ModelConfig::ModelIi { q, b } => {
                ModelSpec::model_ii(q.eval("model.q")?, b.eval("model.b")?)
            }
            ModelConfig::Custom {
                q,
                parameters,
                dx,
                dy,
                dz,
            } => {
                let names = [parameters[0].as_str(), parameters[1].as_str()];
                let bloch = CustomBloch::parse(names, dx, dy, dz)
                    .map_err(|e| invalid(format!("model: {e}")))?;
                ModelSpec::custom(q.eval("model.q")?, bloch)
            }
        };
        if !(spec.q > 0.0) {
            return Err(invalid("`model.q` must be positive"));
        }
        Ok(spec)
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            ModelConfig::ModelI { .. } => "model-i",
            ModelConfig::ModelIi { .. } => "model-ii",
            ModelConfig::Custom { .. } => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Scheme1,
    Scheme2,
    #[default]
    Both,
    /// Reference values only.
    Analytic,
    /// Both schemes, with every measured pair also evaluated by the circuit.
    CircuitCheck,
}

impl SchemeKind {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "scheme1" => Ok(Self::Scheme1),
            "scheme2" => Ok(Self::Scheme2),
            "both" => Ok(Self::Both),
            "analytic" => Ok(Self::Analytic),
            "circuit-check" => Ok(Self::CircuitCheck),
            _ => Err(invalid(format!(
                "unknown scheme `{s}` (expected scheme1, scheme2, both, analytic or circuit-check)"
            ))),
        }
    }

    pub fn schemes(self) -> Vec<Scheme> {
        match self {
            Self::Scheme1 => vec![Scheme::EnergyFluctuation],
            Self::Scheme2 => vec![Scheme::GeneralizedForce],
            Self::Both | Self::CircuitCheck => Scheme::BOTH.to_vec(),
            Self::Analytic => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default)]
    pub kind: SchemeKind,
}

/// A one-dimensional grid along `axis` with the other parameter held at
/// `fixed`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub axis: String,
    pub start: Number,
    pub stop: Number,
    pub points: usize,
    pub fixed: Number,
    /// Ordered component pair; defaults to the two parameters in order.
    #[serde(default)]
    pub mu: Option<String>,
    #[serde(default)]
    pub nu: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub points: Vec<ParamPoint>,
    pub mu: Axis,
    pub nu: Axis,
}

impl ScanConfig {
    pub fn build(&self, spec: &ModelSpec) -> Result<Grid, ConfigError> {
        let axis = axis(spec, &self.axis, "scan.axis")?;
        if self.points == 0 {
            return Err(invalid("`scan.points` must be at least 1 (empty grid)"));
        }
        let start = self.start.eval("scan.start")?;
        let stop = self.stop.eval("scan.stop")?;
        let fixed = self.fixed.eval("scan.fixed")?;
        let n = self.points;
        let points = (0..n)
            .map(|k| {
                let t = if n == 1 {
                    start
                } else {
                    start + (stop - start) * k as f64 / (n - 1) as f64
                };
                ParamPoint::new(0.0, 0.0)
                    .with(axis, t)
                    .with(axis.other(), fixed)
            })
            .collect();
        let names = spec.parameter_names();
        let mu = axis_or(spec, self.mu.as_deref(), names[0], "scan.mu")?;
        let nu = axis_or(spec, self.nu.as_deref(), names[1], "scan.nu")?;
        if mu == nu {
            return Err(invalid("`scan.mu` and `scan.nu` must differ"));
        }
        Ok(Grid { points, mu, nu })
    }
}

fn axis(spec: &ModelSpec, name: &str, key: &str) -> Result<Axis, ConfigError> {
    spec.axis_by_name(name).map_err(|_| {
        let names = spec.parameter_names();
        invalid(format!(
            "`{key}`: unknown parameter `{name}` (expected `{}` or `{}`)",
            names[0], names[1]
        ))
    })
}

fn axis_or(
    spec: &ModelSpec,
    name: Option<&str>,
    default: &str,
    key: &str,
) -> Result<Axis, ConfigError> {
    axis(spec, name.unwrap_or(default), key)
}

/// Single target point, in parameter order.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub values: [Number; 2],
}

impl PointConfig {
    pub fn build(&self) -> Result<ParamPoint, ConfigError> {
        Ok(ParamPoint::new(
            self.values[0].eval("point.values[0]")?,
            self.values[1].eval("point.values[1]")?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    #[default]
    Magnus4,
    Midpoint,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PrepMode {
    #[default]
    Direct,
    Adiabatic,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(default = "default_dlam")]
    pub dlam: Number,
    #[serde(default = "default_v")]
    pub v: Number,
    #[serde(default)]
    pub method: MethodName,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Largest allowed step; `0` disables the cap.
    #[serde(default = "default_max_dt")]
    pub max_dt: Number,
    #[serde(default = "default_max_log_growth")]
    pub max_log_growth: Number,
    #[serde(default)]
    pub prep: PrepMode,
    #[serde(default)]
    pub prep_reference: Option<[Number; 2]>,
    #[serde(default = "default_prep_duration")]
    pub prep_duration: Number,
}

fn default_dlam() -> Number {
    Number::Expr("pi/2".into())
}

fn default_v() -> Number {
    Number::Value(1.0)
}

fn default_steps() -> usize {
    IntegratorConfig::default().steps
}

fn default_max_dt() -> Number {
    Number::Value(IntegratorConfig::default().max_dt.unwrap_or(0.0))
}

fn default_max_log_growth() -> Number {
    Number::Value(IntegratorConfig::default().max_log_growth)
}

fn default_prep_duration() -> Number {
    Number::Value(20.0)
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            dlam: default_dlam(),
            v: default_v(),
            method: MethodName::default(),
            steps: default_steps(),
            max_dt: default_max_dt(),
            max_log_growth: default_max_log_growth(),
            prep: PrepMode::default(),
            prep_reference: None,
            prep_duration: default_prep_duration(),
        }
    }
}

impl DynamicsConfig {
    pub fn build(&self) -> Result<MeasurementConfig, ConfigError> {
        let offset = self.dlam.eval("dynamics.dlam")?;
        let speed = self.v.eval("dynamics.v")?;
        if !(offset > 0.0) {
            return Err(invalid("`dynamics.dlam` must be positive"));
        }
        if !(speed > 0.0) {
            return Err(invalid("`dynamics.v` must be positive"));
        }
        if self.steps == 0 {
            return Err(invalid("`dynamics.steps` must be positive"));
        }
        let max_dt = self.max_dt.eval("dynamics.max_dt")?;
        if max_dt < 0.0 {
            return Err(invalid("`dynamics.max_dt` must not be negative"));
        }
        let max_log_growth = self.max_log_growth.eval("dynamics.max_log_growth")?;
        if !(max_log_growth > 0.0) {
            return Err(invalid("`dynamics.max_log_growth` must be positive"));
        }
        let method = match self.method {
            MethodName::Magnus4 => IntegratorMethod::Magnus4,
            MethodName::Midpoint => IntegratorMethod::ExponentialMidpoint,
            MethodName::Rk4 => IntegratorMethod::RungeKutta4,
        };
        let prep = match self.prep {
            PrepMode::Direct => GroundStatePrep::Direct,
            PrepMode::Adiabatic => {
                let reference = match &self.prep_reference {
                    Some([a, b]) => ParamPoint::new(
                        a.eval("dynamics.prep_reference[0]")?,
                        b.eval("dynamics.prep_reference[1]")?,
                    ),
                    None => ParamPoint::new(0.0, 0.0),
                };
                let duration = self.prep_duration.eval("dynamics.prep_duration")?;
                if !(duration > 0.0) {
                    return Err(invalid("`dynamics.prep_duration` must be positive"));
                }
                GroundStatePrep::AdiabaticSweep {
                    reference,
                    duration,
                }
            }
        };
        Ok(MeasurementConfig {
            offset,
            speed,
            integrator: IntegratorConfig {
                method,
                steps: self.steps,
                max_dt: if max_dt > 0.0 { Some(max_dt) } else { None },
                max_log_growth,
                sample_every: None,
            },
            prep,
        })
    }
}

/// `Delta2 / 2pi` values and theta sampling for Chern scans.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChernConfig {
    pub delta2_start: Number,
    pub delta2_stop: Number,
    pub delta2_points: usize,
    #[serde(default = "default_ntheta")]
    pub ntheta: usize,
    #[serde(default = "default_zero")]
    pub phi: Number,
}

fn default_ntheta() -> usize {
    21
}

fn default_zero() -> Number {
    Number::Value(0.0)
}

impl Default for ChernConfig {
    fn default() -> Self {
        Self {
            delta2_start: Number::Value(0.0),
            delta2_stop: Number::Value(30.0),
            delta2_points: 16,
            ntheta: default_ntheta(),
            phi: default_zero(),
        }
    }
}

impl ChernConfig {
    pub fn delta2_values(&self) -> Result<Vec<f64>, ConfigError> {
        let a = self.delta2_start.eval("chern.delta2_start")?;
        let b = self.delta2_stop.eval("chern.delta2_stop")?;
        let n = self.delta2_points;
        match n {
            0 => Err(invalid(
                "`chern.delta2_points` must be at least 1 (empty grid)",
            )),
            1 => Ok(vec![a]),
            _ => Ok((0..n)
                .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
                .collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    #[serde(default = "default_instances")]
    pub random_instances: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Shot-sampling mode; reports statistics without a verdict.
    #[serde(default)]
    pub shots: Option<usize>,
    /// Adds an orthogonal pair that must be reported and excluded.
    #[serde(default)]
    pub inject_orthogonal: bool,
    #[serde(default = "default_true")]
    pub benchmark_pairs: bool,
}

fn default_instances() -> usize {
    100
}

fn default_seed() -> u64 {
    2024
}

fn default_true() -> bool {
    true
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self {
            random_instances: default_instances(),
            seed: default_seed(),
            shots: None,
            inject_orthogonal: false,
            benchmark_pairs: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(default = "default_relative")]
    pub relative: f64,
    #[serde(default = "default_floor")]
    pub absolute_floor: f64,
}

fn default_relative() -> f64 {
    ErrorBudget::default().relative
}

fn default_floor() -> f64 {
    ErrorBudget::default().absolute_floor
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            relative: default_relative(),
            absolute_floor: default_floor(),
        }
    }
}

impl BudgetConfig {
    pub fn build(&self) -> ErrorBudget {
        ErrorBudget {
            relative: self.relative,
            absolute_floor: self.absolute_floor,
            ..ErrorBudget::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// Writes the state trajectories of single-point runs.
    #[serde(default)]
    pub trajectories: bool,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            trajectories: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub point: Option<PointConfig>,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub chern: Option<ChernConfig>,
    #[serde(default)]
    pub circuit: CircuitConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| invalid(format!("configuration: {e}")))
    }

    fn with_model(model: ModelConfig) -> Self {
        Self {
            model,
            scheme: SchemeConfig::default(),
            scan: None,
            point: None,
            dynamics: DynamicsConfig::default(),
            chern: None,
            circuit: CircuitConfig::default(),
            budget: BudgetConfig::default(),
            output: OutputConfig::default(),
        }
    }

    /// Model I with `q = 3`, `Omega1/2pi = 10`, `Delta1/2pi = 15`,
    /// `Delta2 = 0`, scanned over 21 theta points at `phi = 0`.
    pub fn fig1_default() -> Self {
        let mut c = Self::with_model(ModelConfig::ModelI {
            q: 3.0.into(),
            omega1: 10.0.into(),
            delta1: 15.0.into(),
            delta2: 0.0.into(),
        });
        c.scan = Some(ScanConfig {
            axis: "theta".into(),
            start: 0.0.into(),
            stop: "pi".into(),
            points: 21,
            fixed: 0.0.into(),
            mu: None,
            nu: None,
        });
        c
    }

    /// The `fig1` model with `Delta2 / 2pi` over `[0, 30]` in 16 points.
    pub fn fig2_default() -> Self {
        let mut c = Self::fig1_default();
        c.scan = None;
        c.chern = Some(ChernConfig::default());
        c
    }

    /// Model II with `q = 3`, `B/2pi = 15`, scanned over 21 x points in
    /// `[-2pi, 2pi]` at `y = pi/2`.
    pub fn fig3_default() -> Self {
        let mut c = Self::with_model(ModelConfig::ModelIi {
            q: 3.0.into(),
            b: 15.0.into(),
        });
        c.scan = Some(ScanConfig {
            axis: "x".into(),
            start: "-2*pi".into(),
            stop: "2*pi".into(),
            points: 21,
            fixed: "pi/2".into(),
            mu: None,
            nu: None,
        });
        c
    }

    /// The `fig1` model at `theta = pi/3`, `phi = 0`.
    pub fn qgt_default() -> Self {
        let mut c = Self::fig1_default();
        c.scan = None;
        c.point = Some(PointConfig {
            values: ["pi/3".into(), 0.0.into()],
        });
        c
    }
}
