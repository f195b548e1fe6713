//! Experiment runners behind the subcommands.

use std::fmt;
use std::io;
use std::path::PathBuf;

use biqgt_core::circuit::{gev_via_circuit, gev_via_circuit_sampled};
use biqgt_core::dynamics::Generator;
use biqgt_core::linalg::c64;
use biqgt_core::measurement::{
    chern_scan, crossing, energy_fluctuation_operator, force_constant, gev, measure_components,
    qgt_scan, summarize, ChernScanRow, ComponentSet, ComponentSummary, ErrorBudget,
    MeasurementConfig, PointStates, ScanRow, Scheme,
};
use biqgt_core::models::ModelVariant;
use biqgt_core::reference::{qgt_fd_richardson, qgt_tensor};
use biqgt_core::{Axis, CVector, ComplexMatrix, HamiltonianFamily, ModelSpec, ParamPoint, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, ExperimentConfig, Number, SchemeKind};
use crate::output::{fmt_f64, text_cell, OutputDir, Table};

/// Largest circuit/direct deviation accepted by the equivalence check.
pub const CIRCUIT_TOL: f64 = 1e-10;
/// Allowed `|C - 1|` or `|C|` on the quantized plateaus.
pub const CHERN_TOL: f64 = 0.1;
/// Allowed distance of the `C = 1/2` crossing from `Delta2/Delta1 = 1`.
pub const CROSSING_TOL: f64 = 0.1;

#[derive(Debug)]
pub enum LabError {
    Config(ConfigError),
    Numerical(biqgt_core::Error),
    Io(io::Error),
}

impl fmt::Display for LabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabError::Config(e) => write!(f, "config error: {e}"),
            LabError::Numerical(e) => write!(f, "numerical error: {e}"),
            LabError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for LabError {}

impl From<ConfigError> for LabError {
    fn from(e: ConfigError) -> Self {
        LabError::Config(e)
    }
}

impl From<biqgt_core::Error> for LabError {
    fn from(e: biqgt_core::Error) -> Self {
        LabError::Numerical(e)
    }
}

impl From<io::Error> for LabError {
    fn from(e: io::Error) -> Self {
        LabError::Io(e)
    }
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Numerical(_) | LabError::Io(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    BudgetViolation,
    HardError,
    /// Statistics only, no pass/fail.
    Report,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass | Verdict::Report => 0,
            Verdict::BudgetViolation => 1,
            Verdict::HardError => 3,
        }
    }

    fn combine(self, other: Verdict) -> Verdict {
        let rank = |v: Verdict| match v {
            Verdict::Report => 0,
            Verdict::Pass => 1,
            Verdict::BudgetViolation => 2,
            Verdict::HardError => 3,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub verdict: Verdict,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

/// Command-line values that replace configuration entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub v: Option<String>,
    pub dlam: Option<String>,
    pub ntheta: Option<usize>,
    pub scheme: Option<String>,
    pub out: Option<PathBuf>,
}

pub fn apply_overrides(config: &mut ExperimentConfig, o: &Overrides) -> Result<(), ConfigError> {
    if let Some(v) = &o.v {
        config.dynamics.v = Number::Expr(v.clone());
        config.dynamics.v.eval("--v")?;
    }
    if let Some(d) = &o.dlam {
        config.dynamics.dlam = Number::Expr(d.clone());
        config.dynamics.dlam.eval("--dlam")?;
    }
    if let Some(n) = o.ntheta {
        if let Some(chern) = config.chern.as_mut() {
            chern.ntheta = n;
        }
        if let Some(scan) = config.scan.as_mut() {
            if scan.axis == "theta" {
                scan.points = n;
            }
        }
    }
    if let Some(s) = &o.scheme {
        config.scheme.kind = SchemeKind::parse(s)?;
    }
    if let Some(out) = &o.out {
        config.output.dir = out.to_string_lossy().into_owned();
    }
    Ok(())
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, LabError> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(ConfigError("`--workers` must be at least 1".into()).into()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| LabError::Io(io::Error::other(e)))?;
            Ok(pool.install(f))
        }
    }
}

struct Context {
    spec: ModelSpec,
    family: HamiltonianFamily,
    measurement: MeasurementConfig,
    budget: ErrorBudget,
}

fn context(config: &ExperimentConfig) -> Result<Context, LabError> {
    let spec = config.model.build()?;
    let family = HamiltonianFamily::new(spec.clone())?;
    Ok(Context {
        spec,
        family,
        measurement: config.dynamics.build()?,
        budget: config.budget.build(),
    })
}

fn require_variant(
    config: &ExperimentConfig,
    expected: &str,
    command: &str,
) -> Result<(), ConfigError> {
    if config.model.variant_name() != expected {
        return Err(ConfigError(format!(
            "`{command}` needs `model.variant = \"{expected}\"`, found `{}`",
            config.model.variant_name()
        )));
    }
    Ok(())
}

fn measurement_json(m: &MeasurementConfig) -> Value {
    json!({
        "dlam": m.offset,
        "v": m.speed,
        "t_final": m.final_time(),
        "method": format!("{:?}", m.integrator.method),
        "steps": m.integrator.steps_for(m.final_time()),
    })
}

pub fn run_fig1(config: &ExperimentConfig) -> Result<RunReport, LabError> {
    require_variant(config, "model-i", "fig1")?;
    run_scan("fig1", config)
}

pub fn run_fig3(config: &ExperimentConfig) -> Result<RunReport, LabError> {
    require_variant(config, "model-ii", "fig3")?;
    run_scan("fig3", config)
}

fn component_json(c: &ComponentSummary) -> Value {
    json!({
        "component": c.name,
        "max_abs_error": c.max_abs_error,
        "mean_abs_error": c.mean_abs_error,
        "reference_max": c.reference_max,
        "tolerance": c.tolerance,
        "failed_points": c.failed_points,
        "pass": c.pass,
    })
}

/// QGT scan over the configured grid with one table per scheme.
pub fn run_scan(name: &str, config: &ExperimentConfig) -> Result<RunReport, LabError> {
    let ctx = context(config)?;
    let scan = config
        .scan
        .as_ref()
        .ok_or_else(|| ConfigError(format!("`{name}` needs a [scan] block")))?;
    let grid = scan.build(&ctx.spec)?;
    let kind = config.scheme.kind;
    let schemes = kind.schemes();
    let names = ctx.spec.parameter_names();
    let labels = ComponentSet::labels(names, grid.mu, grid.nu);
    let mut out = OutputDir::create(&config.output.dir)?;

    let rows: Vec<ScanRow> = if schemes.is_empty() {
        grid.points
            .par_iter()
            .enumerate()
            .map(|(index, &point)| ScanRow {
                index,
                point,
                reference: qgt_tensor(&ctx.family, point, 0)
                    .map(|q| ComponentSet::from_tensor(&q, grid.mu, grid.nu)),
                estimates: Vec::new(),
                min_overlap: f64::NAN,
            })
            .collect()
    } else {
        qgt_scan(
            &ctx.family,
            &grid.points,
            &schemes,
            grid.mu,
            grid.nu,
            &ctx.measurement,
        )?
    };

    let hard_errors = rows
        .iter()
        .filter(|r| r.reference.is_err() || r.estimates.iter().any(|(_, e)| e.is_err()))
        .count();
    let mut verdict = if hard_errors > 0 {
        Verdict::HardError
    } else {
        Verdict::Pass
    };

    let mut scheme_json = serde_json::Map::new();
    if schemes.is_empty() {
        out.write_table(
            &format!("{name}_reference.csv"),
            &reference_table(&rows, names, &labels),
        )?;
    }
    for &scheme in &schemes {
        out.write_table(
            &format!("{name}_{}.csv", scheme.label()),
            &scheme_table(&rows, scheme, names, &labels),
        )?;
        let summary = summarize(&rows, scheme, &labels, &ctx.budget);
        let pass = summary.iter().all(|c| c.pass);
        if !pass {
            verdict = verdict.combine(Verdict::BudgetViolation);
        }
        scheme_json.insert(
            scheme.label().into(),
            json!({
                "components": summary.iter().map(component_json).collect::<Vec<_>>(),
                "pass": pass,
            }),
        );
    }

    let mut summary = json!({
        "experiment": name,
        "model": ctx.spec.to_string(),
        "points": grid.points.len(),
        "dynamics": measurement_json(&ctx.measurement),
        "budget": { "relative": ctx.budget.relative, "absolute_floor": ctx.budget.absolute_floor },
        "schemes": Value::Object(scheme_json),
        "hard_errors": hard_errors,
        "errors": rows.iter().filter_map(|r| row_error(r).map(|e| json!({"index": r.index, "error": e}))).collect::<Vec<_>>(),
    });

    if kind == SchemeKind::CircuitCheck {
        let pairs = benchmark_pairs(&ctx.family, &grid.points, &ctx.measurement)?;
        let check = check_pairs(&pairs);
        let pass = check.max_abs_diff <= CIRCUIT_TOL;
        if !pass {
            verdict = verdict.combine(Verdict::BudgetViolation);
        }
        summary["circuit"] = json!({
            "pairs": check.evaluated,
            "excluded": check.excluded,
            "max_abs_diff": check.max_abs_diff,
            "pass": pass,
        });
    }
    summary["verdict"] = serde_json::to_value(verdict).expect("verdict serializes");
    out.write_json(&format!("{name}_summary.json"), &summary)?;
    Ok(RunReport {
        verdict,
        files: out.into_files(),
        summary,
    })
}

fn row_error(row: &ScanRow) -> Option<String> {
    if let Err(e) = &row.reference {
        return Some(format!("reference: {e}"));
    }
    row.estimates
        .iter()
        .find_map(|(s, e)| e.as_ref().err().map(|e| format!("{}: {e}", s.label())))
}

fn reference_table(rows: &[ScanRow], names: [&str; 2], labels: &[String; 4]) -> Table {
    let mut header: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    header.extend(labels.iter().map(|l| format!("ref_{l}")));
    header.push("status".into());
    let mut table = Table::new(header);
    for row in rows {
        let mut cells = vec![fmt_f64(row.point.0[0]), fmt_f64(row.point.0[1])];
        match &row.reference {
            Ok(r) => {
                cells.extend(r.0.iter().map(|&x| fmt_f64(x)));
                cells.push("ok".into());
            }
            Err(e) => {
                cells.extend((0..4).map(|_| fmt_f64(f64::NAN)));
                cells.push(text_cell(&e.to_string()));
            }
        }
        table.push(cells);
    }
    table
}

fn scheme_table(rows: &[ScanRow], scheme: Scheme, names: [&str; 2], labels: &[String; 4]) -> Table {
    let mut header: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    for prefix in ["est", "ref", "err"] {
        header.extend(labels.iter().map(|l| format!("{prefix}_{l}")));
    }
    header.push("min_overlap".into());
    header.push("status".into());
    let mut table = Table::new(header);
    let nan = [f64::NAN; 4];
    for row in rows {
        let estimate = row
            .estimates
            .iter()
            .find(|(s, _)| *s == scheme)
            .map(|(_, e)| e);
        let est = match estimate {
            Some(Ok(e)) => e.0,
            _ => nan,
        };
        let reference = row.reference.as_ref().map(|r| r.0).unwrap_or(nan);
        let mut cells = vec![fmt_f64(row.point.0[0]), fmt_f64(row.point.0[1])];
        cells.extend(est.iter().map(|&x| fmt_f64(x)));
        cells.extend(reference.iter().map(|&x| fmt_f64(x)));
        cells.extend((0..4).map(|c| fmt_f64((est[c] - reference[c]).abs())));
        cells.push(fmt_f64(row.min_overlap));
        let status = match (&row.reference, estimate) {
            (Err(e), _) => text_cell(&e.to_string()),
            (_, Some(Err(e))) => text_cell(&e.to_string()),
            _ => "ok".into(),
        };
        cells.push(status);
        table.push(cells);
    }
    table
}

pub fn run_fig2(config: &ExperimentConfig) -> Result<RunReport, LabError> {
    require_variant(config, "model-i", "fig2")?;
    run_chern_scan("fig2", config)
}

pub fn run_chern(config: &ExperimentConfig) -> Result<RunReport, LabError> {
    require_variant(config, "model-i", "chern")?;
    run_chern_scan("chern", config)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlateauCheck {
    /// Largest `|C - 1|` over non-critical points with `Delta2/Delta1 < 1`.
    pub max_dev_topological: Option<f64>,
    /// Largest `|C|` over non-critical points with `Delta2/Delta1 > 1`.
    pub max_dev_trivial: Option<f64>,
    /// Interpolated `C = 1/2` crossing, when the scan spans the transition.
    pub crossing: Option<f64>,
    pub failed_points: usize,
    pub pass: bool,
}

/// Plateau and transition checks on `(ratio, C, near_critical)` triples.
pub fn plateau_check(values: &[(f64, Option<f64>, bool)]) -> PlateauCheck {
    let mut topo: Option<f64> = None;
    let mut trivial: Option<f64> = None;
    let mut failed = 0;
    let mut curve = Vec::new();
    for &(ratio, c, near) in values {
        let Some(c) = c else {
            failed += 1;
            continue;
        };
        curve.push((ratio, c));
        if near {
            continue;
        }
        if ratio < 1.0 {
            topo = Some(topo.unwrap_or(0.0).max((c - 1.0).abs()));
        } else {
            trivial = Some(trivial.unwrap_or(0.0).max(c.abs()));
        }
    }
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    let spans = curve.first().is_some_and(|p| p.0 < 1.0) && curve.last().is_some_and(|p| p.0 > 1.0);
    let cross = if spans { crossing(&curve, 0.5) } else { None };
    let pass = failed == 0
        && topo.is_none_or(|d| d <= CHERN_TOL)
        && trivial.is_none_or(|d| d <= CHERN_TOL)
        && (!spans || cross.is_some_and(|x| (x - 1.0).abs() <= CROSSING_TOL));
    PlateauCheck {
        max_dev_topological: topo,
        max_dev_trivial: trivial,
        crossing: cross,
        failed_points: failed,
        pass,
    }
}

fn run_chern_scan(name: &str, config: &ExperimentConfig) -> Result<RunReport, LabError> {
    let ctx = context(config)?;
    let chern = config.chern.clone().unwrap_or_default();
    let deltas = chern.delta2_values()?;
    if chern.ntheta < 2 {
        return Err(ConfigError("`chern.ntheta` must be at least 2".into()).into());
    }
    let phi = chern.phi.eval("chern.phi")?;
    let schemes = config.scheme.kind.schemes();
    let rows = chern_scan(
        &ctx.spec,
        &deltas,
        chern.ntheta,
        phi,
        &schemes,
        &ctx.measurement,
    )?;

    let mut header = vec![
        "delta2_over_delta1".to_string(),
        "delta2_per_2pi".to_string(),
    ];
    header.extend(schemes.iter().map(|s| format!("C_{}", s.label())));
    header.extend([
        "C_analytic".to_string(),
        "near_critical".to_string(),
        "status".to_string(),
    ]);
    let mut table = Table::new(header);
    for row in &rows {
        let mut cells = vec![fmt_f64(row.ratio), fmt_f64(row.delta2_per_2pi)];
        cells.extend(
            row.measured
                .iter()
                .map(|(_, c)| fmt_f64(*c.as_ref().unwrap_or(&f64::NAN))),
        );
        cells.push(fmt_f64(
            row.analytic.as_ref().map(|c| c.chern).unwrap_or(f64::NAN),
        ));
        cells.push(row.near_critical.to_string());
        cells.push(chern_status(row));
        table.push(cells);
    }
    let mut out = OutputDir::create(&config.output.dir)?;
    out.write_table(&format!("{name}_chern.csv"), &table)?;

    let hard_errors = rows
        .iter()
        .filter(|r| r.analytic.is_err() || r.measured.iter().any(|(_, c)| c.is_err()))
        .count();
    let mut verdict = if hard_errors > 0 {
        Verdict::HardError
    } else {
        Verdict::Pass
    };
    let mut checks = serde_json::Map::new();
    let analytic: Vec<_> = rows
        .iter()
        .map(|r| {
            (
                r.ratio,
                r.analytic.as_ref().ok().map(|c| c.chern),
                r.near_critical,
            )
        })
        .collect();
    checks.insert(
        "analytic".into(),
        serde_json::to_value(plateau_check(&analytic)).expect("serializes"),
    );
    for (k, &scheme) in schemes.iter().enumerate() {
        let values: Vec<_> = rows
            .iter()
            .map(|r| {
                (
                    r.ratio,
                    r.measured[k].1.as_ref().ok().copied(),
                    r.near_critical,
                )
            })
            .collect();
        let check = plateau_check(&values);
        if !check.pass {
            verdict = verdict.combine(Verdict::BudgetViolation);
        }
        checks.insert(
            scheme.label().into(),
            serde_json::to_value(check).expect("serializes"),
        );
    }
    let summary = json!({
        "experiment": name,
        "model": ctx.spec.to_string(),
        "delta2_points": deltas.len(),
        "ntheta": chern.ntheta,
        "phi": phi,
        "dynamics": measurement_json(&ctx.measurement),
        "tolerance": { "plateau": CHERN_TOL, "crossing": CROSSING_TOL },
        "checks": Value::Object(checks),
        "hard_errors": hard_errors,
        "verdict": verdict,
    });
    out.write_json(&format!("{name}_summary.json"), &summary)?;
    Ok(RunReport {
        verdict,
        files: out.into_files(),
        summary,
    })
}

fn chern_status(row: &ChernScanRow) -> String {
    if let Err(e) = &row.analytic {
        return text_cell(&format!("analytic: {e}"));
    }
    for (s, c) in &row.measured {
        if let Err(e) = c {
            return text_cell(&format!("{}: {e}", s.label()));
        }
    }
    "ok".into()
}

/// A state pair and operator whose generalized expectation value is
/// compared between the circuit and direct evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPair {
    pub label: String,
    pub psi1: CVector,
    pub psi2: CVector,
    pub op: ComplexMatrix,
}

/// Every pair the two schemes evaluate at the given points.
pub fn benchmark_pairs(
    family: &HamiltonianFamily,
    points: &[ParamPoint],
    config: &MeasurementConfig,
) -> Result<Vec<BenchmarkPair>, LabError> {
    let per_point: Vec<Result<Vec<BenchmarkPair>, biqgt_core::Error>> = points
        .par_iter()
        .enumerate()
        .map(|(k, &p)| {
            let states = PointStates::prepare(family, p, &Axis::BOTH, config)?;
            let fluct = energy_fluctuation_operator(family, p)?;
            let mut pairs = Vec::new();
            for mu in Axis::BOTH {
                let force = family.generalized_force(p, mu);
                for nu in Axis::BOTH {
                    let (m, n) = (mu.index(), nu.index());
                    let t_mu = states.triple(mu)?;
                    let t_nu = states.triple(nu)?;
                    pairs.push(BenchmarkPair {
                        label: format!("p{k}:scheme1:{m}{n}"),
                        psi1: t_mu.adjoint.vector.clone(),
                        psi2: t_nu.right.vector.clone(),
                        op: fluct.clone(),
                    });
                    pairs.push(BenchmarkPair {
                        label: format!("p{k}:curvature:{m}{n}"),
                        psi1: t_nu.adjoint.vector.clone(),
                        psi2: t_nu.right.vector.clone(),
                        op: force.clone(),
                    });
                    pairs.push(BenchmarkPair {
                        label: format!("p{k}:metric:{m}{n}"),
                        psi1: t_nu.negative_adjoint.vector.clone(),
                        psi2: t_nu.right.vector.clone(),
                        op: force.clone(),
                    });
                }
            }
            Ok(pairs)
        })
        .collect();
    let mut all = Vec::new();
    for pairs in per_point {
        all.extend(pairs?);
    }
    Ok(all)
}

/// Seeded random pairs and operators with entries uniform in the unit square.
pub fn random_pairs(count: usize, seed: u64) -> Vec<BenchmarkPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = |rng: &mut ChaCha8Rng| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    (0..count)
        .map(|k| {
            let psi1 = CVector::from_fn(2, |_, _| z(&mut rng));
            let psi2 = CVector::from_fn(2, |_, _| z(&mut rng));
            let entries: Vec<C64> = (0..4).map(|_| z(&mut rng)).collect();
            BenchmarkPair {
                label: format!("random{k}"),
                psi1,
                psi2,
                op: ComplexMatrix::from_rows(2, &entries).expect("finite 2x2"),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub label: String,
    pub direct: Option<C64>,
    pub circuit: Option<C64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCheck {
    pub results: Vec<PairResult>,
    pub evaluated: usize,
    /// Labels of pairs rejected as near-orthogonal by either path.
    pub excluded: Vec<String>,
    pub max_abs_diff: f64,
}

/// Compares circuit and direct values; rejected pairs are excluded from the
/// maximum and listed.
pub fn check_pairs(pairs: &[BenchmarkPair]) -> PairCheck {
    let results: Vec<PairResult> = pairs
        .par_iter()
        .map(|p| {
            let direct = gev(&p.psi1, &p.psi2, &p.op).map(|g| g.value);
            let circuit = gev_via_circuit(&p.psi1, &p.psi2, &p.op);
            let error = match (&direct, &circuit) {
                (Err(e), _) | (_, Err(e)) => Some(e.to_string()),
                _ => None,
            };
            PairResult {
                label: p.label.clone(),
                direct: direct.ok(),
                circuit: circuit.ok(),
                error,
            }
        })
        .collect();
    let mut max_abs_diff: f64 = 0.0;
    let mut evaluated = 0;
    let mut excluded = Vec::new();
    for r in &results {
        match (r.direct, r.circuit) {
            (Some(d), Some(c)) => {
                evaluated += 1;
                max_abs_diff = max_abs_diff.max((d - c).norm());
            }
            _ => excluded.push(r.label.clone()),
        }
    }
    PairCheck {
        results,
        evaluated,
        excluded,
        max_abs_diff,
    }
}

pub fn run_circuit_check(config: &ExperimentConfig) -> Result<RunReport, LabError> {
    let ctx = context(config)?;
    let circuit = &config.circuit;
    let mut pairs = random_pairs(circuit.random_instances, circuit.seed);
    if circuit.inject_orthogonal {
        pairs.push(BenchmarkPair {
            label: "injected-orthogonal".into(),
            psi1: CVector::from_column_slice(&[c64(1.0, 0.0), c64(0.0, 0.0)]),
            psi2: CVector::from_column_slice(&[c64(0.0, 0.0), c64(1.0, 0.0)]),
            op: ComplexMatrix::identity(2),
        });
    }
    if circuit.benchmark_pairs {
        let points = match (&config.scan, &config.point) {
            (Some(scan), _) => scan.build(&ctx.spec)?.points,
            (None, Some(point)) => vec![point.build()?],
            (None, None) => Vec::new(),
        };
        pairs.extend(benchmark_pairs(&ctx.family, &points, &ctx.measurement)?);
    }
    let mut out = OutputDir::create(&config.output.dir)?;

    if let Some(shots) = circuit.shots {
        if shots == 0 {
            return Err(ConfigError("`circuit.shots` must be positive".into()).into());
        }
        let sampled: Vec<(String, Option<(C64, C64)>)> = pairs
            .par_iter()
            .enumerate()
            .map(|(k, p)| {
                let direct = gev(&p.psi1, &p.psi2, &p.op).map(|g| g.value);
                let seed = circuit.seed.wrapping_add(k as u64 + 1);
                let est = gev_via_circuit_sampled(&p.psi1, &p.psi2, &p.op, shots, seed);
                (p.label.clone(), direct.ok().zip(est.ok()))
            })
            .collect();
        let mut table = Table::new([
            "label",
            "direct_re",
            "direct_im",
            "sampled_re",
            "sampled_im",
            "abs_diff",
        ]);
        let mut diffs = Vec::new();
        for (label, v) in &sampled {
            let (d, s) = v.unwrap_or((C64::new(f64::NAN, f64::NAN), C64::new(f64::NAN, f64::NAN)));
            let diff = (d - s).norm();
            if v.is_some() {
                diffs.push(diff);
            }
            table.push(vec![
                label.clone(),
                fmt_f64(d.re),
                fmt_f64(d.im),
                fmt_f64(s.re),
                fmt_f64(s.im),
                fmt_f64(diff),
            ]);
        }
        out.write_table("circuit_check.csv", &table)?;
        let mean = diffs.iter().sum::<f64>() / diffs.len().max(1) as f64;
        let summary = json!({
            "experiment": "circuit-check",
            "mode": "shots",
            "shots": shots,
            "pairs": sampled.len(),
            "sampled_pairs": diffs.len(),
            "mean_abs_diff": mean,
            "max_abs_diff": diffs.iter().copied().fold(0.0, f64::max),
            "verdict": Verdict::Report,
        });
        out.write_json("circuit_check_summary.json", &summary)?;
        return Ok(RunReport {
            verdict: Verdict::Report,
            files: out.into_files(),
            summary,
        });
    }

    let check = check_pairs(&pairs);
    let mut table = Table::new([
        "label",
        "direct_re",
        "direct_im",
        "circuit_re",
        "circuit_im",
        "abs_diff",
        "status",
    ]);
    for r in &check.results {
        let nan = C64::new(f64::NAN, f64::NAN);
        let (d, c) = (r.direct.unwrap_or(nan), r.circuit.unwrap_or(nan));
        table.push(vec![
            r.label.clone(),
            fmt_f64(d.re),
            fmt_f64(d.im),
            fmt_f64(c.re),
            fmt_f64(c.im),
            fmt_f64((d - c).norm()),
            r.error
                .as_deref()
                .map(text_cell)
                .unwrap_or_else(|| "ok".into()),
        ]);
    }
    out.write_table("circuit_check.csv", &table)?;
    let verdict = if check.evaluated > 0 && check.max_abs_diff <= CIRCUIT_TOL {
        Verdict::Pass
    } else {
        Verdict::BudgetViolation
    };
    let summary = json!({
        "experiment": "circuit-check",
        "mode": "exact",
        "pairs": pairs.len(),
        "evaluated": check.evaluated,
        "excluded": check.excluded,
        "max_abs_diff": check.max_abs_diff,
        "tolerance": CIRCUIT_TOL,
        "verdict": verdict,
    });
    out.write_json("circuit_check_summary.json", &summary)?;
    Ok(RunReport {
        verdict,
        files: out.into_files(),
        summary,
    })
}

/// Steps tried, in order, for the finite-difference reference.
const FD_STEPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

/// All schemes and both references at a single point.
pub fn run_qgt(config: &ExperimentConfig) -> Result<RunReport, LabError> {
    let ctx = context(config)?;
    let point = config
        .point
        .as_ref()
        .ok_or_else(|| ConfigError("`qgt` needs a [point] block".into()))?
        .build()?;
    let (mu, nu) = (Axis::First, Axis::Second);
    let names = ctx.spec.parameter_names();
    let labels = ComponentSet::labels(names, mu, nu);
    let reference = ComponentSet::from_tensor(&qgt_tensor(&ctx.family, point, 0)?, mu, nu);
    let fd = fd_tensor(&ctx.family, point)?;
    let fd_set = ComponentSet::from_tensor(&fd, mu, nu);

    let mut measurement = ctx.measurement;
    if config.output.trajectories {
        let steps = measurement.integrator.steps_for(measurement.final_time());
        measurement.integrator.sample_every = Some((steps / 200).max(1));
    }
    let schemes = config.scheme.kind.schemes();
    let states = if schemes.is_empty() && !config.output.trajectories {
        None
    } else {
        Some(PointStates::prepare(
            &ctx.family,
            point,
            &Axis::BOTH,
            &measurement,
        )?)
    };
    let mut estimates = Vec::new();
    if let Some(states) = &states {
        for &scheme in &schemes {
            estimates.push((
                scheme,
                measure_components(&ctx.family, states, scheme, mu, nu)?.0,
            ));
        }
    }

    let mut header = vec![
        "component".to_string(),
        "reference".to_string(),
        "finite_difference".to_string(),
    ];
    header.extend(schemes.iter().map(|s| s.label().to_string()));
    header.extend(schemes.iter().map(|s| format!("err_{}", s.label())));
    let mut table = Table::new(header);
    for (c, label) in labels.iter().enumerate() {
        let mut cells = vec![label.clone(), fmt_f64(reference.0[c]), fmt_f64(fd_set.0[c])];
        cells.extend(estimates.iter().map(|(_, e)| fmt_f64(e.0[c])));
        cells.extend(
            estimates
                .iter()
                .map(|(_, e)| fmt_f64((e.0[c] - reference.0[c]).abs())),
        );
        table.push(cells);
    }
    let mut out = OutputDir::create(&config.output.dir)?;
    out.write_table("qgt.csv", &table)?;

    if let (true, Some(states)) = (config.output.trajectories, &states) {
        for axis in Axis::BOTH {
            let triple = states.triple(axis)?;
            for (state, tag) in [
                (&triple.right, "right"),
                (&triple.adjoint, "adjoint"),
                (&triple.negative_adjoint, "negative_adjoint"),
            ] {
                debug_assert!(matches!(
                    state.generator,
                    Generator::Hamiltonian | Generator::Adjoint | Generator::NegativeAdjoint
                ));
                let mut buf = Vec::new();
                state.write_trajectory_csv(&mut buf)?;
                let text = String::from_utf8(buf).expect("ascii csv");
                out.write_text(
                    &format!("qgt_traj_{}_{tag}.csv", names[axis.index()]),
                    &text,
                )?;
            }
        }
    }

    let mut verdict = Verdict::Pass;
    let mut scheme_json = serde_json::Map::new();
    for (scheme, est) in &estimates {
        let comps: Vec<Value> = (0..4)
            .map(|c| {
                let err = (est.0[c] - reference.0[c]).abs();
                let tol = ctx.budget.tolerance(reference.0[c].abs());
                json!({"component": labels[c], "estimate": est.0[c], "abs_error": err, "tolerance": tol, "pass": err <= tol})
            })
            .collect();
        if comps.iter().any(|c| c["pass"] == Value::Bool(false)) {
            verdict = verdict.combine(Verdict::BudgetViolation);
        }
        scheme_json.insert(scheme.label().into(), Value::Array(comps));
    }
    let constants: Vec<Value> = Axis::BOTH
        .iter()
        .map(|&a| {
            let c = force_constant(&ctx.family, point, a).map(|c| c.f_mu_expect);
            json!({"axis": names[a.index()], "re": c.as_ref().map(|z| z.re).ok(), "im": c.as_ref().map(|z| z.im).ok()})
        })
        .collect();
    let preparation: Vec<Value> = match &states {
        Some(states) => Axis::BOTH
            .iter()
            .filter_map(|&a| {
                let r = states.triple(a).ok()?.report?;
                Some(json!({
                    "axis": names[a.index()],
                    "max_adiabatic_ratio": r.max_ratio,
                    "right_distance": r.right_distance,
                    "left_distance": r.left_distance,
                }))
            })
            .collect(),
        None => Vec::new(),
    };
    let summary = json!({
        "experiment": "qgt",
        "model": ctx.spec.to_string(),
        "point": point.0,
        "dynamics": measurement_json(&measurement),
        "reference": labels.iter().zip(reference.0).map(|(l, v)| json!({"component": l, "value": v})).collect::<Vec<_>>(),
        "finite_difference_max_dev": (0..4).map(|c| (fd_set.0[c] - reference.0[c]).abs()).fold(0.0, f64::max),
        "force_constants": constants,
        "adiabatic_preparation": preparation,
        "schemes": Value::Object(scheme_json),
        "verdict": verdict,
    });
    out.write_json("qgt_summary.json", &summary)?;
    Ok(RunReport {
        verdict,
        files: out.into_files(),
        summary,
    })
}

fn fd_tensor(
    family: &HamiltonianFamily,
    point: ParamPoint,
) -> Result<[[C64; 2]; 2], biqgt_core::Error> {
    let mut last = None;
    for h in FD_STEPS {
        let attempt = (|| {
            let mut q = [[C64::new(0.0, 0.0); 2]; 2];
            for mu in Axis::BOTH {
                for nu in Axis::BOTH {
                    q[mu.index()][nu.index()] =
                        qgt_fd_richardson(family, point, mu, nu, 0, h)?.value;
                }
            }
            Ok(q)
        })();
        match attempt {
            Ok(q) => return Ok(q),
            Err(e @ biqgt_core::Error::StepTooLarge(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one step was tried"))
}

/// Model I Delta ratio of a configuration, when applicable.
pub fn delta_ratio(spec: &ModelSpec) -> Option<f64> {
    match spec.variant {
        ModelVariant::ModelI { delta1, delta2, .. } => Some(delta2 / delta1),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_ordering_and_codes() {
        assert_eq!(
            Verdict::Pass.combine(Verdict::BudgetViolation),
            Verdict::BudgetViolation
        );
        assert_eq!(
            Verdict::HardError.combine(Verdict::BudgetViolation),
            Verdict::HardError
        );
        assert_eq!(Verdict::Report.exit_code(), 0);
        assert_eq!(Verdict::BudgetViolation.exit_code(), 1);
        assert_eq!(Verdict::HardError.exit_code(), 3);
        assert_eq!(LabError::Config(ConfigError("x".into())).exit_code(), 2);
    }

    #[test]
    fn plateau_rules() {
        let good = [
            (0.0, Some(1.0), false),
            (0.8, Some(0.95), false),
            (0.95, Some(0.8), true),
            (1.05, Some(0.2), true),
            (1.2, Some(0.05), false),
        ];
        let check = plateau_check(&good);
        assert!(check.pass, "{check:?}");
        assert!((check.crossing.unwrap() - 1.0).abs() < 1e-12);

        let bad = [(0.0, Some(0.7), false), (2.0, Some(0.0), false)];
        assert!(!plateau_check(&bad).pass);
        let single = [(0.0, Some(1.05), false)];
        let check = plateau_check(&single);
        assert!(check.pass && check.crossing.is_none());
        assert!(!plateau_check(&[(0.0, None, false)]).pass);
    }

    #[test]
    fn random_pairs_are_seeded() {
        assert_eq!(random_pairs(3, 9), random_pairs(3, 9));
        assert_ne!(random_pairs(3, 9), random_pairs(3, 10));
    }

    #[test]
    fn overrides_replace_values() {
        let mut c = ExperimentConfig::fig2_default();
        let o = Overrides {
            v: Some("0.5".into()),
            dlam: Some("pi/4".into()),
            ntheta: Some(201),
            scheme: Some("scheme2".into()),
            out: Some("elsewhere".into()),
        };
        apply_overrides(&mut c, &o).unwrap();
        let m = c.dynamics.build().unwrap();
        assert_eq!(m.speed, 0.5);
        assert_eq!(m.offset, std::f64::consts::FRAC_PI_4);
        assert_eq!(c.chern.unwrap().ntheta, 201);
        assert_eq!(c.scheme.kind, SchemeKind::Scheme2);
        assert_eq!(c.output.dir, "elsewhere");
        let mut c = ExperimentConfig::fig1_default();
        let bad = Overrides {
            scheme: Some("scheme3".into()),
            ..Overrides::default()
        };
        assert!(apply_overrides(&mut c, &bad).is_err());
    }
}
