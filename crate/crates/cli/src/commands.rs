//! Command implementations. Each writes its artifacts into the staging area
//! and returns manifest details.

use std::sync::Arc;

use gbeam::beam::{build_fan, Mode};
use gbeam::export::{write_qoi_values, write_snapshot, write_sweep};
use gbeam::field::{snapshot, DerivativeOrder, FieldSpec};
use gbeam::model::{preset_1d, preset_2d, validate_scenario, BoxDomain, Point, ScenarioPreset};
use gbeam::ode::StepControl;
use gbeam::qoi::{evaluate_qoi, QoIKind, QoIValue};
use gbeam::quad::{QuadRule, UniformGrid};
use gbeam::sweep::{fit_scaling, run_sweep, FdMode, ParamGrid, QoICell, ScalingFit, SweepPlan, SweepTable};
use serde_json::{json, Map, Value};

use crate::output::Staging;
use crate::settings::{RunConfig, ScenarioSel, StepRule};
use crate::CliError;

pub enum AnyScenario {
    One(ScenarioPreset<1>),
    Two(ScenarioPreset<2>),
}

impl AnyScenario {
    pub fn build(sel: ScenarioSel) -> Result<Self, CliError> {
        Ok(match sel {
            ScenarioSel::OneD { phase, s } => AnyScenario::One(preset_1d(phase, s)?),
            ScenarioSel::TwoD { phase } => AnyScenario::Two(preset_2d(phase)),
        })
    }

    pub fn name(&self) -> &str {
        match self {
            AnyScenario::One(s) => &s.name,
            AnyScenario::Two(s) => &s.name,
        }
    }
}

/// Runs `$body` with `$p` bound to the concrete preset.
macro_rules! with_preset {
    ($any:expr, $p:ident => $body:expr) => {
        match $any {
            AnyScenario::One($p) => $body,
            AnyScenario::Two($p) => $body,
        }
    };
}
pub(crate) use with_preset;

pub type Details = Map<String, Value>;

/// Parameter points for snapshot and qoi.
pub fn parameter_points<const D: usize>(cfg: &RunConfig, s: &ScenarioPreset<D>) -> Vec<Vec<f64>> {
    if let Some(y) = &cfg.y {
        return y.clone();
    }
    if let Some(r) = &cfg.r {
        return r.iter().map(|&r| s.diagonal_point(r)).collect();
    }
    match &s.diagonal {
        Some(_) => [0.0, 0.5, 1.0].iter().map(|&r| s.diagonal_point(r)).collect(),
        None => vec![s.params.center()],
    }
}

fn check_in_params<const D: usize>(s: &ScenarioPreset<D>, ys: &[Vec<f64>]) -> Result<(), CliError> {
    match ys.iter().find(|y| !s.params.contains(y)) {
        Some(y) => Err(CliError::Engine(gbeam::GbError::InvalidArgument(format!(
            "parameter {y:?} outside the scenario range [{:?}, {:?}]",
            s.params.lo, s.params.hi
        )))),
        None => Ok(()),
    }
}

fn fmt_point(y: &[f64]) -> String {
    y.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

pub fn validate<const D: usize>(cfg: &RunConfig, s: &ScenarioPreset<D>, stage: &mut Staging) -> Result<Details, CliError> {
    let report = validate_scenario(s, cfg.validate_samples)?;
    let violations: Vec<Value> = report
        .violations
        .iter()
        .map(|v| json!({ "assumption": v.assumption, "witness": v.witness, "detail": v.detail }))
        .collect();
    let body = json!({
        "scenario": s.name,
        "passed": report.passed,
        "samples": report.samples,
        "min_speed": report.min_speed,
        "max_speed": report.max_speed,
        "worst_derivative_dev": report.worst_derivative_dev,
        "min_phase_gradient": report.min_phase_gradient,
        "violations": violations,
    });
    report.into_result()?;
    stage.write_json("validation.json", "validation report", &body)?;
    Ok(Map::new())
}

pub fn snapshot_box<const D: usize>(cfg: &RunConfig, s: &ScenarioPreset<D>, t_max: f64) -> BoxDomain<D> {
    let travel = s.data.support.inflate(s.medium.c_max * t_max);
    let lo = cfg.snapshot_lo.as_ref().map_or(travel.lo, |v| Point::<D>::from_row_slice(v));
    let hi = cfg.snapshot_hi.as_ref().map_or(travel.hi, |v| Point::<D>::from_row_slice(v));
    BoxDomain::new(lo, hi)
}

/// One field-snapshot CSV per (epsilon, y, t).
pub fn snapshots<const D: usize>(
    cfg: &RunConfig,
    s: &ScenarioPreset<D>,
    ys: &[Vec<f64>],
    stage: &mut Staging,
) -> Result<Vec<(String, f64, Vec<f64>, f64)>, CliError> {
    check_in_params(s, ys)?;
    let t_max = cfg.snapshot_t.iter().cloned().fold(0.0, f64::max);
    let bx = snapshot_box(cfg, s, t_max);
    if (0..D).any(|k| !(bx.hi[k] > bx.lo[k])) {
        return Err(CliError::Engine(gbeam::GbError::InvalidArgument("snapshot box is empty".into())));
    }
    let mut out = Vec::new();
    for (ke, &eps) in cfg.eps.iter().enumerate() {
        let h = cfg.snapshot_h.unwrap_or(if D == 1 { eps / 8.0 } else { 0.02 });
        let grid = UniformGrid::covering(&bx, h, QuadRule::Trapezoid);
        for (ky, y) in ys.iter().enumerate() {
            let fan = build_fan(s, y, t_max, cfg.z_spacing * eps.sqrt(), &cfg.modes, &StepControl::default())?;
            let fs = FieldSpec::new(Arc::new(fan), cfg.cutoff, eps, &cfg.modes)?;
            for (kt, &t) in cfg.snapshot_t.iter().enumerate() {
                let values = snapshot(&fs, t, &grid)?;
                let name = format!("snapshot_e{ke}_y{ky}_t{kt}.csv");
                let role = format!("field snapshot eps={eps} y=[{}] t={t}", fmt_point(y));
                write_snapshot(stage.file(&name, &role)?, &values)?;
                out.push((name, eps, y.clone(), t));
            }
        }
    }
    Ok(out)
}

fn make_cell<const D: usize>(cfg: &RunConfig, s: &ScenarioPreset<D>, kind: QoIKind, modes: &[Mode]) -> QoICell<D> {
    let mut cell = QoICell::new(s.clone(), kind, modes);
    if matches!(kind, QoIKind::Space | QoIKind::Spacetime) {
        cell.ord = DerivativeOrder::new(cfg.qoi_p, cfg.qoi_alpha.clone().unwrap_or_else(|| vec![0; D]));
    }
    if let Some(t) = cfg.qoi_t {
        cell.t = t;
    }
    cell.spacing_fraction = cfg.h_fraction;
    cell.z_spacing_factor = cfg.z_spacing;
    cell.cutoff = cfg.cutoff;
    cell
}

pub fn qoi<const D: usize>(cfg: &RunConfig, s: &ScenarioPreset<D>, stage: &mut Staging) -> Result<Details, CliError> {
    let ys = parameter_points(cfg, s);
    check_in_params(s, &ys)?;
    let cell = make_cell(cfg, s, cfg.qoi_kind, &cfg.modes);
    let mut values: Vec<QoIValue> = Vec::new();
    for &eps in &cfg.eps {
        for y in &ys {
            let (fs, spec) = cell.field(eps, y)?;
            let spec = spec.with_rule(cfg.rule).with_richardson(cfg.richardson);
            values.push(evaluate_qoi(&fs, &spec, cell.t, y)?);
        }
    }
    write_qoi_values(stage.file("qoi.csv", "qoi values")?, &s.name, &values)?;
    let mut d = Map::new();
    d.insert("qoi".into(), json!(cell_label(&cell)));
    Ok(d)
}

fn cell_label<const D: usize>(cell: &QoICell<D>) -> String {
    use gbeam::sweep::CellEvaluator;
    cell.describe()
}

/// Sweep grid: explicit axis bounds, else the scenario's diagonal, else its
/// full parameter box.
pub fn sweep_grid<const D: usize>(cfg: &RunConfig, s: &ScenarioPreset<D>) -> Result<ParamGrid, CliError> {
    let n = cfg.sweep.points;
    let dim = s.stochastic_dim();
    Ok(match (&cfg.sweep.lo, &cfg.sweep.hi, &s.diagonal) {
        (Some(lo), Some(hi), _) => ParamGrid::Axis { lo: lo.clone(), hi: hi.clone(), counts: vec![n; dim] },
        (None, None, Some((o, d))) => ParamGrid::Diagonal { origin: o.clone(), direction: d.clone(), count: n },
        (None, None, None) => ParamGrid::Axis { lo: s.params.lo.clone(), hi: s.params.hi.clone(), counts: vec![n; dim] },
        _ => {
            return Err(CliError::Engine(gbeam::GbError::InvalidPlan(
                "sweep.lo and sweep.hi must be given together".into(),
            )))
        }
    })
}

/// Runs one plan per epsilon so the derivative step can follow epsilon, and
/// merges the tables.
pub fn run_table(
    cell: &dyn gbeam::sweep::CellEvaluator,
    grid: &ParamGrid,
    eps: &[f64],
    sigmas: &[usize],
    h_y: StepRule,
    fd: FdMode,
) -> Result<SweepTable, CliError> {
    let mut merged: Option<SweepTable> = None;
    for &e in eps {
        let h = match fd {
            FdMode::Grid => grid.spacing()[0],
            FdMode::Stencil => h_y.at(e),
        };
        let plan = SweepPlan {
            grid: grid.clone(),
            epsilons: vec![e],
            sigmas: sigmas.iter().map(|&k| sigma_vec(k, grid.coord_dim())).collect(),
            h_y: h,
            fd_mode: fd,
        };
        let t = run_sweep(&plan, cell)?;
        match &mut merged {
            None => merged = Some(t),
            Some(m) => {
                m.plan.epsilons.push(e);
                m.rows.extend(t.rows);
                m.failures.extend(t.failures);
            }
        }
    }
    merged.ok_or_else(|| CliError::Internal("empty epsilon list".into()))
}

/// Derivative of order k along the first sweep coordinate.
pub fn sigma_vec(k: usize, dim: usize) -> Vec<usize> {
    let mut v = vec![0; dim];
    v[0] = k;
    v
}

pub fn sigma_table(table: &SweepTable, sigma: usize) -> SweepTable {
    SweepTable {
        rows: table.rows.iter().filter(|r| r.sigma.iter().sum::<usize>() == sigma).cloned().collect(),
        ..table.clone()
    }
}

fn write_table(stage: &mut Staging, name: &str, role: &str, table: &SweepTable) -> Result<(), CliError> {
    write_sweep(stage.file(name, role)?, table)?;
    Ok(())
}

fn sweep_details(table: &SweepTable) -> Details {
    let mut d = Map::new();
    d.insert("qoi".into(), json!(table.qoi));
    d.insert("grid".into(), serde_json::to_value(&table.plan.grid).unwrap_or(Value::Null));
    d.insert("failed_cells".into(), json!(table.failures.len()));
    d
}

pub fn sweep<const D: usize>(cfg: &RunConfig, s: &ScenarioPreset<D>, stage: &mut Staging) -> Result<(Details, SweepTable), CliError> {
    let grid = sweep_grid(cfg, s)?;
    let cell = make_cell(cfg, s, cfg.qoi_kind, &cfg.modes);
    let table = run_table(&cell, &grid, &cfg.eps, &cfg.sweep.sigmas, cfg.sweep.h_y, cfg.sweep.fd)?;
    write_table(stage, "sweep.csv", "sweep table", &table)?;
    Ok((sweep_details(&table), table))
}

pub fn fits(table: &SweepTable, sigmas: &[usize]) -> Result<Vec<ScalingFit>, CliError> {
    let dim = table.plan.grid.coord_dim();
    sigmas.iter().map(|&k| Ok(fit_scaling(table, &sigma_vec(k, dim))?)).collect()
}

pub fn fit<const D: usize>(cfg: &RunConfig, s: &ScenarioPreset<D>, stage: &mut Staging) -> Result<Details, CliError> {
    if cfg.eps.len() < 3 {
        return Err(CliError::Engine(gbeam::GbError::InvalidArgument(format!(
            "a scaling fit needs at least 3 epsilon values, got {}",
            cfg.eps.len()
        ))));
    }
    let (d, table) = sweep(cfg, s, stage)?;
    let f = fits(&table, &cfg.sweep.sigmas)?;
    stage.write_json("fit.json", "scaling fit", &f)?;
    Ok(d)
}
