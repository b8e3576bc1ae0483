//! Artifact bundles for the five reference figures.

use gbeam::beam::Mode;
use gbeam::exact::DAlembertField;
use gbeam::export::{write_snapshot, write_sweep};
use gbeam::model::{preset_1d, preset_2d, PhaseKind1d, PhaseKind2d, Point, ScenarioPreset};
use gbeam::qoi::QoIKind;
use gbeam::sweep::{FdMode, ParamGrid, QoICell};
use serde_json::{json, Map};

use crate::commands::{fits, run_table, sigma_table, snapshots, Details};
use crate::output::{Layout, Panel, Staging};
use crate::settings::{Figure, RunConfig, StepRule};
use crate::CliError;

/// Step for bounded QoIs; oscillatory ones use epsilon / 50.
const BOUNDED_STEP: f64 = 1e-3;
const OSCILLATORY_STEP: StepRule = StepRule::PerEpsilon(1.0 / 50.0);

const DERIVATIVE_TITLES: [&str; 3] = ["", "first derivative", "second derivative"];

fn eps_label(e: f64) -> String {
    let inv = 1.0 / e;
    if (inv - inv.round()).abs() < 1e-9 * inv {
        format!("eps = 1/{}", inv.round())
    } else {
        format!("eps = {e}")
    }
}

pub fn reproduce(fig: Figure, cfg: &RunConfig, stage: &mut Staging) -> Result<(Layout, Details, String), CliError> {
    match fig {
        Figure::Fig1 => fig1(cfg, stage),
        Figure::Fig2 => fig2(cfg, stage),
        Figure::Fig3 => field_figure(fig, PhaseKind2d::Abs, cfg, stage),
        Figure::Fig4 => fig4(cfg, stage),
        Figure::Fig5 => field_figure(fig, PhaseKind2d::Linear, cfg, stage),
    }
}

/// d'Alembert reference at three times, pulses at +-1.5, c = 2.
fn fig1(cfg: &RunConfig, stage: &mut Staging) -> Result<(Layout, Details, String), CliError> {
    let s = preset_1d(PhaseKind1d::Linear, 1.5)?;
    let exact = DAlembertField::from_scenario(&s)?;
    let eps = cfg.eps_or(&[1.0 / 40.0])[0];
    let y = [2.0];
    let times = [0.0, 0.75, 1.5];
    let h = cfg.snapshot_h.unwrap_or(eps / 8.0);
    let n = (12.0 / h).ceil() as usize + 1;
    let mut panels = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let values: Vec<(Point<1>, _)> = (0..n)
            .map(|i| {
                let x = -6.0 + 12.0 * i as f64 / (n - 1) as f64;
                (Point::<1>::new(x), exact.eval(t, x, &y, eps))
            })
            .collect();
        let name = format!("fig1_t{k}.csv");
        write_snapshot(stage.file(&name, &format!("exact solution t={t}"))?, &values)?;
        panels.push(Panel {
            row: 0,
            col: k,
            title: format!("t = {t}"),
            kind: "curve",
            csv: name,
            x: "x1".into(),
            y: "abs".into(),
            value: None,
            series_column: None,
            series: vec![eps_label(eps)],
            overlay: None,
        });
    }
    let mut d = Map::new();
    d.insert("y".into(), json!(y));
    d.insert("epsilon".into(), json!(eps));
    Ok((Layout { figure: "fig1".into(), rows: 1, cols: 3, panels }, d, s.name))
}

/// |u| at t = 1 for three parameter points on the diagonal, eps = 1/60.
fn field_figure(
    fig: Figure,
    phase: PhaseKind2d,
    cfg: &RunConfig,
    stage: &mut Staging,
) -> Result<(Layout, Details, String), CliError> {
    let s = preset_2d(phase);
    let mut cfg = cfg.clone();
    cfg.eps = cfg.eps_or(&[1.0 / 60.0])[..1].to_vec();
    cfg.snapshot_t = vec![1.0];
    cfg.snapshot_lo.get_or_insert(vec![-3.0, -1.5]);
    cfg.snapshot_hi.get_or_insert(vec![3.0, 2.0]);
    let rs = cfg.r.clone().unwrap_or_else(|| vec![0.0, 0.5, 1.0]);
    let ys: Vec<Vec<f64>> = rs.iter().map(|&r| s.diagonal_point(r)).collect();
    let files = snapshots(&cfg, &s, &ys, stage)?;
    let panels = files
        .into_iter()
        .enumerate()
        .map(|(k, (csv, eps, y, _))| Panel {
            row: 0,
            col: k,
            title: format!("y = ({:.2}, {:.2})", y[0], y[1]),
            kind: "heatmap",
            csv,
            x: "x1".into(),
            y: "x2".into(),
            value: Some("abs".into()),
            series_column: None,
            series: vec![eps_label(eps)],
            overlay: Some("unit_circle"),
        })
        .collect::<Vec<_>>();
    let mut d = Map::new();
    d.insert("r".into(), json!(rs));
    d.insert("t".into(), json!(1.0));
    let cols = panels.len();
    Ok((Layout { figure: fig.id().into(), rows: 1, cols, panels }, d, s.name))
}

struct Column<const D: usize> {
    title: &'static str,
    scenario: ScenarioPreset<D>,
    kind: QoIKind,
    modes: &'static [Mode],
    h_y: StepRule,
}

/// Three QoI columns, each with value, first and second derivative rows.
fn derivative_grid<const D: usize>(
    fig: &str,
    columns: Vec<Column<D>>,
    grid: ParamGrid,
    x_label: &str,
    eps: &[f64],
    stage: &mut Staging,
) -> Result<(Layout, Details), CliError> {
    let mut panels = Vec::new();
    let mut all_fits = Vec::new();
    for (c, col) in columns.iter().enumerate() {
        let cell = QoICell::new(col.scenario.clone(), col.kind, col.modes);
        let table = run_table(&cell, &grid, eps, &[0, 1, 2], col.h_y, FdMode::Stencil)?;
        for sigma in 0..3 {
            let name = format!("{fig}_r{sigma}_c{c}.csv");
            let title = match sigma {
                0 => col.title.to_string(),
                _ => format!("{}, {}", col.title, DERIVATIVE_TITLES[sigma]),
            };
            write_sweep(stage.file(&name, &title)?, &sigma_table(&table, sigma))?;
            panels.push(Panel {
                row: sigma,
                col: c,
                title,
                kind: "curve",
                csv: name,
                x: x_label.into(),
                y: "value".into(),
                value: None,
                series_column: Some("epsilon".into()),
                series: eps.iter().map(|&e| eps_label(e)).collect(),
                overlay: None,
            });
        }
        if eps.len() >= 3 {
            all_fits.push(json!({ "column": c, "title": col.title, "fits": fits(&table, &[0, 1, 2])? }));
        }
    }
    if !all_fits.is_empty() {
        stage.write_json(&format!("{fig}_fits.json"), "scaling fits per column", &all_fits)?;
    }
    let mut d = Map::new();
    d.insert("grid".into(), serde_json::to_value(&grid).unwrap_or_default());
    Ok((Layout { figure: fig.into(), rows: 3, cols: columns.len(), panels }, d))
}

fn fig2(cfg: &RunConfig, stage: &mut Staging) -> Result<(Layout, Details, String), CliError> {
    let lin = preset_1d(PhaseKind1d::Linear, 3.0)?;
    let quad = preset_1d(PhaseKind1d::Quadratic, 3.0)?;
    let columns = vec![
        Column { title: "space QoI, linear phase", scenario: lin.clone(), kind: QoIKind::Space, modes: &Mode::BOTH, h_y: OSCILLATORY_STEP },
        Column { title: "space QoI, quadratic phase", scenario: quad, kind: QoIKind::Space, modes: &Mode::BOTH, h_y: StepRule::Fixed(BOUNDED_STEP) },
        Column { title: "space-time QoI, linear phase", scenario: lin.clone(), kind: QoIKind::Spacetime, modes: &Mode::BOTH, h_y: StepRule::Fixed(BOUNDED_STEP) },
    ];
    let grid = ParamGrid::Axis { lo: lin.params.lo.clone(), hi: lin.params.hi.clone(), counts: vec![cfg.sweep.points] };
    let eps = cfg.eps_or(&[1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0]);
    let (layout, d) = derivative_grid("fig2", columns, grid, "y1", &eps, stage)?;
    Ok((layout, d, "preset_1d(s=3)".into()))
}

fn fig4(cfg: &RunConfig, stage: &mut Staging) -> Result<(Layout, Details, String), CliError> {
    let abs = preset_2d(PhaseKind2d::Abs);
    let lin = preset_2d(PhaseKind2d::Linear);
    let (origin, direction) = abs.diagonal.clone().expect("2D preset has a diagonal");
    let columns = vec![
        Column { title: "space QoI, one mode, |x1| phase", scenario: abs, kind: QoIKind::Space, modes: &[Mode::Minus], h_y: StepRule::Fixed(BOUNDED_STEP) },
        Column { title: "space QoI, two modes, x1 phase", scenario: lin.clone(), kind: QoIKind::Space, modes: &Mode::BOTH, h_y: OSCILLATORY_STEP },
        Column { title: "space-time QoI, two modes, x1 phase", scenario: lin, kind: QoIKind::Spacetime, modes: &Mode::BOTH, h_y: StepRule::Fixed(BOUNDED_STEP) },
    ];
    let grid = ParamGrid::Diagonal { origin, direction, count: cfg.sweep.points };
    let eps = cfg.eps_or(&[1.0 / 30.0, 1.0 / 60.0, 1.0 / 120.0]);
    let (layout, d) = derivative_grid("fig4", columns, grid, "r", &eps, stage)?;
    Ok((layout, d, "preset_2d".into()))
}
