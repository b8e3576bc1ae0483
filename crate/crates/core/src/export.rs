//! CSV writers for snapshots, trajectories, QoI values and sweep tables.

use std::io::Write;

use num_complex::Complex64;

use crate::beam::BeamTrajectory;
use crate::error::{GbError, Result};
use crate::model::{MediumModel, Point};
use crate::qoi::QoIValue;
use crate::sweep::SweepTable;

/// Shortest representation that parses back to the same f64.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn io_err(e: impl std::fmt::Display) -> GbError {
    GbError::InvalidArgument(format!("write failed: {e}"))
}

fn writer<W: Write>(w: W, header: &[String]) -> Result<csv::Writer<W>> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header).map_err(io_err)?;
    Ok(wr)
}

fn axis_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

/// Columns x1..xn, re, im, abs.
pub fn write_snapshot<const D: usize, W: Write>(w: W, values: &[(Point<D>, Complex64)]) -> Result<()> {
    let mut header = axis_names("x", D);
    header.extend(["re", "im", "abs"].map(String::from));
    let mut wr = writer(w, &header)?;
    for (x, u) in values {
        let mut rec: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
        rec.extend([fmt_f64(u.re), fmt_f64(u.im), fmt_f64(u.norm())]);
        wr.write_record(&rec).map_err(io_err)?;
    }
    wr.flush().map_err(io_err)
}

/// One row per accepted step: t, q, p, Re M, Im M (column-major), Re a, Im a
/// and the relative Hamiltonian drift.
pub fn write_trajectory<const D: usize, W: Write>(w: W, traj: &BeamTrajectory<D>, medium: &MediumModel<D>) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(axis_names("q", D));
    header.extend(axis_names("p", D));
    for part in ["m_re", "m_im"] {
        for j in 1..=D {
            for i in 1..=D {
                header.push(format!("{part}_{i}{j}"));
            }
        }
    }
    header.extend(["a_re", "a_im", "hamiltonian_drift"].map(String::from));
    let mut wr = writer(w, &header)?;
    for s in &traj.states {
        let mut rec = vec![fmt_f64(s.t)];
        rec.extend(s.q.iter().chain(s.p.iter()).map(|v| fmt_f64(*v)));
        rec.extend(s.m.iter().map(|z| fmt_f64(z.re)));
        rec.extend(s.m.iter().map(|z| fmt_f64(z.im)));
        let drift = (s.hamiltonian(medium, &traj.y) - traj.h0).abs() / traj.h0;
        rec.extend([fmt_f64(s.a.re), fmt_f64(s.a.im), fmt_f64(drift)]);
        wr.write_record(&rec).map_err(io_err)?;
    }
    wr.flush().map_err(io_err)
}

/// Columns scenario, kind, p, |alpha|, epsilon, y1.., t, value, err_est.
/// Missing t or error estimates are written as "-".
pub fn write_qoi_values<W: Write>(w: W, scenario: &str, values: &[QoIValue]) -> Result<()> {
    let ny = values.first().map_or(0, |v| v.y.len());
    let mut header: Vec<String> = ["scenario", "kind", "p", "alpha_abs", "epsilon"].map(String::from).to_vec();
    header.extend(axis_names("y", ny));
    header.extend(["t", "value", "err_est"].map(String::from));
    let mut wr = writer(w, &header)?;
    for v in values {
        let mut rec = vec![
            scenario.to_string(),
            v.kind.label().to_string(),
            v.p.to_string(),
            v.alpha.iter().sum::<usize>().to_string(),
            fmt_f64(v.epsilon),
        ];
        rec.extend(v.y.iter().map(|y| fmt_f64(*y)));
        rec.push(v.t.map_or("-".into(), fmt_f64));
        rec.push(fmt_f64(v.value));
        rec.push(v.err_est.map_or("-".into(), fmt_f64));
        wr.write_record(&rec).map_err(io_err)?;
    }
    wr.flush().map_err(io_err)
}

/// Columns epsilon, coordinate(s), y.., sigma, value.
pub fn write_sweep<W: Write>(w: W, table: &SweepTable) -> Result<()> {
    let nc = table.plan.grid.coord_dim();
    let ny = table.rows.first().map_or(0, |r| r.y.len());
    let mut header = vec!["epsilon".to_string()];
    header.extend(if nc == 1 && matches!(table.plan.grid, crate::sweep::ParamGrid::Diagonal { .. }) {
        vec!["r".to_string()]
    } else {
        axis_names("c", nc)
    });
    header.extend(axis_names("y", ny));
    header.extend(["sigma", "value"].map(String::from));
    let mut wr = writer(w, &header)?;
    for r in &table.rows {
        let mut rec = vec![fmt_f64(r.epsilon)];
        rec.extend(r.coord.iter().chain(&r.y).map(|v| fmt_f64(*v)));
        rec.push(r.sigma.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(":"));
        rec.push(fmt_f64(r.value));
        wr.write_record(&rec).map_err(io_err)?;
    }
    wr.flush().map_err(io_err)
}
