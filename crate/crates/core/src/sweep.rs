//! Parameter sweeps of a QoI over the stochastic box, finite-difference
//! y-derivatives, and epsilon-scaling fits of their amplitudes.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{build_fan, default_z_spacing, Mode};
use crate::error::{GbError, Result};
use crate::field::{CutoffSpec, DerivativeOrder, FieldSpec};
use crate::model::ScenarioPreset;
use crate::ode::StepControl;
use crate::qoi::{evaluate_qoi, QoIKind, QoISpec, MAX_SPACING_FRACTION};

/// Fraction of failed cells above which a sweep is aborted.
pub const MAX_FAILED_FRACTION: f64 = 0.01;

/// Exponent thresholds of the scaling classification, per unit of |sigma|.
pub const OSCILLATORY_THRESHOLD: f64 = 0.7;
pub const BOUNDED_THRESHOLD: f64 = 0.3;

/// Where the sweep samples the parameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ParamGrid {
    /// Uniform tensor grid with `counts[k]` nodes on [lo[k], hi[k]].
    Axis { lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize> },
    /// y = origin + r direction for `count` uniform r in [0, 1].
    Diagonal { origin: Vec<f64>, direction: Vec<f64>, count: usize },
}

impl ParamGrid {
    /// Number of sweep coordinates (y components, or just r).
    pub fn coord_dim(&self) -> usize {
        match self {
            ParamGrid::Axis { lo, .. } => lo.len(),
            ParamGrid::Diagonal { .. } => 1,
        }
    }

    fn coord_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ParamGrid::Axis { lo, hi, .. } => (lo.clone(), hi.clone()),
            ParamGrid::Diagonal { .. } => (vec![0.0], vec![1.0]),
        }
    }

    fn counts(&self) -> Vec<usize> {
        match self {
            ParamGrid::Axis { counts, .. } => counts.clone(),
            ParamGrid::Diagonal { count, .. } => vec![*count],
        }
    }

    /// Grid spacing per coordinate.
    pub fn spacing(&self) -> Vec<f64> {
        let (lo, hi) = self.coord_bounds();
        self.counts()
            .iter()
            .enumerate()
            .map(|(k, &n)| if n > 1 { (hi[k] - lo[k]) / (n - 1) as f64 } else { 0.0 })
            .collect()
    }

    /// Grid coordinates in row-major order (last coordinate fastest).
    pub fn coords(&self) -> Vec<Vec<f64>> {
        let (lo, _) = self.coord_bounds();
        let counts = self.counts();
        let h = self.spacing();
        let total: usize = counts.iter().product();
        (0..total)
            .map(|mut f| {
                let mut c = vec![0.0; counts.len()];
                for k in (0..counts.len()).rev() {
                    c[k] = lo[k] + (f % counts[k]) as f64 * h[k];
                    f /= counts[k];
                }
                c
            })
            .collect()
    }

    /// Parameter value at sweep coordinate `c`.
    pub fn param(&self, c: &[f64]) -> Vec<f64> {
        match self {
            ParamGrid::Axis { .. } => c.to_vec(),
            ParamGrid::Diagonal { origin, direction, .. } => {
                origin.iter().zip(direction).map(|(o, d)| o + c[0] * d).collect()
            }
        }
    }

    fn in_range(&self, c: &[f64]) -> bool {
        let (lo, hi) = self.coord_bounds();
        c.iter().zip(lo.iter().zip(&hi)).all(|(v, (a, b))| *v >= a - 1e-12 && *v <= b + 1e-12)
    }
}

/// How y-derivatives are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FdMode {
    /// Extra evaluations at c +- h_y around every grid point.
    #[default]
    Stencil,
    /// Differences of neighbouring grid values (h_y is the grid spacing).
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub grid: ParamGrid,
    pub epsilons: Vec<f64>,
    /// Derivative orders per sweep coordinate; each entry at most 2.
    pub sigmas: Vec<Vec<usize>>,
    pub h_y: f64,
    pub fd_mode: FdMode,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GbError::InvalidPlan(m));
        if self.epsilons.is_empty() {
            return bad("epsilon list is empty".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return bad(format!("epsilon {e} outside (0, 1]"));
        }
        if !(self.h_y > 0.0) {
            return bad(format!("h_y must be positive, got {}", self.h_y));
        }
        let dim = self.grid.coord_dim();
        if let ParamGrid::Axis { lo, hi, counts } = &self.grid {
            if hi.len() != dim || counts.len() != dim || lo.iter().zip(hi).any(|(a, b)| !(b >= a)) {
                return bad("axis grid bounds and counts disagree".into());
            }
        }
        if self.grid.counts().iter().any(|&n| n == 0) {
            return bad("grid has an empty axis".into());
        }
        for s in &self.sigmas {
            if s.len() != dim || s.iter().any(|&k| k > 2) {
                return bad(format!("derivative order {s:?} unsupported for {dim} sweep coordinate(s)"));
            }
        }
        if self.fd_mode == FdMode::Grid && self.sigmas.iter().any(|s| s.iter().any(|&k| k > 0)) {
            let h = self.grid.spacing();
            if dim != 1 || (h[0] - self.h_y).abs() > 1e-9 * self.h_y {
                return bad(format!("grid differencing needs one coordinate with spacing h_y = {}", self.h_y));
            }
        }
        Ok(())
    }

    fn stencil_offsets(&self) -> Vec<Vec<i32>> {
        let dim = self.grid.coord_dim();
        let mut need = vec![false; dim];
        if self.fd_mode == FdMode::Stencil {
            for s in &self.sigmas {
                for (k, &o) in s.iter().enumerate() {
                    need[k] |= o > 0;
                }
            }
        }
        let mut out = vec![vec![0i32; dim]];
        for k in 0..dim {
            if need[k] {
                out = out
                    .into_iter()
                    .flat_map(|o| {
                        [-1, 0, 1].into_iter().map(move |d| {
                            let mut v = o.clone();
                            v[k] = d;
                            v
                        })
                    })
                    .collect();
            }
        }
        out
    }
}

/// Computes one QoI value for a given (epsilon, y).
pub trait CellEvaluator: Sync {
    fn eval(&self, epsilon: f64, y: &[f64]) -> Result<f64>;
    fn describe(&self) -> String;
}

/// Standard cell: build the beam fan at y, then evaluate a QoI.
#[derive(Clone)]
pub struct QoICell<const D: usize> {
    pub scenario: ScenarioPreset<D>,
    pub kind: QoIKind,
    pub ord: DerivativeOrder,
    pub modes: Vec<Mode>,
    /// Time of a space-only QoI.
    pub t: f64,
    /// h_x = h_t = epsilon * spacing_fraction.
    pub spacing_fraction: f64,
    /// Launch spacing as a multiple of sqrt(epsilon).
    pub z_spacing_factor: f64,
    pub cutoff: CutoffSpec,
    pub ctrl: StepControl,
}

impl<const D: usize> QoICell<D> {
    pub fn new(scenario: ScenarioPreset<D>, kind: QoIKind, modes: &[Mode]) -> Self {
        let t = scenario.observation_time;
        let ord = match kind {
            QoIKind::Energy => DerivativeOrder::time(1, D),
            QoIKind::Arias => DerivativeOrder::time(2, D),
            _ => DerivativeOrder::zero(D),
        };
        Self {
            scenario,
            kind,
            ord,
            modes: modes.to_vec(),
            t,
            spacing_fraction: MAX_SPACING_FRACTION,
            z_spacing_factor: default_z_spacing(1.0),
            cutoff: CutoffSpec::NONE,
            ctrl: StepControl::default(),
        }
    }

    pub fn spec(&self, epsilon: f64) -> QoISpec<D> {
        let h = epsilon * self.spacing_fraction;
        let window = match self.kind {
            QoIKind::Space => self.scenario.window.clone(),
            _ => self.scenario.spacetime_window.clone(),
        };
        let mut spec = QoISpec::spacetime(window, self.ord.clone(), h, h).with_weight(Some(self.scenario.weight.clone()));
        spec.kind = self.kind;
        spec
    }

    /// Beam fan, field and QoI spec at (epsilon, y).
    pub fn field(&self, epsilon: f64, y: &[f64]) -> Result<(FieldSpec<D>, QoISpec<D>)> {
        let spec = self.spec(epsilon);
        let t_hi = match self.kind {
            QoIKind::Space => self.t,
            _ => spec.window.time.map_or(self.t, |w| w.1),
        };
        let t_end = t_hi + epsilon;
        let fan = build_fan(
            &self.scenario,
            y,
            t_end,
            self.z_spacing_factor * epsilon.sqrt(),
            &self.modes,
            &self.ctrl,
        )?;
        Ok((FieldSpec::new(Arc::new(fan), self.cutoff, epsilon, &self.modes)?, spec))
    }
}

impl<const D: usize> CellEvaluator for QoICell<D> {
    fn eval(&self, epsilon: f64, y: &[f64]) -> Result<f64> {
        let (fs, spec) = self.field(epsilon, y)?;
        Ok(evaluate_qoi(&fs, &spec, self.t, y)?.value)
    }

    fn describe(&self) -> String {
        let modes: String = self.modes.iter().map(|m| m.label()).collect();
        format!("{} {} p={} alpha={:?} modes={modes}", self.scenario.name, self.kind.label(), self.ord.p, self.ord.alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    /// Sweep coordinate: y itself, or r on a diagonal.
    pub coord: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub epsilon: f64,
    pub coord: Vec<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub plan: SweepPlan,
    pub qoi: String,
    pub rows: Vec<SweepRow>,
    pub failures: Vec<CellFailure>,
}

impl SweepTable {
    pub fn rows_for(&self, sigma: &[usize]) -> impl Iterator<Item = &SweepRow> {
        let sigma = sigma.to_vec();
        self.rows.iter().filter(move |r| r.sigma == sigma)
    }
}

/// Evaluates every cell of the plan and assembles the table. In stencil mode
/// grid points whose stencil leaves the grid's range are dropped from the
/// derivative rows.
pub fn run_sweep(plan: &SweepPlan, cell: &dyn CellEvaluator) -> Result<SweepTable> {
    plan.validate()?;
    let coords = plan.grid.coords();
    let offsets = plan.stencil_offsets();
    let h = plan.h_y;
    let (nc, no) = (coords.len(), offsets.len());
    let jobs: Vec<(usize, usize, usize)> = (0..plan.epsilons.len())
        .flat_map(|e| (0..nc).flat_map(move |c| (0..no).map(move |o| (e, c, o))))
        .collect();
    let shift = |c: &[f64], o: &[i32]| -> Vec<f64> { c.iter().zip(o).map(|(v, &k)| v + k as f64 * h).collect() };
    let results: Vec<Option<Result<f64>>> = jobs
        .par_iter()
        .map(|&(e, c, o)| {
            let at = shift(&coords[c], &offsets[o]);
            if !plan.grid.in_range(&at) {
                return None;
            }
            Some(cell.eval(plan.epsilons[e], &plan.grid.param(&at)))
        })
        .collect();

    let total = results.iter().filter(|r| r.is_some()).count();
    let mut failures = Vec::new();
    for (&(e, c, o), r) in jobs.iter().zip(&results) {
        if let Some(Err(err)) = r {
            failures.push(CellFailure {
                epsilon: plan.epsilons[e],
                coord: shift(&coords[c], &offsets[o]),
                error: err.to_string(),
            });
        }
    }
    if failures.len() as f64 > MAX_FAILED_FRACTION * total as f64 {
        return Err(GbError::SweepAborted {
            failed: failures.len(),
            total,
            first: failures[0].error.clone(),
        });
    }
    for f in &failures {
        log::warn!("sweep cell eps={} coord={:?} failed: {}", f.epsilon, f.coord, f.error);
    }

    let value = |e: usize, c: usize, o: usize| -> Option<f64> {
        match &results[(e * coords.len() + c) * offsets.len() + o] {
            Some(Ok(v)) => Some(*v),
            Some(Err(_)) => Some(f64::NAN),
            None => None,
        }
    };
    let mut sigmas = vec![vec![0; plan.grid.coord_dim()]];
    for s in &plan.sigmas {
        if !sigmas.contains(s) {
            sigmas.push(s.clone());
        }
    }
    let mut rows = Vec::new();
    for (e, &eps) in plan.epsilons.iter().enumerate() {
        for sigma in &sigmas {
            if plan.fd_mode == FdMode::Grid && sigma.iter().any(|&k| k > 0) {
                continue;
            }
            for (c, coord) in coords.iter().enumerate() {
                // Central differences: weights per offset, product over axes.
                let mut acc = 0.0;
                let mut complete = true;
                for (o, off) in offsets.iter().enumerate() {
                    let w: f64 = sigma
                        .iter()
                        .zip(off)
                        .map(|(&s, &k)| match (s, k) {
                            (0, 0) => 1.0,
                            (0, _) => 0.0,
                            (1, 0) => 0.0,
                            (1, k) => k as f64 / (2.0 * h),
                            (2, 0) => -2.0 / (h * h),
                            (2, _) => 1.0 / (h * h),
                            _ => unreachable!(),
                        })
                        .product();
                    if w == 0.0 {
                        continue;
                    }
                    match value(e, c, o) {
                        Some(v) => acc += w * v,
                        None => complete = false,
                    }
                }
                if complete {
                    rows.push(SweepRow {
                        epsilon: eps,
                        coord: coord.clone(),
                        y: plan.grid.param(coord),
                        sigma: sigma.clone(),
                        value: acc,
                    });
                }
            }
        }
    }
    let mut table = SweepTable {
        plan: plan.clone(),
        qoi: cell.describe(),
        rows,
        failures,
    };
    if plan.fd_mode == FdMode::Grid {
        for s in plan.sigmas.iter().filter(|s| s.iter().any(|&k| k > 0)) {
            let d = fd_derivative(&table, s, plan.h_y)?;
            table.rows.extend(d.rows);
        }
    }
    Ok(table)
}

/// Central differences of the sigma = 0 rows along the single sweep
/// coordinate, iterated sigma times; boundary points are dropped.
pub fn fd_derivative(table: &SweepTable, sigma: &[usize], h_y: f64) -> Result<SweepTable> {
    if sigma.len() != 1 {
        return Err(GbError::InvalidPlan("grid differencing supports one sweep coordinate".into()));
    }
    let order = sigma[0];
    let mut rows = Vec::new();
    for &eps in &table.plan.epsilons {
        let mut base: Vec<&SweepRow> = table.rows.iter().filter(|r| r.epsilon == eps && r.sigma == [0]).collect();
        base.sort_by(|a, b| a.coord[0].total_cmp(&b.coord[0]));
        if order == 0 {
            rows.extend(base.into_iter().cloned());
            continue;
        }
        if base.len() < 2 * order + 1 {
            return Err(GbError::StencilOutOfDomain(format!(
                "{} grid points cannot support a derivative of order {order}",
                base.len()
            )));
        }
        for w in base.windows(2) {
            let dh = w[1].coord[0] - w[0].coord[0];
            if (dh - h_y).abs() > 1e-9 * h_y {
                return Err(GbError::StencilOutOfDomain(format!("grid spacing {dh} differs from h_y = {h_y}")));
            }
        }
        let mut vals: Vec<f64> = base.iter().map(|r| r.value).collect();
        let mut lo = 0;
        for _ in 0..order {
            vals = vals.windows(3).map(|w| (w[2] - w[0]) / (2.0 * h_y)).collect();
            lo += 1;
        }
        // Order 2 uses the compact three-point stencil instead of nested first differences.
        if order == 2 {
            vals = base
                .windows(3)
                .map(|w| (w[2].value - 2.0 * w[1].value + w[0].value) / (h_y * h_y))
                .collect();
            lo = 1;
        }
        for (i, v) in vals.into_iter().enumerate() {
            let r = base[lo + i];
            rows.push(SweepRow {
                sigma: sigma.to_vec(),
                value: v,
                ..r.clone()
            });
        }
    }
    Ok(SweepTable {
        rows,
        failures: table.failures.clone(),
        ..table.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingClass {
    Bounded,
    Oscillatory,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub sigma: Vec<usize>,
    pub epsilons: Vec<f64>,
    /// max over the grid of |d^sigma QoI| per epsilon.
    pub amplitudes: Vec<f64>,
    /// A(eps/2) / A(eps) for consecutive halvings (sorted by decreasing eps).
    pub ratios: Vec<f64>,
    /// Fitted exponent in A ~ eps^{-rho}.
    pub rho: f64,
    pub class: ScalingClass,
}

pub fn classify(rho: f64, sigma: &[usize]) -> ScalingClass {
    let s: usize = sigma.iter().sum();
    if s > 0 && rho >= OSCILLATORY_THRESHOLD * s as f64 {
        ScalingClass::Oscillatory
    } else if rho <= BOUNDED_THRESHOLD * s.max(1) as f64 {
        ScalingClass::Bounded
    } else {
        ScalingClass::Indeterminate
    }
}

/// Log-log least-squares fit of the derivative amplitude against epsilon.
pub fn fit_scaling(table: &SweepTable, sigma: &[usize]) -> Result<ScalingFit> {
    let mut eps: Vec<f64> = table.plan.epsilons.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    if eps.len() < 3 {
        return Err(GbError::InvalidArgument(format!("scaling fit needs at least 3 epsilon values, got {}", eps.len())));
    }
    let amplitudes: Vec<f64> = eps
        .iter()
        .map(|&e| {
            table
                .rows_for(sigma)
                .filter(|r| r.epsilon == e && r.value.is_finite())
                .map(|r| r.value.abs())
                .fold(0.0, f64::max)
        })
        .collect();
    if amplitudes.iter().any(|a| !(*a > 0.0)) {
        return Err(GbError::InvalidArgument(format!("no nonzero rows for sigma {sigma:?}")));
    }
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = amplitudes.iter().map(|a| a.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let rho = -sxy / sxx;
    let ratios = amplitudes.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(ScalingFit {
        sigma: sigma.to_vec(),
        epsilons: eps,
        amplitudes,
        ratios,
        rho,
        class: classify(rho, sigma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset_1d, PhaseKind1d};

    struct Closure<F: Fn(f64, &[f64]) -> Result<f64> + Sync>(F);
    impl<F: Fn(f64, &[f64]) -> Result<f64> + Sync> CellEvaluator for Closure<F> {
        fn eval(&self, e: f64, y: &[f64]) -> Result<f64> {
            (self.0)(e, y)
        }
        fn describe(&self) -> String {
            "closure".into()
        }
    }

    fn plan_1d(count: usize, sigmas: Vec<Vec<usize>>, h_y: f64, fd_mode: FdMode) -> SweepPlan {
        SweepPlan {
            grid: ParamGrid::Axis {
                lo: vec![1.5],
                hi: vec![2.0],
                counts: vec![count],
            },
            epsilons: vec![1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0],
            sigmas,
            h_y,
            fd_mode,
        }
    }

    #[test]
    fn empty_epsilon_list_is_invalid() {
        let mut p = plan_1d(11, vec![], 1e-3, FdMode::Stencil);
        p.epsilons.clear();
        let r = run_sweep(&p, &Closure(|_e, _y| Ok(0.0)));
        assert!(matches!(r, Err(GbError::InvalidPlan(_))));
    }

    #[test]
    fn cartesian_coverage() {
        let p = plan_1d(101, vec![], 1e-3, FdMode::Stencil);
        let t = run_sweep(&p, &Closure(|_e, y| Ok(y[0]))).unwrap();
        assert_eq!(t.rows.len(), 303);
        let d = SweepPlan {
            grid: ParamGrid::Diagonal {
                origin: vec![0.0, 0.8],
                direction: vec![0.5, 0.4],
                count: 101,
            },
            epsilons: vec![1.0 / 60.0],
            ..p
        };
        let t = run_sweep(&d, &Closure(|_e, y| Ok(y[0] + y[1]))).unwrap();
        assert_eq!(t.rows.len(), 101);
        assert!((t.rows[100].y[0] - 0.5).abs() < 1e-15 && (t.rows[100].y[1] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn polynomial_exactness() {
        let h = 0.005;
        for mode in [FdMode::Stencil, FdMode::Grid] {
            let p = plan_1d(101, vec![vec![0], vec![1], vec![2]], h, mode);
            let t = run_sweep(&p, &Closure(|_e, y| Ok(y[0] * y[0]))).unwrap();
            for r in t.rows_for(&[2]) {
                assert!((r.value - 2.0).abs() < 1e-6, "{mode:?} {}", r.value);
            }
            for r in t.rows_for(&[1]) {
                assert!((r.value - 2.0 * r.y[0]).abs() < 1e-9);
            }
            for r in t.rows_for(&[0]) {
                assert_eq!(r.value, r.y[0] * r.y[0]);
            }
            // Boundary points are dropped for derivatives.
            assert_eq!(t.rows_for(&[1]).count(), 3 * 99);
        }
    }

    #[test]
    fn oscillatory_derivative_amplitude() {
        // Q0 = cos(2 y t / eps) C / 2 with t = 2 has |dQ0/dy| amplitude (t/eps)|C|.
        let (t, c) = (2.0, 0.3);
        let p = SweepPlan {
            sigmas: vec![vec![1]],
            ..plan_1d(101, vec![], 1.0, FdMode::Stencil)
        };
        for &eps in &p.epsilons {
            let q = SweepPlan {
                epsilons: vec![eps],
                h_y: eps / 50.0,
                ..p.clone()
            };
            let tab = run_sweep(&q, &Closure(|e, y| Ok(0.5 * c * (2.0 * y[0] * t / e).cos()))).unwrap();
            let a = tab.rows_for(&[1]).map(|r| r.value.abs()).fold(0.0, f64::max);
            assert!((a - t / eps * c).abs() < 0.05 * t / eps * c, "{a}");
        }
    }

    #[test]
    fn scaling_fit_classes() {
        let p = plan_1d(51, vec![vec![1], vec![2]], 1e-3, FdMode::Stencil);
        let osc = run_sweep(&p, &Closure(|e, y| Ok((2.0 * y[0] / e).sin()))).unwrap();
        let f1 = fit_scaling(&osc, &[1]).unwrap();
        assert!((f1.rho - 1.0).abs() < 0.1, "{f1:?}");
        assert_eq!(f1.class, ScalingClass::Oscillatory);
        let smooth = run_sweep(&p, &Closure(|e, y| Ok(y[0].sin() * (1.0 + e)))).unwrap();
        for s in [[1], [2]] {
            let f = fit_scaling(&smooth, &s).unwrap();
            assert_eq!(f.class, ScalingClass::Bounded);
            assert!(f.ratios.iter().all(|r| (0.5..=1.5).contains(r)));
        }
        let two = SweepPlan {
            epsilons: vec![0.1, 0.05],
            ..p
        };
        let t = run_sweep(&two, &Closure(|_e, y| Ok(y[0]))).unwrap();
        assert!(fit_scaling(&t, &[1]).is_err());
    }

    #[test]
    fn failures_abort_above_one_percent() {
        let p = plan_1d(101, vec![], 1e-3, FdMode::Stencil);
        let fail_some = |n: usize| {
            move |_e: f64, y: &[f64]| {
                let k = ((y[0] - 1.5) / 0.005).round() as usize;
                if k < n {
                    Err(GbError::InvalidArgument(format!("cell {k}")))
                } else {
                    Ok(1.0)
                }
            }
        };
        let t = run_sweep(&p, &Closure(fail_some(1))).unwrap();
        assert_eq!(t.failures.len(), 3);
        assert_eq!(t.rows.len(), 303);
        assert!(t.rows.iter().filter(|r| r.value.is_nan()).count() == 3);
        let r = run_sweep(&p, &Closure(fail_some(2)));
        assert!(matches!(r, Err(GbError::SweepAborted { failed: 6, total: 303, .. })));
    }

    #[test]
    fn grid_mode_checks_spacing() {
        let p = plan_1d(101, vec![vec![1]], 0.01, FdMode::Grid);
        assert!(matches!(p.validate(), Err(GbError::InvalidPlan(_))));
        let t = run_sweep(&plan_1d(101, vec![], 1e-3, FdMode::Stencil), &Closure(|_e, y| Ok(y[0]))).unwrap();
        assert!(matches!(fd_derivative(&t, &[1], 0.01), Err(GbError::StencilOutOfDomain(_))));
        let t = run_sweep(&plan_1d(2, vec![], 1e-3, FdMode::Stencil), &Closure(|_e, y| Ok(y[0]))).unwrap();
        assert!(matches!(fd_derivative(&t, &[1], 0.5), Err(GbError::StencilOutOfDomain(_))));
        assert_eq!(fd_derivative(&t, &[0], 0.5).unwrap().rows.len(), 6);
    }

    #[test]
    fn reproducible_qoi_cells() {
        let s = preset_1d(PhaseKind1d::Linear, 3.0).unwrap();
        let cell = QoICell::new(s, QoIKind::Space, &Mode::BOTH);
        let p = SweepPlan {
            grid: ParamGrid::Axis {
                lo: vec![1.5],
                hi: vec![2.0],
                counts: vec![3],
            },
            epsilons: vec![1.0 / 40.0],
            sigmas: vec![vec![1]],
            h_y: 1e-3,
            fd_mode: FdMode::Stencil,
        };
        let a = run_sweep(&p, &cell).unwrap();
        let b = run_sweep(&p, &cell).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows_for(&[1]).count(), 1);
        assert!(a.qoi.contains("space"));
    }
}
