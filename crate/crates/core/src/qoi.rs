//! Localized quadratic quantities of interest of Gaussian beam fields,
//! computed by wavelength-resolving tensor quadrature.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{BeamFan, Mode};
use crate::error::{GbError, Result};
use crate::field::{eval_phase, DerivativeOrder, FieldSpec, TIME_FD_FRACTION};
use crate::model::{Point, WeightFn, WindowFunction};
use crate::quad::{QuadRule, UniformAxis, UniformGrid};

/// Grid spacings may not exceed epsilon times this factor.
pub const MAX_SPACING_FRACTION: f64 = 1.0 / 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QoIKind {
    Space,
    Spacetime,
    Energy,
    Arias,
}

impl QoIKind {
    pub fn label(self) -> &'static str {
        match self {
            QoIKind::Space => "space",
            QoIKind::Spacetime => "spacetime",
            QoIKind::Energy => "energy",
            QoIKind::Arias => "arias",
        }
    }
}

impl std::str::FromStr for QoIKind {
    type Err = GbError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "space" => Ok(QoIKind::Space),
            "spacetime" => Ok(QoIKind::Spacetime),
            "energy" => Ok(QoIKind::Energy),
            "arias" => Ok(QoIKind::Arias),
            _ => Err(GbError::InvalidArgument(format!("unknown QoI kind '{s}'"))),
        }
    }
}

#[derive(Clone)]
pub struct QoISpec<const D: usize> {
    pub kind: QoIKind,
    pub ord: DerivativeOrder,
    /// g(t, x, y); `None` is g = 1.
    pub weight: Option<WeightFn<D>>,
    pub window: WindowFunction<D>,
    pub h_x: f64,
    pub h_t: f64,
    pub rule: QuadRule,
    /// Also evaluate on the doubled grid and report |Q_h - Q_2h|/3.
    pub richardson: bool,
}

impl<const D: usize> QoISpec<D> {
    pub fn space(window: WindowFunction<D>, ord: DerivativeOrder, h_x: f64) -> Self {
        Self {
            kind: QoIKind::Space,
            ord,
            weight: None,
            window,
            h_x,
            h_t: h_x,
            rule: QuadRule::Trapezoid,
            richardson: false,
        }
    }

    pub fn spacetime(window: WindowFunction<D>, ord: DerivativeOrder, h_x: f64, h_t: f64) -> Self {
        Self {
            kind: QoIKind::Spacetime,
            h_t,
            ..Self::space(window, ord, h_x)
        }
    }

    pub fn energy(window: WindowFunction<D>, h_x: f64, h_t: f64) -> Self {
        Self {
            kind: QoIKind::Energy,
            ..Self::spacetime(window, DerivativeOrder::time(1, D), h_x, h_t)
        }
    }

    pub fn arias(window: WindowFunction<D>, h_x: f64, h_t: f64) -> Self {
        Self {
            kind: QoIKind::Arias,
            ..Self::spacetime(window, DerivativeOrder::time(2, D), h_x, h_t)
        }
    }

    pub fn with_weight(mut self, weight: Option<WeightFn<D>>) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_rule(mut self, rule: QuadRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_richardson(mut self, on: bool) -> Self {
        self.richardson = on;
        self
    }

    fn check_resolution(&self, epsilon: f64, time: bool) -> Result<()> {
        let limit = epsilon * MAX_SPACING_FRACTION;
        let tol = limit * 1e-12;
        if self.h_x > limit + tol {
            return Err(GbError::GridTooCoarse { h: self.h_x, limit });
        }
        if time && self.h_t > limit + tol {
            return Err(GbError::GridTooCoarse { h: self.h_t, limit });
        }
        Ok(())
    }

    fn space_grid(&self, h: f64) -> UniformGrid<D> {
        UniformGrid::covering(&self.window.space.inflate(h), h, self.rule)
    }

    fn time_axis(&self, h: f64) -> Result<UniformAxis> {
        let (lo, hi) = self
            .window
            .time
            .ok_or_else(|| GbError::InvalidArgument("space-time QoI needs a window with a time support".into()))?;
        Ok(UniformAxis::covering(lo, hi, h, self.rule))
    }
}

/// A QoI value with the grid metadata needed to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoIValue {
    pub kind: QoIKind,
    pub p: usize,
    pub alpha: Vec<usize>,
    pub epsilon: f64,
    pub y: Vec<f64>,
    /// Evaluation time of a space-only QoI.
    pub t: Option<f64>,
    pub value: f64,
    /// Richardson estimate from the doubled grid, if requested.
    pub err_est: Option<f64>,
    pub h_x: f64,
    pub h_t: Option<f64>,
    pub space_nodes: usize,
    pub time_nodes: usize,
    /// Power of epsilon carried by the scaled derivative (already applied).
    pub epsilon_power: usize,
    /// Named parts that sum to `value` (energy only).
    pub components: Vec<(String, f64)>,
}

/// Gram matrix G_ab = int g psi F_a conj(F_b) of several fields over one
/// quadrature. Summation order is fixed, so results do not depend on the
/// number of worker threads.
fn gram<const D: usize>(
    fields: &[&FieldSpec<D>],
    spec: &QoISpec<D>,
    ord: &DerivativeOrder,
    weight: Option<&WeightFn<D>>,
    y: &[f64],
    times: &[(f64, f64)],
    h_x: f64,
) -> Result<(Vec<Complex64>, usize)> {
    let grid = spec.space_grid(h_x);
    let wq = grid.weights(spec.rule);
    let pts: Vec<Point<D>> = (0..grid.len()).map(|i| grid.point(i)).collect();
    let clip = spec.window.support_radius();
    let clip = clip.is_finite().then_some(clip);
    let m = fields.len();
    let mut acc = vec![Complex64::new(0.0, 0.0); m * m];
    for &(t, wt) in times {
        let vals = fields
            .iter()
            .map(|f| f.eval_grid(ord, t, &grid, clip))
            .collect::<Result<Vec<_>>>()?;
        const CHUNK: usize = 4096;
        let partial: Vec<Vec<Complex64>> = (0..grid.len().div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut s = vec![Complex64::new(0.0, 0.0); m * m];
                for i in c * CHUNK..((c + 1) * CHUNK).min(grid.len()) {
                    let psi = spec.window.eval(t, &pts[i]);
                    if psi == 0.0 {
                        continue;
                    }
                    let g = weight.map_or(1.0, |g| g(t, &pts[i], y));
                    let w = wq[i] * psi * g;
                    for a in 0..m {
                        for b in a..m {
                            s[a * m + b] += vals[a][i] * vals[b][i].conj() * w;
                        }
                    }
                }
                s
            })
            .collect();
        for s in partial {
            for (a, v) in acc.iter_mut().zip(s) {
                *a += v * wt;
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            acc[a * m + b] = acc[b * m + a].conj();
        }
    }
    Ok((acc, grid.len()))
}

fn ensure_time_coverage<const D: usize>(fs: &FieldSpec<D>, t_lo: f64, t_hi: f64, ord: &DerivativeOrder) -> Result<()> {
    let margin = if ord.p >= 1 { fs.epsilon * TIME_FD_FRACTION * ord.p as f64 } else { 0.0 };
    let (a, b) = fs.time_range();
    if t_lo - margin < a - 1e-12 || t_hi + margin > b + 1e-12 {
        return Err(GbError::InvalidArgument(format!(
            "QoI needs beams on [{}, {}] but the fan covers [{a}, {b}]",
            t_lo - margin,
            t_hi + margin
        )));
    }
    Ok(())
}

fn value_skeleton<const D: usize>(fs: &FieldSpec<D>, spec: &QoISpec<D>, y: &[f64]) -> QoIValue {
    QoIValue {
        kind: spec.kind,
        p: spec.ord.p,
        alpha: spec.ord.alpha.clone(),
        epsilon: fs.epsilon,
        y: y.to_vec(),
        t: None,
        value: 0.0,
        err_est: None,
        h_x: spec.h_x,
        h_t: None,
        space_nodes: 0,
        time_nodes: 1,
        epsilon_power: 2 * spec.ord.total(),
        components: Vec::new(),
    }
}

/// Space-only QoI at time `t`: int g |eps^{p+|alpha|} d_t^p d_x^alpha u|^2 psi dx.
pub fn qoi_space<const D: usize>(fs: &FieldSpec<D>, spec: &QoISpec<D>, t: f64, y: &[f64]) -> Result<QoIValue> {
    spec.check_resolution(fs.epsilon, false)?;
    ensure_time_coverage(fs, t, t, &spec.ord)?;
    let run = |h: f64| gram(&[fs], spec, &spec.ord, spec.weight.as_ref(), y, &[(t, 1.0)], h);
    let (g, n) = run(spec.h_x)?;
    let mut out = value_skeleton(fs, spec, y);
    out.kind = QoIKind::Space;
    out.t = Some(t);
    out.value = g[0].re;
    out.space_nodes = n;
    if spec.richardson {
        let (g2, _) = run(2.0 * spec.h_x)?;
        out.err_est = Some((g[0].re - g2[0].re).abs() / 3.0);
    }
    Ok(out)
}

fn time_nodes<const D: usize>(spec: &QoISpec<D>, h_t: f64) -> Result<Vec<(f64, f64)>> {
    let ax = spec.time_axis(h_t)?;
    Ok(ax.weights(spec.rule).into_iter().enumerate().map(|(i, w)| (ax.node(i), w)).collect())
}

fn spacetime_gram<const D: usize>(
    fields: &[&FieldSpec<D>],
    spec: &QoISpec<D>,
    ord: &DerivativeOrder,
    weight: Option<&WeightFn<D>>,
    y: &[f64],
    scale: f64,
) -> Result<(Vec<Complex64>, usize, usize)> {
    let ts = time_nodes(spec, spec.h_t * scale)?;
    let (g, n) = gram(fields, spec, ord, weight, y, &ts, spec.h_x * scale)?;
    Ok((g, n, ts.len()))
}

fn spacetime_common<const D: usize>(fs: &FieldSpec<D>, spec: &QoISpec<D>) -> Result<()> {
    spec.check_resolution(fs.epsilon, true)?;
    let (lo, hi) = spec
        .window
        .time
        .ok_or_else(|| GbError::InvalidArgument("space-time QoI needs a window with a time support".into()))?;
    ensure_time_coverage(fs, lo, hi, &spec.ord)
}

/// Space-time QoI: int int g |eps^{p+|alpha|} d_t^p d_x^alpha u|^2 psi dx dt.
pub fn qoi_spacetime<const D: usize>(fs: &FieldSpec<D>, spec: &QoISpec<D>, y: &[f64]) -> Result<QoIValue> {
    spacetime_common(fs, spec)?;
    let (g, n, nt) = spacetime_gram(&[fs], spec, &spec.ord, spec.weight.as_ref(), y, 1.0)?;
    let mut out = value_skeleton(fs, spec, y);
    out.value = g[0].re;
    out.h_t = Some(spec.h_t);
    out.space_nodes = n;
    out.time_nodes = nt;
    if spec.richardson {
        let (g2, _, _) = spacetime_gram(&[fs], spec, &spec.ord, spec.weight.as_ref(), y, 2.0)?;
        out.err_est = Some((g[0].re - g2[0].re).abs() / 3.0);
    }
    Ok(out)
}

/// Weighted energy eps^2 int int (|u_t|^2 + c^2 |grad u|^2) psi dx dt.
pub fn qoi_energy<const D: usize>(fs: &FieldSpec<D>, window: &WindowFunction<D>, h: (f64, f64), y: &[f64]) -> Result<QoIValue> {
    let spec = QoISpec::energy(window.clone(), h.0, h.1);
    spacetime_common(fs, &spec)?;
    let medium = fs.fan.medium.clone();
    let c2: WeightFn<D> = std::sync::Arc::new(move |_t, x, y| medium.eval(x, y).powi(2));
    let mut parts = Vec::with_capacity(D + 1);
    let mut nodes = (0, 0);
    let (g, n, nt) = spacetime_gram(&[fs], &spec, &DerivativeOrder::time(1, D), None, y, 1.0)?;
    nodes = (nodes.0.max(n), nodes.1.max(nt));
    parts.push(("kinetic".to_string(), g[0].re));
    for i in 0..D {
        let (g, _, _) = spacetime_gram(&[fs], &spec, &DerivativeOrder::space(i, D), Some(&c2), y, 1.0)?;
        parts.push((format!("potential_x{}", i + 1), g[0].re));
    }
    let mut out = value_skeleton(fs, &spec, y);
    out.value = parts.iter().map(|p| p.1).sum();
    out.epsilon_power = 2;
    out.h_t = Some(spec.h_t);
    out.space_nodes = nodes.0;
    out.time_nodes = nodes.1;
    out.components = parts;
    Ok(out)
}

/// Arias intensity eps^4 int int |u_tt|^2 psi dx dt.
pub fn qoi_arias<const D: usize>(fs: &FieldSpec<D>, window: &WindowFunction<D>, h: (f64, f64), y: &[f64]) -> Result<QoIValue> {
    qoi_spacetime(fs, &QoISpec::arias(window.clone(), h.0, h.1), y)
}

/// Dispatches on `spec.kind`; `t` is used by space-only QoIs.
pub fn evaluate_qoi<const D: usize>(fs: &FieldSpec<D>, spec: &QoISpec<D>, t: f64, y: &[f64]) -> Result<QoIValue> {
    match spec.kind {
        QoIKind::Space => qoi_space(fs, spec, t, y),
        QoIKind::Spacetime => qoi_spacetime(fs, spec, y),
        QoIKind::Energy => qoi_energy(fs, &spec.window, (spec.h_x, spec.h_t), y),
        QoIKind::Arias => qoi_arias(fs, &spec.window, (spec.h_x, spec.h_t), y),
    }
}

/// Two-mode QoI split as Q1 + Q2 + 2 Re Q3, with Q1, Q2 the one-mode values
/// and Q3 the cross term int g psi (d u+) conj(d u-).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeDecomposition {
    pub q_plus: f64,
    pub q_minus: f64,
    pub cross_re: f64,
    pub cross_im: f64,
}

impl ModeDecomposition {
    pub fn total(&self) -> f64 {
        self.q_plus + self.q_minus + 2.0 * self.cross_re
    }
}

/// Mode decomposition of a space (`t = Some`) or space-time (`t = None`) QoI.
pub fn mode_decomposition<const D: usize>(
    fs: &FieldSpec<D>,
    spec: &QoISpec<D>,
    t: Option<f64>,
    y: &[f64],
) -> Result<ModeDecomposition> {
    let plus = fs.with_modes(&[Mode::Plus])?;
    let minus = fs.with_modes(&[Mode::Minus])?;
    let g = match t {
        Some(t) => {
            spec.check_resolution(fs.epsilon, false)?;
            ensure_time_coverage(fs, t, t, &spec.ord)?;
            gram(&[&plus, &minus], spec, &spec.ord, spec.weight.as_ref(), y, &[(t, 1.0)], spec.h_x)?.0
        }
        None => {
            spacetime_common(fs, spec)?;
            spacetime_gram(&[&plus, &minus], spec, &spec.ord, spec.weight.as_ref(), y, 1.0)?.0
        }
    };
    Ok(ModeDecomposition {
        q_plus: g[0].re,
        q_minus: g[3].re,
        cross_re: g[1].re,
        cross_im: g[1].im,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// Observed infimum of Im Phi / |x - q|^2.
    pub delta: f64,
    pub eta_checked: f64,
    /// (t, y..., z..., x - q...) where the infimum was attained.
    pub witness: Vec<f64>,
    pub samples: usize,
    pub passed: bool,
}

/// Samples Im Phi(t, x) / |x - q|^2 on the ball |x - q| <= 2 eta for every
/// beam of the fan at each requested time. `x_samples` radii are taken along
/// `x_samples` directions (two in 1D).
pub fn check_admissibility<const D: usize>(
    fan: &BeamFan<D>,
    eta: f64,
    t_samples: &[f64],
    x_samples: usize,
) -> Result<AdmissibilityReport> {
    if !(eta > 0.0) || x_samples == 0 {
        return Err(GbError::InvalidArgument("admissibility check needs eta > 0 and at least one sample".into()));
    }
    let dirs = sample_directions::<D>(x_samples);
    let radii: Vec<f64> = (1..=x_samples).map(|j| 2.0 * eta * j as f64 / x_samples as f64).collect();
    let per_beam: Vec<(f64, Vec<f64>, usize)> = fan
        .beams
        .par_iter()
        .map(|b| {
            let mut best = (f64::INFINITY, Vec::new(), 0usize);
            for &t in t_samples {
                let s = b.trajectory.state_at(t);
                for d in &dirs {
                    for &r in &radii {
                        let off = d * r;
                        let ratio = eval_phase(&s, &(s.q + off)).im / (r * r);
                        best.2 += 1;
                        if ratio < best.0 {
                            let mut w = vec![t];
                            w.extend_from_slice(&fan.y);
                            w.extend(b.trajectory.z.iter());
                            w.extend(off.iter());
                            best = (ratio, w, best.2);
                        }
                    }
                }
            }
            best
        })
        .collect();
    let samples = per_beam.iter().map(|b| b.2).sum();
    let (delta, witness) = per_beam
        .into_iter()
        .fold((f64::INFINITY, Vec::new()), |acc, b| if b.0 < acc.0 { (b.0, b.1) } else { acc });
    Ok(AdmissibilityReport {
        delta,
        eta_checked: eta,
        witness,
        samples,
        passed: delta > 0.0,
    })
}

fn sample_directions<const D: usize>(n: usize) -> Vec<Point<D>> {
    match D {
        1 => vec![Point::<D>::from_element(1.0), Point::<D>::from_element(-1.0)],
        2 => (0..n.max(4))
            .map(|k| {
                let a = std::f64::consts::PI * k as f64 / n.max(4) as f64;
                Point::<D>::from_fn(|i, _| if i == 0 { a.cos() } else { a.sin() })
            })
            .collect(),
        _ => {
            let mut v = Vec::new();
            for i in 0..D {
                v.push(Point::<D>::from_fn(|k, _| if k == i { 1.0 } else { 0.0 }));
                for j in i + 1..D {
                    for s in [1.0, -1.0] {
                        v.push(Point::<D>::from_fn(|k, _| {
                            if k == i {
                                std::f64::consts::FRAC_1_SQRT_2
                            } else if k == j {
                                s * std::f64::consts::FRAC_1_SQRT_2
                            } else {
                                0.0
                            }
                        }));
                    }
                }
            }
            v
        }
    }
}
