//! Medium, initial data and window abstractions, plus the named scenario presets.
//!
//! Every closure takes the spatial point `x` and the stochastic parameter `y`.
//! Scenarios are immutable after construction and cheap to clone (all
//! closures are reference counted).

use std::sync::Arc;

use nalgebra::{SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GbError, Result};
use crate::fd;

pub type Point<const D: usize> = SVector<f64, D>;
pub type RealMatrix<const D: usize> = SMatrix<f64, D, D>;

pub type ScalarFn<const D: usize> = Arc<dyn Fn(&Point<D>, &[f64]) -> f64 + Send + Sync>;
pub type GradientFn<const D: usize> = Arc<dyn Fn(&Point<D>, &[f64]) -> Point<D> + Send + Sync>;
pub type HessianFn<const D: usize> =
    Arc<dyn Fn(&Point<D>, &[f64]) -> RealMatrix<D> + Send + Sync>;
pub type WindowFn<const D: usize> = Arc<dyn Fn(f64, &Point<D>) -> f64 + Send + Sync>;
pub type WeightFn<const D: usize> = Arc<dyn Fn(f64, &Point<D>, &[f64]) -> f64 + Send + Sync>;
pub type LaunchFilter<const D: usize> = Arc<dyn Fn(&Point<D>) -> bool + Send + Sync>;

/// Amplitudes below this are treated as outside the initial-data support.
pub const AMPLITUDE_TRUNCATION: f64 = 1e-8;
/// Windows below this are treated as outside their support.
pub const WINDOW_TRUNCATION: f64 = 1e-10;
/// Step used when a scenario opts into finite-difference derivatives.
pub const FD_DERIVATIVE_STEP: f64 = 1e-5;

/// Axis-aligned box in R^D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain<const D: usize> {
    pub lo: Point<D>,
    pub hi: Point<D>,
}

impl<const D: usize> BoxDomain<D> {
    pub fn new(lo: Point<D>, hi: Point<D>) -> Self {
        Self { lo, hi }
    }

    pub fn symmetric(half_width: f64) -> Self {
        Self {
            lo: Point::<D>::repeat(-half_width),
            hi: Point::<D>::repeat(half_width),
        }
    }

    pub fn measure(&self) -> f64 {
        (0..D).map(|i| self.hi[i] - self.lo[i]).product()
    }

    pub fn contains(&self, x: &Point<D>) -> bool {
        (0..D).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }

    pub fn inflate(&self, margin: f64) -> Self {
        Self {
            lo: self.lo.add_scalar(-margin),
            hi: self.hi.add_scalar(margin),
        }
    }

    /// Largest distance from the origin to a point of the box.
    pub fn max_radius(&self) -> f64 {
        (0..D)
            .map(|i| self.lo[i].abs().max(self.hi[i].abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Box of stochastic parameters (dimension known only at run time).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim()
            && y.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= *l - 1e-12 && *v <= *h + 1e-12)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    /// Tensor grid with `per_axis` points per axis (corners included).
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let per_axis = per_axis.max(1);
        let mut out = vec![Vec::new()];
        for k in 0..self.dim() {
            let mut next = Vec::with_capacity(out.len() * per_axis);
            for prefix in &out {
                for i in 0..per_axis {
                    let s = if per_axis == 1 {
                        0.5
                    } else {
                        i as f64 / (per_axis - 1) as f64
                    };
                    let mut y = prefix.clone();
                    y.push(self.lo[k] + s * (self.hi[k] - self.lo[k]));
                    next.push(y);
                }
            }
            out = next;
        }
        out
    }
}

/// Wave speed c(x, y) with its spatial gradient and Hessian.
#[derive(Clone)]
pub struct MediumModel<const D: usize> {
    speed: ScalarFn<D>,
    grad: GradientFn<D>,
    hess: HessianFn<D>,
    pub c_min: f64,
    pub c_max: f64,
    uniform_in_x: bool,
}

impl<const D: usize> MediumModel<D> {
    pub fn new(
        speed: ScalarFn<D>,
        grad: GradientFn<D>,
        hess: HessianFn<D>,
        c_min: f64,
        c_max: f64,
    ) -> Self {
        Self {
            speed,
            grad,
            hess,
            c_min,
            c_max,
            uniform_in_x: false,
        }
    }

    /// Speed that depends on `y` only. Gradient and Hessian vanish identically.
    pub fn uniform(speed: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, c_min: f64, c_max: f64) -> Self {
        Self {
            speed: Arc::new(move |_x, y| speed(y)),
            grad: Arc::new(|_x, _y| Point::<D>::zeros()),
            hess: Arc::new(|_x, _y| RealMatrix::<D>::zeros()),
            c_min,
            c_max,
            uniform_in_x: true,
        }
    }

    /// Medium given by its scalar speed only; derivatives come from centered
    /// finite differences with step [`FD_DERIVATIVE_STEP`].
    pub fn from_speed(speed: ScalarFn<D>, c_min: f64, c_max: f64) -> Self {
        log::warn!("medium without analytic derivatives: using finite differences (h = {FD_DERIVATIVE_STEP:e})");
        let s1 = speed.clone();
        let s2 = speed.clone();
        Self {
            speed,
            grad: Arc::new(move |x, y| fd::central_gradient(|z| s1(z, y), x, FD_DERIVATIVE_STEP)),
            hess: Arc::new(move |x, y| fd::central_hessian(|z| s2(z, y), x, FD_DERIVATIVE_STEP)),
            c_min,
            c_max,
            uniform_in_x: false,
        }
    }

    #[inline]
    pub fn eval(&self, x: &Point<D>, y: &[f64]) -> f64 {
        (self.speed)(x, y)
    }

    #[inline]
    pub fn grad_x(&self, x: &Point<D>, y: &[f64]) -> Point<D> {
        (self.grad)(x, y)
    }

    #[inline]
    pub fn hess_x(&self, x: &Point<D>, y: &[f64]) -> RealMatrix<D> {
        (self.hess)(x, y)
    }

    pub fn is_uniform_in_x(&self) -> bool {
        self.uniform_in_x
    }
}

/// Initial amplitudes B0, B1 and phase phi0 with the phase derivatives.
#[derive(Clone)]
pub struct InitialWaveData<const D: usize> {
    pub b0: ScalarFn<D>,
    pub b1: ScalarFn<D>,
    pub phi0: ScalarFn<D>,
    pub grad_phi0: GradientFn<D>,
    pub hess_phi0: HessianFn<D>,
    /// K0: outside this box |B0|, |B1| fall below [`AMPLITUDE_TRUNCATION`].
    pub support: BoxDomain<D>,
}

/// Nonnegative test function psi(t, x) with its declared support.
#[derive(Clone)]
pub struct WindowFunction<const D: usize> {
    psi: WindowFn<D>,
    pub space: BoxDomain<D>,
    /// `None` for space-only windows (psi does not depend on t).
    pub time: Option<(f64, f64)>,
    /// Set when the spatial support is the ball of this radius around 0.
    pub radius: Option<f64>,
}

impl<const D: usize> WindowFunction<D> {
    pub fn new(psi: WindowFn<D>, space: BoxDomain<D>, time: Option<(f64, f64)>) -> Self {
        Self {
            psi,
            space,
            time,
            radius: None,
        }
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = Some(radius);
        self
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &Point<D>) -> f64 {
        (self.psi)(t, x)
    }

    pub fn time_dependent(&self) -> bool {
        self.time.is_some()
    }

    /// Spatial radius R with supp psi(t, .) inside the ball B_R.
    pub fn support_radius(&self) -> f64 {
        self.radius.unwrap_or_else(|| self.space.max_radius())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind1d {
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind2d {
    Abs,
    Linear,
}

/// A complete experiment setup.
#[derive(Clone)]
pub struct ScenarioPreset<const D: usize> {
    pub name: String,
    pub medium: MediumModel<D>,
    pub data: InitialWaveData<D>,
    pub window: WindowFunction<D>,
    pub spacetime_window: WindowFunction<D>,
    pub weight: WeightFn<D>,
    pub params: ParamBox,
    pub launch_filter: Option<LaunchFilter<D>>,
    /// Observation time used by the space-only QoI in the reference experiments.
    pub observation_time: f64,
    /// Diagonal parameter line y = origin + r * direction, r in [0, 1].
    pub diagonal: Option<(Vec<f64>, Vec<f64>)>,
}

impl<const D: usize> ScenarioPreset<D> {
    pub fn stochastic_dim(&self) -> usize {
        self.params.dim()
    }

    pub fn with_params(mut self, params: ParamBox) -> Self {
        self.params = params;
        self
    }

    pub fn with_launch_filter(mut self, filter: Option<LaunchFilter<D>>) -> Self {
        self.launch_filter = filter;
        self
    }

    pub fn keeps_launch_point(&self, z: &Point<D>) -> bool {
        self.launch_filter.as_ref().map_or(true, |f| f(z))
    }

    /// Point on the diagonal parameter line (or the center of the box when
    /// the scenario has no diagonal).
    pub fn diagonal_point(&self, r: f64) -> Vec<f64> {
        match &self.diagonal {
            Some((o, d)) => o.iter().zip(d).map(|(o, d)| o + r * d).collect(),
            None => self.params.center(),
        }
    }
}

fn gaussian_radius(rate: f64, level: f64) -> f64 {
    (-level.ln() / rate).sqrt()
}

fn unit_weight<const D: usize>() -> WeightFn<D> {
    Arc::new(|_t, _x, _y| 1.0)
}

/// Time at which the 1D space-time window peaks.
pub const SPACETIME_PEAK_1D: f64 = 1.75;

/// One-dimensional experiment: two Gaussian pulses at +-s, speed c = y.
pub fn preset_1d(kind: PhaseKind1d, s: f64) -> Result<ScenarioPreset<1>> {
    if !(s > 0.0) {
        return Err(GbError::InvalidArgument(format!("pulse offset s must be > 0, got {s}")));
    }
    let b0: ScalarFn<1> =
        Arc::new(move |x, _y| (-5.0 * (x[0] + s).powi(2)).exp() + (-5.0 * (x[0] - s).powi(2)).exp());
    let zero: ScalarFn<1> = Arc::new(|_x, _y| 0.0);
    let (phi0, grad_phi0, hess_phi0): (ScalarFn<1>, GradientFn<1>, HessianFn<1>) = match kind {
        PhaseKind1d::Linear => (
            Arc::new(|x, _y| x[0]),
            Arc::new(|_x, _y| Point::<1>::new(1.0)),
            Arc::new(|_x, _y| RealMatrix::<1>::zeros()),
        ),
        PhaseKind1d::Quadratic => (
            Arc::new(|x, _y| x[0] * x[0]),
            Arc::new(|x, _y| Point::<1>::new(2.0 * x[0])),
            Arc::new(|_x, _y| RealMatrix::<1>::new(2.0)),
        ),
    };
    let r0 = gaussian_radius(5.0, AMPLITUDE_TRUNCATION);
    let support = BoxDomain::new(Point::<1>::new(-s - r0), Point::<1>::new(s + r0));

    let rx = gaussian_radius(5.0, WINDOW_TRUNCATION);
    let window = WindowFunction::new(
        Arc::new(|_t, x| (-5.0 * x[0] * x[0]).exp()),
        BoxDomain::symmetric(rx),
        None,
    );
    let rt = gaussian_radius(300.0, WINDOW_TRUNCATION);
    let spacetime_window = WindowFunction::new(
        Arc::new(|t, x| (-5.0 * x[0] * x[0] - 300.0 * (t - SPACETIME_PEAK_1D).powi(2)).exp()),
        BoxDomain::symmetric(rx),
        Some((SPACETIME_PEAK_1D - rt, SPACETIME_PEAK_1D + rt)),
    );
    let name = match kind {
        PhaseKind1d::Linear => format!("preset_1d(linear, s={s})"),
        PhaseKind1d::Quadratic => format!("preset_1d(quadratic, s={s})"),
    };
    Ok(ScenarioPreset {
        name,
        medium: MediumModel::uniform(|y| y[0], 1.5, 2.0),
        data: InitialWaveData {
            b0,
            b1: zero,
            phi0,
            grad_phi0,
            hess_phi0,
            support,
        },
        window,
        spacetime_window,
        weight: unit_weight(),
        params: ParamBox::new(vec![1.5], vec![2.0]),
        launch_filter: None,
        observation_time: 2.0,
        diagonal: None,
    })
}

/// Compactly supported bump exp(-|x|^2 / (1 - |x|^2)) on the unit ball.
pub fn unit_bump<const D: usize>(x: &Point<D>) -> f64 {
    let r2 = x.norm_squared();
    if r2 >= 1.0 {
        0.0
    } else {
        (-r2 / (1.0 - r2)).exp()
    }
}

/// Margin around x1 = 0 excluded from the launch grid of the |x1| phase.
pub const ABS_PHASE_MARGIN: f64 = 0.05;

/// Two-dimensional experiment: pulses at (+-1, y1), speed c = y2.
pub fn preset_2d(kind: PhaseKind2d) -> ScenarioPreset<2> {
    let b0: ScalarFn<2> = Arc::new(|x, y| {
        let dy = (x[1] - y[0]).powi(2);
        (-10.0 * ((x[0] + 1.0).powi(2) + dy)).exp() + (-10.0 * ((x[0] - 1.0).powi(2) + dy)).exp()
    });
    let zero: ScalarFn<2> = Arc::new(|_x, _y| 0.0);
    let hess: HessianFn<2> = Arc::new(|_x, _y| RealMatrix::<2>::new(0.0, 0.0, 0.0, 2.0));
    let (phi0, grad_phi0, filter): (ScalarFn<2>, GradientFn<2>, Option<LaunchFilter<2>>) = match kind {
        PhaseKind2d::Abs => (
            Arc::new(|x, y| x[0].abs() + (x[1] - y[0]).powi(2)),
            Arc::new(|x, y| Point::<2>::new(x[0].signum(), 2.0 * (x[1] - y[0]))),
            Some(Arc::new(|z: &Point<2>| z[0].abs() >= ABS_PHASE_MARGIN)),
        ),
        PhaseKind2d::Linear => (
            Arc::new(|x, y| x[0] + (x[1] - y[0]).powi(2)),
            Arc::new(|x, y| Point::<2>::new(1.0, 2.0 * (x[1] - y[0]))),
            None,
        ),
    };
    let params = ParamBox::new(vec![0.0, 0.8], vec![0.5, 1.2]);
    let r0 = gaussian_radius(10.0, AMPLITUDE_TRUNCATION);
    let support = BoxDomain::new(
        Point::<2>::new(-1.0 - r0, params.lo[0] - r0),
        Point::<2>::new(1.0 + r0, params.hi[0] + r0),
    );
    let window = WindowFunction::new(Arc::new(|_t, x| unit_bump(x)), BoxDomain::symmetric(1.0), None)
        .with_radius(1.0);
    let spacetime_window = WindowFunction::new(
        Arc::new(|t, x: &Point<2>| {
            let s2 = (t - 1.0).powi(2);
            let r2 = x.norm_squared();
            if r2 >= 1.0 || s2 >= 0.04 {
                0.0
            } else {
                (-r2 / (1.0 - r2) - 10.0 * s2 / (0.04 - s2)).exp()
            }
        }),
        BoxDomain::symmetric(1.0),
        Some((0.8, 1.2)),
    )
    .with_radius(1.0);
    let name = match kind {
        PhaseKind2d::Abs => "preset_2d(abs)",
        PhaseKind2d::Linear => "preset_2d(linear)",
    };
    ScenarioPreset {
        name: name.to_string(),
        medium: MediumModel::uniform(|y| y[1], 0.8, 1.2),
        data: InitialWaveData {
            b0,
            b1: zero,
            phi0,
            grad_phi0,
            hess_phi0: hess,
            support,
        },
        window,
        spacetime_window,
        weight: unit_weight(),
        params,
        launch_filter: filter,
        observation_time: 1.0,
        diagonal: Some((vec![0.0, 0.8], vec![0.5, 0.4])),
    }
}

/// One violated assumption with the point where it was observed.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub assumption: String,
    pub witness: Vec<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub passed: bool,
    pub samples: usize,
    /// Smallest observed speed over the samples.
    pub min_speed: f64,
    pub max_speed: f64,
    /// Worst relative deviation between analytic and finite-difference derivatives.
    pub worst_derivative_dev: f64,
    pub min_phase_gradient: f64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn into_result(self) -> Result<Self> {
        match self.violations.first() {
            None => Ok(self),
            Some(v) => Err(GbError::ValidationFailure {
                assumption: v.assumption.clone(),
                witness: v.witness.clone(),
                detail: v.detail.clone(),
            }),
        }
    }
}

const VALIDATION_FD_STEP: f64 = 1e-4;
const VALIDATION_FD_RTOL: f64 = 1e-5;
/// Spacing of the launch grid inspected by [`validate_scenario`].
pub const VALIDATION_LAUNCH_SPACING: f64 = 0.05;

fn rel_dev(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn witness<const D: usize>(x: &Point<D>, y: &[f64]) -> Vec<f64> {
    x.iter().chain(y.iter()).copied().collect()
}

/// Checks the speed bounds, phase-gradient and derivative-consistency
/// assumptions at `samples` pseudo-random points plus the launch grid.
pub fn validate_scenario<const D: usize>(s: &ScenarioPreset<D>, samples: usize) -> Result<ValidationReport> {
    if samples == 0 {
        return Err(GbError::InvalidArgument("samples must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_ba5e);
    let mut report = ValidationReport {
        passed: true,
        samples,
        min_speed: f64::INFINITY,
        max_speed: f64::NEG_INFINITY,
        worst_derivative_dev: 0.0,
        min_phase_gradient: f64::INFINITY,
        violations: Vec::new(),
    };
    let violate = |report: &mut ValidationReport, assumption: &str, w: Vec<f64>, detail: String| {
        if report.violations.len() < 32 {
            report.violations.push(Violation {
                assumption: assumption.to_string(),
                witness: w,
                detail,
            });
        }
    };
    let m = &s.medium;
    if !(m.c_min > 0.0) || m.c_max < m.c_min {
        violate(
            &mut report,
            "A1",
            vec![],
            format!("speed bounds [{}, {}] are not strictly positive", m.c_min, m.c_max),
        );
    }

    let region = s.data.support.inflate(1.0);
    let mut ys = s.params.grid(2);
    ys.push(s.params.center());
    for _ in 0..samples {
        let y: Vec<f64> = (0..s.stochastic_dim())
            .map(|k| rng.gen_range(s.params.lo[k]..=s.params.hi[k]))
            .collect();
        ys.push(y);
    }
    for y in ys.iter() {
        let x = Point::<D>::from_fn(|k, _| rng.gen_range(region.lo[k]..=region.hi[k]));
        let c = m.eval(&x, y);
        report.min_speed = report.min_speed.min(c);
        report.max_speed = report.max_speed.max(c);
        if !(c > 0.0) || c < m.c_min - 1e-12 || c > m.c_max + 1e-12 {
            violate(
                &mut report,
                "A1",
                witness(&x, y),
                format!("c = {c} outside [{}, {}]", m.c_min, m.c_max),
            );
        }
        let dev = derivative_deviation(|z| m.eval(z, y), m.grad_x(&x, y), m.hess_x(&x, y), &x);
        report.worst_derivative_dev = report.worst_derivative_dev.max(dev);
        if dev > VALIDATION_FD_RTOL {
            violate(&mut report, "A1", witness(&x, y), format!("speed derivative mismatch {dev:e}"));
        }
        // The phase only needs to be smooth where beams are launched.
        if !s.keeps_launch_point(&x) {
            continue;
        }
        let phi = &s.data.phi0;
        let dev = derivative_deviation(
            |z| phi(z, y),
            (s.data.grad_phi0)(&x, y),
            (s.data.hess_phi0)(&x, y),
            &x,
        );
        report.worst_derivative_dev = report.worst_derivative_dev.max(dev);
        if dev > VALIDATION_FD_RTOL {
            violate(&mut report, "A3", witness(&x, y), format!("phase derivative mismatch {dev:e}"));
        }
    }

    // Launch grid: non-vanishing, consistent phase gradient at every active node.
    let y = s.params.center();
    let grid = crate::beam::LaunchGrid::uniform(&s.data.support, VALIDATION_LAUNCH_SPACING);
    for z in grid.nodes.iter() {
        if !s.keeps_launch_point(z) || !amplitude_is_active(s, z) {
            continue;
        }
        let g = (s.data.grad_phi0)(z, &y);
        report.min_phase_gradient = report.min_phase_gradient.min(g.norm());
        if g.norm() <= 1e-12 {
            violate(&mut report, "A3", witness(z, &y), "vanishing phase gradient".into());
            continue;
        }
        let phi = &s.data.phi0;
        let fd_g = fd::central_gradient(|x| phi(x, &y), z, VALIDATION_FD_STEP);
        let dev = (0..D).map(|k| rel_dev(g[k], fd_g[k])).fold(0.0, f64::max);
        report.worst_derivative_dev = report.worst_derivative_dev.max(dev);
        if dev > VALIDATION_FD_RTOL {
            violate(
                &mut report,
                "A3",
                witness(z, &y),
                format!("phase gradient check failed on launch grid ({dev:e})"),
            );
        }
    }

    // Truncation of amplitudes outside K0 and of windows outside their support.
    let shell = |bx: &BoxDomain<D>, rng: &mut ChaCha8Rng| -> Point<D> {
        let mut x = Point::<D>::from_fn(|k, _| rng.gen_range(bx.lo[k]..=bx.hi[k]));
        let k = rng.gen_range(0..D);
        let off = rng.gen_range(1e-6..0.5);
        x[k] = if rng.gen_bool(0.5) { bx.lo[k] - off } else { bx.hi[k] + off };
        x
    };
    for _ in 0..samples {
        let y: Vec<f64> = (0..s.stochastic_dim())
            .map(|k| rng.gen_range(s.params.lo[k]..=s.params.hi[k]))
            .collect();
        let x = shell(&s.data.support, &mut rng);
        let b = (s.data.b0)(&x, &y).abs().max((s.data.b1)(&x, &y).abs());
        if b > AMPLITUDE_TRUNCATION * (1.0 + 1e-6) {
            violate(&mut report, "A2", witness(&x, &y), format!("|B| = {b:e} outside K0"));
        }
        for w in [&s.window, &s.spacetime_window] {
            let x = shell(&w.space, &mut rng);
            let t = match w.time {
                Some((a, b)) => rng.gen_range(a..=b),
                None => s.observation_time,
            };
            let v = w.eval(t, &x);
            if v > WINDOW_TRUNCATION * (1.0 + 1e-6) || v < 0.0 {
                violate(&mut report, "A6", witness(&x, &[t]), format!("psi = {v:e} outside support"));
            }
        }
    }
    report.passed = report.violations.is_empty();
    Ok(report)
}

/// |B0| or |B1| reaches the truncation level somewhere on the parameter box.
pub fn amplitude_is_active<const D: usize>(s: &ScenarioPreset<D>, z: &Point<D>) -> bool {
    s.params
        .grid(11)
        .iter()
        .any(|y| (s.data.b0)(z, y).abs().max((s.data.b1)(z, y).abs()) >= AMPLITUDE_TRUNCATION)
}

fn derivative_deviation<const D: usize>(
    f: impl Fn(&Point<D>) -> f64 + Copy,
    grad: Point<D>,
    hess: RealMatrix<D>,
    x: &Point<D>,
) -> f64 {
    let g = fd::central_gradient(f, x, VALIDATION_FD_STEP);
    let h = fd::central_hessian(f, x, VALIDATION_FD_STEP);
    let mut dev: f64 = 0.0;
    for i in 0..D {
        dev = dev.max(rel_dev(grad[i], g[i]));
        for j in 0..D {
            dev = dev.max(rel_dev(hess[(i, j)], h[(i, j)]));
        }
    }
    dev
}
