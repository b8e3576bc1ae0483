//! First-order Gaussian beam dynamics: ray (q, p), complex Hessian M of the
//! phase, phase constant and leading amplitude, for both wave modes.

use nalgebra::{DMatrix, SMatrix, SVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{GbError, Result};
use crate::model::{InitialWaveData, MediumModel, Point, RealMatrix, ScenarioPreset, AMPLITUDE_TRUNCATION};
use crate::ode::{self, StepControl};

pub type CMatrix<const D: usize> = SMatrix<Complex64, D, D>;
pub type CVector<const D: usize> = SVector<Complex64, D>;

/// Below this |p| the ray direction is undefined.
pub const MIN_SLOWNESS: f64 = 1e-12;

/// One of the two characteristic families of the wave equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Plus,
    Minus,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::Plus, Mode::Minus];

    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Mode::Plus => 1.0,
            Mode::Minus => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Plus => "+",
            Mode::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamState<const D: usize> {
    pub t: f64,
    pub phi0: f64,
    pub q: Point<D>,
    pub p: Point<D>,
    pub m: CMatrix<D>,
    pub a: Complex64,
    pub mode: Mode,
}

/// Time derivative of every beam coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamRate<const D: usize> {
    pub phi0: f64,
    pub q: Point<D>,
    pub p: Point<D>,
    pub m: CMatrix<D>,
    pub a: Complex64,
}

/// Length of the flattened real state vector.
pub const fn state_len(d: usize) -> usize {
    3 + 2 * d + 2 * d * d
}

fn pack<const D: usize>(
    phi0: f64,
    q: &Point<D>,
    p: &Point<D>,
    m: &CMatrix<D>,
    a: Complex64,
    out: &mut [f64],
) {
    out[0] = phi0;
    let mut k = 1;
    for i in 0..D {
        out[k] = q[i];
        out[k + D] = p[i];
        k += 1;
    }
    k = 1 + 2 * D;
    for j in 0..D {
        for i in 0..D {
            out[k] = m[(i, j)].re;
            out[k + D * D] = m[(i, j)].im;
            k += 1;
        }
    }
    k = 1 + 2 * D + 2 * D * D;
    out[k] = a.re;
    out[k + 1] = a.im;
}

fn unpack<const D: usize>(v: &[f64]) -> (f64, Point<D>, Point<D>, CMatrix<D>, Complex64) {
    let q = Point::<D>::from_fn(|i, _| v[1 + i]);
    let p = Point::<D>::from_fn(|i, _| v[1 + D + i]);
    let base = 1 + 2 * D;
    let m = CMatrix::<D>::from_fn(|i, j| Complex64::new(v[base + j * D + i], v[base + D * D + j * D + i]));
    let k = 1 + 2 * D + 2 * D * D;
    (v[0], q, p, m, Complex64::new(v[k], v[k + 1]))
}

impl<const D: usize> BeamState<D> {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = vec![0.0; state_len(D)];
        pack(self.phi0, &self.q, &self.p, &self.m, self.a, &mut v);
        v
    }

    pub fn from_flat(t: f64, mode: Mode, v: &[f64]) -> Self {
        let (phi0, q, p, m, a) = unpack::<D>(v);
        Self { t, phi0, q, p, m, a, mode }
    }

    /// ||M - M^T||_inf (max absolute entry of the antisymmetric part, doubled).
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..D {
            for j in 0..D {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)]).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of Im M (symmetric part).
    pub fn min_imag_eigenvalue(&self) -> f64 {
        let im = RealMatrix::<D>::from_fn(|i, j| 0.5 * (self.m[(i, j)].im + self.m[(j, i)].im));
        min_symmetric_eigenvalue(&im)
    }

    /// H = c(q, y) |p|.
    pub fn hamiltonian(&self, medium: &MediumModel<D>, y: &[f64]) -> f64 {
        medium.eval(&self.q, y) * self.p.norm()
    }
}

impl<const D: usize> BeamRate<D> {
    pub fn from_flat(v: &[f64]) -> Self {
        let (phi0, q, p, m, a) = unpack::<D>(v);
        Self { phi0, q, p, m, a }
    }

    fn to_flat(self, out: &mut [f64]) {
        pack(self.phi0, &self.q, &self.p, &self.m, self.a, out);
    }
}

pub fn min_symmetric_eigenvalue<const D: usize>(m: &RealMatrix<D>) -> f64 {
    match D {
        0 => f64::INFINITY,
        1 => m[(0, 0)],
        2 => {
            let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
            let mean = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            mean - rad
        }
        _ => DMatrix::from_iterator(D, D, m.iter().copied())
            .symmetric_eigenvalues()
            .min(),
    }
}

/// Right-hand side of the first-order beam system for one mode.
///
/// With s = +-1 the mode sign and all medium quantities evaluated at (q, y):
/// q' = s c p/|p|, p' = -s |p| grad c, M' = -s (D + B^T M + M B + M C M),
/// a' = s/(2|p|) (-c tr M + grad c . p + c p^T M p / |p|^2) a, phi0' = 0.
pub fn ode_rhs<const D: usize>(s: &BeamState<D>, medium: &MediumModel<D>, y: &[f64]) -> Result<BeamRate<D>> {
    let pn = s.p.norm();
    if pn < MIN_SLOWNESS {
        return Err(GbError::DegenerateSlowness { norm: pn });
    }
    let sign = s.mode.sign();
    let c = medium.eval(&s.q, y);
    let gc = medium.grad_x(&s.q, y);
    let hc = medium.hess_x(&s.q, y);

    let b = (s.p * gc.transpose()) / pn;
    let cc = RealMatrix::<D>::identity() * (c / pn) - (s.p * s.p.transpose()) * (c / (pn * pn * pn));
    let dd = hc * pn;
    let to_c = |r: &RealMatrix<D>| r.map(|v| Complex64::new(v, 0.0));
    let (bc, ccc, dc) = (to_c(&b), to_c(&cc), to_c(&dd));
    let m = &s.m;
    let mdot = -(dc + bc.transpose() * m + m * bc + m * ccc * m) * Complex64::new(sign, 0.0);

    let pc = s.p.map(|v| Complex64::new(v, 0.0));
    let pmp = (pc.transpose() * m * pc)[(0, 0)];
    let factor = (-m.trace() * c + Complex64::new(gc.dot(&s.p), 0.0) + pmp * (c / (pn * pn))) * (sign / (2.0 * pn));

    Ok(BeamRate {
        phi0: 0.0,
        q: s.p * (sign * c / pn),
        p: gc * (-sign * pn),
        m: mdot,
        a: factor * s.a,
    })
}

/// Initial beam coefficients at launch point `z`.
pub fn init_beam<const D: usize>(
    z: &Point<D>,
    y: &[f64],
    data: &InitialWaveData<D>,
    medium: &MediumModel<D>,
    mode: Mode,
) -> Result<BeamState<D>> {
    let p = (data.grad_phi0)(z, y);
    let pn = p.norm();
    if pn <= MIN_SLOWNESS {
        return Err(GbError::StationaryPhasePoint {
            z: z.iter().copied().collect(),
            norm: pn,
        });
    }
    let hess = (data.hess_phi0)(z, y);
    let m = CMatrix::<D>::from_fn(|i, j| Complex64::new(hess[(i, j)], if i == j { 1.0 } else { 0.0 }));
    let c = medium.eval(z, y);
    let b0 = (data.b0)(z, y);
    let b1 = (data.b1)(z, y);
    // B1 / (i c |grad phi0|) = -i B1 / (c |grad phi0|)
    let a = Complex64::new(b0, -mode.sign() * b1 / (c * pn)) * 0.5;
    Ok(BeamState {
        t: 0.0,
        phi0: (data.phi0)(z, y),
        q: *z,
        p,
        m,
        a,
        mode,
    })
}

/// Dense trajectory of one beam on [0, T].
#[derive(Debug, Clone)]
pub struct BeamTrajectory<const D: usize> {
    pub mode: Mode,
    pub z: Point<D>,
    pub y: Vec<f64>,
    /// Hamiltonian c(z, y)|grad phi0(z, y)| at launch.
    pub h0: f64,
    pub times: Vec<f64>,
    pub states: Vec<BeamState<D>>,
    pub rates: Vec<BeamRate<D>>,
    /// max_t |H(t) - H0| / H0 over the accepted steps.
    pub max_hamiltonian_drift: f64,
    /// Largest ||M - M^T||_inf seen before re-symmetrization.
    pub max_asymmetry: f64,
    /// Smallest eigenvalue of Im M over the accepted steps.
    pub min_imag_eigenvalue: f64,
}

impl<const D: usize> BeamTrajectory<D> {
    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Cubic Hermite interpolation of the state at time `t` (clamped to [0, T]).
    pub fn state_at(&self, t: f64) -> BeamState<D> {
        if self.times.len() == 1 {
            return self.states[0];
        }
        let i = ode::locate(&self.times, t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let th = ((t - t0) / h).clamp(0.0, 1.0);
        if th == 0.0 {
            return self.states[i];
        }
        if th == 1.0 {
            return self.states[i + 1];
        }
        let [b0, b1, b2, b3] = ode::hermite_basis(th);
        let (s0, s1) = (&self.states[i], &self.states[i + 1]);
        let (r0, r1) = (&self.rates[i], &self.rates[i + 1]);
        let (w1, w3) = (b1 * h, b3 * h);
        BeamState {
            t,
            phi0: b0 * s0.phi0 + w1 * r0.phi0 + b2 * s1.phi0 + w3 * r1.phi0,
            q: s0.q * b0 + r0.q * w1 + s1.q * b2 + r1.q * w3,
            p: s0.p * b0 + r0.p * w1 + s1.p * b2 + r1.p * w3,
            m: s0.m * Complex64::new(b0, 0.0)
                + r0.m * Complex64::new(w1, 0.0)
                + s1.m * Complex64::new(b2, 0.0)
                + r1.m * Complex64::new(w3, 0.0),
            a: s0.a * b0 + r0.a * w1 + s1.a * b2 + r1.a * w3,
            mode: self.mode,
        }
    }
}

/// Integrates one beam from its launch data to time `t_end`.
#[allow(clippy::too_many_arguments)]
pub fn propagate<const D: usize>(
    z: &Point<D>,
    y: &[f64],
    data: &InitialWaveData<D>,
    medium: &MediumModel<D>,
    mode: Mode,
    t_end: f64,
    ctrl: &StepControl,
) -> Result<BeamTrajectory<D>> {
    if !(t_end >= 0.0) {
        return Err(GbError::InvalidArgument(format!("final time must be >= 0, got {t_end}")));
    }
    let s0 = init_beam(z, y, data, medium, mode)?;
    let h0 = s0.hamiltonian(medium, y);
    let r0 = ode_rhs(&s0, medium, y)?;
    let mut traj = BeamTrajectory {
        mode,
        z: *z,
        y: y.to_vec(),
        h0,
        times: vec![0.0],
        states: vec![s0],
        rates: vec![r0],
        max_hamiltonian_drift: 0.0,
        max_asymmetry: s0.asymmetry(),
        min_imag_eigenvalue: s0.min_imag_eigenvalue(),
    };
    if t_end == 0.0 {
        return Ok(traj);
    }
    let mut drift: f64 = 0.0;
    let mut asym: f64 = traj.max_asymmetry;
    let mut min_eig = traj.min_imag_eigenvalue;
    let hist = ode::integrate(
        |t, v, dv| {
            let s = BeamState::<D>::from_flat(t, mode, v);
            ode_rhs(&s, medium, y)?.to_flat(dv);
            Ok(())
        },
        |t, v| {
            let mut s = BeamState::<D>::from_flat(t, mode, v);
            let a = s.asymmetry();
            asym = asym.max(a);
            if a > ctrl.symmetry_tol {
                return Err(GbError::InvariantBreach {
                    t,
                    what: "M symmetry".into(),
                    value: a,
                });
            }
            s.m = (s.m + s.m.transpose()) * Complex64::new(0.5, 0.0);
            let e = s.min_imag_eigenvalue();
            min_eig = min_eig.min(e);
            if !(e > 0.0) {
                return Err(GbError::InvariantBreach {
                    t,
                    what: "Im M positive definiteness".into(),
                    value: e,
                });
            }
            let d = (s.hamiltonian(medium, y) - h0).abs() / h0;
            drift = drift.max(d);
            if d > ctrl.hamiltonian_tol {
                return Err(GbError::InvariantBreach {
                    t,
                    what: "Hamiltonian conservation".into(),
                    value: d,
                });
            }
            pack(s.phi0, &s.q, &s.p, &s.m, s.a, v);
            Ok(())
        },
        0.0,
        &s0.to_flat(),
        t_end,
        ctrl,
    )?;
    traj.times = hist.times;
    traj.states = hist
        .states
        .iter()
        .zip(&traj.times)
        .map(|(v, &t)| BeamState::from_flat(t, mode, v))
        .collect();
    traj.rates = hist.rates.iter().map(|v| BeamRate::from_flat(v)).collect();
    traj.max_hamiltonian_drift = drift;
    traj.max_asymmetry = asym;
    traj.min_imag_eigenvalue = min_eig;
    Ok(traj)
}

/// Uniform tensor launch grid with trapezoidal weights.
#[derive(Debug, Clone)]
pub struct LaunchGrid<const D: usize> {
    /// Nodes in row-major order (last axis fastest).
    pub nodes: Vec<Point<D>>,
    pub weights: Vec<f64>,
    pub counts: [usize; D],
    pub spacing: [f64; D],
}

impl<const D: usize> LaunchGrid<D> {
    /// Grid over `bx` with spacing at most `max_spacing` per axis. Node counts
    /// are odd so a symmetric box always has a node on its center plane.
    pub fn uniform(bx: &crate::model::BoxDomain<D>, max_spacing: f64) -> Self {
        let mut counts = [0usize; D];
        let mut spacing = [0.0; D];
        let mut axes: Vec<Vec<(f64, f64)>> = Vec::with_capacity(D);
        for k in 0..D {
            let len = bx.hi[k] - bx.lo[k];
            let mut n = ((len / max_spacing).ceil() as usize + 1).max(3);
            if n % 2 == 0 {
                n += 1;
            }
            let h = len / (n - 1) as f64;
            counts[k] = n;
            spacing[k] = h;
            axes.push(
                (0..n)
                    .map(|i| {
                        let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
                        (bx.lo[k] + i as f64 * h, w)
                    })
                    .collect(),
            );
        }
        let total: usize = counts.iter().product();
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = [0usize; D];
        for _ in 0..total {
            nodes.push(Point::<D>::from_fn(|k, _| axes[k][idx[k]].0));
            weights.push((0..D).map(|k| axes[k][idx[k]].1).product());
            for k in (0..D).rev() {
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self {
            nodes,
            weights,
            counts,
            spacing,
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct FanBeam<const D: usize> {
    pub node: usize,
    pub weight: f64,
    pub trajectory: BeamTrajectory<D>,
}

/// All beams of one or both modes launched from K0 at one parameter value.
#[derive(Clone)]
pub struct BeamFan<const D: usize> {
    pub y: Vec<f64>,
    pub medium: MediumModel<D>,
    pub grid: LaunchGrid<D>,
    pub modes: Vec<Mode>,
    pub beams: Vec<FanBeam<D>>,
    pub t_end: f64,
}

impl<const D: usize> BeamFan<D> {
    pub fn beams_of(&self, mode: Mode) -> impl Iterator<Item = &FanBeam<D>> {
        self.beams.iter().filter(move |b| b.trajectory.mode == mode)
    }

    pub fn count(&self, mode: Mode) -> usize {
        self.beams_of(mode).count()
    }

    /// Largest |q(t)| over all beams and sampled times.
    pub fn max_ray_distance(&self) -> f64 {
        self.beams
            .iter()
            .flat_map(|b| b.trajectory.states.iter().map(|s| s.q.norm()))
            .fold(0.0, f64::max)
    }

    /// Fan restricted to one mode.
    pub fn restrict(&self, modes: &[Mode]) -> Self {
        Self {
            y: self.y.clone(),
            medium: self.medium.clone(),
            grid: self.grid.clone(),
            modes: self.modes.iter().copied().filter(|m| modes.contains(m)).collect(),
            beams: self.beams.iter().filter(|b| modes.contains(&b.trajectory.mode)).cloned().collect(),
            t_end: self.t_end,
        }
    }
}

/// Default launch spacing sqrt(epsilon)/2: half the beam width.
pub fn default_z_spacing(epsilon: f64) -> f64 {
    0.5 * epsilon.sqrt()
}

/// Launch grid nodes whose amplitude reaches the truncation level for some
/// parameter in the box and that pass the scenario's launch filter.
pub fn active_launch_nodes<const D: usize>(s: &ScenarioPreset<D>, grid: &LaunchGrid<D>) -> Vec<usize> {
    let ys = s.params.grid(11);
    grid.nodes
        .iter()
        .enumerate()
        .filter(|(_, z)| {
            s.keeps_launch_point(z)
                && ys.iter().any(|y| {
                    (s.data.b0)(z, y).abs().max((s.data.b1)(z, y).abs()) >= AMPLITUDE_TRUNCATION
                })
        })
        .map(|(i, _)| i)
        .collect()
}

/// Propagates every active launch node for each requested mode up to `t_end`.
pub fn build_fan<const D: usize>(
    s: &ScenarioPreset<D>,
    y: &[f64],
    t_end: f64,
    z_spacing: f64,
    modes: &[Mode],
    ctrl: &StepControl,
) -> Result<BeamFan<D>> {
    if !(z_spacing > 0.0) {
        return Err(GbError::InvalidArgument(format!("z spacing must be > 0, got {z_spacing}")));
    }
    let grid = LaunchGrid::uniform(&s.data.support, z_spacing);
    let active = active_launch_nodes(s, &grid);
    let mut jobs: Vec<(usize, Mode)> = Vec::with_capacity(active.len() * modes.len());
    let mut modes_sorted = modes.to_vec();
    modes_sorted.sort();
    modes_sorted.dedup();
    for &mode in &modes_sorted {
        jobs.extend(active.iter().map(|&i| (i, mode)));
    }
    let beams = jobs
        .par_iter()
        .map(|&(i, mode)| {
            let z = grid.nodes[i];
            propagate(&z, y, &s.data, &s.medium, mode, t_end, ctrl)
                .map(|trajectory| FanBeam {
                    node: i,
                    weight: grid.weights[i],
                    trajectory,
                })
                .map_err(|e| GbError::BeamFailure {
                    z: z.iter().copied().collect(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BeamFan {
        y: y.to_vec(),
        medium: s.medium.clone(),
        grid,
        modes: modes_sorted,
        beams,
        t_end,
    })
}
