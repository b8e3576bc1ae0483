//! Superposed Gaussian beam fields and their scaled space-time derivatives.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{ode_rhs, BeamFan, BeamState, CMatrix, CVector, Mode};
use crate::error::{GbError, Result};
use crate::model::{Point, RealMatrix};
use crate::quad::UniformGrid;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A beam is dropped where its Gaussian envelope is below e^{-BEAM_RADIUS_SIGMAS^2}.
pub const BEAM_RADIUS_SIGMAS: f64 = 6.0;

/// Finite-difference step in t, as a fraction of epsilon, for time orders above one.
pub const TIME_FD_FRACTION: f64 = 1.0 / 20.0;

/// Smooth transition: 1 for s <= 0, 0 for s >= 1.
pub fn transition(s: f64) -> f64 {
    transition_derivatives(s).0
}

/// (B, B', B'') of the transition profile.
pub fn transition_derivatives(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let u = s * (1.0 - s);
    let g = (2.0 * s - 1.0) / u;
    let g1 = (2.0 * s * s - 2.0 * s + 1.0) / (u * u);
    let g2 = ((4.0 * s - 2.0) * u - 2.0 * (2.0 * s * s - 2.0 * s + 1.0) * (1.0 - 2.0 * s)) / (u * u * u);
    let b = 1.0 / (1.0 + g.exp());
    // B(1-B) written to stay finite when e^g overflows.
    let c = (0.5 * g).cosh();
    let bb = if c.is_finite() { 0.25 / (c * c) } else { 0.0 };
    let b1 = -bb * g1;
    let b2 = -b1 * (1.0 - 2.0 * b) * g1 - bb * g2;
    (b, if b1.is_finite() { b1 } else { 0.0 }, if b2.is_finite() { b2 } else { 0.0 })
}

/// Beam cutoff rho_eta(d) = B((|d| - eta)/eta); `eta = None` means no cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub eta: Option<f64>,
}

impl CutoffSpec {
    pub const NONE: CutoffSpec = CutoffSpec { eta: None };

    pub fn finite(eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(GbError::InvalidArgument(format!("cutoff width must be positive and finite, got {eta}")));
        }
        Ok(Self { eta: Some(eta) })
    }

    pub fn profile<const D: usize>(&self, d: &Point<D>) -> f64 {
        match self.eta {
            None => 1.0,
            Some(eta) => transition((d.norm() - eta) / eta),
        }
    }

    /// Value, gradient and Hessian of the profile at offset `d`.
    pub fn profile_derivatives<const D: usize>(&self, d: &Point<D>) -> (f64, Point<D>, RealMatrix<D>) {
        let zero = (Point::<D>::zeros(), RealMatrix::<D>::zeros());
        let Some(eta) = self.eta else {
            return (1.0, zero.0, zero.1);
        };
        let r = d.norm();
        if r <= eta {
            return (1.0, zero.0, zero.1);
        }
        if r >= 2.0 * eta {
            return (0.0, zero.0, zero.1);
        }
        let (b, b1, b2) = transition_derivatives((r - eta) / eta);
        let u = d / r;
        let uu = u * u.transpose();
        let grad = u * (b1 / eta);
        let hess = uu * (b2 / (eta * eta)) + (RealMatrix::<D>::identity() - uu) * (b1 / (eta * r));
        (b, grad, hess)
    }

    /// Radius beyond which the profile vanishes.
    pub fn support_radius(&self) -> f64 {
        self.eta.map_or(f64::INFINITY, |e| 2.0 * e)
    }
}

/// Time order p and spatial multi-index alpha of a scaled derivative.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DerivativeOrder {
    pub p: usize,
    pub alpha: Vec<usize>,
}

/// Normalized spatial part of a derivative order (|alpha| <= 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spatial {
    Zero,
    First(usize),
    Second(usize, usize),
}

impl DerivativeOrder {
    pub fn new(p: usize, alpha: Vec<usize>) -> Self {
        Self { p, alpha }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(0, vec![0; dim])
    }

    pub fn time(p: usize, dim: usize) -> Self {
        Self::new(p, vec![0; dim])
    }

    pub fn space(axis: usize, dim: usize) -> Self {
        let mut alpha = vec![0; dim];
        alpha[axis] = 1;
        Self::new(0, alpha)
    }

    pub fn total(&self) -> usize {
        self.p + self.alpha.iter().sum::<usize>()
    }

    pub fn spatial(&self, dim: usize) -> Result<Spatial> {
        let unsupported = || GbError::UnsupportedOrder {
            p: self.p,
            alpha: self.alpha.clone(),
        };
        if self.alpha.len() != dim {
            return Err(unsupported());
        }
        let mut axes = Vec::new();
        for (k, &a) in self.alpha.iter().enumerate() {
            axes.extend(std::iter::repeat(k).take(a));
        }
        match axes[..] {
            [] => Ok(Spatial::Zero),
            [i] => Ok(Spatial::First(i)),
            [i, j] => Ok(Spatial::Second(i, j)),
            _ => Err(unsupported()),
        }
    }

    fn with_p(&self, p: usize) -> Self {
        Self::new(p, self.alpha.clone())
    }
}

/// Complex phase Phi = phi0 + d.p + d^T M d / 2 with d = x - q.
pub fn eval_phase<const D: usize>(s: &BeamState<D>, x: &Point<D>) -> Complex64 {
    let d = (x - s.q).map(|v| Complex64::new(v, 0.0));
    let quad = (d.transpose() * s.m * d)[(0, 0)];
    Complex64::new(s.phi0 + (x - s.q).dot(&s.p), 0.0) + quad * 0.5
}

/// Single beam a rho(x - q) exp(i Phi / epsilon).
pub fn eval_beam<const D: usize>(s: &BeamState<D>, x: &Point<D>, epsilon: f64, cutoff: &CutoffSpec) -> Complex64 {
    let rho = cutoff.profile(&(x - s.q));
    if rho == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    s.a * rho * (I * eval_phase(s, x) / epsilon).exp()
}

/// Beam coefficients at one time, with the superposition weight folded into
/// the amplitude.
#[derive(Debug, Clone, Copy)]
pub struct BeamSlice<const D: usize> {
    pub phi0: f64,
    pub q: Point<D>,
    pub p: Point<D>,
    pub m: CMatrix<D>,
    pub amp: Complex64,
    pub phi0_dot: f64,
    pub q_dot: Point<D>,
    pub p_dot: Point<D>,
    pub m_dot: CMatrix<D>,
    pub amp_dot: Complex64,
    /// Offsets beyond this radius are treated as zero.
    pub radius: f64,
}

fn to_complex<const D: usize>(v: &Point<D>) -> CVector<D> {
    v.map(|x| Complex64::new(x, 0.0))
}

impl<const D: usize> BeamSlice<D> {
    #[inline]
    fn phase(&self, d: &Point<D>) -> Complex64 {
        let dc = to_complex(d);
        Complex64::new(self.phi0 + d.dot(&self.p), 0.0) + (dc.transpose() * self.m * dc)[(0, 0)] * 0.5
    }

    /// Polynomial prefactor multiplying exp(i Phi/eps) in the scaled derivative.
    /// Time order is 0 or 1; a time derivative with a finite cutoff is only
    /// supported for alpha = 0.
    #[inline]
    fn factor(&self, time: bool, sp: Spatial, d: &Point<D>, eps: f64, cutoff: &CutoffSpec) -> Complex64 {
        let (rho, grad_rho, hess_rho) = match cutoff.eta {
            None => (1.0, Point::<D>::zeros(), RealMatrix::<D>::zeros()),
            Some(_) => cutoff.profile_derivatives(d),
        };
        if rho == 0.0 && grad_rho == Point::<D>::zeros() {
            return Complex64::new(0.0, 0.0);
        }
        let w = self.amp * rho;
        let g = || self.p.map(|v| Complex64::new(v, 0.0)) + self.m * to_complex(d);
        // eps d_t W and i W Phi_t
        let time_part = || {
            let dc = to_complex(d);
            let qd = to_complex(&self.q_dot);
            let phi_t = Complex64::new(self.phi0_dot + d.dot(&self.p_dot) - self.q_dot.dot(&self.p), 0.0)
                + (dc.transpose() * self.m_dot * dc)[(0, 0)] * 0.5
                - (qd.transpose() * self.m * dc)[(0, 0)];
            let wt = (self.amp_dot * rho - self.amp * grad_rho.dot(&self.q_dot)) * eps;
            (wt + I * w * phi_t, phi_t)
        };
        let g_dot = |dv: &Point<D>| {
            let dc = to_complex(dv);
            to_complex(&self.p_dot) + self.m_dot * dc - self.m * to_complex(&self.q_dot)
        };
        match (time, sp) {
            (false, Spatial::Zero) => w,
            (false, Spatial::First(i)) => self.amp * grad_rho[i] * eps + I * w * g()[i],
            (false, Spatial::Second(i, j)) => {
                let g = g();
                self.amp * (hess_rho[(i, j)] * eps * eps)
                    + I * self.amp * eps * (g[j] * grad_rho[i] + g[i] * grad_rho[j])
                    + w * (-g[i] * g[j] + I * eps * self.m[(i, j)])
            }
            (true, Spatial::Zero) => time_part().0,
            (true, Spatial::First(i)) => {
                let (t, _) = time_part();
                I * (self.amp * eps * g_dot(d)[i] + g()[i] * t)
            }
            (true, Spatial::Second(i, j)) => {
                let (t, _) = time_part();
                let g = g();
                let gd = g_dot(d);
                t * (-g[i] * g[j] + I * eps * self.m[(i, j)])
                    + self.amp * eps * (-gd[i] * g[j] - g[i] * gd[j] + I * eps * self.m_dot[(i, j)])
            }
        }
    }
}

/// All beams of a field frozen at one time.
#[derive(Debug, Clone)]
pub struct FieldSlice<const D: usize> {
    pub t: f64,
    pub epsilon: f64,
    pub cutoff: CutoffSpec,
    pub beams: Vec<BeamSlice<D>>,
}

impl<const D: usize> FieldSlice<D> {
    /// Scaled derivative with time order 0 or 1 at a single point.
    pub fn eval_point(&self, time: bool, sp: Spatial, x: &Point<D>) -> Complex64 {
        let eps = self.epsilon;
        let mut acc = Complex64::new(0.0, 0.0);
        for b in &self.beams {
            let d = x - b.q;
            if d.norm_squared() > b.radius * b.radius {
                continue;
            }
            acc += b.factor(time, sp, &d, eps, &self.cutoff) * (I * b.phase(&d) / eps).exp();
        }
        acc
    }

    /// Same as [`eval_point`](Self::eval_point) on every node of `grid`. Nodes
    /// farther than `clip` from the origin are left at zero.
    pub fn eval_grid(&self, time: bool, sp: Spatial, grid: &UniformGrid<D>, clip: Option<f64>) -> Vec<Complex64> {
        let eps = self.epsilon;
        let last = D - 1;
        let ax = grid.axes[last];
        let row_len = ax.n;
        let seg = if D >= 2 { row_len } else { 256.min(row_len.max(1)) };
        let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
        out.par_chunks_mut(seg).enumerate().for_each(|(c, chunk)| {
            let flat0 = c * seg;
            let row = flat0 / row_len;
            let start = flat0 % row_len;
            let end = start + chunk.len();
            // Coordinates of this row on the leading axes.
            let idx = grid.index(row * row_len);
            let mut x = Point::<D>::from_fn(|k, _| grid.axes[k].node(idx[k]));
            let perp2: f64 = (0..last).map(|k| x[k] * x[k]).sum();
            let (mut lo, mut hi) = (start as isize, end as isize - 1);
            if let Some(r) = clip {
                if perp2 > r * r {
                    return;
                }
                let w = (r * r - perp2).sqrt();
                lo = lo.max(((-w - ax.lo) / ax.h).ceil() as isize);
                hi = hi.min(((w - ax.lo) / ax.h).floor() as isize);
            }
            if lo > hi {
                return;
            }
            for b in &self.beams {
                let dp2: f64 = (0..last).map(|k| (x[k] - b.q[k]).powi(2)).sum();
                let r2 = b.radius * b.radius;
                if dp2 > r2 {
                    continue;
                }
                let w = if b.radius.is_finite() { (r2 - dp2).sqrt() } else { f64::INFINITY };
                let k0 = lo.max(((b.q[last] - w - ax.lo) / ax.h).ceil().max(-1.0) as isize);
                let k1 = hi.min(((b.q[last] + w - ax.lo) / ax.h).floor().min(row_len as f64) as isize);
                if k0 > k1 {
                    continue;
                }
                x[last] = ax.node(k0 as usize);
                let mut d = x - b.q;
                let mll = b.m[(last, last)];
                let g_last = b.p[last]
                    + (0..D).map(|k| b.m[(last, k)] * d[k]).sum::<Complex64>();
                let mut e = (I * b.phase(&d) / eps).exp();
                let mut r = (I * (g_last * ax.h + mll * (0.5 * ax.h * ax.h)) / eps).exp();
                let s = (I * mll * (ax.h * ax.h) / eps).exp();
                let simple = !time && sp == Spatial::Zero && self.cutoff.eta.is_none();
                let amp = b.amp;
                for k in k0..=k1 {
                    let f = if simple {
                        amp
                    } else {
                        d[last] = ax.node(k as usize) - b.q[last];
                        b.factor(time, sp, &d, eps, &self.cutoff)
                    };
                    chunk[k as usize - start] += f * e;
                    e *= r;
                    r *= s;
                }
            }
        });
        out
    }
}

/// Everything needed to evaluate the superposed field of a beam fan.
#[derive(Clone)]
pub struct FieldSpec<const D: usize> {
    pub fan: Arc<BeamFan<D>>,
    pub cutoff: CutoffSpec,
    pub epsilon: f64,
    pub modes: Vec<Mode>,
}

impl<const D: usize> FieldSpec<D> {
    pub fn new(fan: Arc<BeamFan<D>>, cutoff: CutoffSpec, epsilon: f64, modes: &[Mode]) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(GbError::InvalidArgument(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        if let Some(m) = modes.iter().find(|m| !fan.modes.contains(m)) {
            return Err(GbError::InvalidArgument(format!("mode {} was not propagated in this fan", m.label())));
        }
        let mut modes = modes.to_vec();
        modes.sort();
        modes.dedup();
        Ok(Self {
            fan,
            cutoff,
            epsilon,
            modes,
        })
    }

    /// Same fan restricted to a subset of modes.
    pub fn with_modes(&self, modes: &[Mode]) -> Result<Self> {
        Self::new(self.fan.clone(), self.cutoff, self.epsilon, modes)
    }

    pub fn with_cutoff(&self, cutoff: CutoffSpec) -> Self {
        Self {
            cutoff,
            ..self.clone()
        }
    }

    /// Superposition prefactor (2 pi eps)^{-n/2}.
    pub fn normalization(&self) -> f64 {
        (2.0 * PI * self.epsilon).powf(-(D as f64) / 2.0)
    }

    pub fn slice(&self, t: f64) -> Result<FieldSlice<D>> {
        let fan = &self.fan;
        if !(t >= 0.0 && t <= fan.t_end * (1.0 + 1e-12)) {
            return Err(GbError::InvalidArgument(format!(
                "t = {t} outside the propagated interval [0, {}]",
                fan.t_end
            )));
        }
        let norm = self.normalization();
        let eps = self.epsilon;
        let cut_r = self.cutoff.support_radius();
        let beams = fan
            .beams
            .iter()
            .filter(|b| self.modes.contains(&b.trajectory.mode))
            .map(|b| {
                let s = b.trajectory.state_at(t);
                let r = ode_rhs(&s, &fan.medium, &fan.y)?;
                let delta = 0.5 * s.min_imag_eigenvalue();
                let radius = if delta > 0.0 {
                    BEAM_RADIUS_SIGMAS * (eps / delta).sqrt()
                } else {
                    f64::INFINITY
                };
                let c = b.weight * norm;
                Ok(BeamSlice {
                    phi0: s.phi0,
                    q: s.q,
                    p: s.p,
                    m: s.m,
                    amp: s.a * c,
                    phi0_dot: r.phi0,
                    q_dot: r.q,
                    p_dot: r.p,
                    m_dot: r.m,
                    amp_dot: r.a * c,
                    radius: radius.min(cut_r),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FieldSlice {
            t,
            epsilon: eps,
            cutoff: self.cutoff,
            beams,
        })
    }

    pub fn eval_field(&self, t: f64, x: &Point<D>) -> Result<Complex64> {
        Ok(self.slice(t)?.eval_point(false, Spatial::Zero, x))
    }

    fn time_step(&self) -> f64 {
        self.epsilon * TIME_FD_FRACTION
    }

    /// True when the time derivative has to be taken by finite differences.
    fn needs_time_fd(&self, ord: &DerivativeOrder, sp: Spatial) -> bool {
        ord.p >= 2 || (ord.p == 1 && sp != Spatial::Zero && self.cutoff.eta.is_some())
    }

    /// Evaluates `f` on the slices needed for eps^p d_t^p and combines them.
    fn combine_in_time(
        &self,
        ord: &DerivativeOrder,
        sp: Spatial,
        t: f64,
        f: &(dyn Fn(&FieldSlice<D>, bool) -> Vec<Complex64> + Sync),
    ) -> Result<Vec<Complex64>> {
        if !self.needs_time_fd(ord, sp) {
            return Ok(f(&self.slice(t)?, ord.p == 1));
        }
        let h = self.time_step();
        let (lower, scale, offsets): (DerivativeOrder, f64, Vec<(f64, f64)>) = if ord.p == 1 {
            // eps d_t f ~ eps (f(t+h) - f(t-h)) / 2h
            (ord.with_p(0), self.epsilon / (2.0 * h), vec![(1.0, 1.0), (-1.0, -1.0)])
        } else {
            let e2 = self.epsilon * self.epsilon / (h * h);
            (ord.with_p(ord.p - 2), e2, vec![(1.0, 1.0), (0.0, -2.0), (-1.0, 1.0)])
        };
        let mut acc: Option<Vec<Complex64>> = None;
        for (off, c) in offsets {
            let v = self.combine_in_time(&lower, sp, t + off * h, f)?;
            match acc.as_mut() {
                None => acc = Some(v.into_iter().map(|z| z * c).collect()),
                Some(a) => a.iter_mut().zip(v).for_each(|(a, z)| *a += z * c),
            }
        }
        Ok(acc.unwrap().into_iter().map(|z| z * scale).collect())
    }

    /// eps^{p+|alpha|} d_t^p d_x^alpha u at (t, x).
    pub fn eval_scaled_derivative(&self, ord: &DerivativeOrder, t: f64, x: &Point<D>) -> Result<Complex64> {
        let sp = ord.spatial(D)?;
        let x = *x;
        let v = self.combine_in_time(ord, sp, t, &|s, time| vec![s.eval_point(time, sp, &x)])?;
        Ok(v[0])
    }

    /// Scaled derivative on every node of `grid` (zero outside `clip`).
    pub fn eval_grid(
        &self,
        ord: &DerivativeOrder,
        t: f64,
        grid: &UniformGrid<D>,
        clip: Option<f64>,
    ) -> Result<Vec<Complex64>> {
        let sp = ord.spatial(D)?;
        self.combine_in_time(ord, sp, t, &|s, time| s.eval_grid(time, sp, grid, clip))
    }

    /// Time range over which beams are available.
    pub fn time_range(&self) -> (f64, f64) {
        (0.0, self.fan.t_end)
    }
}

/// Field values on a grid: (x, u) pairs for snapshot export.
pub fn snapshot<const D: usize>(fs: &FieldSpec<D>, t: f64, grid: &UniformGrid<D>) -> Result<Vec<(Point<D>, Complex64)>> {
    let u = fs.eval_grid(&DerivativeOrder::zero(D), t, grid, None)?;
    Ok(u.into_iter().enumerate().map(|(i, v)| (grid.point(i), v)).collect())
}
